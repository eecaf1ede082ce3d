"""Rebuilds the local hub from charts/: deterministic archives, rendered
manifests and index.json. Run from this directory."""

import gzip
import io
import json
import os
import tarfile

CHARTS = [
    # (repository, chart dir, version, stars)
    ("stable", "busybox", "1.0.0", 120),
    ("stable", "web", "2.1.0", 80),
    ("infra", "ops", "0.3.1", 40),
    ("infra", "broken", "0.1.0", 10),
    ("mirror", "busybox", "1.0.0", 5),
]


def archive(name):
    raw = io.BytesIO()
    with tarfile.open(fileobj=raw, mode="w", format=tarfile.USTAR_FORMAT) as tar:
        root = os.path.join("charts", name)
        for dirpath, dirnames, filenames in os.walk(root):
            dirnames.sort()
            for f in sorted(filenames):
                path = os.path.join(dirpath, f)
                data = open(path, "rb").read()
                info = tarfile.TarInfo(name + "/" + os.path.relpath(path, root))
                info.size = len(data)
                info.mtime = 0
                info.mode = 0o644
                tar.addfile(info, io.BytesIO(data))
    out = io.BytesIO()
    with gzip.GzipFile(fileobj=out, mode="wb", mtime=0, filename="") as gz:
        gz.write(raw.getvalue())
    return out.getvalue()


def rendered(name):
    docs = []
    tdir = os.path.join("charts", name, "templates")
    for f in sorted(os.listdir(tdir)):
        body = open(os.path.join(tdir, f)).read()
        docs.append("---\n# Source: %s/templates/%s\n%s" % (name, f, body))
    return "".join(docs)


packages = []
for repo, name, version, stars in CHARTS:
    os.makedirs(repo, exist_ok=True)
    base = os.path.join(repo, "%s-%s" % (name, version))
    open(base + ".tgz", "wb").write(archive(name))
    open(base + ".rendered.yaml", "w").write(rendered(name))
    packages.append({
        "package_id": "%s-%s" % (repo, name),
        "name": name,
        "version": version,
        "stars": stars,
        "repository": {"name": repo},
    })

with open("index.json", "w") as f:
    json.dump({"packages": packages}, f, indent=2)
    f.write("\n")
