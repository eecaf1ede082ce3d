//! Replaces one document of a multi-document manifest and shows that every
//! other byte is untouched.

use chart_sentry::manifest::{diff_resource, locate_resource, parse_manifests, splice_resource, ResourceDoc, ResourceId};

const MANIFEST: &str = "# rendered by helm
apiVersion: v1
kind: ConfigMap
metadata:
  name: settings
data:
  mode: fast
---
apiVersion: v1
kind: Pod
metadata:
  name: app
  namespace: shop
spec:
  containers:
  - name: app
    image: nginx:1.25.3
---
apiVersion: v1
kind: Service
metadata:
  name: app
  namespace: shop
";

fn main() -> anyhow::Result<()> {
    let set = parse_manifests(MANIFEST);
    let id = ResourceId::new("v1", "Pod", "app", "shop");
    let original = locate_resource(&set, &id)?;
    let fixed = ResourceDoc::from_text(&original.raw_text.replace(
        "    image: nginx:1.25.3\n",
        "    image: nginx:1.25.3\n    securityContext:\n      allowPrivilegeEscalation: false\n",
    ))?;
    println!("{}", diff_resource(original, &fixed).unified_text);
    let patched = splice_resource(&set, &id, &fixed)?;
    let start = original.span.start;
    assert_eq!(&patched.source_text()[..start], &MANIFEST[..start]);
    assert!(patched.source_text().ends_with(&MANIFEST[original.span.end..]));
    println!("{}", patched.source_text());
    Ok(())
}
