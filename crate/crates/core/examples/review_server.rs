//! Serves the labeling UI for a scanned run directory.
//!
//! cargo run --example review_server -- <run-dir> [127.0.0.1:8080] [--blind]

use chart_sentry::orchestrator::{serve_review, ReviewOptions};

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let run_dir = args.first().ok_or_else(|| anyhow::anyhow!("usage: review_server <run-dir> [addr] [--blind]"))?;
    let addr = args.get(1).filter(|a| !a.starts_with("--")).map_or("127.0.0.1:8080", String::as_str).parse()?;
    let blind = args.iter().any(|a| a == "--blind");
    serve_review(run_dir.into(), addr, ReviewOptions { blind })?;
    Ok(())
}
