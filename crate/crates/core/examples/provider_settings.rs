//! Loads a provider settings file and sends one prompt. Remote providers
//! read their API key from the environment variable named in the settings.
//!
//! cargo run --example provider_settings -- providers.toml gemini

use chart_sentry::remediation::provider::{provider_from_id, ProviderSettings};
use chart_sentry::remediation::{query_provider, QueryParams, RetryPolicy};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let settings = match args.first() {
        Some(path) => ProviderSettings::load(path.as_ref())?,
        None => ProviderSettings::default(),
    };
    let id = args.get(1).map_or("mock:echo", String::as_str);
    let provider = provider_from_id(id, &settings)?;
    let prompt = "Refactor the following Pod K8s resource to ensure each container has a configured memory request. Output only the refactored YAML file.\n\napiVersion: v1\nkind: Pod\nmetadata:\n  name: p\nspec:\n  containers:\n  - name: c\n    image: busybox:1.36\n";
    let answer = query_provider(provider.as_ref(), prompt, &QueryParams::default(), RetryPolicy::default(), None)?;
    println!("{} ({}):\n{answer}", provider.id(), provider.model());
    Ok(())
}
