use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::StatsError;
use crate::analysis::Finding;

/// Indices of a stratified uniform sample without replacement, ascending.
///
/// Strata get proportional quotas; the remainder goes to the largest
/// fractional parts, ties to the smaller stratum key.
pub fn stratified_sample<T, K: Ord>(
    population: &[T],
    size: usize,
    seed: u64,
    stratum: impl Fn(&T) -> K,
) -> Result<Vec<usize>, StatsError> {
    if size > population.len() {
        return Err(StatsError::Domain(format!(
            "sample size {size} exceeds population {}",
            population.len()
        )));
    }
    let mut strata: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, item) in population.iter().enumerate() {
        strata.entry(stratum(item)).or_default().push(i);
    }
    let total = population.len();
    let mut quotas: Vec<(usize, usize)> = strata
        .values()
        .map(|members| {
            let exact = size * members.len();
            (exact / total.max(1), exact % total.max(1))
        })
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.0).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].1.cmp(&quotas[a].1).then(a.cmp(&b)));
    for &i in order.iter().take(size - assigned) {
        quotas[i].0 += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(size);
    for (members, (quota, _)) in strata.values().zip(quotas) {
        picked.extend(index::sample(&mut rng, members.len(), quota).into_iter().map(|j| members[j]));
    }
    picked.sort_unstable();
    Ok(picked)
}

/// Findings sampled for manual validation, stratified by tool.
pub fn sample_validation_subset(findings: &[Finding], size: usize, seed: u64) -> Result<Vec<Finding>, StatsError> {
    let picked = stratified_sample(findings, size, seed, |f| f.tool())?;
    Ok(picked.into_iter().map(|i| findings[i].clone()).collect())
}
