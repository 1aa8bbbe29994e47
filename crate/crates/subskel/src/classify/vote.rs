//! Weighted k-NN voting.

use crate::error::{Error, Result};

/// Weighted vote over exactly `k` (label, distance) neighbors.
///
/// With `d̄` the smallest distance, each label weighs `Σ d̄/dᵢ` over its
/// neighbors; the heaviest label wins. Ties break by the smallest single
/// constituent distance, then lexicographically.
///
/// When `d̄ = 0` only the zero-distance neighbors vote, one weight unit each;
/// a count tie falls back to the weight the remaining neighbors would
/// contribute with the smallest positive distance as `d̄`, so a label backed
/// by more evidence still wins.
///
/// Returns the winner and the weights, heaviest first.
pub fn knn_weighted_vote(
    neighbors: &[(String, f64)],
    k: usize,
) -> Result<(String, Vec<(String, f64)>)> {
    weighted_vote_with_dbar(neighbors, k, None)
}

/// Same vote with an externally supplied `d̄` (the global-minimum variant of
/// the multi-feature classifier).
pub(crate) fn weighted_vote_with_dbar(
    neighbors: &[(String, f64)],
    k: usize,
    dbar_override: Option<f64>,
) -> Result<(String, Vec<(String, f64)>)> {
    if neighbors.is_empty() {
        return Err(Error::InvalidConfig("empty neighbor list".into()));
    }
    if neighbors.len() != k {
        return Err(Error::InvalidConfig(format!(
            "expected exactly {k} neighbors, got {}",
            neighbors.len()
        )));
    }
    if neighbors.iter().any(|(_, d)| !d.is_finite() || *d < 0.0) {
        return Err(Error::InvalidData("negative or non-finite neighbor distance".into()));
    }

    let local_min = neighbors.iter().map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
    let dbar = dbar_override.unwrap_or(local_min).min(local_min);

    // Per label: (primary weight, secondary weight, min constituent distance)
    let mut tally: Vec<(String, f64, f64, f64)> = Vec::new();
    fn entry(tally: &mut Vec<(String, f64, f64, f64)>, label: &str) -> usize {
        if let Some(i) = tally.iter().position(|(l, ..)| l == label) {
            i
        } else {
            tally.push((label.to_string(), 0.0, 0.0, f64::INFINITY));
            tally.len() - 1
        }
    }

    if dbar == 0.0 {
        let min_positive = neighbors
            .iter()
            .map(|(_, d)| *d)
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min);
        for (label, d) in neighbors {
            let i = entry(&mut tally, label);
            if *d == 0.0 {
                tally[i].1 += 1.0;
            } else if min_positive.is_finite() {
                tally[i].2 += min_positive / d;
            }
            tally[i].3 = tally[i].3.min(*d);
        }
        // Labels without any zero-distance neighbor do not vote.
        tally.retain(|(_, primary, ..)| *primary > 0.0);
    } else {
        for (label, d) in neighbors {
            let i = entry(&mut tally, label);
            tally[i].1 += dbar / d;
            tally[i].3 = tally[i].3.min(*d);
        }
    }

    tally.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then(b.2.partial_cmp(&a.2).unwrap())
            .then(a.3.partial_cmp(&b.3).unwrap())
            .then(a.0.cmp(&b.0))
    });
    let winner = tally[0].0.clone();
    let weights = tally.into_iter().map(|(l, w, ..)| (l, w)).collect();
    Ok((winner, weights))
}

/// Majority vote over per-feature winners. Ties break by the largest summed
/// weight of the tied label across all features, then lexicographically.
pub fn majority_vote(winners: &[String], weights_per_group: &[Vec<(String, f64)>]) -> String {
    let mut counts: Vec<(String, usize)> = Vec::new();
    for w in winners {
        match counts.iter_mut().find(|(l, _)| l == w) {
            Some((_, c)) => *c += 1,
            None => counts.push((w.clone(), 1)),
        }
    }
    let summed = |label: &str| -> f64 {
        weights_per_group
            .iter()
            .flat_map(|ws| ws.iter())
            .filter(|(l, _)| l == label)
            .map(|(_, w)| w)
            .sum()
    };
    counts.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| summed(&b.0).partial_cmp(&summed(&a.0)).unwrap())
            .then_with(|| a.0.cmp(&b.0))
    });
    counts[0].0.clone()
}
