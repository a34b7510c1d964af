//! Minimum within-cluster variance partition by enumerating assignments.

use std::collections::{BTreeMap, BTreeSet};

use ivise_core::Rgb;

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePartition {
    /// Each cluster's distinct colors.
    pub groups: BTreeSet<BTreeSet<Rgb>>,
    /// Mean and pixel count per cluster, ordered by descending count then mean.
    pub clusters: Vec<([f64; 3], usize)>,
    pub sse: f64,
}

/// Tries every assignment of the distinct colors in `pixels` to `k`
/// non-empty clusters and keeps the lowest weighted sum of squared errors.
/// Intended for at most a dozen or so distinct colors.
pub fn min_variance_partition(pixels: &[Rgb], k: usize) -> Option<OraclePartition> {
    let mut hist: BTreeMap<Rgb, usize> = BTreeMap::new();
    for &p in pixels {
        *hist.entry(p).or_default() += 1;
    }
    let colors: Vec<(Rgb, usize)> = hist.into_iter().collect();
    if k == 0 || colors.len() < k {
        return None;
    }
    let d = colors.len();
    let total = (k as u64).checked_pow(d as u32)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut labels = vec![0usize; d];
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = (c % k as u64) as usize;
            c /= k as u64;
        }
        // first color always in cluster 0 to skip relabelings
        if labels[0] != 0 {
            continue;
        }
        let Some(sse) = sse_of(&colors, &labels, k) else { continue };
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, labels.clone()));
        }
    }
    let (sse, labels) = best?;
    let mut groups = BTreeSet::new();
    let mut clusters = Vec::new();
    for g in 0..k {
        let members: Vec<&(Rgb, usize)> = colors.iter().zip(&labels).filter(|(_, &l)| l == g).map(|(c, _)| c).collect();
        groups.insert(members.iter().map(|(c, _)| *c).collect::<BTreeSet<Rgb>>());
        let (mean, n) = mean_of(&members);
        clusters.push((mean, n));
    }
    clusters.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.partial_cmp(&b.0).unwrap()));
    Some(OraclePartition { groups, clusters, sse })
}

fn mean_of(members: &[&(Rgb, usize)]) -> ([f64; 3], usize) {
    let n: usize = members.iter().map(|(_, w)| w).sum();
    let mut sum = [0u64; 3];
    for (c, w) in members {
        for ch in 0..3 {
            sum[ch] += u64::from(c[ch]) * *w as u64;
        }
    }
    (sum.map(|s| s as f64 / n as f64), n)
}

fn sse_of(colors: &[(Rgb, usize)], labels: &[usize], k: usize) -> Option<f64> {
    let mut sse = 0.0;
    for g in 0..k {
        let members: Vec<&(Rgb, usize)> = colors.iter().zip(labels).filter(|(_, &l)| l == g).map(|(c, _)| c).collect();
        if members.is_empty() {
            return None;
        }
        let (mean, _) = mean_of(&members);
        for (c, w) in members {
            let d2: f64 = (0..3).map(|ch| (f64::from(c[ch]) - mean[ch]).powi(2)).sum();
            sse += d2 * *w as f64;
        }
    }
    Some(sse)
}
