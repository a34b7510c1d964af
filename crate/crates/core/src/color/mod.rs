//! Unsupervised color clustering of region pixels and translation of cluster
//! centers into color names.
//!
//! Clustering is k-means in RGB space over the region's distinct colors
//! (weighted by multiplicity). Small clusters are treated as outliers, such as
//! a shadow line across a shirt, and folded into their nearest surviving
//! neighbor so no pixel is lost.

mod palette;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frame::Rgb;
use crate::regions::{PixelRegion, Section};
use crate::scalar::Real;

pub use palette::{
    name_color, ColorDictionary, PaletteError, PaletteKind, PaletteSet, HAIR_OTHER_DISTANCE, OTHER_COLOR,
    PALETTE_HEADER,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ColorError {
    #[error("region has no pixels")]
    EmptyRegion,
    #[error("k = {k} exceeds the region's {pixels} pixels")]
    KTooLarge { k: usize, pixels: usize },
    #[error("k must be at least 1")]
    ZeroK,
}

/// A neighborhood center in RGB space and the number of pixels it holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorCluster<T> {
    pub centroid: [T; 3],
    pub member_count: usize,
    pub section: Section,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    /// Clusters holding less than this fraction of the region are outliers.
    pub outlier_fraction: f64,
    pub max_iterations: usize,
    /// Iteration stops once no center moves more than this on any channel.
    pub tolerance: f64,
    /// Independent seedings; the lowest-inertia run wins.
    pub restarts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self { outlier_fraction: 0.02, max_iterations: 100, tolerance: 0.5, restarts: 3 }
    }
}

/// Clusters a region's pixels into at most `k` colors with default parameters.
pub fn cluster_pixels<T: Real>(region: &PixelRegion, k: usize, seed: u64) -> Result<Vec<ColorCluster<T>>, ColorError> {
    cluster_colors(&region.pixels, region.section, k, seed, &ClusterParams::default())
}

/// Distinct colors with multiplicities, in ascending RGB order.
struct Histogram<T> {
    colors: Vec<[T; 3]>,
    raw: Vec<Rgb>,
    weights: Vec<u64>,
}

impl<T: Real> Histogram<T> {
    fn new(pixels: &[Rgb]) -> Self {
        let mut counts: BTreeMap<Rgb, u64> = BTreeMap::new();
        for &p in pixels {
            *counts.entry(p).or_default() += 1;
        }
        let raw: Vec<Rgb> = counts.keys().copied().collect();
        let colors = raw.iter().map(|c| c.map(|v| T::lit(f64::from(v)))).collect();
        Self { colors, raw, weights: counts.into_values().collect() }
    }

    fn len(&self) -> usize {
        self.colors.len()
    }
}

fn dist2<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}

fn nearest<T: Real>(color: &[T; 3], centers: &[[T; 3]]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (i, c) in centers.iter().enumerate() {
        let d = dist2(color, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Exact per-label means and counts from integer channel sums.
fn means<T: Real>(hist: &Histogram<T>, labels: &[usize], k: usize) -> Vec<Option<([T; 3], u64)>> {
    let mut sums = vec![[0u64; 3]; k];
    let mut counts = vec![0u64; k];
    for ((raw, &w), &l) in hist.raw.iter().zip(&hist.weights).zip(labels) {
        for c in 0..3 {
            sums[l][c] += u64::from(raw[c]) * w;
        }
        counts[l] += w;
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, n)| {
            (n > 0).then(|| (s.map(|v| T::lit(v as f64) / T::lit(n as f64)), n))
        })
        .collect()
}

fn weighted_pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return Some(i);
        }
        target -= w;
    }
    weights.iter().rposition(|&w| w > 0.0)
}

/// Greedy k-means++ seeding: each new center is the best of a few D²-weighted draws.
fn seed_centers<T: Real>(hist: &Histogram<T>, k: usize, rng: &mut ChaCha8Rng) -> Vec<[T; 3]> {
    let w: Vec<f64> = hist.weights.iter().map(|&w| w as f64).collect();
    let first = weighted_pick(rng, &w).unwrap_or(0);
    let mut centers = vec![hist.colors[first]];
    let mut closest: Vec<f64> = hist.colors.iter().map(|c| dist2(c, &centers[0]).to_f64_lossy()).collect();
    let trials = 2 + (k as f64).ln().floor() as usize;
    while centers.len() < k {
        let potential: Vec<f64> = closest.iter().zip(&w).map(|(d, w)| d * w).collect();
        let mut best: Option<(usize, f64)> = None;
        for _ in 0..trials {
            let Some(cand) = weighted_pick(rng, &potential) else { break };
            let pot: f64 = hist
                .colors
                .iter()
                .zip(&closest)
                .zip(&w)
                .map(|((c, d), w)| d.min(dist2(c, &hist.colors[cand]).to_f64_lossy()) * w)
                .sum();
            if best.is_none_or(|(_, p)| pot < p) {
                best = Some((cand, pot));
            }
        }
        // every color already coincides with a center: duplicate one, it ends up empty
        let pick = best.map_or(0, |(i, _)| i);
        let center = hist.colors[pick];
        for (d, c) in closest.iter_mut().zip(&hist.colors) {
            *d = d.min(dist2(c, &center).to_f64_lossy());
        }
        centers.push(center);
    }
    centers
}

struct Run<T> {
    centers: Vec<[T; 3]>,
    inertia: f64,
}

fn lloyd<T: Real>(hist: &Histogram<T>, mut centers: Vec<[T; 3]>, params: &ClusterParams) -> Run<T> {
    let k = centers.len();
    let tol = T::lit(params.tolerance);
    for _ in 0..params.max_iterations {
        let labels: Vec<usize> = hist.colors.iter().map(|c| nearest(c, &centers).0).collect();
        let mut movement = T::zero();
        for (center, m) in centers.iter_mut().zip(means(hist, &labels, k)) {
            if let Some((mean, _)) = m {
                for c in 0..3 {
                    movement = movement.max((mean[c] - center[c]).abs());
                }
                *center = mean;
            }
        }
        if movement < tol {
            break;
        }
    }
    let inertia = hist
        .colors
        .iter()
        .zip(&hist.weights)
        .map(|(c, &w)| nearest(c, &centers).1.to_f64_lossy() * w as f64)
        .sum();
    Run { centers, inertia }
}

/// Full clustering entry point over raw pixels.
///
/// Returned clusters are sorted by descending member count; each centroid is
/// the exact mean of its members and the counts sum to `pixels.len()`.
pub fn cluster_colors<T: Real>(
    pixels: &[Rgb],
    section: Section,
    k: usize,
    seed: u64,
    params: &ClusterParams,
) -> Result<Vec<ColorCluster<T>>, ColorError> {
    if pixels.is_empty() {
        return Err(ColorError::EmptyRegion);
    }
    if k == 0 {
        return Err(ColorError::ZeroK);
    }
    if k > pixels.len() {
        return Err(ColorError::KTooLarge { k, pixels: pixels.len() });
    }
    let hist = Histogram::<T>::new(pixels);

    let mut best: Option<Run<T>> = None;
    for restart in 0..params.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let centers = seed_centers(&hist, k.min(hist.len()), &mut rng);
        let run = lloyd(&hist, centers, params);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let centers = best.expect("at least one restart").centers;

    let labels: Vec<usize> = hist.colors.iter().map(|c| nearest(c, &centers).0).collect();
    let stats = means(&hist, &labels, centers.len());
    let total = pixels.len() as f64;
    let mut surviving: Vec<usize> = stats
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.filter(|(_, n)| *n as f64 >= params.outlier_fraction * total).map(|_| i))
        .collect();
    if surviving.is_empty() {
        let largest = (0..stats.len()).max_by_key(|&i| (stats[i].map_or(0, |s| s.1), std::cmp::Reverse(i)));
        surviving.push(largest.expect("non-empty histogram"));
    }

    let kept: Vec<[T; 3]> = surviving.iter().map(|&i| stats[i].expect("surviving cluster").0).collect();
    let labels: Vec<usize> = labels
        .iter()
        .zip(&hist.colors)
        .map(|(&l, c)| match surviving.iter().position(|&s| s == l) {
            Some(pos) => pos,
            None => nearest(c, &kept).0,
        })
        .collect();
    let mut clusters: Vec<ColorCluster<T>> = means(&hist, &labels, kept.len())
        .into_iter()
        .flatten()
        .map(|(centroid, n)| ColorCluster { centroid, member_count: n as usize, section })
        .collect();
    clusters.sort_by(|a, b| {
        b.member_count.cmp(&a.member_count).then_with(|| {
            a.centroid
                .iter()
                .zip(&b.centroid)
                .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    Ok(clusters)
}

/// Color names found in a region with their pixel counts, most common first.
pub type ColorCounts = Vec<(String, usize)>;

/// Clusters a region and names each cluster with the palette for its section.
///
/// Face and hair always use a single neighborhood. Clusters that map to the
/// same name are merged.
pub fn describe_region(
    region: &PixelRegion,
    k: usize,
    palettes: &PaletteSet,
    seed: u64,
) -> Result<ColorCounts, ColorError> {
    let k = match region.section {
        Section::Face | Section::Hair => 1,
        _ => k,
    };
    let clusters = cluster_pixels::<f64>(region, k, seed)?;
    let dict = palettes.for_section(region.section);
    let mut merged: Vec<(String, usize)> = Vec::new();
    for cluster in clusters {
        let name = name_color(cluster.centroid, dict);
        match merged.iter_mut().find(|(n, _)| n == name) {
            Some(entry) => entry.1 += cluster.member_count,
            None => merged.push((name.to_string(), cluster.member_count)),
        }
    }
    merged.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::{BoundingBox, PersonRef};

    fn region(section: Section, pixels: Vec<Rgb>) -> PixelRegion {
        PixelRegion {
            section,
            pixels,
            source: PersonRef { camera_id: "cam1".into(), sequence: 0, person_index: 0 },
            bbox: BoundingBox { min_x: 0, min_y: 0, max_x: 0, max_y: 0 },
        }
    }

    #[test]
    fn constant_input_single_cluster() {
        let r = region(Section::Torso, vec![[100, 0, 0]; 500]);
        let c = cluster_pixels::<f64>(&r, 1, 7).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].centroid, [100.0, 0.0, 0.0]);
        assert_eq!(c[0].member_count, 500);
    }

    #[test]
    fn two_pixel_mean() {
        let r = region(Section::Torso, vec![[0, 0, 0], [10, 10, 10]]);
        let c = cluster_pixels::<f64>(&r, 1, 0).unwrap();
        assert_eq!(c[0].centroid, [5.0, 5.0, 5.0]);
    }

    #[test]
    fn black_and_light_grey_split() {
        // Brute force over 2-partitions of the two distinct colors: the only
        // partition with zero within-cluster variance separates them.
        let mut px = vec![[0, 0, 0]; 100];
        px.extend(vec![[200, 200, 200]; 100]);
        let c = cluster_pixels::<f64>(&region(Section::Torso, px), 2, 3).unwrap();
        let mut centroids: Vec<[f64; 3]> = c.iter().map(|c| c.centroid).collect();
        centroids.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert_eq!(centroids, vec![[0.0; 3], [200.0; 3]]);
        assert!(c.iter().all(|c| c.member_count == 100));
    }

    #[test]
    fn outliers_are_reassigned() {
        // 1% shadow pixels: their cluster is dropped and folded into the nearest survivor
        let mut px = vec![[200, 0, 0]; 495];
        px.extend(vec![[20, 20, 20]; 5]);
        let c = cluster_pixels::<f64>(&region(Section::Torso, px), 2, 1).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].member_count, 500);
        assert!((c[0].centroid[0] - (495.0 * 200.0 + 5.0 * 20.0) / 500.0).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert_eq!(cluster_pixels::<f64>(&region(Section::Torso, vec![]), 1, 0), Err(ColorError::EmptyRegion));
        assert_eq!(
            cluster_pixels::<f64>(&region(Section::Torso, vec![[1, 1, 1]; 3]), 4, 0),
            Err(ColorError::KTooLarge { k: 4, pixels: 3 })
        );
        assert_eq!(cluster_pixels::<f64>(&region(Section::Torso, vec![[1, 1, 1]]), 0, 0), Err(ColorError::ZeroK));
    }

    #[test]
    fn k_above_distinct_colors_drops_empty_clusters() {
        let c = cluster_pixels::<f64>(&region(Section::Torso, vec![[9, 9, 9]; 10]), 3, 0).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].member_count, 10);
    }

    #[test]
    fn f32_clusters() {
        let c = cluster_pixels::<f32>(&region(Section::Torso, vec![[0, 0, 0], [10, 10, 10]]), 1, 0).unwrap();
        assert_eq!(c[0].centroid, [5.0_f32; 3]);
    }

    #[test]
    fn describe_examples() {
        let palettes = PaletteSet::default();
        let shirt = region(Section::Torso, vec![[128, 128, 128]; 300]);
        assert_eq!(describe_region(&shirt, 1, &palettes, 0).unwrap(), vec![("grey".to_string(), 300)]);
        // (230,210,200) is ~11 from the light skin anchor and ~257 from the dark one
        let face = region(Section::Face, vec![[230, 210, 200]; 40]);
        assert_eq!(describe_region(&face, 3, &palettes, 0).unwrap(), vec![("white".to_string(), 40)]);
        assert_eq!(describe_region(&region(Section::Hair, vec![]), 1, &palettes, 0), Err(ColorError::EmptyRegion));
    }

    #[test]
    fn describe_merges_same_names() {
        let mut px = vec![[250, 5, 5]; 100];
        px.extend(vec![[240, 10, 0]; 100]);
        let r = region(Section::Torso, px);
        assert_eq!(describe_region(&r, 2, &PaletteSet::default(), 0).unwrap(), vec![("red".to_string(), 200)]);
    }
}
