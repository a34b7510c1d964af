#![allow(clippy::needless_range_loop)]

use ivise_core::color::{cluster_colors, name_color, ClusterParams, ColorDictionary, PaletteSet};
use ivise_core::{Rgb, Section};
use ivise_oracles::clustering::min_variance_partition;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pixels() -> impl Strategy<Value = Vec<Rgb>> {
    prop::collection::vec(any::<[u8; 3]>(), 1..400)
}

proptest! {
    #[test]
    fn single_cluster_is_the_exact_mean(px in pixels(), seed in any::<u64>()) {
        let c = cluster_colors::<f64>(&px, Section::Torso, 1, seed, &ClusterParams::default()).unwrap();
        prop_assert_eq!(c.len(), 1);
        for ch in 0..3 {
            let mean = px.iter().map(|p| f64::from(p[ch])).sum::<f64>() / px.len() as f64;
            prop_assert!((c[0].centroid[ch] - mean).abs() <= 1e-6);
        }
    }

    #[test]
    fn member_counts_conserve_pixels(px in pixels(), k in 1usize..6, seed in any::<u64>()) {
        let k = k.min(px.len());
        let c = cluster_colors::<f64>(&px, Section::Torso, k, seed, &ClusterParams::default()).unwrap();
        prop_assert!(!c.is_empty() && c.len() <= k);
        prop_assert_eq!(c.iter().map(|c| c.member_count).sum::<usize>(), px.len());
        for w in c.windows(2) {
            prop_assert!(w[0].member_count >= w[1].member_count);
        }
    }

    #[test]
    fn equal_seeds_give_equal_clusters(px in pixels(), k in 1usize..5, seed in any::<u64>()) {
        let k = k.min(px.len());
        let a = cluster_colors::<f64>(&px, Section::Torso, k, seed, &ClusterParams::default()).unwrap();
        let b = cluster_colors::<f64>(&px, Section::Torso, k, seed, &ClusterParams::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn hair_names_are_anchors_or_other(c in any::<[u8; 3]>()) {
        let hair = ColorDictionary::hair();
        let name = name_color(c.map(f64::from), &hair);
        prop_assert!(hair.contains(name));
    }
}

/// `k` tight blobs (a few distinct shades each) at well-separated centers.
fn blobs(rng: &mut ChaCha8Rng, k: usize) -> Vec<Rgb> {
    let centers: [Rgb; 3] = [[40, 40, 40], [220, 60, 60], [60, 200, 220]];
    let mut px = Vec::new();
    for center in centers.iter().take(k) {
        let shades = rng.random_range(2..=4);
        for _ in 0..shades {
            let shade = center.map(|c| c.saturating_add_signed(rng.random_range(-6i8..=6)));
            let n = rng.random_range(5..=200 / (k * 4));
            px.extend(std::iter::repeat_n(shade, n));
        }
    }
    px
}

#[test]
fn well_separated_blobs_match_the_min_variance_partition() {
    for trial in 0..60u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let k = 2 + (trial % 2) as usize;
        let px = blobs(&mut rng, k);
        assert!(px.len() <= 200);
        let got = cluster_colors::<f64>(&px, Section::Torso, k, trial, &ClusterParams::default()).unwrap();
        let want = min_variance_partition(&px, k).unwrap();
        assert_eq!(got.len(), k, "trial {trial}");
        for (g, (mean, n)) in got.iter().zip(&want.clusters) {
            assert_eq!(g.member_count, *n, "trial {trial}");
            for ch in 0..3 {
                assert!((g.centroid[ch] - mean[ch]).abs() <= 1e-6, "trial {trial}");
            }
        }
    }
}

#[test]
fn shadow_line_is_absorbed() {
    // 1% dark pixels inside a red shirt fold into the red cluster.
    let mut px = vec![[250, 10, 10]; 990];
    px.extend(vec![[20, 20, 20]; 10]);
    let c = cluster_colors::<f64>(&px, Section::Torso, 2, 3, &ClusterParams::default()).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(c[0].member_count, 1000);
    assert_eq!(name_color(c[0].centroid, &PaletteSet::default().clothing), "red");
}
