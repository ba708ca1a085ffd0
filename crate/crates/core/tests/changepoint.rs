// SPDX-License-Identifier: MIT OR Apache-2.0

use bimetal_core::changepoint::{
    detect, optimal_segmentation_for_k, select_num_segments, CostMode, CpConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Two-pass contrast of one segment, written independently of the library.
fn naive_cost(seg: &[f64], mode: CostMode, floor: f64) -> f64 {
    let n = seg.len() as f64;
    let mean = seg.iter().sum::<f64>() / n;
    let ss: f64 = seg.iter().map(|v| (v - mean).powi(2)).sum();
    match mode {
        CostMode::MeanOnly => ss,
        CostMode::MeanAndVariance => n * (ss / n).max(floor).ln(),
    }
}

fn naive_floor(s: &[f64]) -> f64 {
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var > 0.0 {
        1e-12 * var
    } else {
        f64::MIN_POSITIVE
    }
}

/// Every way to place `k - 1` change-points, in lexicographic order.
fn all_splits(t: usize, k: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, left: usize, t: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            if t - start >= m {
                out.push(cur.clone());
            }
            return;
        }
        for j in start + m..=t.saturating_sub(left * m) {
            cur.push(j);
            rec(j, left - 1, t, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, k - 1, t, m, &mut Vec::new(), &mut out);
    out
}

/// Minimum contrast and the lexicographically first minimizer.
fn enumerate_best(s: &[f64], k: usize, mode: CostMode, m: usize) -> (f64, Vec<usize>) {
    let floor = naive_floor(s);
    let scored: Vec<(f64, Vec<usize>)> = all_splits(s.len(), k, m)
        .into_iter()
        .map(|tau| {
            let mut b = vec![0];
            b.extend(&tau);
            b.push(s.len());
            (b.windows(2).map(|w| naive_cost(&s[w[0]..w[1]], mode, floor)).sum(), tau)
        })
        .collect();
    let best = scored.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * (1.0 + best.abs());
    let first = scored.into_iter().find(|x| x.0 <= best + tol).unwrap();
    (best, first.1)
}

#[test]
fn dp_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let t = rng.random_range(8..=30);
        let mode = if case % 2 == 0 { CostMode::MeanOnly } else { CostMode::MeanAndVariance };
        let m = CpConfig::default().min_seg_len(mode);
        let k = rng.random_range(1..=(t / m).min(4));
        // Piecewise-constant signal plus noise, so optima are well defined.
        let mut s = noise(&mut rng, t);
        let shift = rng.random_range(0..t);
        s[shift..].iter_mut().for_each(|v| *v += 3.0);
        let seg = optimal_segmentation_for_k(&s, k, mode, &CpConfig::default()).unwrap();
        let (best, tau) = enumerate_best(&s, k, mode, m);
        assert!((seg.contrast - best).abs() <= 1e-9 * (1.0 + best.abs()), "case {case}");
        assert_eq!(seg.tau, tau, "case {case}");
    }
}

#[test]
fn constant_series_ties_resolve_to_earliest_splits() {
    let s = [4.0; 12];
    for mode in [CostMode::MeanOnly, CostMode::MeanAndVariance] {
        for m in [mode.min_defined_len(), 3] {
            let cfg = CpConfig { min_seg_len: Some(m), ..Default::default() };
            for k in 1..=4 {
                let seg = optimal_segmentation_for_k(&s, k, mode, &cfg).unwrap();
                let (_, tau) = enumerate_best(&s, k, mode, m);
                assert_eq!(seg.tau, tau);
                assert_eq!(seg.tau, (1..k).map(|r| r * m).collect::<Vec<_>>());
            }
        }
    }
}

#[test]
fn mean_shift_localized() {
    let mut hits = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = noise(&mut rng, 400);
        s[200..].iter_mut().for_each(|v| *v += 5.0);
        let seg = detect(&s, CostMode::MeanOnly, &CpConfig::default()).unwrap();
        if seg.tau.len() == 1 && seg.tau[0].abs_diff(200) <= 2 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn pure_noise_selects_one_segment() {
    for mode in [CostMode::MeanOnly, CostMode::MeanAndVariance] {
        let mut ones = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let s = noise(&mut rng, 500);
            if select_num_segments(&s, mode, &CpConfig::default()).unwrap().k_star == 1 {
                ones += 1;
            }
        }
        assert!(ones >= 95, "{mode:?}: {ones}/100");
    }
}

#[test]
fn variance_shift_localized() {
    let mut hits = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + seed);
        let mut s = noise(&mut rng, 400);
        s[200..].iter_mut().for_each(|v| *v *= 3.0);
        let seg = detect(&s, CostMode::MeanAndVariance, &CpConfig::default()).unwrap();
        if seg.tau.len() == 1 && seg.tau[0].abs_diff(200) <= 5 {
            hits += 1;
        }
    }
    assert!(hits >= 90, "{hits}/100");
}

#[test]
fn variance_shift_ignored_in_mean_mode() {
    let mut ones = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
        let mut s = noise(&mut rng, 400);
        s[200..].iter_mut().for_each(|v| *v *= 3.0);
        if select_num_segments(&s, CostMode::MeanOnly, &CpConfig::default()).unwrap().k_star == 1 {
            ones += 1;
        }
    }
    assert!(ones > 50, "{ones}/100");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// With `T >= 2 * min_seg_len * k_max` (here `2 * 5 * 5`) every optimal segmentation below
    /// `k_max` has a segment long enough to split, so `J_K` cannot rise.
    #[test]
    fn contrast_curve_is_non_increasing(seed in 0u64..10_000, t in 50usize..120, mv in any::<bool>()) {
        let mode = if mv { CostMode::MeanAndVariance } else { CostMode::MeanOnly };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = noise(&mut rng, t);
        let cfg = CpConfig { k_max: 5, ..Default::default() };
        let d = select_num_segments(&s, mode, &cfg).unwrap();
        for w in d.contrast.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()));
        }
    }

    #[test]
    fn shift_and_scale_keep_segmentation(
        seed in 0u64..10_000,
        t in 20usize..60,
        k in 1usize..5,
        shift in -100.0f64..100.0,
        scale in 0.01f64..100.0,
        mv in any::<bool>(),
    ) {
        let mode = if mv { CostMode::MeanAndVariance } else { CostMode::MeanOnly };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = noise(&mut rng, t);
        s[t / 2..].iter_mut().for_each(|v| *v += 4.0);
        let cfg = CpConfig::default();
        let base = optimal_segmentation_for_k(&s, k, mode, &cfg).unwrap();
        if mode == CostMode::MeanOnly {
            let moved: Vec<f64> = s.iter().map(|v| v + shift).collect();
            prop_assert_eq!(&optimal_segmentation_for_k(&moved, k, mode, &cfg).unwrap().tau, &base.tau);
        }
        let scaled: Vec<f64> = s.iter().map(|v| v * scale).collect();
        let seg = optimal_segmentation_for_k(&scaled, k, mode, &cfg).unwrap();
        prop_assert_eq!(&seg.tau, &base.tau);
        let want = match mode {
            CostMode::MeanOnly => base.contrast * scale * scale,
            CostMode::MeanAndVariance => base.contrast + t as f64 * (scale * scale).ln(),
        };
        prop_assert!((seg.contrast - want).abs() <= 1e-8 * (1.0 + want.abs()));
    }
}
