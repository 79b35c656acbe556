use demandwave::shrink::{
    estimate_sigma, shrink_pyramid, sure_threshold, threshold_value, universal_threshold, ThresholdRule,
    ThresholdSource, ThresholdSpec,
};
use demandwave::{dwt3d, idwt3d, Cube, FilterBank};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Exhaustive SURE minimization in unit-noise scale with the hybrid rule.
fn brute_sure(d: &[f64], sigma: f64) -> f64 {
    let n = d.len();
    let nf = n as f64;
    let x: Vec<f64> = d.iter().map(|v| v / sigma).collect();
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if n >= 2 && (energy - nf) / nf <= nf.log2().powf(1.5) / nf.sqrt() {
        return sigma * (2.0 * nf.ln()).sqrt();
    }
    let cap = (2.0 * nf.ln()).sqrt();
    let mut cands: Vec<f64> = x.iter().map(|v| v.abs()).filter(|a| *a <= cap).collect();
    cands.push(0.0);
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let risk = |t: f64| {
        let below = x.iter().filter(|v| v.abs() <= t).count() as f64;
        nf - 2.0 * below + x.iter().map(|v| (v * v).min(t * t)).sum::<f64>()
    };
    let mut best = (risk(0.0), 0.0);
    for &t in &cands[1..] {
        let r = risk(t);
        if r < best.0 {
            best = (r, t);
        }
    }
    sigma * best.1
}

fn noisy_vector(rng: &mut ChaCha8Rng, n: usize, spikes: usize, amp: f64) -> Vec<f64> {
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut v: Vec<f64> = (0..n).map(|_| unit.sample(rng)).collect();
    for i in 0..spikes.min(n) {
        v[(i * 7919) % n] += amp;
    }
    v
}

proptest! {
    #[test]
    fn soft_rule_is_a_contraction(d in -1e6..1e6f64, e in -1e6..1e6f64, lambda in 0.0..1e3f64) {
        let (sd, se) = (threshold_value(d, lambda, ThresholdRule::Soft), threshold_value(e, lambda, ThresholdRule::Soft));
        prop_assert!(sd.abs() <= d.abs());
        prop_assert!((sd - se).abs() <= (d - e).abs() * (1.0 + 1e-15));
        prop_assert!(sd == 0.0 || sd.signum() == d.signum());
    }

    #[test]
    fn hard_rule_is_idempotent(d in -1e6..1e6f64, lambda in 0.0..1e3f64) {
        let once = threshold_value(d, lambda, ThresholdRule::Hard);
        prop_assert_eq!(threshold_value(once, lambda, ThresholdRule::Hard), once);
        prop_assert!(once == 0.0 || once == d);
    }

    #[test]
    fn sure_matches_brute_force(seed in any::<u64>(), n in 8usize..512, spikes in 0usize..64, amp in 0.0..12.0f64, sigma in 0.1..10.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d: Vec<f64> = noisy_vector(&mut rng, n, spikes, amp).into_iter().map(|v| v * sigma).collect();
        prop_assert_eq!(sure_threshold(&d, sigma).unwrap(), brute_sure(&d, sigma));
    }
}

fn random_cube(n: usize, seed: u64, sd: f64) -> Cube {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    Cube::from_fn(n, |_, _, _| noise.sample(&mut rng))
}

#[test]
fn sigma_estimate_tracks_gaussian_noise() {
    let x = random_cube(32, 11, 2.0);
    let p = dwt3d(&x, &FilterBank::sym8(), 3).unwrap();
    let est = estimate_sigma(&p);
    assert!(!est.degenerate);
    assert!((est.sigma - 2.0).abs() < 0.1, "{est:?}");
}

#[test]
fn universal_threshold_removes_pure_noise() {
    let x = random_cube(32, 12, 1.0);
    let bank = FilterBank::sym8();
    let p = dwt3d(&x, &bank, 3).unwrap();
    let spec = ThresholdSpec::new(ThresholdRule::Hard, ThresholdSource::Universal);
    let (_, report) = shrink_pyramid(&p, &spec).unwrap();
    assert!(report.coefficients_retained <= 5, "{report:?}");
    let lambda = report.threshold_used[0].unwrap();
    assert_eq!(lambda, universal_threshold(report.sigma_used, 32 * 32 * 32).unwrap());
}

#[test]
fn zero_threshold_is_identity() {
    let x = random_cube(16, 13, 3.0);
    let bank = FilterBank::db4();
    let p = dwt3d(&x, &bank, 2).unwrap();
    for rule in [ThresholdRule::Hard, ThresholdRule::Soft] {
        let (q, report) = shrink_pyramid(&p, &ThresholdSpec::manual(rule, 0.0)).unwrap();
        assert_eq!(q, p);
        assert_eq!(report.coefficients_retained, p.detail_count());
        assert!(idwt3d(&q, &bank).unwrap().max_abs_diff(&x) < 1e-9);
    }
}

#[test]
fn budget_keeps_the_largest_details() {
    let x = random_cube(32, 14, 1.0);
    let p = dwt3d(&x, &FilterBank::haar(), 3).unwrap();
    for level in 3..=8u32 {
        let (q, report) = shrink_pyramid(&p, &ThresholdSpec::new(ThresholdRule::Hard, ThresholdSource::Budget(level))).unwrap();
        let k = 7usize << level;
        assert_eq!(report.coefficients_retained, k);
        let mut mags: Vec<f64> = p.detail_values().map(f64::abs).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let smallest_kept = q.detail_values().filter(|v| *v != 0.0).map(f64::abs).fold(f64::INFINITY, f64::min);
        assert_eq!(smallest_kept, mags[k - 1]);
        assert_eq!(q.approx(), p.approx());
    }
}

#[test]
fn soft_shrinkage_lowers_detail_energy() {
    let x = random_cube(16, 15, 1.0);
    let p = dwt3d(&x, &FilterBank::sym8(), 2).unwrap();
    let mut last = f64::INFINITY;
    for lambda in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let (q, _) = shrink_pyramid(&p, &ThresholdSpec::manual(ThresholdRule::Soft, lambda)).unwrap();
        let e: f64 = q.detail_values().map(|v| v * v).sum();
        assert!(e <= last);
        last = e;
    }
}
