use demandwave::wavelet::{dwt1d, idwt1d};
use demandwave::{builtin_banks, dwt3d, idwt3d, Cube, FilterBank, Subband};
use proptest::prelude::*;

fn cube(n: usize, vals: &[f64]) -> Cube {
    Cube::from_vec(n, vals.iter().copied().cycle().take(n * n * n).collect()).unwrap()
}

fn bank_strategy() -> impl Strategy<Value = FilterBank> {
    prop::sample::select(builtin_banks())
}

fn case() -> impl Strategy<Value = (usize, usize, FilterBank, Vec<f64>)> {
    (prop::sample::select(vec![2usize, 4, 8, 16]), bank_strategy(), prop::collection::vec(-1e3..1e3f64, 1..600))
        .prop_flat_map(|(n, bank, vals)| {
            let max = n.trailing_zeros() as usize;
            (Just(n), 1..=max, Just(bank), Just(vals))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perfect_reconstruction((n, depth, bank, vals) in case()) {
        let x = cube(n, &vals);
        let back = idwt3d(&dwt3d(&x, &bank, depth).unwrap(), &bank).unwrap();
        prop_assert!(back.max_abs_diff(&x) <= 1e-9 * x.max_abs().max(1.0));
    }

    #[test]
    fn parseval((n, depth, bank, vals) in case()) {
        let x = cube(n, &vals);
        let p = dwt3d(&x, &bank, depth).unwrap();
        prop_assert!((p.energy() - x.energy()).abs() <= 1e-9 * x.energy().max(1.0));
    }

    #[test]
    fn linearity((n, depth, bank, vals) in case(), a in -5.0..5.0f64, b in -5.0..5.0f64) {
        let x = cube(n, &vals);
        let y = Cube::from_fn(n, |i, j, k| ((i * 7 + j * 3 + k) % 11) as f64 - 5.0);
        let z = Cube::from_fn(n, |i, j, k| a * x.get(i, j, k) + b * y.get(i, j, k));
        let (px, py, pz) = (dwt3d(&x, &bank, depth).unwrap(), dwt3d(&y, &bank, depth).unwrap(), dwt3d(&z, &bank, depth).unwrap());
        let combined = px.approx().as_slice().iter().zip(py.approx().as_slice()).map(|(u, v)| a * u + b * v);
        for (c, w) in combined.zip(pz.approx().as_slice()) {
            prop_assert!((c - w).abs() <= 1e-8 * (1.0 + w.abs()));
        }
        for level in 1..=depth {
            for band in Subband::DETAILS {
                let (u, v, w) = (px.detail(level, band), py.detail(level, band), pz.detail(level, band));
                for i in 0..w.len() {
                    let c = a * u.as_slice()[i] + b * v.as_slice()[i];
                    prop_assert!((c - w.as_slice()[i]).abs() <= 1e-8 * (1.0 + w.as_slice()[i].abs()));
                }
            }
        }
    }

    #[test]
    fn separable_product_matches_1d(bank in bank_strategy(),
        a in prop::collection::vec(-10.0..10.0f64, 8), b in prop::collection::vec(-10.0..10.0f64, 8), c in prop::collection::vec(-10.0..10.0f64, 8)) {
        let x = Cube::from_fn(8, |i, j, k| a[i] * b[j] * c[k]);
        let p = dwt3d(&x, &bank, 1).unwrap();
        let (da, db, dc) = (dwt1d(&a, &bank, 1).unwrap(), dwt1d(&b, &bank, 1).unwrap(), dwt1d(&c, &bank, 1).unwrap());
        let pick = |d: &demandwave::wavelet::Dwt1d, high: bool| if high { d.details[0].clone() } else { d.approx.clone() };
        for band in Subband::DETAILS {
            let label = band.label().as_bytes();
            let (fa, fb, fc) = (pick(&da, label[0] == b'H'), pick(&db, label[1] == b'H'), pick(&dc, label[2] == b'H'));
            let got = p.detail(1, band);
            for i in 0..4 { for j in 0..4 { for k in 0..4 {
                let want = fa[i] * fb[j] * fc[k];
                prop_assert!((got.get(i, j, k) - want).abs() <= 1e-9 * (1.0 + want.abs()), "{band}");
            }}}
        }
    }

    #[test]
    fn roundtrip_1d(bank in bank_strategy(), vals in prop::collection::vec(-1e3..1e3f64, 64), depth in 1usize..=6) {
        let d = dwt1d(&vals, &bank, depth).unwrap();
        let back = idwt1d(&d.approx, &d.details, &bank).unwrap();
        for (x, y) in vals.iter().zip(back) {
            prop_assert!((x - y).abs() <= 1e-9 * 1e3);
        }
    }
}

/// Polynomials below the vanishing-moment order leave no detail energy away
/// from the periodic wrap.
#[test]
fn vanishing_moments_kill_polynomials() {
    let n = 256;
    for bank in builtin_banks() {
        let taps = bank.taps();
        for degree in 0..bank.vanishing_moments() {
            let x: Vec<f64> = (0..n).map(|i| (i as f64 / n as f64).powi(degree as i32)).collect();
            let d = dwt1d(&x, &bank, 1).unwrap();
            let interior = &d.details[0][..n / 2 - taps / 2];
            let worst = interior.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(worst < 1e-9, "{} degree {degree}: {worst}", bank.name());
        }
    }
}

#[test]
fn every_depth_reconstructs_random_cubes() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for n in [16, 32] {
        let x = Cube::from_fn(n, |_, _, _| rng.random_range(-100.0..100.0));
        for bank in builtin_banks() {
            for depth in 1..=n.trailing_zeros() as usize {
                let p = dwt3d(&x, &bank, depth).unwrap();
                assert_eq!(p.coefficient_count(), n * n * n);
                let back = idwt3d(&p, &bank).unwrap();
                assert!(back.max_abs_diff(&x) < 1e-9 * x.max_abs());
            }
        }
    }
}
