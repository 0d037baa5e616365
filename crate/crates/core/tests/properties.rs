use itertools::Itertools;
use proptest::prelude::*;

use wflow_core::birth_death::{truncated_curvature, BirthDeathSpec};
use wflow_core::evolution::{rhs_integrand, verify_identity};
use wflow_core::jump_process::{propagate, uniformized_marginal, JumpGeneratorSpec};
use wflow_core::measures::{laplace_smooth, DiscreteMeasure, GridSpec, Measure};
use wflow_core::transport::{cost, wasserstein, wasserstein_atomic, wasserstein_pow};

fn atomic(max: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::btree_map(-400i32..400, 1u32..100, 1..=max).prop_map(|m| {
        let total: u32 = m.values().sum();
        let xs = m.keys().map(|&k| k as f64 / 16.0).collect();
        let ws = m.values().map(|&w| w as f64 / total as f64).collect();
        DiscreteMeasure::new(xs, ws).unwrap()
    })
}

fn rho() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(1.5), Just(2.0), Just(3.0), 1.0..4.0]
}

fn dense_generator() -> impl Strategy<Value = JumpGeneratorSpec> {
    (2usize..7)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.0..3.0f64, n),
                prop::collection::vec(prop::collection::vec(0.01..1.0f64, n), n),
            )
        })
        .prop_map(|(lambda, raw)| {
            let n = lambda.len();
            let kernel: Vec<Vec<f64>> = raw
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let s: f64 = r.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).sum();
                    r.iter().enumerate().map(|(j, v)| if j == i { 0.0 } else { v / s }).collect()
                })
                .collect();
            JumpGeneratorSpec::from_dense((0..n).map(|k| k as f64).collect(), lambda, &kernel).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn wasserstein_is_a_metric(a in atomic(8), b in atomic(8), c in atomic(8), r in rho()) {
        let (ma, mb, mc): (Measure, Measure, Measure) = (a.into(), b.into(), c.into());
        let ab = wasserstein(&ma, &mb, r).unwrap();
        prop_assert_eq!(wasserstein(&ma, &ma, r).unwrap(), 0.0);
        prop_assert!((ab - wasserstein(&mb, &ma, r).unwrap()).abs() <= 1e-12 * (1.0 + ab));
        let via = wasserstein(&ma, &mc, r).unwrap() + wasserstein(&mc, &mb, r).unwrap();
        prop_assert!(ab <= via * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn wasserstein_increases_with_rho(a in atomic(10), b in atomic(10), r1 in 1.0..4.0f64, dr in 0.0..2.0f64) {
        let lo = wasserstein_atomic(&a, &b, r1).unwrap();
        let hi = wasserstein_atomic(&a, &b, r1 + dr).unwrap();
        prop_assert!(lo <= hi * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn translation_distance(a in atomic(10), c in -20.0..20.0f64, r in rho()) {
        let w = wasserstein_atomic(&a, &a.translate(c), r).unwrap();
        prop_assert!((w - c.abs()).abs() <= 1e-10 * (1.0 + c.abs()));
    }

    #[test]
    fn quantile_inverts_cdf(a in atomic(12)) {
        let mut prev = 0.0;
        for (x, w) in a.support().iter().zip(a.weights()) {
            let mid = prev + 0.5 * w;
            prop_assert_eq!(a.quantile(mid).unwrap(), *x);
            prop_assert!(a.cdf(*x) >= mid);
            prev += w;
        }
    }

    #[test]
    fn laplace_smoothing_moves_at_most_eta(a in atomic(6), eta in 0.05..2.0f64) {
        let grid = GridSpec::padded(a.support(), 40.0 * eta, 20_000);
        let g = laplace_smooth(&a, eta, grid).unwrap();
        let w1 = wasserstein(&Measure::Atomic(a), &Measure::Grid(g), 1.0).unwrap();
        prop_assert!(w1 <= eta * (1.0 + 1e-3) + grid.step(), "W1={} η={}", w1, eta);
    }

    #[test]
    fn permutation_oracle(xs in prop::collection::vec(-50i32..50, 1..=6), ys in prop::collection::vec(-50i32..50, 1..=6), r in rho()) {
        // equal weights on n points each; repeated points are merged
        let n = xs.len().min(ys.len());
        let (xs, ys) = (&xs[..n], &ys[..n]);
        let merge = |v: &[i32]| {
            let counts = v.iter().copied().counts();
            let keys: Vec<i32> = counts.keys().copied().sorted().collect();
            DiscreteMeasure::new(
                keys.iter().map(|&k| k as f64).collect(),
                keys.iter().map(|k| counts[k] as f64 / n as f64).collect(),
            )
            .unwrap()
        };
        let brute = (0..n)
            .permutations(n)
            .map(|p| p.iter().enumerate().map(|(i, &j)| cost(xs[i] as f64, ys[j] as f64, r)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
            / n as f64;
        let w = wasserstein_pow(&merge(xs).into(), &merge(ys).into(), r).unwrap();
        prop_assert!((w - brute).abs() <= 1e-9 * (1.0 + brute), "{} vs {}", w, brute);
    }

    #[test]
    fn chapman_kolmogorov(g in dense_generator(), s in 0.0..2.0f64, t in 0.0..2.0f64) {
        let mut v0 = vec![0.0; g.len()];
        v0[0] = 0.5;
        v0[g.len() - 1] += 0.5;
        let (direct, _) = propagate(&g, &v0, s + t, 1e-15).unwrap();
        let (half, _) = propagate(&g, &v0, s, 1e-15).unwrap();
        let (two_step, _) = propagate(&g, &half, t, 1e-15).unwrap();
        for (a, b) in direct.iter().zip(&two_step) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!((direct.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn truncated_curvature_brackets(eta in prop::collection::vec(0.0..3.0f64, 25), slope in 0.0..2.0f64, n in 3usize..24) {
        let nu: Vec<f64> = (0..25).map(|x| slope * x as f64 + if x > 0 { 0.1 } else { 0.0 }).collect();
        let bd = BirthDeathSpec::new(eta.clone(), nu.clone()).unwrap();
        let kn = truncated_curvature(&bd, n).unwrap();
        let diff = |x: usize| eta[x] + nu[x + 1] - eta[x + 1] - nu[x];
        let lower = (0..n).map(diff).fold(f64::INFINITY, f64::min);
        let upper = (0..n - 1).map(diff).fold(f64::INFINITY, f64::min);
        prop_assert!(lower <= kn + 1e-15 && kn <= upper + 1e-15);
    }
}

fn unit_birth_linear_death(n: usize) -> JumpGeneratorSpec {
    BirthDeathSpec::mm_infty(1.0, 1.0, n).unwrap().to_generator().unwrap()
}

#[test]
fn integrand_matches_finite_differences() {
    let g = unit_birth_linear_death(40);
    let (a, b) = (DiscreteMeasure::dirac(3.0), DiscreteMeasure::dirac(7.0));
    let w = |t: f64| {
        let pa = uniformized_marginal(&g, &a, t, 1e-300).unwrap();
        let pb = uniformized_marginal(&g, &b, t, 1e-300).unwrap();
        (wasserstein_pow(&pa.clone().into(), &pb.clone().into(), 2.0).unwrap(), pa, pb)
    };
    for t in [0.3, 0.55, 0.9] {
        let h = 1e-4;
        let fd = (w(t + h).0 - w(t - h).0) / (2.0 * h);
        let (_, pa, pb) = w(t);
        let d = rhs_integrand(&g, &g, &pa, &pb, 2.0).unwrap();
        assert!((d - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "t={t}: {d} vs {fd}");
    }
}

#[test]
fn residual_ratio_across_rho() {
    let g = unit_birth_linear_death(40);
    let (a, b) = (DiscreteMeasure::dirac(3.0), DiscreteMeasure::dirac(7.0));
    for rho in [1.5, 2.0, 3.0] {
        let coarse = verify_identity(&g, &g, &a, &b, rho, 1.0, 200).unwrap().max_residual();
        let fine = verify_identity(&g, &g, &a, &b, rho, 1.0, 400).unwrap().max_residual();
        assert!(fine <= 5e-6 && coarse / fine >= 3.5, "ρ={rho}: {coarse:e} → {fine:e}");
    }
}

#[test]
fn truncation_stability() {
    // initial mass below N/2, t ≤ 1, affine growth constant C = 1
    for (a, start) in [(1.0, 3.0), (0.5, 5.0)] {
        let p0 = DiscreteMeasure::dirac(start);
        let small = BirthDeathSpec::mm_infty(a, 1.0, 40).unwrap().to_generator().unwrap();
        let large = BirthDeathSpec::mm_infty(a, 1.0, 80).unwrap().to_generator().unwrap();
        for t in [0.25, 1.0] {
            let ps = uniformized_marginal(&small, &p0, t, 1e-300).unwrap();
            let pl = uniformized_marginal(&large, &p0, t, 1e-300).unwrap();
            let w1 = wasserstein_atomic(&ps, &pl, 1.0).unwrap();
            assert!(w1 <= 1e-8, "a={a} t={t}: {w1:e}");
        }
    }
}
