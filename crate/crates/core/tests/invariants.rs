use std::sync::Arc;

use lsv_core::density::{tail_sum, GridDensity, TailFunction, TransferPlan};
use lsv_core::experiments::fit::linear_fit;
use lsv_core::map::compose_apply;
use lsv_core::partition::{entry_partition, return_partition};
use lsv_core::renewal::{exact_tail_dp, sigma_omega, RenewalSpec, TauSequence};
use lsv_core::rng::seed_stream;
use lsv_core::{Branch, Grid, LsvMap, ParameterSequence};
use proptest::collection::vec;
use proptest::prelude::*;
use rand::Rng;

fn gamma() -> impl Strategy<Value = f64> {
    0.01f64..1.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn inverse_branches_round_trip(g in gamma(), y in 0.0f64..=1.0) {
        let m = LsvMap::new(g).unwrap();
        for b in [Branch::Left, Branch::Right] {
            let x = m.inverse_branch(b, y).unwrap();
            prop_assert!((m.apply(x).unwrap() - y).abs() <= 1e-12);
            match b {
                Branch::Left => prop_assert!(x <= 0.5),
                Branch::Right => prop_assert!(x >= 0.5),
            }
        }
    }

    #[test]
    fn branches_are_increasing(g in gamma(), a in 0.0f64..0.5, b in 0.0f64..0.5) {
        let m = LsvMap::new(g).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-9);
        prop_assert!(m.apply(lo).unwrap() < m.apply(hi).unwrap());
        prop_assert!(m.apply(lo + 0.5).unwrap() < m.apply(hi + 0.5).unwrap());
    }

    #[test]
    fn derivative_matches_difference_quotient(g in gamma(), x in 0.01f64..0.49) {
        let m = LsvMap::new(g).unwrap();
        let h = 1e-6;
        let fd = (m.apply(x + h).unwrap() - m.apply(x - h).unwrap()) / (2.0 * h);
        let d = m.derivative(x).unwrap();
        prop_assert!((fd - d).abs() <= 1e-6 * d, "{fd} vs {d}");
        prop_assert!(d >= 1.0);
    }

    #[test]
    fn composition_splits(gs in vec(gamma(), 2..40), x in 0.0f64..=1.0, cut in 0usize..40) {
        let g_star = gs.iter().cloned().fold(0.0, f64::max);
        let seq = ParameterSequence::explicit(gs.clone(), g_star).unwrap();
        let n = gs.len();
        let m = 1 + cut % (n - 1);
        let whole = compose_apply(&seq, 1, n, x).unwrap();
        let split = compose_apply(&seq, m + 1, n, compose_apply(&seq, 1, m, x).unwrap()).unwrap();
        prop_assert_eq!(whole, split);
    }

    #[test]
    fn partition_gaps(gs in vec(0.05f64..0.95, 300)) {
        let g_star = gs.iter().cloned().fold(0.0, f64::max);
        let seq = ParameterSequence::explicit(gs, g_star).unwrap();
        let x = entry_partition(&seq, 300).unwrap();
        let y = return_partition(&seq, 300).unwrap();
        prop_assert!(x.is_strictly_decreasing() && y.is_strictly_decreasing());
        prop_assert!(x.worst_gap_excess() <= 1e-12);
        prop_assert!(y.worst_gap_excess() <= 1e-12);
    }

    #[test]
    fn exact_tail_is_a_tail(theta in 0.05f64..1.0, n0 in 1usize..4, beta in 2.1f64..4.0,
                            beta_prime in 1.0f64..3.0, c_h in 0.2f64..2.0) {
        let spec = RenewalSpec::power(theta, n0, beta, beta_prime, c_h, 150).unwrap();
        let t = exact_tail_dp(&spec, 150).unwrap();
        prop_assert!(t.tails.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        for n in 1..=n0 {
            prop_assert!((t.tails[n - 1] - 1.0).abs() <= 1e-12);
        }
        prop_assert!(t.tails.iter().all(|p| (0.0..=1.0 + 1e-12).contains(p)));
        prop_assert!(t.beyond <= t.tails[149] + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn transfer_conserves_mass(g in gamma(), bumps in vec(0.0f64..1.0, 8)) {
        let grid = Arc::new(Grid::graded(1024).unwrap());
        let f = GridDensity::from_fn(grid.clone(), |x| {
            0.05 + bumps.iter().enumerate().map(|(i, b)| b * (x * (i + 1) as f64).fract()).sum::<f64>()
        })
        .unwrap()
        .normalized()
        .unwrap();
        let plan = TransferPlan::new(&LsvMap::new(g).unwrap(), grid);
        let next = plan.apply(&f).unwrap();
        prop_assert!((next.total_mass() - 1.0).abs() <= 1e-13);
        prop_assert!(next.values().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn tail_sums_are_capped_and_nonincreasing(beta in 0.5f64..4.0, c_h in 0.1f64..5.0, n in 0usize..300) {
        let h = TailFunction::power(1.0, beta, 400).unwrap();
        let s = tail_sum(&h, n, c_h).unwrap();
        let v = s.table(600);
        prop_assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
        prop_assert!(v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn sigma_omega_bounds(a in vec(0.0f64..3.0, 1..60), taus in vec(1u64..8, 60)) {
        let ones = TauSequence { taus: vec![1; 60], beta: 2.5, c_tau: 1.0 };
        let (s1, _) = sigma_omega(&a, &ones, 2.5).unwrap();
        let sq: f64 = a.iter().map(|x| x * x).sum();
        prop_assert!((s1 - sq).abs() <= 1e-12 * (1.0 + sq));

        let seq = TauSequence { taus, beta: 2.5, c_tau: 1.0 };
        let (s, o) = sigma_omega(&a, &seq, 2.5).unwrap();
        let total: f64 = a.iter().sum();
        prop_assert!(s >= 0.0 && o >= 0.0);
        prop_assert!(s <= total * total * (1.0 + 1e-12));
        prop_assert!(s >= sq * (1.0 - 1e-12));
    }

    #[test]
    fn line_fit_recovers_slope(slope in -5.0f64..5.0, icpt in -3.0f64..3.0, seed in any::<u64>()) {
        let mut rng = seed_stream(seed, 0);
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| slope * x + icpt + 1e-6 * (rng.gen::<f64>() - 0.5)).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        prop_assert!((f.slope - slope).abs() < 1e-5);
        prop_assert!((f.intercept - icpt).abs() < 1e-5);
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>(), index in 0u64..1000) {
        let draw = |s: u64, i: u64| -> Vec<u64> {
            let mut r = seed_stream(s, i);
            (0..8).map(|_| r.gen()).collect()
        };
        prop_assert_eq!(draw(seed, index), draw(seed, index));
        prop_assert_ne!(draw(seed, index), draw(seed, index + 1));
        prop_assert_ne!(draw(seed, index), draw(seed.wrapping_add(1), index));
    }
}
