use std::f64::consts::TAU;

use boussinesq_channel::control::{smooth_target, TransportControl};
use boussinesq_channel::elliptic::divcurl_residual;
use boussinesq_channel::io::{format_row, snapshot_from_bytes, snapshot_to_bytes};
use boussinesq_channel::return_method::{
    minimal_rep, BumpShape, CutoffChi, DriftProfile, PartitionTimes,
};
use boussinesq_channel::solver::{NoControl, NoForcing, Solver, SolverConfig, State, TimeStep};
use boussinesq_channel::spectral::{Grid, Parity, ScalarField};
use proptest::prelude::*;

fn low_mode_field(g: &Grid, parity: Parity, amps: &[f64]) -> ScalarField {
    let n = (amps.len() as f64).sqrt() as usize;
    ScalarField::from_fn(g, parity, |x1, x2| {
        let mut v = 0.0;
        for k1 in 0..n {
            for k2 in 0..n {
                let k = if parity == Parity::Odd { k1 + 1 } else { k1 };
                v += amps[k1 * n + k2] * parity.basis(k, x1) * (k2 as f64 * x2 + 0.3 * k1 as f64).cos();
            }
        }
        v
    })
}

fn cfg() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn velocity_recovery_is_exact(amps in prop::collection::vec(-1.0f64..1.0, 16), c in -2.0f64..2.0) {
        let g = Grid::new(32, 32).unwrap();
        let w = low_mode_field(&g, Parity::Odd, &amps);
        let s = State::new(w.clone(), ScalarField::zeros(&g, Parity::Even), c, 0.0).unwrap();
        let r = divcurl_residual(&s.velocity().unwrap(), &w).unwrap();
        prop_assert!(r.max() < 1e-11, "{r:?}");
    }

    #[test]
    fn snapshots_round_trip(
        nx1 in 8usize..20,
        half in 4usize..12,
        t in -10.0f64..10.0,
        c in -5.0f64..5.0,
        seed in any::<u64>(),
    ) {
        let g = Grid::new(nx1, 2 * half).unwrap();
        let mix = |i: usize, j: usize| (((seed ^ (i * 31 + j) as u64) % 1000) as f64) / 500.0 - 1.0;
        let w = ScalarField::from_fn(&g, Parity::Odd, |x1, x2| x1 * mix(1, 2) + x2.sin());
        let th = ScalarField::from_fn(&g, Parity::Even, |x1, x2| x1 * x1 * mix(3, 4) + x2.cos());
        let s = State::new(w, th, c, t).unwrap();
        let b = snapshot_to_bytes(&s);
        let back = snapshot_from_bytes(&b).unwrap();
        prop_assert_eq!(snapshot_to_bytes(&back), b);
    }

    #[test]
    fn x2_shifts_compose(a in -7.0f64..7.0, b in -7.0f64..7.0, amps in prop::collection::vec(-1.0f64..1.0, 9)) {
        let g = Grid::new(16, 16).unwrap();
        let f = low_mode_field(&g, Parity::Even, &amps);
        let two = f.shifted_x2(a).shifted_x2(b);
        let one = f.shifted_x2(a + b);
        prop_assert!((&two - &one).max_abs() < 1e-12);
    }

    #[test]
    fn partition_of_unity_for_admissible_bands(h1 in 0.0f64..1.0, len in 1.2f64..5.0, x in 0.0f64..TAU) {
        let h2 = (h1 + len).min(TAU - 0.05);
        let k = CutoffChi::min_windows(h1, h2);
        let c = CutoffChi::new(k, h1, h2, (h1 - 0.01, h2 + 0.01)).unwrap();
        prop_assert!((c.partition_sum(x) - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&c.eval(x)));
    }

    #[test]
    fn integral_curves_close(x2 in 0.0f64..TAU, s in 0.0f64..1.0, mollified in any::<bool>()) {
        let c = CutoffChi::new(CutoffChi::min_windows(0.3, 5.9), 0.3, 5.9, (0.2, 6.0)).unwrap();
        let shape = if mollified { BumpShape::Mollified } else { BumpShape::Polynomial };
        let d = DriftProfile::new(PartitionTimes::new(c.k()).unwrap(), &c, shape);
        let y = d.flow_map((0.1, x2), 0.0, 1.0);
        prop_assert!(minimal_rep(y.1 - x2).abs() < 1e-12);
        let back = d.flow_map(d.flow_map((0.1, x2), 0.0, s), s, 0.0);
        prop_assert!(minimal_rep(back.1 - x2).abs() < 1e-12);
    }

    #[test]
    fn localized_control_is_mean_free_after_correction(t in 0.0f64..1.0, amps in prop::collection::vec(-1.0f64..1.0, 9)) {
        let g = Grid::new(16, 32).unwrap();
        let theta = low_mode_field(&g, Parity::Even, &amps);
        let c = CutoffChi::new(CutoffChi::min_windows(0.3, 5.9), 0.3, 5.9, (0.2, 6.0)).unwrap();
        let d = DriftProfile::new(PartitionTimes::new(c.k()).unwrap(), &c, BumpShape::Polynomial);
        let ctrl = TransportControl::new(&theta, &d, &c).unwrap();
        if let (Some(full), Some(free)) = (ctrl.projected(t), ctrl.mean_free_projected(t)) {
            let scale = 1.0 + full.max_abs();
            prop_assert!((full.integrate() - ctrl.mean(t)).abs() < 1e-14 * scale);
            prop_assert!(free.integrate().abs() < 1e-14 * scale, "{:e}", free.integrate());
        }
    }

    #[test]
    fn smoothing_meets_its_bound(amps in prop::collection::vec(-1.0f64..1.0, 64), eps in 0.01f64..0.5) {
        let g = Grid::new(32, 32).unwrap();
        let theta = low_mode_field(&g, Parity::Even, &amps);
        let s = smooth_target(&theta, eps, 3).unwrap();
        let err = (&s - &theta).forward().sobolev_norm(2);
        prop_assert!(err <= eps * theta.forward().sobolev_norm(3) + 1e-14);
    }

    #[test]
    fn free_runs_conserve_mean_temperature(
        amps in prop::collection::vec(-1.0f64..1.0, 9),
        mean in -1.0f64..1.0,
        c in -1.0f64..1.0,
    ) {
        let g = Grid::new(16, 16).unwrap();
        let w = low_mode_field(&g, Parity::Odd, &amps);
        let th = &low_mode_field(&g, Parity::Even, &amps) + &ScalarField::from_fn(&g, Parity::Even, |_, _| mean);
        let s0 = State::new(w, th, c, 0.0).unwrap();
        let cfg = SolverConfig {
            nu: 0.05,
            tau: 0.05,
            buoyancy: true,
            time_step: TimeStep::Fixed(0.01),
            source_nodes: 2,
        };
        let s = Solver::new(cfg).unwrap().run(&s0, 0.2, &NoForcing, &NoControl).unwrap();
        prop_assert!((s.theta.integrate() - s0.theta.integrate()).abs() < 1e-12);
        // c' equals the mean temperature, which is constant.
        let expect = c + 0.2 * s0.theta.integrate();
        prop_assert!((s.mean_coeff - expect).abs() < 1e-12);
    }

    #[test]
    fn csv_numbers_round_trip(v in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..8)) {
        let back: Vec<f64> = format_row(&v).split(',').map(|x| x.parse().unwrap()).collect();
        prop_assert_eq!(back, v);
    }
}
