use std::f64::consts::TAU;

use proptest::prelude::*;

use drillsim_core::plane::{fit_plane, plane_offsets};
use drillsim_core::surface::ShellState;
use drillsim_core::{
    advance_plan, apply_drill, fuse, generate_surface, ground_truth_completion, update_progress, CompletionVector,
    ControlConfig, SplineCurve, SurfaceConfig, TrajectoryState,
};

fn nodes() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec(0.05f64..1.0, n),
            prop::collection::vec(-1e-3f64..1e-3, n),
        )
            .prop_map(|(gaps, z)| {
                let total: f64 = gaps.iter().sum();
                let mut acc = -std::f64::consts::PI + 1e-9;
                let phi = gaps
                    .iter()
                    .map(|g| {
                        let p = acc;
                        acc += g / total * TAU;
                        p
                    })
                    .collect();
                (phi, z)
            })
    })
}

proptest! {
    #[test]
    fn spline_interpolates((phi, z) in nodes()) {
        let curve = SplineCurve::through(&phi, &z).unwrap();
        for (p, v) in phi.iter().zip(&z) {
            prop_assert!((curve.eval(*p) - v).abs() < 1e-12);
            prop_assert!((curve.eval(*p + TAU) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn spline_stays_in_envelope((phi, z) in nodes()) {
        let curve = SplineCurve::through(&phi, &z).unwrap();
        let range = z.iter().cloned().fold(f64::MIN, f64::max) - z.iter().cloned().fold(f64::MAX, f64::min);
        let eps = 1e-9 * range;
        let n = z.len();
        for (i, s) in curve.segments().iter().enumerate() {
            let (a, b) = (z[i], z[(i + 1) % n]);
            for k in 0..=200 {
                let v = s.eval(s.phi_l + s.width() * k as f64 / 200.0);
                prop_assert!(v >= a.min(b) - eps && v <= a.max(b) + eps);
            }
        }
    }

    #[test]
    fn spline_preserves_monotone_arcs(mut z in prop::collection::vec(-1e-3f64..1e-3, 6..24), cut in 0.0f64..1.0) {
        // Ascending over the first part, arbitrary afterwards.
        let n = z.len();
        let k = 3 + ((n - 3) as f64 * cut) as usize;
        z[..k].sort_by(f64::total_cmp);
        let phi: Vec<f64> = (0..n).map(|i| -3.0 + TAU * i as f64 / n as f64).collect();
        let curve = SplineCurve::through(&phi, &z).unwrap();
        let mut last = f64::NEG_INFINITY;
        for s in &curve.segments()[..k - 1] {
            for j in 0..=100 {
                let v = s.eval(s.phi_l + s.width() * j as f64 / 100.0);
                prop_assert!(v >= last - 1e-15);
                last = v;
            }
        }
    }

    #[test]
    fn spline_is_c1_across_wrap((phi, z) in nodes()) {
        let curve = SplineCurve::through(&phi, &z).unwrap();
        let segs = curve.segments();
        let (first, last) = (&segs[0], &segs[segs.len() - 1]);
        prop_assert!((last.derivative(first.phi_l + TAU) - first.derivative(first.phi_l)).abs() < 1e-9);
        prop_assert!((last.eval(first.phi_l + TAU) - first.eval(first.phi_l)).abs() < 1e-12);
    }

    #[test]
    fn plane_residual_is_minimal(
        pts in prop::collection::vec((-4e-3f64..4e-3, -4e-3f64..4e-3, -1e-3f64..1e-3), 3..40),
        which in 0usize..3,
        sign in prop::bool::ANY,
    ) {
        let pts: Vec<[f64; 3]> = pts.into_iter().map(|(x, y, z)| [x, y, z]).collect();
        let fit = fit_plane(&pts);
        prop_assume!(fit.valid);
        let mut moved = fit;
        let delta = if sign { 1e-6 } else { -1e-6 };
        match which {
            0 => moved.alpha += delta,
            1 => moved.beta += delta,
            _ => moved.gamma += delta,
        }
        prop_assert!(moved.sum_squared_residuals(&pts) >= fit.sum_squared_residuals(&pts));
    }

    #[test]
    fn offsets_vanish_on_plane(a in -0.2f64..0.2, b in -0.2f64..0.2, g in -1e-3f64..1e-3) {
        let mut traj = TrajectoryState::circle(64, 8e-3, 0.0).unwrap();
        for i in 0..64 {
            let p = traj.points()[i];
            traj.set_z(i, a * p.x + b * p.y + g);
        }
        let pts: Vec<[f64; 3]> = traj.points().iter().map(|p| [p.x, p.y, p.z]).collect();
        let fit = fit_plane(&pts);
        prop_assert!(plane_offsets(&fit, &traj).iter().all(|o| o.abs() < 1e-15));
    }

    #[test]
    fn fusion_bounds_and_identity(
        rows in prop::collection::vec((0.0f64..=1.0, -1.0f64..2.0, 0.0f64..=1.0, prop::bool::ANY), 1..64),
    ) {
        let image: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let force: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let w: Vec<f64> = rows.iter().map(|r| if r.3 { 0.0 } else { r.2 }).collect();
        let fused = fuse(&image, &force, &w).unwrap();
        for (i, v) in fused.values().iter().enumerate() {
            prop_assert!((0.0..=1.0).contains(v));
            if w[i] == 0.0 {
                prop_assert_eq!(v.to_bits(), image[i].to_bits());
            }
        }
    }

    #[test]
    fn progress_is_idempotent(a in prop::collection::vec(0.0f64..=1.0, 8), b in prop::collection::vec(0.0f64..=1.0, 8)) {
        let a = CompletionVector::new(a).unwrap();
        let b = CompletionVector::new(b).unwrap();
        let once = update_progress(&a, &b).unwrap();
        let twice = update_progress(&once, &b).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once, update_progress(&b, &a).unwrap());
    }

    #[test]
    fn commanded_height_never_rises(
        c in prop::collection::vec(0.0f64..=1.0, 32),
        o in prop::collection::vec(-1e-4f64..1e-4, 32),
        all in prop::bool::ANY,
    ) {
        let cfg = ControlConfig { n: 32, offsets_all_points: all, ..ControlConfig::default() };
        let mut traj = TrajectoryState::circle(32, 8e-3, 0.0).unwrap();
        let before = traj.zs();
        advance_plan(&mut traj, &CompletionVector::new(c).unwrap(), &o, &cfg).unwrap();
        for (z0, z1) in before.iter().zip(traj.zs()) {
            prop_assert!(z1 <= *z0);
        }
    }

    #[test]
    fn drilling_is_monotone_and_ruptures_only_through(
        seed in any::<u64>(),
        steps in prop::collection::vec((-6e-4f64..1e-4, 0.0f64..TAU), 1..60),
    ) {
        let traj = TrajectoryState::circle(64, 8e-3, 0.0).unwrap();
        let cfg = SurfaceConfig { footprint_nodes: 2, ..SurfaceConfig::egg() };
        let grid = generate_surface(&cfg, seed).unwrap().sample(&traj);
        let mut state = ShellState::untouched(64);
        let mut reached_one = vec![false; 64];
        let mut prev = ground_truth_completion(&state, &grid);
        for (tip, angle) in steps {
            apply_drill(&mut state, &grid, tip, angle, 1.0 / 30.0).unwrap();
            let now = ground_truth_completion(&state, &grid);
            for i in 0..64 {
                prop_assert!(now[i] >= prev[i]);
                reached_one[i] |= now[i] >= 1.0;
            }
            if let Some(i) = state.rupture_index {
                prop_assert!(reached_one[i]);
            }
            prev = now;
        }
    }

    #[test]
    fn surfaces_reproduce(seed in any::<u64>()) {
        let a = generate_surface(&SurfaceConfig::mouse(), seed).unwrap();
        let b = generate_surface(&SurfaceConfig::mouse(), seed).unwrap();
        let traj = TrajectoryState::circle(320, 8e-3, 0.0).unwrap();
        prop_assert_eq!(a.sample(&traj), b.sample(&traj));
    }
}
