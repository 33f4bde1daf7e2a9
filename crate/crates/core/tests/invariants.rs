use halfspace::flow::LambdaSchedule;
use halfspace::forests::{enumerate_all_forests, enumerate_partitions, reduce_forest, reduce_partition, Forest};
use halfspace::kernels::{kernel_value, p_bulk, robin_image_closed, robin_image_quadrature, surface_kernel_value};
use halfspace::propagators::flowing_propagator;
use halfspace::quad::QuadOptions;
use halfspace::{BoundaryKind, CutoffPair, KernelContext, Part, PropagatorQuery};
use proptest::prelude::*;

fn bc_strategy() -> impl Strategy<Value = BoundaryKind> {
    prop_oneof![
        Just(BoundaryKind::Bulk),
        Just(BoundaryKind::Dirichlet),
        Just(BoundaryKind::Neumann),
        (0.0f64..50.0).prop_map(|c| BoundaryKind::Robin { c }),
    ]
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-300
}

proptest! {
    #[test]
    fn kernels_are_symmetric(bc in bc_strategy(), tau in 1e-3f64..1e2, z in 0.0f64..10.0, zp in 0.0f64..10.0) {
        prop_assert!(close(kernel_value(bc, tau, z, zp), kernel_value(bc, tau, zp, z), 1e-13));
    }

    #[test]
    fn kernels_are_ordered(c in 0.0f64..100.0, tau in 1e-3f64..1e2, z in 0.0f64..10.0, zp in 0.0f64..10.0) {
        let slack = 1e-13 * p_bulk(tau, z, zp) + 1e-300;
        let d = kernel_value(BoundaryKind::Dirichlet, tau, z, zp);
        let r = kernel_value(BoundaryKind::Robin { c }, tau, z, zp);
        let n = kernel_value(BoundaryKind::Neumann, tau, z, zp);
        prop_assert!(d >= -slack);
        prop_assert!(d <= r + slack, "D {d} > R {r}");
        prop_assert!(r <= n + slack, "R {r} > N {n}");
        prop_assert!(n <= 2.0 * p_bulk(tau, z, zp) + slack);
    }

    #[test]
    fn robin_kernel_decreases_in_c(c in 0.0f64..50.0, dc in 0.0f64..50.0, tau in 1e-2f64..10.0, z in 0.0f64..5.0, zp in 0.0f64..5.0) {
        let lo = kernel_value(BoundaryKind::Robin { c: c + dc }, tau, z, zp);
        let hi = kernel_value(BoundaryKind::Robin { c }, tau, z, zp);
        prop_assert!(lo <= hi + 1e-13 * hi.abs());
    }

    #[test]
    fn surface_kernel_is_the_difference(bc in bc_strategy(), tau in 1e-3f64..1e2, z in 0.0f64..10.0, zp in 0.0f64..10.0) {
        let s = surface_kernel_value(bc, tau, z, zp);
        let diff = kernel_value(bc, tau, z, zp) - p_bulk(tau, z, zp);
        prop_assert!((s - diff).abs() <= 1e-14 * (1.0 + p_bulk(tau, z, zp)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn robin_image_closed_form_matches_quadrature(tau in 1e-2f64..10.0, a in 0.0f64..6.0, c in 1e-2f64..30.0) {
        let closed = robin_image_closed(tau, a, c);
        let quad = robin_image_quadrature(tau, a, c, QuadOptions::tol(1e-15, 1e-11)).unwrap();
        prop_assert!((closed - quad).abs() <= 1e-9 * closed.abs() + 1e-14, "{closed} vs {quad}");
    }

    #[test]
    fn flowing_propagator_is_symmetric_and_additive(
        bc in bc_strategy(),
        p in 0.0f64..4.0,
        z in 0.0f64..3.0,
        zp in 0.0f64..3.0,
        lambda in 0.1f64..2.0,
        span in 1.5f64..20.0,
    ) {
        let ctx = KernelContext::new(1.0, bc).unwrap();
        let cut = CutoffPair::new(lambda, lambda * span).unwrap();
        let q = PropagatorQuery { p, z, zp, ctx, cut };
        let swapped = PropagatorQuery { z: zp, zp: z, ..q };
        let full = flowing_propagator(q, Part::Full).unwrap();
        prop_assert!(close(full, flowing_propagator(swapped, Part::Full).unwrap(), 1e-10));
        let parts = flowing_propagator(q, Part::Bulk).unwrap() + flowing_propagator(q, Part::Surface).unwrap();
        prop_assert!((full - parts).abs() <= 1e-11);
        let mid = lambda * span.sqrt();
        let lower = flowing_propagator(PropagatorQuery { cut: CutoffPair::new(lambda, mid).unwrap(), ..q }, Part::Full).unwrap();
        let upper = flowing_propagator(PropagatorQuery { cut: CutoffPair::new(mid, lambda * span).unwrap(), ..q }, Part::Full).unwrap();
        prop_assert!((full - lower - upper).abs() <= 1e-11);
    }

    #[test]
    fn forests_survive_json_round_trip(s in 2u32..5, l in 0u32..3, pick in any::<prop::sample::Index>()) {
        let all = enumerate_all_forests(s, l, 4).unwrap();
        let w = &all[pick.index(all.len())];
        let text = serde_json::to_string(w).unwrap();
        let back: Forest = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, w);
        prop_assert_eq!(back.canonical(), w.canonical());
        prop_assert!(back.validate().is_ok());
    }

    #[test]
    fn reductions_with_loops_stay_valid(n in 3u32..5, l in 1u32..3, pick in any::<prop::sample::Index>(), a in 1u32..5, b in 1u32..5) {
        prop_assume!(a != b && a <= n && b <= n);
        let all = enumerate_all_forests(n, l, 4).unwrap();
        let w = &all[pick.index(all.len())];
        let r = reduce_forest(w, a.min(b), a.max(b)).unwrap();
        prop_assert!(r.forest.validate().is_ok(), "{}", w.canonical());
        prop_assert_eq!(r.forest.s(), n - 2);
    }

    #[test]
    fn partition_reduction_is_valid(s in 3u32..7, pick in any::<prop::sample::Index>()) {
        let all = enumerate_partitions(s).unwrap();
        let p = &all[pick.index(all.len())];
        let r = reduce_partition(p).unwrap();
        prop_assert!(r.validate().is_ok());
        prop_assert_eq!(r.ground_size, s - 2);
    }

    #[test]
    fn schedules_decrease_and_refine(top in 1.0f64..1e3, floor_frac in 1e-4f64..0.5, steps in 1usize..50, factor in 1usize..5) {
        let sched = LambdaSchedule::log_spaced(top, top * floor_frac, 0.0, steps).unwrap();
        let pts = sched.points();
        prop_assert_eq!(pts[0], top);
        prop_assert!(sched.reaches_zero());
        prop_assert!(pts.windows(2).all(|w| w[1] < w[0]));
        let fine = sched.refined(factor);
        prop_assert_eq!(fine.points().len(), (pts.len() - 1) * factor + 1);
        prop_assert!(pts.iter().all(|x| fine.points().contains(x)));
        prop_assert!(fine.points().windows(2).all(|w| w[1] < w[0]));
    }
}
