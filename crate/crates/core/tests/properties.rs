use kannan_fixpoint::analysis::{periodic_point_check, ulam_hyers_check, wellposed_check};
use kannan_fixpoint::certify::{estimate_constant, ratio, CertifyConfig};
use kannan_fixpoint::cli::{config::ConfigFormat, write_config, ProblemConfig};
use kannan_fixpoint::iterate::{check_bounds, solve, IterationConfig, Lambda};
use kannan_fixpoint::vip::{solve_vip, vi_residual, vip_operator, ConvexSet, VipProblem};
use kannan_fixpoint::{averaged, iterate_n, Operator, SelfMap, Vector, WeightedSpace};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn space_and_dim() -> impl Strategy<Value = WeightedSpace> {
    prop::collection::vec(0.1..10.0f64, 1..=4).prop_map(|w| WeightedSpace::new(w).unwrap())
}

fn vector(dim: usize, r: f64) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-r..r, dim).prop_map(Vector::new)
}

fn matrix(dim: usize, r: f64) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-r..r, dim), dim)
}

fn affine(space: WeightedSpace, r: f64) -> impl Strategy<Value = Operator> {
    let dim = space.dim();
    (matrix(dim, r), vector(dim, 5.0)).prop_map(move |(m, c)| Operator::affine(space.clone(), m, c).unwrap())
}

/// Operators whose averaged map `T_lambda`, `lambda = 1/(b+1)`, is the constant `c`:
/// `T x = (1 + b) c - b x`. These satisfy the contraction condition with `a = 0`.
fn certified(space: WeightedSpace) -> impl Strategy<Value = (Operator, f64, Vector)> {
    let dim = space.dim();
    (0.0..6.0f64, vector(dim, 5.0)).prop_map(move |(b, c)| {
        let rows = (0..dim).map(|i| (0..dim).map(|j| if i == j { -b } else { 0.0 }).collect()).collect();
        let op = Operator::affine(space.clone(), rows, c.scale(1.0 + b)).unwrap();
        (op, b, c)
    })
}

fn convex_set(dim: usize) -> impl Strategy<Value = ConvexSet> {
    prop_oneof![
        (vector(dim, 3.0), 0.1..4.0f64).prop_map(|(center, radius)| ConvexSet::Ball { center, radius }),
        (vector(dim, 3.0), prop::collection::vec(0.0..4.0f64, dim)).prop_map(|(lo, w)| {
            let hi = Vector::new(lo.coords().iter().zip(&w).map(|(l, w)| l + w).collect());
            ConvexSet::Box { lo, hi }
        }),
        (vector(dim, 3.0), -3.0..3.0f64)
            .prop_filter("nonzero normal", |(n, _)| n.max_abs() > 1e-3)
            .prop_map(|(normal, offset)| ConvexSet::Halfspace { normal, offset }),
        Just(ConvexSet::Simplex { dim }),
    ]
}

fn space_with_set() -> impl Strategy<Value = (WeightedSpace, ConvexSet)> {
    space_and_dim().prop_flat_map(|s| {
        let dim = s.dim();
        (Just(s), convex_set(dim))
    })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cauchy_schwarz((s, x, y) in space_and_dim().prop_flat_map(|s| { let d = s.dim(); (Just(s), vector(d, 10.0), vector(d, 10.0)) })) {
        let lhs = s.inner(&x, &y).unwrap().abs();
        let rhs = s.norm(&x).unwrap() * s.norm(&y).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn parallelogram_law((s, x, y) in space_and_dim().prop_flat_map(|s| { let d = s.dim(); (Just(s), vector(d, 10.0), vector(d, 10.0)) })) {
        let n = |v: &Vector| s.norm(v).unwrap().powi(2);
        let lhs = n(&x.add(&y)) + n(&x.sub(&y));
        let rhs = 2.0 * n(&x) + 2.0 * n(&y);
        prop_assert!(close(lhs, rhs, 1e-10));
    }

    #[test]
    fn triangle_inequality((s, x, y, z) in space_and_dim().prop_flat_map(|s| { let d = s.dim(); (Just(s), vector(d, 10.0), vector(d, 10.0), vector(d, 10.0)) })) {
        let d = |a: &Vector, b: &Vector| s.distance(a, b).unwrap();
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12);
    }

    #[test]
    fn averaging_preserves_fixed_points(
        (s, m, p, x) in space_and_dim().prop_flat_map(|s| { let d = s.dim(); (Just(s), matrix(d, 2.0), vector(d, 5.0), vector(d, 5.0)) }),
        lambda in 0.01..=1.0f64,
    ) {
        // T x = M (x - p) + p fixes p.
        let tp = Vector::new(m.iter().map(|row| row.iter().zip(p.coords()).map(|(a, b)| a * b).sum()).collect());
        let op = Operator::affine(s.clone(), m, p.sub(&tp)).unwrap();
        let avg = averaged(&op, lambda).unwrap();
        for x in [&p, &x] {
            let d_t = s.distance(&op.apply(x).unwrap(), x).unwrap();
            let d_avg = s.distance(&avg.apply(x).unwrap(), x).unwrap();
            if d_t <= 1e-12 {
                prop_assert!(d_avg <= 1e-12);
            }
            if d_avg <= 1e-12 * lambda {
                prop_assert!(d_t <= 1e-12);
            }
        }
        prop_assert!(s.distance(&op.apply(&p).unwrap(), &p).unwrap() <= 1e-12);
    }

    #[test]
    fn affine_averaging_identity(
        (s, m, c, x) in space_and_dim().prop_flat_map(|s| { let d = s.dim(); (Just(s), matrix(d, 3.0), vector(d, 5.0), vector(d, 10.0)) }),
        lambda in 0.01..=1.0f64,
    ) {
        let op = Operator::affine(s.clone(), m.clone(), c.clone()).unwrap();
        let got = averaged(&op, lambda).unwrap().apply(&x).unwrap();
        let want: Vec<f64> = (0..s.dim())
            .map(|i| {
                let ax: f64 = (0..s.dim()).map(|j| ((1.0 - lambda) * f64::from(u8::from(i == j)) + lambda * m[i][j]) * x.coords()[j]).sum();
                ax + lambda * c.coords()[i]
            })
            .collect();
        prop_assert!(got.sub(&Vector::new(want)).max_abs() <= 1e-12 * (1.0 + got.max_abs()));
    }

    #[test]
    fn displacement_scaling(
        (s, op, x) in space_and_dim().prop_flat_map(|s| { let d = s.dim(); (affine(s.clone(), 3.0), vector(d, 10.0), Just(s)) }).prop_map(|(op, x, s)| (s, op, x)),
        lambda in 0.01..=1.0f64,
    ) {
        let avg = averaged(&op, lambda).unwrap();
        let lhs = x.sub(&avg.apply(&x).unwrap());
        let rhs = x.sub(&op.apply(&x).unwrap()).scale(lambda);
        prop_assert!(s.norm(&lhs.sub(&rhs)).unwrap() <= 1e-12 * (1.0 + s.norm(&x).unwrap() + s.norm(&op.apply(&x).unwrap()).unwrap()));
    }

    #[test]
    fn ratio_matches_averaged_ratio(
        (op, x, y) in space_and_dim().prop_flat_map(|s| { let d = s.dim(); (affine(s, 3.0), vector(d, 10.0), vector(d, 10.0)) }),
        b in 0.0..8.0f64,
        alpha in 0.05..0.95f64,
    ) {
        let avg = averaged(&op, 1.0 / (b + 1.0)).unwrap();
        if let (Some(r), Some(r_avg)) = (ratio(&op, &x, &y, b, alpha, 1e-9).unwrap(), ratio(&avg, &x, &y, 0.0, alpha, 1e-9).unwrap()) {
            prop_assert!(close(r, r_avg, 1e-10), "{r} vs {r_avg}");
        }
    }

    #[test]
    fn raising_the_floor_never_defines_a_ratio(
        (op, x, y) in space_and_dim().prop_flat_map(|s| { let d = s.dim(); (affine(s, 1.5), vector(d, 2.0), vector(d, 2.0)) }),
        lo in 1e-12..1e-3f64,
        factor in 1.0..1e6f64,
    ) {
        if ratio(&op, &x, &y, 0.5, 0.5, lo).unwrap().is_none() {
            prop_assert!(ratio(&op, &x, &y, 0.5, 0.5, lo * factor).unwrap().is_none());
        }
    }

    #[test]
    fn ratio_is_scale_covariant_for_linear_maps(
        (s, m, x, y) in space_and_dim().prop_flat_map(|s| { let d = s.dim(); (Just(s), matrix(d, 3.0), vector(d, 10.0), vector(d, 10.0)) }),
        scale in 0.01..100.0f64,
        b in 0.0..4.0f64,
        alpha in 0.05..0.95f64,
    ) {
        let dim = s.dim();
        let op = Operator::affine(s, m, Vector::zeros(dim)).unwrap();
        let r = ratio(&op, &x, &y, b, alpha, 0.0).unwrap();
        let r_s = ratio(&op, &x.scale(scale), &y.scale(scale), b, alpha, 0.0).unwrap();
        if let (Some(r), Some(r_s)) = (r, r_s) {
            if r.is_finite() {
                prop_assert!(close(r, r_s, 1e-9), "{r} vs {r_s}");
            }
        }
    }

    #[test]
    fn certificates_are_deterministic(op in space_and_dim().prop_flat_map(|s| affine(s, 2.0)), seed in any::<u64>()) {
        let cfg = CertifyConfig { samples: 200, seed, ..CertifyConfig::for_dim(op.dim()) };
        let a = estimate_constant(&op, 1.0, 0.5, &cfg);
        let b = estimate_constant(&op, 1.0, 0.5, &cfg);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn trace_rows_have_equal_step_and_residual(
        (op, x0) in space_and_dim().prop_flat_map(|s| { let d = s.dim(); (affine(s, 0.3), vector(d, 10.0)) }),
        b in 0.0..4.0f64,
    ) {
        let cfg = IterationConfig { max_iter: 500, ..Default::default() };
        if let Ok(r) = solve(&op, b, &cfg, &x0) {
            prop_assert!(r.trace.rows.iter().all(|row| row.step_norm == row.residual));
        }
    }

    #[test]
    fn certified_traces_satisfy_the_bound_chain(
        ((op, b, c), x0) in space_and_dim().prop_flat_map(|s| { let d = s.dim(); (certified(s), vector(d, 10.0)) }),
        a in 0.0..0.99f64,
    ) {
        let cfg = IterationConfig { a: Some(a), ..Default::default() };
        let r = solve(&op, b, &cfg, &x0).unwrap();
        prop_assert!(r.converged);
        prop_assert!(r.x_star.sub(&c).max_abs() <= 1e-12 * (1.0 + c.max_abs()) * (1.0 + b));
        prop_assert!(check_bounds(&r.trace, a).unwrap().passed);
    }

    #[test]
    fn picard_agrees_with_repeated_application(
        (op, x0) in space_and_dim().prop_flat_map(|s| { let d = s.dim(); (affine(s, 0.3), vector(d, 10.0)) }),
    ) {
        let cfg = IterationConfig { lambda: Lambda::Fixed(1.0), max_iter: 60, ..Default::default() };
        let r = solve(&op, 0.0, &cfg, &x0).unwrap();
        for (n, p) in r.trace.points.iter().enumerate() {
            prop_assert_eq!(p, &iterate_n(&op, &x0, n).unwrap());
        }
    }

    #[test]
    fn converged_points_have_small_displacement(
        (op, x0) in space_and_dim().prop_flat_map(|s| { let d = s.dim(); (affine(s, 0.3), vector(d, 10.0)) }),
        b in 0.0..4.0f64,
    ) {
        let cfg = IterationConfig::default();
        let r = solve(&op, b, &cfg, &x0).unwrap();
        prop_assume!(r.converged);
        let s = op.space();
        let avg = averaged(&op, r.lambda).unwrap();
        prop_assert!(s.distance(&r.x_star, &avg.apply(&r.x_star).unwrap()).unwrap() <= cfg.tol);
        prop_assert!(s.distance(&r.x_star, &op.apply(&r.x_star).unwrap()).unwrap() <= cfg.tol * (1.0 + b) + 1e-9);
    }

    #[test]
    fn certified_operators_are_well_posed(
        ((op, b, c), dirs) in space_and_dim().prop_flat_map(|s| { let d = s.dim(); (certified(s), prop::collection::vec(vector(d, 10.0), 1..20)) }),
    ) {
        let probes: Vec<Vector> = dirs.iter().map(|d| c.add(d)).collect();
        let rep = wellposed_check(&op, b, &c, &probes).unwrap();
        prop_assert!(rep.passed);
        let rep = ulam_hyers_check(&op, b, &c, &[1e-1, 1e-3, 1e-6], 10, 3).unwrap();
        prop_assert!(rep.passed && !rep.inconclusive);
    }

    #[test]
    fn periodic_clusters_do_not_depend_on_the_starts(
        (op, b, c) in space_and_dim().prop_flat_map(certified),
        seed_a in any::<u64>(),
        seed_b in any::<u64>(),
    ) {
        let starts = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5).map(|_| ConvexSet::Box { lo: Vector::constant(c.dim(), -10.0), hi: Vector::constant(c.dim(), 10.0) }.sample(op.space(), &mut rng)).collect::<Vec<_>>()
        };
        let a = periodic_point_check(&op, b, &[1, 2, 3], &starts(seed_a), 1e-6).unwrap();
        let z = periodic_point_check(&op, b, &[1, 2, 3], &starts(seed_b), 1e-6).unwrap();
        prop_assert!(a.passed && z.passed);
        let (ca, cz) = (a.clusters.unwrap(), z.clusters.unwrap());
        prop_assert_eq!(ca.len(), 1);
        prop_assert!(ca[0].sub(&cz[0]).max_abs() <= 1e-6);
    }

    #[test]
    fn projection_is_idempotent_and_lands_in_the_set(
        ((s, set), x) in space_with_set().prop_flat_map(|(s, set)| { let d = s.dim(); (Just((s, set)), vector(d, 10.0)) }),
    ) {
        let p = set.project(&s, &x).unwrap();
        prop_assert!(set.contains(&s, &p, 1e-12), "{set:?} {p:?} violation {}", set.violation(&s, &p));
        let pp = set.project(&s, &p).unwrap();
        prop_assert!(pp.sub(&p).max_abs() <= 1e-12 * (1.0 + p.max_abs()));
    }

    #[test]
    fn projection_is_nonexpansive(
        ((s, set), x, y) in space_with_set().prop_flat_map(|(s, set)| { let d = s.dim(); (Just((s, set)), vector(d, 10.0), vector(d, 10.0)) }),
    ) {
        let px = set.project(&s, &x).unwrap();
        let py = set.project(&s, &y).unwrap();
        prop_assert!(s.distance(&px, &py).unwrap() <= s.distance(&x, &y).unwrap() + 1e-12);
    }

    #[test]
    fn projection_satisfies_the_variational_inequality(
        ((s, set), x) in space_with_set().prop_flat_map(|(s, set)| { let d = s.dim(); (Just((s, set)), vector(d, 10.0)) }),
        seed in any::<u64>(),
    ) {
        let p = set.project(&s, &x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let z = set.sample(&s, &mut rng);
            prop_assert!(s.inner(&x.sub(&p), &z.sub(&p)).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn vip_fixed_points_solve_the_inequality(
        ((s, set), c) in space_with_set().prop_flat_map(|(s, set)| { let d = s.dim(); (Just((s, set)), vector(d, 5.0)) }),
        mu in 0.5..2.0f64,
        seed in any::<u64>(),
    ) {
        // S x = mu x + c is strongly monotone; with gamma = 1 / (2 mu) the
        // projected map is a contraction.
        let dim = s.dim();
        let rows = (0..dim).map(|i| (0..dim).map(|j| if i == j { mu } else { 0.0 }).collect()).collect();
        let inner = Operator::affine(s.clone(), rows, c).unwrap();
        let problem = VipProblem::new(inner, 0.5 / mu, set.clone()).unwrap();
        let cfg = IterationConfig { tol: 1e-13, ..Default::default() };
        let r = solve_vip(&problem, 0.0, &cfg, &Vector::zeros(dim)).unwrap();
        prop_assert!(r.converged);
        prop_assert!(vi_residual(&problem, &r.x_star, 200, seed).unwrap() >= -1e-9);

        // Conversely a point of the set violating the inequality is not fixed.
        let op = vip_operator(&problem).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = set.sample(&s, &mut rng);
        let w = set.project(&s, &w).unwrap();
        if vi_residual(&problem, &w, 200, seed).unwrap() < -1e-6 {
            prop_assert!(s.distance(&w, &op.apply(&w).unwrap()).unwrap() > 0.0);
        }
    }

    #[test]
    fn configs_round_trip(
        (dim, weights, m, c, x0) in (1usize..4).prop_flat_map(|d| (Just(d), prop::collection::vec(0.1..10.0f64, d), matrix(d, 3.0), vector(d, 5.0), vector(d, 5.0))),
        b in 0.0..5.0f64,
        seed in 0u64..1 << 62,
        tol in 1e-14..1e-2f64,
    ) {
        let text = format!(
            "seed = {seed}\n[space]\ndim = {dim}\nweights = {weights:?}\n[operator]\nkind = \"affine\"\nmatrix = {m:?}\noffset = {:?}\n[iterate]\nb = {b:?}\ntol = {tol:?}\nx0 = {:?}\n",
            c.coords(),
            x0.coords(),
        );
        let cfg = kannan_fixpoint::cli::config::config_from_str(&text, ConfigFormat::Toml).unwrap();
        for format in [ConfigFormat::Toml, ConfigFormat::Json] {
            let back = kannan_fixpoint::cli::config::config_from_str(&write_config(&cfg, format), format).unwrap();
            prop_assert_eq!(&back, &cfg);
        }
        let _: &ProblemConfig = &cfg;
    }
}
