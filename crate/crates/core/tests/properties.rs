use lmpfa_core::assembly::{assemble_operator, SchemeSelector};
use lmpfa_core::grid::{build_uniform_grid, Axis1D, Grid2D};
use lmpfa_core::harness::{l2_relative_error, run_table, RunOptions};
use lmpfa_core::lcp::{march_lcp, PsorSettings};
use lmpfa_core::lmpfa::transmissibility;
use lmpfa_core::model::{CellTensor, OptionStyle, PenaltyParams, ProblemSpec};
use lmpfa_core::reference::{analytic_price, bivariate_cdf, mc_price, norm_cdf, AnalyticInputs};
use lmpfa_core::timestepper::{
    march, penalty_jacobian_diag, penalty_term, solve, SolverSettings, StepSystem, TimeGrid,
};
use proptest::prelude::*;

fn spd_tensor() -> impl Strategy<Value = CellTensor<f64>> {
    (0.05f64..5.0, 0.05f64..5.0, -0.95f64..0.95).prop_map(|(a, b, c)| CellTensor {
        m11: a,
        m12: c * (a * b).sqrt(),
        m22: b,
    })
}

/// Strictly increasing nodes from 0 with `n` interior points and random spacing.
fn axis(n: usize) -> impl Strategy<Value = Axis1D<f64>> {
    proptest::collection::vec(0.2f64..3.0, n + 1).prop_map(|gaps| {
        let mut nodes = vec![0.0];
        for g in gaps {
            let last = *nodes.last().unwrap();
            nodes.push(last + g);
        }
        Axis1D::from_nodes(nodes).unwrap()
    })
}

fn nonuniform_grid() -> impl Strategy<Value = Grid2D<f64>> {
    (2usize..7).prop_flat_map(|n| (axis(n), axis(n))).prop_map(|(x, y)| Grid2D::from_axes(x, y).unwrap())
}

/// Grid plus a valid interaction-volume index.
fn grid_and_volume() -> impl Strategy<Value = (Grid2D<f64>, usize, usize)> {
    nonuniform_grid().prop_flat_map(|g| {
        let max = g.n() + 1;
        (Just(g), 1..=max, 1..=max)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn transmissibility_rows_sum_to_zero(
        (g, i, j) in grid_and_volume(),
        t0 in spd_tensor(), t1 in spd_tensor(), t2 in spd_tensor(), t3 in spd_tensor(),
    ) {
        let iv = g.interaction_volume(i, j).unwrap();
        let t = transmissibility(&iv, &[t0, t1, t2, t3]).unwrap();
        prop_assert!(t.max_relative_row_sum() < 1e-12, "{}", t.max_relative_row_sum());
    }

    #[test]
    fn transmissibility_is_exact_for_affine_fields(
        (g, i, j) in grid_and_volume(),
        m in spd_tensor(),
        c in (-10.0f64..10.0, -5.0f64..5.0, -5.0f64..5.0),
    ) {
        let iv = g.interaction_volume(i, j).unwrap();
        let t = transmissibility(&iv, &[m; 4]).unwrap();
        let v = iv.corners.map(|p| c.0 + c.1 * p[0] + c.2 * p[1]);
        let got = t.fluxes(v);
        let flux = m.apply([c.1, c.2]);
        let scale = iv.normals.iter().map(|n| (n[0] * flux[0]).abs() + (n[1] * flux[1]).abs()).fold(0.0, f64::max);
        for p in 0..4 {
            let exact = iv.normals[p][0] * flux[0] + iv.normals[p][1] * flux[1];
            prop_assert!((got[p] - exact).abs() <= 1e-10 * scale.max(1e-300), "half-edge {p}: {} vs {exact}", got[p]);
        }
    }

    #[test]
    fn diagonal_tensor_reduces_to_two_point_flux(
        n in 2usize..12,
        x_max in 1.0f64..500.0,
        y_max in 1.0f64..500.0,
        m11 in 0.01f64..10.0,
        m22 in 0.01f64..10.0,
        pick in (0.0f64..1.0, 0.0f64..1.0),
    ) {
        let g = build_uniform_grid(n, x_max, y_max).unwrap();
        let i = 1 + ((n + 1) as f64 * pick.0) as usize % (n + 1);
        let j = 1 + ((n + 1) as f64 * pick.1) as usize % (n + 1);
        let iv = g.interaction_volume(i, j).unwrap();
        let m = CellTensor { m11, m12: 0.0, m22 };
        let t = transmissibility(&iv, &[m; 4]).unwrap();
        let [[x0, y0], _, [x1, y1], _] = iv.corners;
        let [xm, ym] = iv.center;
        // (upstream corner, downstream corner, two-point coefficient)
        let expected = [
            (0, 1, m11 * (ym - y0) / (x1 - x0)),
            (1, 2, m22 * (x1 - xm) / (y1 - y0)),
            (3, 2, m11 * (y1 - ym) / (x1 - x0)),
            (0, 3, m22 * (xm - x0) / (y1 - y0)),
        ];
        for (p, &(a, b, w)) in expected.iter().enumerate() {
            for q in 0..4 {
                let want = if q == b { w } else if q == a { -w } else { 0.0 };
                prop_assert!((t.t[p][q] - want).abs() <= 1e-10 * w, "T[{p}][{q}] = {} want {want}", t.t[p][q]);
            }
        }
    }

    #[test]
    fn penalty_jacobian_matches_central_differences(
        state in proptest::collection::vec((0.0f64..150.0, 0.0f64..150.0), 1..20),
        beta in 1.0f64..1000.0,
        k in prop_oneof![Just(0.5f64), Just(1.0), 0.3f64..1.0],
    ) {
        let penalty = PenaltyParams { beta, k, epsilon: 1e-6 };
        let h = 1e-6;
        // stay clear of the smoothed kink, where a step of h spans the whole smoothing radius
        prop_assume!(state.iter().all(|(v, p)| (p - v).abs() > 1e-3));
        let (v, payoff): (Vec<f64>, Vec<f64>) = state.into_iter().unzip();
        let jac = penalty_jacobian_diag(&v, &payoff, &penalty).unwrap();
        for idx in 0..v.len() {
            let mut up = v.clone();
            let mut down = v.clone();
            up[idx] += h;
            down[idx] -= h;
            let fd = (penalty_term(&up, &payoff, &penalty).unwrap()[idx]
                - penalty_term(&down, &payoff, &penalty).unwrap()[idx])
                / (2.0 * h);
            prop_assert!((fd - jac[idx]).abs() <= 1e-4 * (1.0 + jac[idx].abs()), "{fd} vs {}", jac[idx]);
        }
    }

    #[test]
    fn bivariate_marginalisation(a in -4.0f64..4.0, b in -4.0f64..4.0, rho in -0.99f64..0.99) {
        let lhs = bivariate_cdf(a, b, rho) + bivariate_cdf(a, -b, -rho);
        prop_assert!((lhs - norm_cdf(a)).abs() < 1e-9, "{lhs} vs {}", norm_cdf(a));
    }

    #[test]
    fn bivariate_arcsine_value(rho in -0.999f64..0.999) {
        let want = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
        prop_assert!((bivariate_cdf(0.0, 0.0, rho) - want).abs() < 1e-9);
    }

    #[test]
    fn analytic_price_is_monotone(s1 in 50.0f64..200.0, s2 in 50.0f64..200.0, t in 0.01f64..2.0) {
        let p = AnalyticInputs::new(s1, s2, 100.0, t, 0.3, 0.3, 0.3, 0.08);
        let base = analytic_price(&p);
        let d = 1e-3;
        let bumped = [
            AnalyticInputs { s1: s1 + d, ..p },
            AnalyticInputs { s2: s2 + d, ..p },
            AnalyticInputs { maturity: t + d, ..p },
        ];
        for q in bumped {
            prop_assert!(analytic_price(&q) >= base - 1e-12);
        }
    }
}

#[test]
fn bivariate_identities_on_a_grid() {
    let pts = [-3.0, -1.2, -0.3, 0.0, 0.4, 1.1, 2.5];
    for &a in &pts {
        for &b in &pts {
            for &rho in &[-0.9, -0.5, 0.0, 0.3, 0.8] {
                let lhs = bivariate_cdf(a, b, rho) + bivariate_cdf(a, -b, -rho);
                assert!((lhs - norm_cdf(a)).abs() < 1e-9, "({a}, {b}, {rho})");
                // symmetry in the two limits
                assert!((bivariate_cdf(a, b, rho) - bivariate_cdf(b, a, rho)).abs() < 1e-12);
            }
        }
    }
    // 1/4 + asin(0.3)/(2π) = 0.2984934...
    assert!((bivariate_cdf(0.0, 0.0, 0.3) - 0.298_493_4).abs() < 1e-7);
}

#[test]
fn zero_strike_price_matches_monte_carlo() {
    let p = AnalyticInputs::new(100.0, 95.0, 0.0, 0.5, 0.3, 0.25, 0.3, 0.08);
    let mc = mc_price(&p, 1_000_000, 7);
    let a = analytic_price(&p);
    assert!((a - mc.price).abs() < 3.0 * mc.std_error, "{a} vs {} ± {}", mc.price, mc.std_error);
}

#[test]
fn zero_volatility_monte_carlo_is_exact() {
    let p = AnalyticInputs::new(100.0, 90.0, 95.0, 0.5, 0.0, 0.0, 0.3, 0.08);
    let mc = mc_price(&p, 10_000, 3);
    let grow = (0.08f64 * 0.5).exp();
    let want = (-0.08f64 * 0.5).exp() * (100.0 * grow - 95.0);
    assert!((mc.price - want).abs() < 1e-10);
    assert_eq!(mc.std_error, 0.0);
}

#[test]
fn monte_carlo_error_halves_with_four_times_the_paths() {
    let p = AnalyticInputs::new(100.0, 100.0, 100.0, 1.0 / 12.0, 0.3, 0.3, 0.3, 0.08);
    let a = mc_price(&p, 100_000, 11).std_error;
    let b = mc_price(&p, 400_000, 11).std_error;
    assert!((a / b - 2.0).abs() < 0.4, "{a} / {b}");
}

fn american(n: usize, beta: f64) -> (ProblemSpec<f64>, Grid2D<f64>) {
    let mut spec = ProblemSpec::american_table();
    spec.penalty.beta = beta;
    (spec, build_uniform_grid(n, 300.0, 300.0).unwrap())
}

#[test]
fn zero_penalty_american_equals_european_bitwise() {
    let (mut spec, g) = american(12, 0.0);
    let time = TimeGrid::new(16, spec.market.maturity).unwrap();
    let settings = SolverSettings::default();
    for scheme in SchemeSelector::ALL {
        let am = solve(&spec, scheme, &g, &time, &settings, None).unwrap();
        spec.style = OptionStyle::European;
        let eu = solve(&spec, scheme, &g, &time, &settings, None).unwrap();
        spec.style = OptionStyle::American;
        let same = am.surface.values().iter().zip(eu.surface.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same, "{scheme}");
    }
}

#[test]
fn zero_penalty_table_entries_match_european() {
    let base = RunOptions { grid: Some(vec![9]), steps: Some(vec![8]), ..Default::default() };
    let eu = base.clone().resolve().unwrap();
    let mut am = eu.clone();
    am.spec.style = OptionStyle::American;
    am.spec.penalty.beta = 0.0;
    // an American call-on-max with no penalty against a stored European reference
    let surface = lmpfa_core::harness::analytic_surface(&eu.spec, &eu.grid(9).unwrap()).unwrap();
    let reference = lmpfa_core::harness::Reference::Surface(surface);
    let a = lmpfa_core::harness::run_table_with(&am, &reference).unwrap();
    let e = lmpfa_core::harness::run_table_with(&eu, &reference).unwrap();
    assert_eq!(a.entries, e.entries);
}

#[test]
fn penalty_solution_is_close_to_psor() {
    for (n, beta) in [(9, 256.0), (15, 256.0), (15, 1.0e4)] {
        let (spec, g) = american(n, beta);
        let time = TimeGrid::new(32, spec.market.maturity).unwrap();
        for theta in [0.5, 1.0] {
            let settings = SolverSettings { theta, ..Default::default() };
            let op = assemble_operator(SchemeSelector::FittedLmpfaUp2, &g, &spec).unwrap();
            let pen = march(&spec, &op, &g, &time, &settings, None).unwrap().surface;
            let lcp = march_lcp(&spec, &op, &g, &time, theta, &PsorSettings::default()).unwrap();
            let gap = pen.values().iter().zip(lcp.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let bound = 10.0 * beta.powf(-spec.penalty.k) * spec.market.strike;
            assert!(gap <= bound, "N={n} β={beta} θ={theta}: gap {gap} > {bound}");
        }
    }
}

#[test]
fn penalty_violation_shrinks_with_beta() {
    let mut last = f64::INFINITY;
    for beta in [128.0, 256.0, 512.0] {
        let (spec, g) = american(19, beta);
        let time = TimeGrid::new(32, spec.market.maturity).unwrap();
        let sol = solve(&spec, SchemeSelector::LmpfaUp1, &g, &time, &SolverSettings::default(), None).unwrap();
        let worst = sol.diagnostics.last().unwrap().min_excess.min(0.0).abs();
        assert!(worst <= last + 1e-12, "β={beta}: {worst} > {last}");
        last = worst;
    }
}

#[test]
fn newton_tail_is_quadratic() {
    let (mut spec, g) = american(19, 256.0);
    spec.penalty.epsilon = 0.0;
    let time = TimeGrid::new(64, spec.market.maturity).unwrap();
    let settings = SolverSettings { newton_tol: 1e-14, ..Default::default() };
    let op = assemble_operator(SchemeSelector::FittedLmpfaUp2, &g, &spec).unwrap();
    let system = StepSystem::new(&op.to_csr(), time.dt(), &settings).unwrap();
    let payoff = lmpfa_core::model::payoff_surface(&spec, &g).interior();
    let f = op.boundary_vector(|i, j| {
        let [x, y] = g.node(i, j);
        spec.boundary_node_value(x, y, 0.0)
    });
    // start a little inside the exercise region so several iterations are needed
    let v0: Vec<f64> = payoff.iter().map(|p| p * 0.97).collect();
    let mut history = Vec::new();
    system.step_traced(&v0, &f, &f, &spec.penalty, &payoff, Some(&mut history)).unwrap();
    assert!(history.len() >= 3, "{history:?}");
    // pairs with r_n below 1e-8 would only probe the round-off floor
    let pairs: Vec<(f64, f64)> =
        history.windows(2).map(|w| (w[0], w[1])).filter(|&(a, _)| a < 1e-3 && a > 1e-8).collect();
    assert!(!pairs.is_empty(), "no iteration pair in the asymptotic range: {history:?}");
    for (a, b) in pairs {
        assert!(b <= 1e3 * a * a, "{b} > 1e3 · {a}²; history {history:?}");
    }
}

#[test]
fn european_table_is_deterministic_and_small() {
    let c = RunOptions {
        grid: Some(vec![9, 14]),
        steps: Some(vec![16]),
        scheme: Some(SchemeSelector::ALL.to_vec()),
        ..Default::default()
    }
    .resolve()
    .unwrap();
    let a = run_table(&c).unwrap();
    let b = run_table(&c).unwrap();
    assert_eq!(a.to_csv().as_bytes(), b.to_csv().as_bytes());
    for row in &a.entries {
        for e in row {
            let v = e.value().unwrap();
            assert!(v.is_finite() && (0.0..0.1).contains(&v), "{v}");
        }
    }
}

#[test]
fn stored_reference_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ref.txt");
    let opts = RunOptions {
        option: Some(OptionStyle::American),
        grid: Some(vec![9]),
        steps: Some(vec![8]),
        reference: Some(lmpfa_core::harness::ReferenceMode::SelfRefined { n: 19, steps: 16 }),
        ..Default::default()
    };
    let config = opts.clone().resolve().unwrap();
    let fine = lmpfa_core::harness::build_reference(&config).unwrap();
    let lmpfa_core::harness::Reference::Surface(surface) = &fine else { panic!("expected a surface") };
    lmpfa_core::harness::dump_surface(surface, &path).unwrap();
    let stored = RunOptions { reference: Some(lmpfa_core::harness::ReferenceMode::StoredSurface(path)), ..opts }
        .resolve()
        .unwrap();
    assert_eq!(run_table(&stored).unwrap().entries, run_table(&config).unwrap().entries);
}

#[test]
fn relative_error_is_scale_invariant() {
    let c = RunOptions { grid: Some(vec![9]), ..Default::default() }.resolve().unwrap();
    let g = c.grid(9).unwrap();
    let r = lmpfa_core::harness::analytic_surface(&c.spec, &g).unwrap();
    let scaled = lmpfa_core::surface::PriceSurface::new(
        &g,
        r.values().iter().map(|v| 1.01 * v).collect(),
        r.tau,
        &r.payoff,
    );
    assert!((l2_relative_error(&scaled, &r, &g).unwrap() - 0.01).abs() < 1e-14);
}
