use nalgebra::DMatrix;
use proptest::prelude::*;

use regime_mfg::model::search_points;
use regime_mfg::*;

/// Benchmark parameters whose thresholds for θ in [0.5, 8] fall inside the
/// `search_points` window `[1e-6, 1e6]`.
fn instance() -> impl Strategy<Value = BenchmarkInstance> {
    (0.3..2.0f64, 0.3..2.0f64, 0.1..0.5f64, 0.1..0.5f64, 0.1..3.0f64, 0.3..0.6f64, 0.5..3.0f64, 0.5..2.0f64, 0.3..0.9f64)
        .prop_map(|(d0, d1, s0, s1, q, beta, kappa_star, k1, ratio)| BenchmarkInstance {
            beta,
            kappa_star,
            delta: vec![d0, d1],
            sigma: vec![s0, s1],
            rate_matrix: vec![vec![-q, q], vec![q, -q]],
            k1,
            k2: ratio * k1,
            theta_min: 0.05,
        })
}

fn generator() -> impl Strategy<Value = DMatrix<f64>> {
    (2usize..=4).prop_flat_map(|d| {
        prop::collection::vec(0.05..5.0f64, d * d).prop_map(move |w| {
            let mut q = DMatrix::from_fn(d, d, |i, j| if i == j { 0.0 } else { w[i * d + j] });
            for i in 0..d {
                let s: f64 = q.row(i).sum();
                q[(i, i)] = -s;
            }
            q
        })
    })
}

fn band() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (0.3..3.0f64, 0.3..3.0f64, 1.0..20.0f64, 1.0..20.0f64).prop_map(|(a0, a1, w0, w1)| (vec![a0, a1], vec![a0 + w0, a1 + w1]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chain_law_is_invariant_under_time_rescaling(q in generator(), c in 0.01..100.0f64) {
        let p = chain_stationary(&q).unwrap();
        let pc = chain_stationary(&(q.clone() * c)).unwrap();
        for (a, b) in p.iter().zip(&pc) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn benchmark_expansion_satisfies_the_assumptions(b in instance()) {
        let (m, s) = (b.model().unwrap(), b.profit().unwrap());
        let xs = search_points(m.state_interval(), 301);
        let thetas: Vec<f64> = (0..5).map(|k| 0.5 * 2f64.powi(k)).collect();
        let report = validate_assumptions(&m, &s, &xs, &thetas).unwrap();
        prop_assert!(report.all_passed(), "{:?}", report);
    }

    #[test]
    fn threshold_roots_decrease_in_theta(b in instance()) {
        let (m, s) = (b.model().unwrap(), b.profit().unwrap());
        let xs = search_points(m.state_interval(), 301);
        let thetas: Vec<f64> = (0..5).map(|k| 0.5 * 2f64.powi(k)).collect();
        let report = validate_assumptions(&m, &s, &xs, &thetas).unwrap();
        for i in 0..2 {
            let rows: Vec<_> = report.thresholds.iter().filter(|t| t.regime == i).collect();
            prop_assert_eq!(rows.len(), thetas.len());
            for w in rows.windows(2) {
                prop_assert!(w[0].theta < w[1].theta);
                prop_assert!(w[1].x_minus.unwrap() < w[0].x_minus.unwrap());
                prop_assert!(w[1].x_plus.unwrap() < w[0].x_plus.unwrap());
            }
        }
    }

    #[test]
    fn gamma_map_reflects_and_is_idempotent(
        steps in prop::collection::vec((-1.0..1.0f64, 0usize..2), 1..300),
        (alpha, beta) in band(),
        start in -5.0..25.0f64,
    ) {
        let mut raw = Vec::with_capacity(steps.len());
        let mut acc = start;
        for (dx, _) in &steps {
            raw.push(acc);
            acc += dx;
        }
        let y: Vec<usize> = steps.iter().map(|s| s.1).collect();
        let r = gamma_map(&raw, &y, &alpha, &beta);
        let tol = 1e-12 * (1.0 + start.abs() + raw.len() as f64);
        for k in 0..raw.len() {
            let (lo, hi) = (alpha[y[k]], beta[y[k]]);
            prop_assert!(r.x[k] >= lo - tol && r.x[k] <= hi + tol);
            let (dp, dm) = if k == 0 {
                (r.xi_plus[0], r.xi_minus[0])
            } else {
                (r.xi_plus[k] - r.xi_plus[k - 1], r.xi_minus[k] - r.xi_minus[k - 1])
            };
            prop_assert!(dp >= 0.0 && dm >= 0.0);
            // The control acts only at the barrier it pushes from.
            if dp > 0.0 {
                prop_assert!((r.x[k] - lo).abs() <= tol);
            }
            if dm > 0.0 {
                prop_assert!((r.x[k] - hi).abs() <= tol);
            }
        }
        let again = gamma_map(&r.x, &y, &alpha, &beta);
        for k in 0..raw.len() {
            prop_assert!((again.x[k] - r.x[k]).abs() <= tol);
            prop_assert!(again.xi_plus[k] <= tol && again.xi_minus[k] <= tol);
        }
    }

    #[test]
    fn projection_paths_stay_in_the_band(seed in any::<u64>(), (alpha, beta) in band(), frac in 0.0..1.0f64) {
        let m = BenchmarkInstance::default().model().unwrap();
        let x0 = alpha[0] + frac * (beta[0] - alpha[0]);
        let p = simulate_reflected(&m, &alpha, &beta, x0, 0, 2.0, 1e-3, seed).unwrap();
        let q = simulate_reflected(&m, &alpha, &beta, x0, 0, 2.0, 1e-3, seed).unwrap();
        prop_assert_eq!(&p, &q);
        for k in 0..p.x.len() {
            let i = p.y[k];
            prop_assert!(alpha[i] <= p.x[k] && p.x[k] <= beta[i]);
            if k > 0 {
                let dp = p.xi_plus[k] - p.xi_plus[k - 1];
                let dm = p.xi_minus[k] - p.xi_minus[k - 1];
                prop_assert!(dp >= 0.0 && dm >= 0.0);
                if dp > 0.0 {
                    prop_assert_eq!(p.x[k], alpha[i]);
                }
                if dm > 0.0 {
                    prop_assert_eq!(p.x[k], beta[i]);
                }
            }
        }
    }

    #[test]
    fn stationary_law_is_a_distribution((alpha, beta) in band(), q in 0.1..5.0f64) {
        let b = BenchmarkInstance { rate_matrix: vec![vec![-q, q], vec![q, -q]], ..Default::default() };
        let m = b.model().unwrap();
        let law = solve_stationary(&m, &alpha, &beta, 201).unwrap();
        for i in 0..2 {
            let col = law.regime(i);
            prop_assert!(col.windows(2).all(|w| w[1] >= w[0] - 1e-10));
            let ka = law.x.iter().position(|&x| x == alpha[i]).unwrap();
            let kb = law.x.iter().position(|&x| x == beta[i]).unwrap();
            prop_assert_eq!(law.value(ka, i), 0.0);
            prop_assert_eq!(law.value(kb, i), law.p[i]);
        }
        prop_assert!((law.total_mass() - 1.0).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // Uniform grids need x_+/x_− moderate; wider spreads are reported as
    // `InvalidGrid` by the fitting step, so the draw is kept away from them.
    #[test]
    fn value_lies_between_obstacles_and_decreases(
        b in instance().prop_filter("resolvable spread", |b| b.beta <= 0.5 && b.k2 >= 0.4 * b.k1),
        theta in 0.5..5.0f64,
    ) {
        let (m, s) = (b.model().unwrap(), b.profit().unwrap());
        let o = SolverOptions::default();
        let g = Grid::fitted(&m, &s, theta, 0.25, 401, &o).unwrap();
        let sol = solve_vi(&m, &s, theta, g, &o).unwrap();
        prop_assert!(sol.residual <= o.tol);
        for i in 0..2 {
            let v = sol.regime_values(i);
            prop_assert!(v.iter().all(|&x| s.k2 <= x && x <= s.k1));
            prop_assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-9));
            prop_assert!(sol.alpha[i] < sol.beta[i]);
        }
    }
}
