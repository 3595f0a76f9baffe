//! Pinned outputs of the default benchmark run. A change here means the
//! numerics changed; update the pins only after checking why.

use regime_mfg::*;

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs()
}

#[test]
fn default_equilibrium_is_pinned() {
    let b = BenchmarkInstance::default();
    let (m, s) = (b.model().unwrap(), b.profit().unwrap());
    let eq = solve_equilibrium(&m, &s, &EquilibriumOptions::default()).unwrap();
    let pins = [
        ("theta_star", eq.theta_star, 1.3326295401872932),
        ("theta_lower", eq.bracket.theta_lower, 0.4985880337735209),
        ("theta_upper", eq.bracket.theta_upper, 83.83238430468381),
        ("lambda_bar", eq.solution_at_star.lam_bar.unwrap(), 0.9623267817992955),
    ];
    for (name, got, want) in pins {
        assert!(close(got, want, 1e-8), "{name}: {got} (pinned {want})");
    }
    assert_eq!(eq.trace.len(), 37);
    assert_eq!(eq.method, Method::Bisection);
}
