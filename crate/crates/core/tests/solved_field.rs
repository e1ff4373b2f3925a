//! Checks on the 5% perturbed solution at 256x128.

use fracsing::energy::{energy_at, energy_derivative, energy_limit_with, EnergyError, EnergyRule};
use fracsing::extension::{
    neumann_trace, singular_extension, solve_nonlinear_annulus, Dirichlet, MeshSpec, SolverOptions,
};
use fracsing::Params;

#[test]
fn perturbed_solution_diagnostics() {
    let params = Params::new(3, 0.5, 1.8).unwrap();
    let exact = singular_extension(&params).unwrap();
    let (ri, ro) = (0.22, 2.3);
    let data = Dirichlet::from_field(&exact, ri, ro, 1.05);
    let out = solve_nonlinear_annulus(&params, ri, ro, &data, MeshSpec::default(), SolverOptions::default()).unwrap();
    assert!(out.report.iterations >= 1);
    let u = &out.field;
    let rule = EnergyRule::for_params(&params, 128).unwrap();

    // derivative formula against a centred difference of E
    for r in [0.5, 1.0, 2.0] {
        let h = 1e-3 * r;
        let fd =
            (energy_at(u, r + h, &params, &rule).unwrap() - energy_at(u, r - h, &params, &rule).unwrap()) / (2.0 * h);
        let d = energy_derivative(u, r, &params, &rule).unwrap();
        assert!(d > 0.0);
        assert!((fd - d).abs() <= 1e-4 * d.abs().max(1.0), "r={r}: {d} vs {fd}");
    }

    // grid Neumann trace against the boundary nonlinearity
    let lhs = neumann_trace(u, 1.0, &params).unwrap();
    let rhs = u.value(1.0, 0.0).unwrap().powf(1.8);
    assert!((lhs - rhs).abs() <= 1e-4 * rhs, "{lhs} vs {rhs}");

    // the annulus is too narrow for E(0+) to settle; this must be reported
    match energy_limit_with(u, &params, &rule, 1e-2) {
        Err(EnergyError::NonConvergentSequence { values, .. }) => assert!(values.len() >= 3),
        other => panic!("expected a non-convergent sequence, got {other:?}"),
    }
}
