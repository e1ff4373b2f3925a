use fracsing::fracops::{frac_laplacian_radial, singular_solution_trace};
use serde::Serialize;

use crate::commands::{emit, param_record};
use crate::manifest::RunManifest;
use crate::settings::Settings;
use crate::Failure;

pub const ORACLE_TOL: f64 = 1e-6;

#[derive(Debug, Serialize)]
pub struct OracleCheck {
    /// `(-Laplace)^sigma u_A` at `|x| = 1` by principal-value quadrature.
    pub laplacian_at_1: f64,
    pub quadrature_error: f64,
    /// `u_A(1)^p = A^p`.
    pub a_pow_p: f64,
    pub relative_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct ConstantReport {
    pub n: usize,
    pub sigma: f64,
    pub p: f64,
    pub beta: f64,
    pub p_star: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    pub alpha: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleCheck>,
}

pub fn report(settings: &Settings) -> Result<ConstantReport, Failure> {
    let params = settings.params()?;
    let d = params.derived().map_err(|e| Failure::BadInput(e.to_string()))?;
    let oracle = if settings.with_oracle {
        let tol = settings.tol.unwrap_or(ORACLE_TOL);
        let u = singular_solution_trace(&params).map_err(|e| Failure::Verification(e.to_string()))?;
        let pv = frac_laplacian_radial(&u, 1.0, &params).map_err(|e| Failure::Verification(e.to_string()))?;
        let a_pow_p = d.a.powf(params.p());
        let dev = (pv.value - a_pow_p).abs() / a_pow_p;
        Some(OracleCheck {
            laplacian_at_1: pv.value,
            quadrature_error: pv.error,
            a_pow_p,
            relative_deviation: dev,
            tolerance: tol,
            pass: dev <= tol,
        })
    } else {
        None
    };
    Ok(ConstantReport {
        n: params.n(),
        sigma: params.sigma(),
        p: params.p(),
        beta: d.beta,
        p_star: d.p_star,
        j1: d.j1,
        alpha: d.alpha,
        lambda: d.a.powf(params.p() - 1.0),
        a: d.a,
        oracle,
    })
}

pub fn run(settings: &Settings) -> Result<(), Failure> {
    let rep = report(settings)?;
    eprintln!(
        "n={} sigma={} p={}: A = {:.16e}, beta = {}, p* = {}, J1 = {}",
        rep.n, rep.sigma, rep.p, rep.a, rep.beta, rep.p_star, rep.j1
    );
    let mut manifest = RunManifest::new("constant", param_record(settings));
    manifest.setting("with_oracle", settings.with_oracle);
    if let Some(o) = &rep.oracle {
        eprintln!("oracle deviation {:.3e} (tolerance {:.1e})", o.relative_deviation, o.tolerance);
        manifest.tolerance("oracle_relative", o.tolerance);
    }
    emit(settings, &rep, "constant.json", manifest)?;
    match &rep.oracle {
        Some(o) if !o.pass => Err(Failure::Verification(format!(
            "oracle deviation {:.3e} exceeds {:.1e}",
            o.relative_deviation, o.tolerance
        ))),
        _ => Ok(()),
    }
}
