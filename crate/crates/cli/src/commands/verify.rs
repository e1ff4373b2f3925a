use std::sync::Arc;

use clap::ValueEnum;
use fracsing::energy::{energy_at, energy_curve, scaling_residual, EnergyRule};
use fracsing::extension::singular_extension;
use fracsing::fracops::{log_grid, pde_residual, singular_solution_trace, RadialTrace};
use fracsing::kelvin::{
    blowup_limit, decade_windows, default_lambda_grid, moving_sphere_scan, transformed_equation_residual,
    Classification, KelvinTrace, PointTrace, ScanSpec,
};
use fracsing::Params;
use serde::Serialize;

use crate::commands::{emit, param_record};
use crate::manifest::RunManifest;
use crate::settings::Settings;
use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Pde,
    Energy,
    Kelvin,
    MovingSphere,
    Blowup,
    Scaling,
    All,
}

impl Suite {
    const EACH: [Suite; 6] =
        [Suite::Pde, Suite::Energy, Suite::Kelvin, Suite::MovingSphere, Suite::Blowup, Suite::Scaling];

    fn name(self) -> &'static str {
        match self {
            Suite::Pde => "pde",
            Suite::Energy => "energy",
            Suite::Kelvin => "kelvin",
            Suite::MovingSphere => "moving-sphere",
            Suite::Blowup => "blowup",
            Suite::Scaling => "scaling",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `measured <= tolerance`.
    fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, pass: measured <= tolerance }
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), measured: if ok { 0.0 } else { 1.0 }, tolerance: 0.0, pass: ok }
    }

    fn error(name: impl Into<String>, e: impl std::fmt::Display) -> Self {
        let mut c = Self::flag(format!("{}: {e}", name.into()), false);
        c.measured = f64::NAN;
        c
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub checks: Vec<Check>,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub n: usize,
    pub sigma: f64,
    pub p: f64,
    pub quad_order: usize,
    pub suites: Vec<SuiteReport>,
    pub pass: bool,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn pde(params: &Params) -> Vec<Check> {
    let u = match singular_solution_trace(params) {
        Ok(u) => u,
        Err(e) => return vec![Check::error("singular trace", e)],
    };
    let radii = [0.3, 1.0, 3.0];
    match pde_residual(&u, params, &radii) {
        Ok(res) => radii
            .iter()
            .zip(res)
            .map(|(&r, d)| {
                let rhs = u.eval(r).map(|v| v.powf(params.p())).unwrap_or(f64::NAN);
                Check::at_most(format!("relative residual at r={r}"), (d / rhs).abs(), 1e-5)
            })
            .collect(),
        Err(e) => vec![Check::error("pde residual", e)],
    }
}

fn energy(params: &Params, order: usize) -> Vec<Check> {
    let run = || -> Result<Vec<Check>, String> {
        let u = singular_extension(params).map_err(|e| e.to_string())?;
        let rule = EnergyRule::for_params(params, order).map_err(|e| e.to_string())?;
        let c = energy_curve(&u, (0.25, 4.0), 9, params, &rule).map_err(|e| e.to_string())?;
        let scale = c.e_values.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let dmax = c.de_formula.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        Ok(vec![
            Check::at_most("relative spread of E on [0.25, 4]", c.relative_spread(), 1e-5),
            Check::at_most("max |dE/dr| / max |E|", dmax / scale, 1e-8),
            Check::flag("monotone_ok on every interval", c.all_monotone()),
        ])
    };
    run().unwrap_or_else(|e| vec![Check::error("energy", e)])
}

fn kelvin(params: &Params) -> Vec<Check> {
    let run = || -> Result<Vec<Check>, String> {
        let n = params.n();
        let sigma = params.sigma();
        let point = |v: &[f64]| -> Vec<f64> {
            let mut p = vec![0.0; n];
            for (k, &x) in v.iter().take(n).enumerate() {
                p[k] = x;
            }
            p
        };
        let u: Arc<dyn PointTrace<f64>> = Arc::new(singular_solution_trace(params).map_err(|e| e.to_string())?);
        let c = point(&[0.4, -0.2, 0.1]);
        let lam = 0.7;
        let once = Arc::new(KelvinTrace::new(u.clone(), c.clone(), lam, n, sigma).map_err(|e| e.to_string())?);
        let twice = KelvinTrace::new(once.clone(), c.clone(), lam, n, sigma).map_err(|e| e.to_string())?;
        let mut inv = 0.0f64;
        for y in [[1.0, 2.0, 0.5], [-0.3, 0.2, 0.9], [0.05, 0.01, 0.0]] {
            let y = point(&y);
            let a = u.eval_point(&y).map_err(|e| e.to_string())?;
            inv = inv.max(rel(twice.eval_point(&y).map_err(|e| e.to_string())?, a));
        }
        let mut on_sphere = c.clone();
        on_sphere[0] += lam;
        let fix = rel(
            once.eval_point(&on_sphere).map_err(|e| e.to_string())?,
            u.eval_point(&on_sphere).map_err(|e| e.to_string())?,
        );
        let exact = singular_extension(params).map_err(|e| e.to_string())?;
        let pts = [point(&[1.5, 0.3, 0.0]), point(&[-0.8, 0.0, 0.4]), point(&[3.0, 1.0, 1.0])];
        let res =
            transformed_equation_residual(&exact, &point(&[0.5]), lam, &pts, params).map_err(|e| e.to_string())?;
        let worst = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        Ok(vec![
            Check::at_most("double transform identity", inv, 1e-12),
            Check::at_most("sphere fixing", fix, 1e-12),
            Check::at_most("transformed equation relative residual", worst, 1e-3),
        ])
    };
    run().unwrap_or_else(|e| vec![Check::error("kelvin", e)])
}

pub const MOVING_SPHERE_STEPS: usize = 200;

fn moving_sphere(params: &Params) -> Vec<Check> {
    let u = match singular_solution_trace(params) {
        Ok(u) => u,
        Err(e) => return vec![Check::error("singular trace", e)],
    };
    let spec = ScanSpec::default();
    [0.5, 1.0, 2.0]
        .iter()
        .map(|&r| {
            let mut x = vec![0.0; params.n()];
            x[0] = r;
            let grid = default_lambda_grid(r, MOVING_SPHERE_STEPS);
            let h = grid[1] - grid[0];
            match moving_sphere_scan(&u, &x, &grid, &spec, params.n(), params.sigma()) {
                // lambda_bar / |x| must lie in [1 - h/|x|, 1]
                Ok(rep) => {
                    let gap = 1.0 - rep.lambda_bar / r;
                    Check::at_most(format!("1 - lambda_bar/|x| at |x|={r}"), gap, h / r)
                        .with_pass(gap >= 0.0 && gap <= h / r)
                }
                Err(e) => Check::error(format!("scan at |x|={r}"), e),
            }
        })
        .collect()
}

impl Check {
    fn with_pass(mut self, pass: bool) -> Self {
        self.pass = pass;
        self
    }
}

fn blowup(params: &Params) -> Vec<Check> {
    let run = || -> Result<Vec<Check>, String> {
        let windows = decade_windows(1.0, 5);
        let exact = singular_solution_trace(params).map_err(|e| e.to_string())?;
        let a = params.derived().map_err(|e| e.to_string())?.a;
        let beta = params.beta();
        let est = blowup_limit(&exact, params, &windows).map_err(|e| e.to_string())?;
        let perturbed =
            RadialTrace::from_fn(log_grid(1e-6, 1e2, 161), move |r: f64| a * r.powf(-beta) * (1.0 + 0.1 * r.sqrt()))
                .map_err(|e| e.to_string())?;
        let est2 = blowup_limit(&perturbed, params, &windows).map_err(|e| e.to_string())?;
        let bounded =
            RadialTrace::from_fn(log_grid(1e-6, 1e2, 161), |r: f64| 1.0 / (1.0 + r * r)).map_err(|e| e.to_string())?;
        let est3 = blowup_limit(&bounded, params, &windows).map_err(|e| e.to_string())?;
        Ok(vec![
            Check::at_most("|A_hat - A| on u_A", (est.a_hat - a).abs(), 1e-10),
            Check::flag("u_A is singular-type", est.classification == Classification::SingularType),
            Check::at_most("|A_hat - A| on u_A (1 + 0.1 r^(1/2))", (est2.a_hat - a).abs(), 1e-3),
            Check::flag("bounded trace is removable-type", est3.classification == Classification::RemovableType),
        ])
    };
    run().unwrap_or_else(|e| vec![Check::error("blowup", e)])
}

fn scaling(params: &Params, order: usize) -> Vec<Check> {
    let run = || -> Result<Vec<Check>, String> {
        let u = singular_extension(params).map_err(|e| e.to_string())?;
        let rule = EnergyRule::for_params(params, order).map_err(|e| e.to_string())?;
        let mut out = Vec::new();
        for lam in [0.25, 0.5, 2.0] {
            let e = energy_at(&u, lam, params, &rule).map_err(|e| e.to_string())?;
            let d = scaling_residual(&u, lam, 1.0, params, &rule).map_err(|e| e.to_string())?;
            out.push(Check::at_most(
                format!("|E(lambda s; U) - E(s; U^lambda)| / |E|, lambda={lam}"),
                (d / e).abs(),
                1e-6,
            ));
        }
        Ok(out)
    };
    run().unwrap_or_else(|e| vec![Check::error("scaling", e)])
}

fn run_suite(suite: Suite, params: &Params, order: usize) -> SuiteReport {
    let checks = match suite {
        Suite::Pde => pde(params),
        Suite::Energy => energy(params, order),
        Suite::Kelvin => kelvin(params),
        Suite::MovingSphere => moving_sphere(params),
        Suite::Blowup => blowup(params),
        Suite::Scaling => scaling(params, order),
        Suite::All => unreachable!("expanded by the caller"),
    };
    let pass = checks.iter().all(|c| c.pass);
    SuiteReport { suite: suite.name(), checks, pass }
}

pub fn report(settings: &Settings, which: Suite) -> Result<VerifyReport, Failure> {
    let params = settings.params()?;
    let order = settings.quad_order;
    let suites: Vec<Suite> = if which == Suite::All { Suite::EACH.to_vec() } else { vec![which] };
    let reports = std::thread::scope(|scope| {
        let handles: Vec<_> = suites.iter().map(|&s| scope.spawn(move || run_suite(s, &params, order))).collect();
        handles.into_iter().map(|h| h.join().expect("suite thread panicked")).collect::<Vec<_>>()
    });
    let pass = reports.iter().all(|r| r.pass);
    Ok(VerifyReport { n: params.n(), sigma: params.sigma(), p: params.p(), quad_order: order, suites: reports, pass })
}

pub fn run(settings: &Settings, which: Suite) -> Result<(), Failure> {
    let rep = report(settings, which)?;
    for s in &rep.suites {
        for c in &s.checks {
            eprintln!(
                "{} {}: {}: {:.3e} (tolerance {:.1e})",
                if c.pass { "PASS" } else { "FAIL" },
                s.suite,
                c.name,
                c.measured,
                c.tolerance
            );
        }
    }
    let mut manifest = RunManifest::new(&format!("verify {}", which.name()), param_record(settings));
    manifest.setting("quad_order", settings.quad_order);
    emit(settings, &rep, &format!("verify-{}.json", which.name()), manifest)?;
    if rep.pass {
        Ok(())
    } else {
        let failed: Vec<&str> = rep.suites.iter().filter(|s| !s.pass).map(|s| s.suite).collect();
        Err(Failure::Verification(format!("failed suites: {}", failed.join(", "))))
    }
}
