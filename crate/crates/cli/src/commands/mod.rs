pub mod constant;
pub mod solve;
pub mod verify;

use serde::Serialize;

use crate::manifest::{ensure_dir, write_json, ParamRecord, RunManifest};
use crate::settings::Settings;
use crate::Failure;

pub fn param_record(s: &Settings) -> ParamRecord {
    ParamRecord { n: s.n, sigma: s.sigma, p: s.p }
}

/// Prints the report as JSON; with an output directory also stores it
/// together with a manifest.
pub fn emit<S: Serialize>(
    settings: &Settings,
    report: &S,
    file: &str,
    mut manifest: RunManifest,
) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
    if let Some(dir) = &settings.out_dir {
        ensure_dir(dir)?;
        write_json(&dir.join(file), report)?;
        manifest.add_output(dir, file)?;
        manifest.write(dir)?;
    }
    Ok(())
}
