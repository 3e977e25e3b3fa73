use std::fmt::Write as _;

use distboost::checks::{run_all, CheckOptions, PropertyReport, DEFAULT_SEED};

use super::{csv_real, resolver, write_output};
use crate::error::{runtime, CliError, CliResult};
use crate::Common;

pub fn oracle_check_csv(reports: &[PropertyReport]) -> String {
    let mut s = String::from("property,instances,violations,min_slack,tolerance,passed\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.name,
            r.instances,
            r.violations,
            csv_real(r.min_slack),
            csv_real(r.tolerance),
            r.passed()
        );
    }
    s
}

pub(crate) fn run(common: Common, seed: Option<u64>, inject_fault: Option<f64>) -> CliResult<()> {
    let mut r = resolver(&common)?;
    let out = r.out_dir(common.out_dir.clone())?;
    let seed = r.or(seed, "seed", DEFAULT_SEED)?;
    let fault: Option<f64> = r.opt(inject_fault, "inject_fault")?;
    r.finish()?;
    if let Some(f) = fault {
        if !(f > 0.0) || !f.is_finite() {
            return Err(CliError::Config(
                "--inject-fault must be finite and > 0".into(),
            ));
        }
    }

    let reports = run_all(&CheckOptions {
        seed,
        partition_fault: fault,
    })
    .map_err(runtime("property suites"))?;
    for rep in &reports {
        println!("{rep}");
    }
    let path = write_output(&out, "oracle_check.csv", &oracle_check_csv(&reports))?;
    println!("wrote {}", path.display());
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Property(failed.join(", ")))
    }
}
