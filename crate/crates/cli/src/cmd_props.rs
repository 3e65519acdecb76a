//! `edit-embed props`: run the property suites — exact bound checks,
//! finite-difference gradient checks, and the CGK distortion statistic —
//! and exit nonzero on any violation.

use edit_embed_core::props::{
    cgk_distortion_suite, gradcheck_suite, onehot_row_bounds_suite, pooling_bounds_suite, SuiteReport,
};

use crate::common::{write_csv, write_run_config, RunConfig};
use crate::PropsArgs;

const GRADCHECK_INSTANCES: usize = 24;
const DISTORTION_PAIRS: usize = 1_000;

pub fn run(args: PropsArgs) -> anyhow::Result<()> {
    if let Some(out) = &args.out {
        let cfg = RunConfig {
            command: "props".into(),
            seed: args.seed,
            pairs: Some(args.pairs),
            threads: args.threads,
            out: out.display().to_string(),
            ..RunConfig::default()
        };
        write_run_config(out, &cfg)?;
    }

    let reports = [
        onehot_row_bounds_suite(args.pairs, args.seed),
        pooling_bounds_suite(args.pairs, args.seed),
        gradcheck_suite(GRADCHECK_INSTANCES, args.seed),
        cgk_distortion_suite(DISTORTION_PAIRS, args.seed),
    ];

    for rep in &reports {
        print_report(rep);
    }

    if let Some(out) = &args.out {
        let rows: Vec<Vec<String>> = reports
            .iter()
            .map(|r| {
                vec![
                    r.name.clone(),
                    r.cases.to_string(),
                    r.violations.to_string(),
                    if r.passed() { "pass" } else { "fail" }.to_string(),
                ]
            })
            .collect();
        write_csv(
            &out.join("props_report.csv"),
            &["suite", "cases", "violations", "status"],
            &rows,
        )?;
    }

    let failures = reports.iter().filter(|r| !r.passed()).count();
    if failures > 0 {
        anyhow::bail!("{failures} property suite(s) reported violations");
    }
    println!("all property suites passed");
    Ok(())
}

fn print_report(rep: &SuiteReport) {
    println!(
        "{}: {} cases, {} violations [{}]",
        rep.name,
        rep.cases,
        rep.violations,
        if rep.passed() { "pass" } else { "FAIL" }
    );
    for d in &rep.details {
        println!("  {d}");
    }
}
