use std::fs;
use std::path::PathBuf;

use befair_core::verify::{check_examples, check_theorem, InstanceStream, TheoremId, VerifyConfig};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::config::{parse_seed_range, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Theorems,
    Examples,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    /// Instance seeds, inclusive: `0..199` checks 200 instances.
    #[arg(long, default_value = "0..199")]
    pub seeds: String,
    #[arg(long, default_value_t = 12)]
    pub max_n: usize,
    #[arg(long, default_value_t = 6)]
    pub max_m: usize,
    /// Solver settings are read from the `pf` section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Effective<'a> {
    suite: Suite,
    stream: &'a InstanceStream,
    config: &'a RunConfig,
}

pub fn run(args: &VerifyArgs) -> CliResult<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let stream = InstanceStream {
        seeds: parse_seed_range(&args.seeds)?,
        max_n: args.max_n,
        max_m: args.max_m,
    };
    stream.validate()?;
    let vcfg = VerifyConfig { solver: cfg.pf.clone() };
    let effective = Effective {
        suite: args.suite,
        stream: &stream,
        config: &cfg,
    };
    let mut manifest = RunManifest::new("verify", &effective, stream.seeds.start)?;
    fs::create_dir_all(&args.out)?;
    let mut failures = 0;
    let mut summary = String::from("check,passed,detail\n");

    if matches!(args.suite, Suite::Theorems | Suite::All) {
        for id in TheoremId::ALL {
            let report = manifest.time(id.name(), || Ok(check_theorem(id, &stream, &vcfg)?))?;
            println!(
                "{}: {} ({} instances, worst slack {:.3e}, {} witnesses)",
                id.name(),
                if report.passed() { "pass" } else { "FAIL" },
                report.instances_checked,
                report.worst_slack,
                report.witnesses.len()
            );
            if !report.passed() {
                failures += 1;
            }
            summary += &format!("{},{},worst slack {:e}\n", id.name(), report.passed(), report.worst_slack);
            manifest.write_json(&args.out.join(format!("theorem_{}.json", id.name())), &report)?;
        }
    }
    if matches!(args.suite, Suite::Examples | Suite::All) {
        let checks = manifest.time("examples", || Ok(check_examples(&vcfg)?))?;
        for c in &checks {
            println!("{}: {} ({})", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail);
            if !c.passed {
                failures += 1;
            }
            summary += &format!("{},{},\"{}\"\n", c.name, c.passed, c.detail.replace('"', "'"));
        }
        manifest.write_json(&args.out.join("examples.json"), &checks)?;
    }
    let path = args.out.join("summary.csv");
    fs::write(&path, summary)?;
    manifest.add_output(&path);
    manifest.finish(&args.out)?;
    if failures > 0 {
        return Err(CliError::Witnesses(failures));
    }
    Ok(())
}
