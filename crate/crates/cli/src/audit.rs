use std::fs;
use std::path::{Path, PathBuf};

use befair_core::audit::{as_percent, cumulative_accuracy, lower_bound_curve, mae_delta, overall_accuracy, score_ordering, write_curve_csv};
use befair_core::befair::LinearAdversary;
use befair_core::{Dataset, LogisticOracle, Oracle, RandomizedClassifier};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::config::{parse_list, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::train::load_model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: Split,
    /// Comma-separated δ values.
    #[arg(long, default_value = "1.0,1.05,1.1,1.15,1.2,1.25,1.3")]
    pub delta: String,
    /// Report MAE as a percentage of the data set (default) or as a count.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub percent: bool,
    /// Also write cumulative-accuracy and lower-bound curves.
    #[arg(long)]
    pub curves: bool,
    /// Ordering for the curves: `model`, `erm` (fit on the training split)
    /// or a path to another model file.
    #[arg(long, default_value = "model")]
    pub order_by: String,
    /// Prefix-size step of the lower-bound curve.
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Effective<'a> {
    config: &'a RunConfig,
    model: &'a Path,
    split: Split,
    delta: &'a str,
    percent: bool,
    curves: bool,
    order_by: &'a str,
    stride: usize,
}

fn ordering_model(args: &AuditArgs, own: &RandomizedClassifier, train: &Dataset, oracle: &LogisticOracle) -> CliResult<(String, RandomizedClassifier)> {
    Ok(match args.order_by.as_str() {
        "model" => ("model".into(), own.clone()),
        "erm" => {
            let h = oracle.best_response(train, &vec![1.0; train.n()])?;
            ("erm".into(), RandomizedClassifier::point_mass(h))
        }
        path => {
            let p = Path::new(path);
            if !p.exists() {
                return Err(CliError::Usage(format!("--order-by expects model, erm or a model path; `{path}` does not exist")));
            }
            let tag = p.file_stem().map_or("other".into(), |s| s.to_string_lossy().into_owned());
            (tag, load_model(p)?.classifier)
        }
    })
}

pub fn run(args: &AuditArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    let seed = cfg.apply_seed(args.seed);
    let deltas = parse_list(&args.delta)?;
    if let Some(d) = deltas.iter().find(|d| !(**d >= 1.0)) {
        return Err(CliError::Usage(format!("δ must be at least 1, got {d}")));
    }
    if args.stride == 0 {
        return Err(CliError::Usage("--stride must be at least 1".into()));
    }
    let effective = Effective {
        config: &cfg,
        model: &args.model,
        split: args.split,
        delta: &args.delta,
        percent: args.percent,
        curves: args.curves,
        order_by: &args.order_by,
        stride: args.stride,
    };
    let mut manifest = RunManifest::new("audit", &effective, seed)?;
    fs::create_dir_all(&args.out)?;
    let model = load_model(&args.model)?;
    let (train, test) = manifest.time("load", || cfg.load_data(&args.data, args.test_data.as_deref()))?;
    let ds = match args.split {
        Split::Train => &train,
        Split::Test => &test,
    };
    let d = &model.classifier;
    let n = ds.n();

    let acc = overall_accuracy(ds, d)?;
    manifest.record("accuracy", acc)?;
    println!("accuracy {acc:.4} on {} points", n);

    let adversary = LinearAdversary::new(cfg.befair.adversary());
    let unit = if args.percent { "percent" } else { "count" };
    let mut table = format!("delta,mae_{unit},group_size\n");
    let rows = manifest.time("mae", || {
        deltas
            .iter()
            .map(|&delta| Ok((delta, mae_delta(ds, d, delta, &adversary)?)))
            .collect::<CliResult<Vec<_>>>()
    })?;
    for (delta, (v, report)) in rows {
        let shown = if args.percent { as_percent(v, n) } else { v };
        println!("delta {delta}: MAE {shown:.4} ({unit}), group of {}", report.group_size);
        table += &format!("{delta},{shown},{}\n", report.group_size);
    }
    let path = args.out.join("mae.csv");
    fs::write(&path, table)?;
    manifest.add_output(&path);

    if args.curves {
        let oracle = LogisticOracle::new(cfg.oracle.clone());
        let (tag, scorer) = ordering_model(args, d, &train, &oracle)?;
        let order = score_ordering(ds, &scorer)?;
        let cum = cumulative_accuracy(ds, &order, d)?;
        let lb = manifest.time("lower_bound", || Ok(lower_bound_curve(ds, &order, &oracle, args.stride)?))?;
        let beaten = lb.iter().filter(|p| cum[p.x_index].value >= p.value).count();
        println!("cumulative accuracy ≥ lower bound at {beaten} of {} prefixes", lb.len());
        manifest.record("prefixes_above_lower_bound", (beaten, lb.len()))?;
        for (name, curve) in [(format!("cumulative_{tag}.csv"), &cum), (format!("lower_bound_{tag}.csv"), &lb)] {
            let path = args.out.join(name);
            write_curve_csv(&path, curve)?;
            manifest.add_output(&path);
        }
    }
    manifest.finish(&args.out)?;
    Ok(())
}
