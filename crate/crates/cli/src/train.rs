use std::fs;
use std::path::{Path, PathBuf};

use befair_core::audit::{as_percent, gamma_sweep, overall_accuracy};
use befair_core::befair::{BefairOutcome, FictitiousPlay, LinearAdversary};
use befair_core::greedy::{run_greedy, run_greedy_matrix, CandidateSource, Candidates, GreedyConfig};
use befair_core::hpf::run_hpf;
use befair_core::{Dataset, Hypothesis, LogisticOracle, Oracle, RandomizedClassifier, UtilityMatrix};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::{parse_grid, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Erm,
    Hpf,
    Greedy,
    Befair,
    PfExact,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Erm => "erm",
            Method::Hpf => "hpf",
            Method::Greedy => "greedy",
            Method::Befair => "befair",
            Method::PfExact => "pf-exact",
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// CSV to train on; split by the config unless --test-data is given.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// 0/1 utility matrix (rows = points, columns = hypotheses) for pf-exact and greedy.
    #[arg(long)]
    pub utility_matrix: Option<PathBuf>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Slack γ as a percentage of the training set.
    #[arg(long, conflicts_with_all = ["gamma_count", "gamma_sweep"])]
    pub gamma: Option<f64>,
    /// Slack γ as an error count.
    #[arg(long, conflicts_with = "gamma_sweep")]
    pub gamma_count: Option<f64>,
    /// `start:step:end` in percent; picks the smallest γ that converges.
    #[arg(long)]
    pub gamma_sweep: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub method: String,
    pub classifier: RandomizedClassifier,
}

pub fn load_model(path: &Path) -> CliResult<ModelFile> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[derive(Serialize)]
struct Effective<'a> {
    method: Method,
    config: &'a RunConfig,
    rounds: Option<usize>,
    gamma_sweep: &'a Option<String>,
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str, method: Method) -> CliResult<&'a Path> {
    p.as_deref()
        .ok_or_else(|| CliError::Usage(format!("--method {} needs {flag}", method.name())))
}

fn write_history(path: &Path, out: &BefairOutcome, gamma: f64, n: usize) -> CliResult<()> {
    let mut s = String::from("round,group_size,violation_count,violation_percent\n");
    for r in &out.history {
        let raw = r.violation + gamma;
        s += &format!("{},{},{},{}\n", r.round, r.group_size, raw, as_percent(raw, n));
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    let seed = cfg.apply_seed(args.seed);
    if let Some(d) = args.delta {
        cfg.befair.delta = d;
    }
    if let Some(r) = args.rounds {
        cfg.befair.rounds = r;
        cfg.hpf_rounds = Some(r);
    }
    fs::create_dir_all(&args.out)?;
    let effective = Effective {
        method: args.method,
        config: &cfg,
        rounds: args.rounds,
        gamma_sweep: &args.gamma_sweep,
    };
    let mut manifest = RunManifest::new(&format!("train --method {}", args.method.name()), &effective, seed)?;

    let data = match (&args.data, args.method) {
        (Some(p), _) => Some(manifest.time("load", || cfg.load_data(p, args.test_data.as_deref()))?),
        (None, Method::PfExact | Method::Greedy) => None,
        (None, m) => return Err(CliError::Usage(format!("--method {} needs --data", m.name()))),
    };
    let oracle = LogisticOracle::new(cfg.oracle.clone());

    let classifier = match args.method {
        Method::Erm => {
            let (train, _) = data.as_ref().unwrap();
            let h = manifest.time("train", || Ok(oracle.best_response(train, &vec![1.0; train.n()])?))?;
            RandomizedClassifier::point_mass(h)
        }
        Method::Hpf => {
            let (train, _) = data.as_ref().unwrap();
            let rounds = cfg.hpf_rounds.unwrap_or(20);
            let res = manifest.time("train", || Ok(run_hpf(train, &oracle, rounds)?))?;
            manifest.record("round_scores", &res.round_scores)?;
            res.classifier
        }
        Method::PfExact => {
            let u = UtilityMatrix::from_csv(need(&args.utility_matrix, "--utility-matrix", args.method)?)?;
            let sol = manifest.time("train", || Ok(befair_core::pf_exact::solve_pf(&u, &cfg.pf)?))?;
            manifest.record("objective", sol.objective)?;
            manifest.record("certificate", sol.certificate)?;
            manifest.record("iterations", sol.iterations)?;
            manifest.record("probs", &sol.probs)?;
            sol.to_classifier()?
        }
        Method::Greedy => match (&args.utility_matrix, &data) {
            (Some(p), _) => {
                let u = UtilityMatrix::from_csv(p)?;
                let rounds = manifest.time("train", || Ok(run_greedy_matrix(&u, cfg.greedy.tie_break)?))?;
                let hs: Vec<Hypothesis> = rounds.iter().map(|r| Hypothesis::tabular(u.col(r.pick).to_vec())).collect();
                manifest.record("rounds", &rounds)?;
                RandomizedClassifier::new(hs, rounds.iter().map(|r| r.prob).collect())?
            }
            (None, Some((train, _))) => {
                let gcfg = GreedyConfig {
                    oracle: CandidateSource::WeightedErm,
                    ..cfg.greedy
                };
                let res = manifest.time("train", || Ok(run_greedy(train, Candidates::Oracle(&oracle), &gcfg)?))?;
                manifest.record("rounds", res.rounds.len())?;
                res.classifier
            }
            (None, None) => return Err(CliError::Usage("--method greedy needs --data or --utility-matrix".into())),
        },
        Method::Befair => {
            let (train, _) = data.as_ref().unwrap();
            train_befair(args, &mut cfg, train, &oracle, &mut manifest)?
        }
    };

    if let Some((train, test)) = &data {
        let tr = overall_accuracy(train, &classifier)?;
        let te = overall_accuracy(test, &classifier)?;
        manifest.record("train_accuracy", tr)?;
        manifest.record("test_accuracy", te)?;
        println!("{}: train accuracy {tr:.4}, test accuracy {te:.4}, {} atoms", args.method.name(), classifier.support().len());
    }
    let model = ModelFile {
        method: args.method.name().to_string(),
        classifier,
    };
    manifest.write_json(&args.out.join("model.json"), &model)?;
    let path = manifest.finish(&args.out)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn train_befair(args: &TrainArgs, cfg: &mut RunConfig, train: &Dataset, oracle: &LogisticOracle, manifest: &mut RunManifest) -> CliResult<RandomizedClassifier> {
    let n = train.n();
    let count = |pct: f64| pct * n as f64 / 100.0;
    if let Some(g) = args.gamma {
        cfg.befair.gamma = count(g);
    }
    if let Some(g) = args.gamma_count {
        cfg.befair.gamma = g;
    }
    cfg.befair.validate()?;
    let adversary = LinearAdversary::new(cfg.befair.adversary());
    let (gamma, out) = match &args.gamma_sweep {
        Some(spec) => {
            let pct = parse_grid(spec)?;
            let grid: Vec<f64> = pct.iter().map(|&p| count(p)).collect();
            let sweep = manifest.time("train", || Ok(gamma_sweep(train, &grid, &cfg.befair, oracle, &adversary)?))?;
            let mut s = String::from("gamma_percent,gamma_count,converged\n");
            for (&(g, ok), p) in sweep.tried.iter().zip(&pct) {
                s += &format!("{p},{g},{ok}\n");
            }
            let path = args.out.join("sweep.csv");
            fs::write(&path, s)?;
            manifest.add_output(&path);
            let (Some(g), Some(out)) = (sweep.gamma, sweep.outcome) else {
                return Err(CliError::Failed(format!(
                    "no γ in {spec} converged within {} rounds",
                    cfg.befair.rounds
                )));
            };
            (g, out)
        }
        None => {
            let play = FictitiousPlay::new(train, cfg.befair.clone(), oracle, &adversary)?;
            (cfg.befair.gamma, manifest.time("train", || Ok(play.run()?))?)
        }
    };
    if !out.converged {
        log::warn!("fictitious play did not converge in {} rounds", cfg.befair.rounds);
    }
    manifest.record("gamma_count", gamma)?;
    manifest.record("gamma_percent", as_percent(gamma, n))?;
    manifest.record("delta", cfg.befair.delta)?;
    manifest.record("converged", out.converged)?;
    manifest.record("rounds_run", out.history.len())?;
    let hist = args.out.join("history.csv");
    write_history(&hist, &out, gamma, n)?;
    manifest.add_output(&hist);
    manifest.write_json(&args.out.join("history.json"), &out.history)?;
    Ok(out.classifier)
}
