//! CSV ingestion, one-hot encoding, standardization and train/test splitting,
//! plus small synthetic instance generators.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, Dataset, Hypothesis};
use crate::seed::{derive_seed, rng_from};

const MISSING: [&str; 4] = ["", "?", "NA", "N/A"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    #[serde(default)]
    pub drop_columns: Vec<String>,
    pub label_column: String,
    pub positive_label: String,
    #[serde(default = "yes")]
    pub numeric_standardize: bool,
    #[serde(default = "default_ratio")]
    pub split_ratio: f64,
    #[serde(default)]
    pub seed: u64,
    /// Header to use for files without one.
    #[serde(default)]
    pub column_names: Option<Vec<String>>,
    /// Lines starting with this byte are skipped.
    #[serde(default)]
    pub comment_char: Option<char>,
    /// Columns forced to be numeric. When absent, a column is numeric iff
    /// every present cell parses as a number.
    #[serde(default)]
    pub numeric_columns: Option<Vec<String>>,
}

fn yes() -> bool {
    true
}

fn default_ratio() -> f64 {
    0.8
}

impl PreprocessConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let cfg: PreprocessConfig = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!("split_ratio {} is not in (0, 1)", self.split_ratio)));
        }
        if let Some(c) = self.comment_char {
            if !c.is_ascii() {
                return Err(Error::Config("comment_char must be ASCII".into()));
            }
        }
        Ok(())
    }
}

struct RawTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path, cfg: &PreprocessConfig) -> Result<RawTable> {
    let mut builder = csv::ReaderBuilder::new();
    builder
        .has_headers(cfg.column_names.is_none())
        .trim(csv::Trim::All)
        .comment(cfg.comment_char.map(|c| c as u8));
    let mut rdr = builder.from_reader(BufReader::new(File::open(path)?));
    let header: Vec<String> = match &cfg.column_names {
        Some(names) => names.clone(),
        None => rdr.headers()?.iter().map(str::to_string).collect(),
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        // blank trailing lines in some distributions parse as a single empty field
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::Shape {
                what: "csv record",
                expected: header.len(),
                got: rec.len(),
            });
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(RawTable { header, rows })
}

enum Column {
    Numeric { mean: f64, scale: f64 },
    Categorical { vocab: Vec<String> },
}

struct Encoder {
    label_idx: usize,
    features: Vec<(usize, String, Column)>,
}

impl Encoder {
    fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (_, name, col) in &self.features {
            match col {
                Column::Numeric { .. } => out.push(name.clone()),
                Column::Categorical { vocab } => out.extend(vocab.iter().map(|v| format!("{name}={v}"))),
            }
        }
        out
    }

    fn encode(&self, rows: &[Vec<String>], first_row: usize, positive: &str) -> Result<(Vec<Vec<f64>>, Vec<i8>)> {
        let mut xs = Vec::with_capacity(rows.len());
        let mut ys = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            let mut x = Vec::new();
            for (idx, name, col) in &self.features {
                let cell = &row[*idx];
                match col {
                    Column::Numeric { mean, scale } => {
                        let v = parse_cell(cell, first_row + r, name)?;
                        x.push((v - mean) / scale);
                    }
                    Column::Categorical { vocab } => {
                        x.extend(vocab.iter().map(|v| if v == cell { 1.0 } else { 0.0 }));
                    }
                }
            }
            xs.push(x);
            ys.push(if label_matches(&row[self.label_idx], positive) { 1 } else { -1 });
        }
        Ok((xs, ys))
    }
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    cell.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            row,
            column: column.to_string(),
            value: cell.to_string(),
        })
}

/// Label cells match with or without a trailing period (`>50K.` in some test files).
fn label_matches(cell: &str, positive: &str) -> bool {
    cell.trim_end_matches('.') == positive.trim_end_matches('.')
}

fn drop_missing(table: &mut RawTable, used: &[usize], source: &Path) {
    let before = table.rows.len();
    table.rows.retain(|r| used.iter().all(|&i| !MISSING.contains(&r[i].as_str())));
    let dropped = before - table.rows.len();
    if dropped > 0 {
        log::info!("{}: dropped {dropped} rows with missing values", source.display());
    }
}

fn fit_encoder(header: &[String], train: &[Vec<String>], all: &[&[Vec<String>]], cfg: &PreprocessConfig) -> Result<Encoder> {
    let label_idx = header
        .iter()
        .position(|h| *h == cfg.label_column)
        .ok_or_else(|| Error::MissingColumn(cfg.label_column.clone()))?;
    for d in &cfg.drop_columns {
        if !header.contains(d) {
            log::warn!("drop column `{d}` not present in the data");
        }
    }
    if let Some(forced) = &cfg.numeric_columns {
        for c in forced {
            if !header.contains(c) {
                return Err(Error::MissingColumn(c.clone()));
            }
        }
    }
    let mut features = Vec::new();
    for (idx, name) in header.iter().enumerate() {
        if idx == label_idx || cfg.drop_columns.contains(name) {
            continue;
        }
        let numeric = match &cfg.numeric_columns {
            Some(forced) => forced.contains(name),
            None => all.iter().all(|part| part.iter().all(|r| r[idx].parse::<f64>().map_or(false, f64::is_finite))),
        };
        let col = if numeric {
            let vals = train
                .iter()
                .enumerate()
                .map(|(r, row)| parse_cell(&row[idx], r + 1, name))
                .collect::<Result<Vec<f64>>>()?;
            let (mean, scale) = if cfg.numeric_standardize {
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd < 1e-12 {
                    (0.0, 1.0)
                } else {
                    (mean, sd)
                }
            } else {
                (0.0, 1.0)
            };
            Column::Numeric { mean, scale }
        } else {
            let vocab: BTreeSet<String> = train.iter().map(|r| r[idx].clone()).collect();
            Column::Categorical {
                vocab: vocab.into_iter().collect(),
            }
        };
        features.push((idx, name.clone(), col));
    }
    Ok(Encoder { label_idx, features })
}

fn used_columns(header: &[String], cfg: &PreprocessConfig) -> Vec<usize> {
    header
        .iter()
        .enumerate()
        .filter(|(_, h)| !cfg.drop_columns.contains(h))
        .map(|(i, _)| i)
        .collect()
}

fn build(header: &[String], train: &[Vec<String>], test: &[Vec<String>], cfg: &PreprocessConfig) -> Result<(Dataset, Dataset)> {
    let enc = fit_encoder(header, train, &[train, test], cfg)?;
    let names = enc.names();
    let (xtr, ytr) = enc.encode(train, 1, &cfg.positive_label)?;
    let (xte, yte) = enc.encode(test, 1, &cfg.positive_label)?;
    Ok((Dataset::new(xtr, ytr, names.clone())?, Dataset::new(xte, yte, names)?))
}

/// Loads one CSV, shuffles it deterministically by `cfg.seed` and splits at
/// `split_ratio`.
pub fn load_csv(path: &Path, cfg: &PreprocessConfig) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    let mut table = read_table(path, cfg)?;
    let used = used_columns(&table.header, cfg);
    drop_missing(&mut table, &used, path);
    let n = table.rows.len();
    if n < 2 {
        return Err(Error::InvalidDataset(format!("need at least 2 rows to split, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(derive_seed(cfg.seed, "split")));
    let cut = ((cfg.split_ratio * n as f64).floor() as usize).clamp(1, n - 1);
    let mut rows: Vec<Option<Vec<String>>> = table.rows.into_iter().map(Some).collect();
    let mut take = |ids: &[usize]| -> Vec<Vec<String>> { ids.iter().map(|&i| rows[i].take().unwrap()).collect() };
    let train = take(&order[..cut]);
    let test = take(&order[cut..]);
    build(&table.header, &train, &test, cfg)
}

/// Loads a provided train/test pair as-is: no shuffling, `split_ratio` ignored.
pub fn load_csv_pair(train_path: &Path, test_path: &Path, cfg: &PreprocessConfig) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    let mut train = read_table(train_path, cfg)?;
    let mut test = read_table(test_path, cfg)?;
    if train.header != test.header {
        return Err(Error::InvalidDataset("train and test headers differ".into()));
    }
    let used = used_columns(&train.header, cfg);
    drop_missing(&mut train, &used, train_path);
    drop_missing(&mut test, &used, test_path);
    if train.rows.is_empty() || test.rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    build(&train.header, &train.rows, &test.rows, cfg)
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    serde_json::to_writer(BufWriter::new(File::create(path)?), ds)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Fixture generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SyntheticSpec {
    /// `n` featureless points, `m` random utility columns followed by their
    /// `m` complements.
    RandomTabular { n: usize, m: usize, seed: u64 },
    /// `n` Gaussian points in `d` dimensions labelled by a random halfspace
    /// through the origin, every point at distance at least 0.1 from it.
    SeparableLinear { n: usize, d: usize, seed: u64 },
}

impl FromStr for SyntheticSpec {
    type Err = Error;

    /// `random-tabular:N:M:SEED` or `separable-linear:N:D:SEED`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("cannot parse synthetic spec `{s}`"));
        if parts.len() != 4 {
            return Err(bad());
        }
        let a: usize = parts[1].parse().map_err(|_| bad())?;
        let b: usize = parts[2].parse().map_err(|_| bad())?;
        let seed: u64 = parts[3].parse().map_err(|_| bad())?;
        match parts[0] {
            "random-tabular" => Ok(SyntheticSpec::RandomTabular { n: a, m: b, seed }),
            "separable-linear" => Ok(SyntheticSpec::SeparableLinear { n: a, d: b, seed }),
            _ => Err(bad()),
        }
    }
}

pub fn synthetic_instance(spec: &SyntheticSpec) -> Result<(Dataset, Vec<Hypothesis>)> {
    match *spec {
        SyntheticSpec::RandomTabular { n, m, seed } => {
            if n == 0 || m == 0 {
                return Err(Error::Config("random-tabular needs n >= 1 and m >= 1".into()));
            }
            let mut rng = rng_from(derive_seed(seed, "random-tabular"));
            let base: Vec<Hypothesis> = (0..m)
                .map(|_| Hypothesis::tabular((0..n).map(|_| rng.random::<bool>()).collect()))
                .collect();
            let comps: Vec<Hypothesis> = base.iter().map(Hypothesis::complement).collect();
            Ok((Dataset::index_only(n)?, base.into_iter().chain(comps).collect()))
        }
        SyntheticSpec::SeparableLinear { n, d, seed } => {
            if n == 0 || d == 0 {
                return Err(Error::Config("separable-linear needs n >= 1 and d >= 1".into()));
            }
            let mut rng = rng_from(derive_seed(seed, "separable-linear"));
            let mut w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dot(&w, &w).sqrt().max(1e-12);
            w.iter_mut().for_each(|v| *v /= norm);
            let mut rows = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            while rows.len() < n {
                let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let s = dot(&x, &w);
                if s.abs() < 0.1 {
                    continue;
                }
                labels.push(if s > 0.0 { 1 } else { -1 });
                rows.push(x);
            }
            let names = (0..d).map(|k| format!("x{k}")).collect();
            let mut theta = w;
            theta.push(0.0);
            Ok((Dataset::new(rows, labels, names)?, vec![Hypothesis::linear(theta)]))
        }
    }
}

/// Per-column means, for standardization checks.
pub fn column_stats(ds: &Dataset) -> BTreeMap<String, (f64, f64)> {
    let n = ds.n() as f64;
    let mut out = BTreeMap::new();
    for (k, name) in ds.feature_names().iter().enumerate() {
        let mean = ds.rows().map(|r| r[k]).sum::<f64>() / n;
        let var = ds.rows().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
        out.insert(name.clone(), (mean, var.sqrt()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{as_real, group_error};
    use std::io::Write;

    fn cfg() -> PreprocessConfig {
        PreprocessConfig {
            drop_columns: vec!["race".into()],
            label_column: "y".into(),
            positive_label: "1".into(),
            numeric_standardize: true,
            split_ratio: 0.5,
            seed: 7,
            column_names: None,
            comment_char: None,
            numeric_columns: None,
        }
    }

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    const SAMPLE: &str = "age,color,race,y\n20,red,a,1\n30,blue,b,0\n40,red,a,1\n50,green,b,0\n,red,a,1\n60,?,a,0\n35,blue,b,1\n45,red,a,0\n";

    #[test]
    fn two_rows_split_in_half() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.csv", "x,y\n1,1\n2,0\n");
        let (tr, te) = load_csv(&p, &cfg()).unwrap();
        assert_eq!((tr.n(), te.n()), (1, 1));
    }

    #[test]
    fn encodes_and_standardizes() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.csv", SAMPLE);
        let mut c = cfg();
        c.split_ratio = 0.67;
        let (tr, te) = load_csv(&p, &c).unwrap();
        // two rows with missing cells are dropped
        assert_eq!(tr.n() + te.n(), 6);
        assert_eq!(tr.n(), 4);
        let names = tr.feature_names();
        assert!(!names.iter().any(|n| n.starts_with("race")));
        assert_eq!(names.last().unwrap(), "bias");
        assert_eq!(names[0], "age");
        let stats = column_stats(&tr);
        assert!(stats["age"].0.abs() < 1e-9);
        assert!((stats["age"].1 - 1.0).abs() < 1e-9);
        let blocks: Vec<usize> = names.iter().enumerate().filter(|(_, n)| n.starts_with("color=")).map(|(k, _)| k).collect();
        for r in tr.rows() {
            assert_eq!(blocks.iter().map(|&k| r[k]).sum::<f64>(), 1.0);
        }
        for r in te.rows() {
            // unknown test categories encode as all zeros
            assert!(blocks.iter().map(|&k| r[k]).sum::<f64>() <= 1.0);
        }
    }

    #[test]
    fn reruns_are_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.csv", SAMPLE);
        let a = load_csv(&p, &cfg()).unwrap();
        let b = load_csv(&p, &cfg()).unwrap();
        assert_eq!(serde_json::to_string(&a.0).unwrap(), serde_json::to_string(&b.0).unwrap());
        assert_eq!(a.1, b.1);
        let mut other = cfg();
        other.seed = 8;
        let c = load_csv(&p, &other).unwrap();
        assert!(a.0 != c.0 || a.1 != c.1);
    }

    #[test]
    fn errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.csv", SAMPLE);
        let mut c = cfg();
        c.label_column = "nope".into();
        assert!(matches!(load_csv(&p, &c), Err(Error::MissingColumn(_))));
        let mut c = cfg();
        c.numeric_columns = Some(vec!["color".into()]);
        assert!(matches!(load_csv(&p, &c), Err(Error::Parse { .. })));
        let empty = write(&dir, "e.csv", "x,y\n");
        assert!(matches!(load_csv(&empty, &cfg()), Err(Error::EmptyInput)));
        let mut c = cfg();
        c.split_ratio = 1.0;
        assert!(load_csv(&p, &c).is_err());
    }

    #[test]
    fn provided_split_is_kept_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let tr = write(&dir, "a.data", "1, x, <=50K\n2, y, >50K\n3, x, >50K\n");
        let te = write(&dir, "a.test", "|comment line\n4, y, >50K.\n5, z, <=50K.\n");
        let c = PreprocessConfig {
            drop_columns: vec![],
            label_column: "income".into(),
            positive_label: ">50K".into(),
            numeric_standardize: false,
            split_ratio: 0.99,
            seed: 0,
            column_names: Some(vec!["v".into(), "cat".into(), "income".into()]),
            comment_char: Some('|'),
            numeric_columns: None,
        };
        let (a, b) = load_csv_pair(&tr, &te, &c).unwrap();
        assert_eq!(a.n(), 3);
        assert_eq!(a.labels(), &[-1, 1, 1]);
        assert_eq!(b.labels(), &[1, -1]);
        assert_eq!(a.row(0)[0], 1.0);
        assert_eq!(b.row(1)[0], 5.0);
        // category `z` unseen in train
        assert_eq!(&b.row(1)[1..3], &[0.0, 0.0]);
    }

    #[test]
    fn dataset_cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let (ds, _) = synthetic_instance(&SyntheticSpec::SeparableLinear { n: 10, d: 2, seed: 3 }).unwrap();
        let p = dir.path().join("ds.json");
        save_dataset(&ds, &p).unwrap();
        assert_eq!(load_dataset(&p).unwrap(), ds);
    }

    #[test]
    fn synthetic_generators() {
        let spec: SyntheticSpec = "random-tabular:6:3:1".parse().unwrap();
        let (ds, hs) = synthetic_instance(&spec).unwrap();
        assert_eq!(ds.n(), 6);
        assert_eq!(hs.len(), 6);
        for j in 0..3 {
            assert_eq!(hs[j].complement(), hs[j + 3]);
        }
        assert_eq!(synthetic_instance(&spec).unwrap().1, hs);
        assert!(synthetic_instance(&SyntheticSpec::RandomTabular { n: 0, m: 2, seed: 1 }).is_err());
        assert!(synthetic_instance(&SyntheticSpec::RandomTabular { n: 3, m: 0, seed: 1 }).is_err());

        let (ds, hs) = synthetic_instance(&SyntheticSpec::SeparableLinear { n: 100, d: 2, seed: 1 }).unwrap();
        let u = as_real(&hs[0].utility_vector(&ds).unwrap());
        assert_eq!(group_error(&vec![true; 100], &u).unwrap(), 0.0);
        assert!("nonsense:1:2:3".parse::<SyntheticSpec>().is_err());
    }

    #[test]
    fn compas_split_sizes() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
        let c = PreprocessConfig::from_json_file(&root.join("compas.json")).unwrap();
        let (tr, te) = load_csv(&root.join("compas.csv"), &c).unwrap();
        assert_eq!((tr.n(), te.n()), (4937, 1235));
    }
}
