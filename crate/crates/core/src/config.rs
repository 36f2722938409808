//! Experiment files for `fedsim run`.
//!
//! One `key = value` pair per line; `#` starts a comment, blank lines are
//! ignored, values are not quoted. Unknown and repeated keys are errors.
//! Relative paths resolve against the directory holding the file.
//!
//! ```text
//! flavor = flavor1          # centralized | flavor1 | flavor2
//! agencies = 10
//! partition = by_class      # random | by_class
//! exchange_per_class = 0
//! rounds = 50
//! local_steps = 47
//! epochs_per_visit = 1
//! passes = 1
//! batch_size = 128
//! lr = 0.1
//! seed = 0
//! hidden = 128              # comma-separated hidden layer widths
//! model_bytes = 813056      # optional; default 8 bytes per parameter
//! weighting = equal         # equal | data_size
//! workers = 1
//! k_n = 1
//! k_s = 1
//! dataset = synthetic       # synthetic | idx
//! synthetic_classes = 10
//! synthetic_train_per_class = 600
//! synthetic_test_per_class = 100
//! synthetic_dim = 64
//! synthetic_seed = 0        # defaults to seed
//! train_images = train-images-idx3-ubyte
//! train_labels = train-labels-idx1-ubyte
//! test_images = t10k-images-idx3-ubyte
//! test_labels = t10k-labels-idx1-ubyte
//! output_dir = out
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{generate_synthetic_split, load_idx, Dataset};
use crate::error::{Error, Result};
use crate::federation::{FederationConfig, Flavor};
use crate::nn::NetworkSpec;

pub const KEYS: [&str; 28] = [
    "flavor",
    "agencies",
    "partition",
    "exchange_per_class",
    "rounds",
    "local_steps",
    "epochs_per_visit",
    "passes",
    "batch_size",
    "lr",
    "seed",
    "hidden",
    "model_bytes",
    "weighting",
    "workers",
    "k_n",
    "k_s",
    "dataset",
    "synthetic_classes",
    "synthetic_train_per_class",
    "synthetic_test_per_class",
    "synthetic_dim",
    "synthetic_seed",
    "train_images",
    "train_labels",
    "test_images",
    "test_labels",
    "output_dir",
];

#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Synthetic {
        classes: usize,
        train_per_class: usize,
        test_per_class: usize,
        dim: usize,
        /// `None` follows the experiment seed.
        seed: Option<u64>,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentFile {
    /// Everything except the network, which depends on the data shape.
    pub template: FederationConfig,
    pub hidden: Vec<usize>,
    pub data: DataSpec,
    pub output_dir: PathBuf,
}

struct Entry {
    line: usize,
    value: String,
}

fn field_error(key: &str, entry: &Entry, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {}: key `{key}`: {msg}", entry.line))
}

struct Fields {
    entries: BTreeMap<String, Entry>,
}

impl Fields {
    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.entries
            .get(key)
            .map(|e| {
                e.value.parse().map_err(|err| {
                    field_error(key, e, format!("cannot parse `{}`: {err}", e.value))
                })
            })
            .transpose()
    }

    fn required(&self, key: &str) -> Result<&Entry> {
        self.entries
            .get(key)
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    fn path(&self, key: &str, base: &Path) -> Result<PathBuf> {
        let e = self.required(key)?;
        Ok(resolve(base, &e.value))
    }
}

fn resolve(base: &Path, value: &str) -> PathBuf {
    let p = PathBuf::from(value);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn parse_hidden(key: &str, entry: &Entry) -> Result<Vec<usize>> {
    if entry.value.trim().is_empty() {
        return Ok(Vec::new());
    }
    entry
        .value
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .ok()
                .filter(|&w| w > 0)
                .ok_or_else(|| {
                    field_error(
                        key,
                        entry,
                        format!("`{}` is not a positive layer width", w.trim()),
                    )
                })
        })
        .collect()
}

/// Parses an experiment file's text. `base_dir` anchors relative paths.
pub fn parse_experiment(text: &str, base_dir: &Path) -> Result<ExperimentFile> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {line}: expected `key = value`, got `{content}`"
            ))
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("line {line}: unknown key `{key}`")));
        }
        if let Some(prev) = entries.get(key) {
            let prev: &Entry = prev;
            return Err(Error::Config(format!(
                "line {line}: key `{key}` already set on line {}",
                prev.line
            )));
        }
        entries.insert(
            key.to_string(),
            Entry {
                line,
                value: value.trim().to_string(),
            },
        );
    }
    let f = Fields { entries };

    f.required("flavor")?;
    let flavor: Flavor = f.get("flavor", Flavor::Centralized)?;
    let hidden = match f.entries.get("hidden") {
        Some(e) => parse_hidden("hidden", e)?,
        None => vec![128],
    };

    // Placeholder network; replaced once the data shape is known.
    let mut c = FederationConfig::new(flavor, NetworkSpec::mlp(1, &hidden, 2)?);
    c.agencies = f.get("agencies", c.agencies)?;
    c.partition = f.get("partition", c.partition)?;
    c.exchange_per_class = f.get("exchange_per_class", c.exchange_per_class)?;
    c.rounds = f.get("rounds", c.rounds)?;
    c.local_steps = f.get("local_steps", c.local_steps)?;
    c.epochs_per_visit = f.get("epochs_per_visit", c.epochs_per_visit)?;
    c.passes = f.get("passes", c.passes)?;
    c.batch_size = f.get("batch_size", c.batch_size)?;
    c.lr = f.get("lr", c.lr)?;
    c.seed = f.get("seed", c.seed)?;
    c.model_bytes = f.opt("model_bytes")?;
    c.weighting = f.get("weighting", c.weighting)?;
    c.workers = f.get("workers", c.workers)?;
    c.k_n = f.get("k_n", c.k_n)?;
    c.k_s = f.get("k_s", c.k_s)?;
    c.validate()?;

    let idx_keys = ["train_images", "train_labels", "test_images", "test_labels"];
    let synth_keys = [
        "synthetic_classes",
        "synthetic_train_per_class",
        "synthetic_test_per_class",
        "synthetic_dim",
        "synthetic_seed",
    ];
    let dataset: String = f.get("dataset", "synthetic".to_string())?;
    fn stray(f: &Fields, keys: &[&'static str]) -> Option<&'static str> {
        keys.iter().find(|k| f.entries.contains_key(**k)).copied()
    }
    let data = match dataset.as_str() {
        "synthetic" => {
            if let Some(k) = stray(&f, &idx_keys) {
                return Err(field_error(
                    k,
                    &f.entries[k],
                    "only valid with dataset = idx",
                ));
            }
            DataSpec::Synthetic {
                classes: f.get("synthetic_classes", 10)?,
                train_per_class: f.get("synthetic_train_per_class", 600)?,
                test_per_class: f.get("synthetic_test_per_class", 100)?,
                dim: f.get("synthetic_dim", 64)?,
                seed: f.opt("synthetic_seed")?,
            }
        }
        "idx" => {
            if let Some(k) = stray(&f, &synth_keys) {
                return Err(field_error(
                    k,
                    &f.entries[k],
                    "only valid with dataset = synthetic",
                ));
            }
            DataSpec::Idx {
                train_images: f.path("train_images", base_dir)?,
                train_labels: f.path("train_labels", base_dir)?,
                test_images: f.path("test_images", base_dir)?,
                test_labels: f.path("test_labels", base_dir)?,
            }
        }
        other => {
            return Err(field_error(
                "dataset",
                &f.entries["dataset"],
                format!("expected `synthetic` or `idx`, got `{other}`"),
            ))
        }
    };
    let output_dir = match f.entries.get("output_dir") {
        Some(e) => resolve(base_dir, &e.value),
        None => base_dir.to_path_buf(),
    };
    Ok(ExperimentFile {
        template: c,
        hidden,
        data,
        output_dir,
    })
}

/// Reads and parses a file; unreadable files are configuration errors.
pub fn load_experiment(path: &Path) -> Result<ExperimentFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let base = if base.as_os_str().is_empty() {
        PathBuf::from(".")
    } else {
        base
    };
    parse_experiment(&text, &base)
}

impl ExperimentFile {
    /// Replaces the seed, e.g. from the environment.
    pub fn override_seed(&mut self, seed: u64) {
        self.template.seed = seed;
    }

    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        match &self.data {
            DataSpec::Synthetic {
                classes,
                train_per_class,
                test_per_class,
                dim,
                seed,
            } => generate_synthetic_split(
                *classes,
                *train_per_class,
                *test_per_class,
                *dim,
                seed.unwrap_or(self.template.seed),
            )
            .map_err(|e| Error::Config(format!("synthetic data: {e}"))),
            DataSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => Ok((
                load_idx(train_images, train_labels)?,
                load_idx(test_images, test_labels)?,
            )),
        }
    }

    /// The full configuration for data of this shape.
    pub fn federation_config(&self, train: &Dataset, test: &Dataset) -> Result<FederationConfig> {
        let classes = train.class_count().max(test.class_count());
        let mut c = self.template.clone();
        c.network = NetworkSpec::mlp(train.dim(), &self.hidden, classes)?;
        Ok(c)
    }
}
