//! Experiment grids behind `fedsim replicate`.
//!
//! Synthetic presets are tuned so the blobs are hard enough for label skew
//! to hurt: six input dimensions, two hidden layers and one local epoch
//! (47 steps of 128 on a 6000-example shard) between synchronizations.
//! MNIST presets use the 784-128-10 dense network.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cost_model::{self, CurvePoint};
use crate::data::{generate_synthetic_split, load_idx, Dataset};
use crate::error::{Error, Result};
use crate::federation::{
    run_experiment, sweep_exchange, FederationConfig, Flavor, PartitionMode, RoundRecord,
    SweepPoint,
};
use crate::nn::NetworkSpec;

pub const CLASSES: usize = 10;
pub const AGENCIES: usize = 10;
pub const ROUNDS: usize = 50;
pub const BATCH_SIZE: usize = 128;
/// One local epoch on a 6000-example shard.
pub const LOCAL_STEPS: usize = 47;
pub const FLAVOR2_EPOCHS: usize = 3;
pub const EXCHANGE_K: usize = 128;
pub const SWEEP_K: [usize; 4] = [0, 16, 64, 128];

pub const SYNTHETIC_TRAIN_PER_CLASS: usize = 6000;
pub const SYNTHETIC_TEST_PER_CLASS: usize = 200;
pub const SYNTHETIC_DIM: usize = 6;
pub const SYNTHETIC_HIDDEN: [usize; 2] = [64, 64];
pub const SYNTHETIC_LR: f64 = 0.3;

/// Easier blobs for the plain centralized baseline.
pub const BASELINE_DIM: usize = 64;
pub const BASELINE_TRAIN_PER_CLASS: usize = 1000;
pub const BASELINE_TEST_PER_CLASS: usize = 200;

pub const MNIST_HIDDEN: [usize; 1] = [128];
pub const MNIST_LR: f64 = 0.1;
pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig4,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
}

impl Figure {
    pub const ALL: [Figure; 6] = [
        Figure::Fig4,
        Figure::Fig6,
        Figure::Fig7,
        Figure::Fig8,
        Figure::Fig9,
        Figure::Fig10,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Figure::Fig4 => "fig4",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
            Figure::Fig9 => "fig9",
            Figure::Fig10 => "fig10",
        }
    }

    pub fn needs_data(&self) -> bool {
        *self != Figure::Fig4
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown figure `{s}` (expected fig4, fig6, fig7, fig8, fig9 or fig10)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Synthetic,
    /// Directory holding the four uncompressed MNIST IDX files.
    Mnist(PathBuf),
}

pub fn load_mnist(dir: &Path) -> Result<(Dataset, Dataset)> {
    let [ti, tl, vi, vl] = MNIST_FILES.map(|f| dir.join(f));
    Ok((load_idx(ti, tl)?, load_idx(vi, vl)?))
}

pub fn synthetic_figure_data(seed: u64) -> Result<(Dataset, Dataset)> {
    generate_synthetic_split(
        CLASSES,
        SYNTHETIC_TRAIN_PER_CLASS,
        SYNTHETIC_TEST_PER_CLASS,
        SYNTHETIC_DIM,
        seed,
    )
}

pub fn synthetic_baseline_data(seed: u64) -> Result<(Dataset, Dataset)> {
    generate_synthetic_split(
        CLASSES,
        BASELINE_TRAIN_PER_CLASS,
        BASELINE_TEST_PER_CLASS,
        BASELINE_DIM,
        seed,
    )
}

/// Data for the figure presets.
pub fn figure_data(source: &Source, seed: u64) -> Result<(Dataset, Dataset)> {
    match source {
        Source::Synthetic => synthetic_figure_data(seed),
        Source::Mnist(dir) => load_mnist(dir),
    }
}

/// Flavor-1 base configuration shared by every curve of a figure.
pub fn figure_config(source: &Source, input_dim: usize, seed: u64) -> Result<FederationConfig> {
    let (hidden, lr): (&[usize], f64) = match source {
        Source::Synthetic => (&SYNTHETIC_HIDDEN, SYNTHETIC_LR),
        Source::Mnist(_) => (&MNIST_HIDDEN, MNIST_LR),
    };
    let mut c = FederationConfig::new(
        Flavor::Flavor1,
        NetworkSpec::mlp(input_dim, hidden, CLASSES)?,
    );
    c.agencies = AGENCIES;
    c.rounds = ROUNDS;
    c.local_steps = LOCAL_STEPS;
    c.epochs_per_visit = FLAVOR2_EPOCHS;
    c.batch_size = BATCH_SIZE;
    c.lr = lr;
    c.seed = seed;
    Ok(c)
}

/// Centralized baseline on the easy blobs (or MNIST) with a single hidden
/// layer of 128.
pub fn baseline_config(input_dim: usize, seed: u64) -> Result<FederationConfig> {
    let mut c = FederationConfig::new(
        Flavor::Centralized,
        NetworkSpec::mlp(input_dim, &MNIST_HIDDEN, CLASSES)?,
    );
    c.rounds = ROUNDS;
    c.local_steps = LOCAL_STEPS;
    c.batch_size = BATCH_SIZE;
    c.lr = MNIST_LR;
    c.seed = seed;
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurveData {
    Rounds(Vec<RoundRecord>),
    Cost(Vec<CurvePoint>),
    Sweep(Vec<SweepPoint>),
}

/// One plotted line; written as `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub data: CurveData,
}

impl Curve {
    fn rounds(name: impl Into<String>, records: Vec<RoundRecord>) -> Self {
        Curve {
            name: name.into(),
            data: CurveData::Rounds(records),
        }
    }

    pub fn records(&self) -> Option<&[RoundRecord]> {
        match &self.data {
            CurveData::Rounds(r) => Some(r),
            _ => None,
        }
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        match &self.data {
            CurveData::Rounds(r) => r.last().map(|r| r.accuracy),
            CurveData::Sweep(s) => s.last().map(|p| p.final_accuracy),
            CurveData::Cost(_) => None,
        }
    }
}

/// The cost-model curves: one per agency count over the default grid.
pub fn cost_curves() -> Result<Vec<Curve>> {
    let grid = cost_model::log_grid(
        cost_model::DEFAULT_N_RANGE.0,
        cost_model::DEFAULT_N_RANGE.1,
        cost_model::DEFAULT_N_STEPS,
    )?;
    cost_model::DEFAULT_AGENCIES
        .iter()
        .map(|&a| {
            Ok(Curve {
                name: format!("fig4_A{a}"),
                data: CurveData::Cost(cost_model::sweep_curve(
                    &grid,
                    &[a],
                    cost_model::DEFAULT_MODEL_REDUCTION,
                )?),
            })
        })
        .collect()
}

fn variant(
    base: &FederationConfig,
    flavor: Flavor,
    partition: PartitionMode,
    k: usize,
) -> FederationConfig {
    let mut c = base.clone();
    c.flavor = flavor;
    c.partition = partition;
    c.exchange_per_class = k;
    c
}

/// Runs every curve of `figure`. `base` comes from [`figure_config`],
/// possibly with a different worker count.
pub fn run_figure(
    figure: Figure,
    base: &FederationConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<Vec<Curve>> {
    use Flavor::*;
    use PartitionMode::*;
    let run = |name: &str, flavor, partition, k| -> Result<Curve> {
        let out = run_experiment(&variant(base, flavor, partition, k), train, test)?;
        Ok(Curve::rounds(format!("{figure}_{name}"), out.records))
    };
    match figure {
        Figure::Fig4 => cost_curves(),
        Figure::Fig6 => Ok(vec![
            run("flavor1_random", Flavor1, Random, 0)?,
            run("centralized", Centralized, Random, 0)?,
        ]),
        Figure::Fig7 => Ok(vec![
            run("flavor2_random", Flavor2, Random, 0)?,
            run("centralized", Centralized, Random, 0)?,
        ]),
        Figure::Fig8 => Ok(vec![
            run("flavor1_by_class", Flavor1, ByClass, 0)?,
            run("flavor2_by_class", Flavor2, ByClass, 0)?,
            run("flavor1_random", Flavor1, Random, 0)?,
        ]),
        Figure::Fig9 => Ok(vec![
            run("flavor1_by_class", Flavor1, ByClass, 0)?,
            run(
                &format!("flavor1_by_class_k{EXCHANGE_K}"),
                Flavor1,
                ByClass,
                EXCHANGE_K,
            )?,
            run("flavor2_by_class", Flavor2, ByClass, 0)?,
            run(
                &format!("flavor2_by_class_k{EXCHANGE_K}"),
                Flavor2,
                ByClass,
                EXCHANGE_K,
            )?,
            run("flavor1_random", Flavor1, Random, 0)?,
        ]),
        Figure::Fig10 => {
            let cfg = variant(base, Flavor1, ByClass, 0);
            Ok(vec![Curve {
                name: format!("{figure}_exchange_sweep"),
                data: CurveData::Sweep(sweep_exchange(&cfg, train, test, &SWEEP_K)?),
            }])
        }
    }
}
