//! Runs the figure scenarios on synthetic blobs and prints final accuracies,
//! the share of the most predicted class, every fifth accuracy and the
//! largest dip of the window-10 smoothed series.
//!
//! Defaults are the shipped figure preset. Environment variables override
//! them so calibration runs need no rebuild: PER_CLASS, TEST_PER_CLASS, DIM,
//! HIDDEN (comma list), TAU, LR, BATCH, ROUNDS, SEED; LR2 and EPOCHS2 apply
//! to flavor 2 only; SCEN picks scenarios by index (comma list).

use std::env;
use std::time::Instant;

use fedsim::data::generate_synthetic_split;
use fedsim::federation::smooth;
use fedsim::federation::{run_experiment, FederationConfig, Flavor, PartitionMode};
use fedsim::nn::NetworkSpec;
use fedsim::presets::*;

fn var<T: std::str::FromStr>(name: &str, default: T) -> T {
    env::var(name)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn main() {
    let per_class: usize = var("PER_CLASS", SYNTHETIC_TRAIN_PER_CLASS);
    let test_per_class: usize = var("TEST_PER_CLASS", SYNTHETIC_TEST_PER_CLASS);
    let dim: usize = var("DIM", SYNTHETIC_DIM);
    let hidden: Vec<usize> = env::var("HIDDEN")
        .map(|v| v.split(',').map(|h| h.parse().unwrap()).collect())
        .unwrap_or_else(|_| SYNTHETIC_HIDDEN.to_vec());
    let seed: u64 = var("SEED", 0);
    let (train, test) =
        generate_synthetic_split(CLASSES, per_class, test_per_class, dim, seed).unwrap();
    let spec = NetworkSpec::mlp(dim, &hidden, CLASSES).unwrap();
    let mut base = FederationConfig::new(Flavor::Flavor1, spec);
    base.local_steps = var("TAU", LOCAL_STEPS);
    base.lr = var("LR", SYNTHETIC_LR);
    base.batch_size = var("BATCH", BATCH_SIZE);
    base.rounds = var("ROUNDS", ROUNDS);
    base.agencies = AGENCIES;
    base.seed = seed;

    let scenarios: Vec<(&str, Flavor, PartitionMode, usize)> = vec![
        ("centralized", Flavor::Centralized, PartitionMode::Random, 0),
        ("f1 random", Flavor::Flavor1, PartitionMode::Random, 0),
        ("f1 by_class", Flavor::Flavor1, PartitionMode::ByClass, 0),
        (
            "f1 by_class k16",
            Flavor::Flavor1,
            PartitionMode::ByClass,
            16,
        ),
        (
            "f1 by_class k64",
            Flavor::Flavor1,
            PartitionMode::ByClass,
            64,
        ),
        (
            "f1 by_class k128",
            Flavor::Flavor1,
            PartitionMode::ByClass,
            128,
        ),
        ("f2 random", Flavor::Flavor2, PartitionMode::Random, 0),
        ("f2 by_class", Flavor::Flavor2, PartitionMode::ByClass, 0),
        (
            "f2 by_class k128",
            Flavor::Flavor2,
            PartitionMode::ByClass,
            128,
        ),
    ];
    let only: Option<Vec<usize>> = env::var("SCEN")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.parse().ok()).collect());
    for (i, (name, flavor, partition, k)) in scenarios.into_iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&i)) {
            continue;
        }
        let mut c = base.clone();
        c.flavor = flavor;
        c.partition = partition;
        c.exchange_per_class = k;
        if flavor == Flavor::Flavor2 {
            c.lr = var("LR2", c.lr);
            c.epochs_per_visit = var("EPOCHS2", FLAVOR2_EPOCHS);
        }
        let t = Instant::now();
        let out = run_experiment(&c, &train, &test).unwrap();
        let acc = out.accuracies();
        let dip = smooth(&acc, 10)
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max);
        let early: Vec<String> = acc
            .iter()
            .skip(4)
            .step_by(5)
            .map(|a| format!("{a:.3}"))
            .collect();
        println!(
            "{name:18} final {:.4} dominant {:.3} dip {dip:.4} every5 [{}] ({:.1}s)",
            out.final_accuracy(),
            out.final_eval.dominant_share(),
            early.join(" "),
            t.elapsed().as_secs_f64()
        );
    }
}
