//! Round-driven simulations of centralized training and the federation
//! flavors: synchronized averaging (flavor 1), sequential model relay
//! (flavor 2), and either of those after a limited data exchange
//! (flavor 3).
//!
//! Every run is a pure function of its configuration and datasets. Client
//! training inside a flavor-1 round may run on several threads, but the
//! server always consumes results in ascending agency order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cost_model::CostParams;
use crate::data::{
    apply_exchange, partition_by_class, partition_random, Dataset, LocalShards, PartitionPlan,
};
use crate::error::{Error, Result};
use crate::nn::{
    self, average_params, batches_per_epoch, evaluate, init_params, BatchSampler, Evaluation,
    ModelParams, NetworkSpec,
};
use crate::rng::Stream;
use crate::simnet::{
    simulated_time, ComputeLog, ComputeSchedule, DataUnit, Endpoint, TrafficLedger, TransferKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    Centralized,
    /// Synchronized rounds of local training and server-side averaging.
    Flavor1,
    /// The model is relayed from agency to agency.
    Flavor2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartitionMode {
    Random,
    ByClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Weighting {
    Equal,
    DataSize,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self {
                    $($ty::$variant => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " '{}' (expected one of: {})"),
                        other,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

keyword_enum!(Flavor { Centralized => "centralized", Flavor1 => "flavor1", Flavor2 => "flavor2" });
keyword_enum!(PartitionMode { Random => "random", ByClass => "by_class" });
keyword_enum!(Weighting { Equal => "equal", DataSize => "data_size" });

/// One experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig {
    pub flavor: Flavor,
    pub agencies: usize,
    pub partition: PartitionMode,
    /// Samples of every class handed to each agency before training.
    /// Non-zero turns flavor 1 or 2 into flavor 3.
    pub exchange_per_class: usize,
    /// Synchronization rounds (flavor 1) or evaluation points (centralized).
    pub rounds: usize,
    /// Mini-batch steps per round.
    pub local_steps: usize,
    /// Flavor 2: epochs over the local shard at every visit.
    pub epochs_per_visit: usize,
    /// Flavor 2: trips through the whole agency sequence.
    pub passes: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub network: NetworkSpec,
    /// Serialized model size; defaults to eight bytes per parameter.
    pub model_bytes: Option<u64>,
    pub weighting: Weighting,
    /// Threads used for flavor-1 client training.
    pub workers: usize,
    /// Time to move one data unit.
    pub k_n: f64,
    /// Time to train on one data unit.
    pub k_s: f64,
    /// Keep the global parameters after every round.
    pub keep_snapshots: bool,
}

impl FederationConfig {
    pub fn new(flavor: Flavor, network: NetworkSpec) -> Self {
        FederationConfig {
            flavor,
            agencies: 10,
            partition: PartitionMode::Random,
            exchange_per_class: 0,
            rounds: 50,
            local_steps: 1,
            epochs_per_visit: 1,
            passes: 1,
            batch_size: 128,
            lr: 0.1,
            seed: 0,
            network,
            model_bytes: None,
            weighting: Weighting::Equal,
            workers: 1,
            k_n: 1.0,
            k_s: 1.0,
            keep_snapshots: false,
        }
    }

    pub fn model_bytes(&self) -> u64 {
        self.model_bytes
            .unwrap_or((self.network.param_count() * std::mem::size_of::<f64>()) as u64)
    }

    /// Checks everything that can be checked without data.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.agencies == 0 {
            return fail("agencies must be at least 1".into());
        }
        if self.rounds == 0 {
            return fail("rounds must be at least 1".into());
        }
        if self.local_steps == 0 {
            return fail("local_steps must be at least 1".into());
        }
        if self.epochs_per_visit == 0 {
            return fail("epochs_per_visit must be at least 1".into());
        }
        if self.passes == 0 {
            return fail("passes must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if self.workers == 0 {
            return fail("workers must be at least 1".into());
        }
        if self.model_bytes == Some(0) {
            return fail("model_bytes must be positive".into());
        }
        if self.flavor == Flavor::Centralized && self.exchange_per_class > 0 {
            return fail("data exchange applies to flavor1 or flavor2, not centralized".into());
        }
        CostParams::new(self.k_n, self.k_s, self.agencies, 0.0)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Checks the configuration against the datasets it will run on.
    pub fn validate_for(&self, train: &Dataset, test: &Dataset) -> Result<()> {
        self.validate()?;
        let fail = |msg: String| Err(Error::Config(msg));
        if self.network.input_dim() != train.dim() || test.dim() != train.dim() {
            return fail(format!(
                "network {} expects {} inputs, data has {} (test {})",
                self.network,
                self.network.input_dim(),
                train.dim(),
                test.dim()
            ));
        }
        if self.network.class_count() < train.class_count().max(test.class_count()) {
            return fail(format!(
                "network {} has {} outputs but the data has {} classes",
                self.network,
                self.network.class_count(),
                train.class_count().max(test.class_count())
            ));
        }
        if self.agencies > train.len() {
            return fail(format!(
                "{} agencies but only {} examples",
                self.agencies,
                train.len()
            ));
        }
        if self.partition == PartitionMode::ByClass && self.agencies > train.class_count() {
            return fail(format!(
                "by_class partition needs agencies <= classes ({} > {})",
                self.agencies,
                train.class_count()
            ));
        }
        if self.exchange_per_class > 0 {
            let smallest = train
                .class_indices()
                .iter()
                .map(Vec::len)
                .min()
                .unwrap_or(0);
            if self.exchange_per_class > smallest {
                return fail(format!(
                    "exchange_per_class {} exceeds the smallest class ({smallest} examples)",
                    self.exchange_per_class
                ));
            }
        }
        Ok(())
    }
}

/// Metrics after one round (flavor 1, centralized) or one visit (flavor 2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    pub accuracy: f64,
    pub loss: f64,
    pub bytes_up: u64,
    pub bytes_down: u64,
    pub sim_time: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub final_params: ModelParams,
    pub final_eval: Evaluation,
    pub ledger: TrafficLedger,
    pub compute: ComputeLog,
    pub warnings: Vec<String>,
    /// Global parameters after each record, when requested.
    pub snapshots: Vec<ModelParams>,
}

impl RunOutput {
    pub fn final_accuracy(&self) -> f64 {
        self.final_eval.accuracy
    }

    pub fn final_record(&self) -> &RoundRecord {
        self.records
            .last()
            .expect("runs produce at least one record")
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.accuracy).collect()
    }
}

/// One agency's view during a run.
#[derive(Debug, Clone)]
pub struct AgencyState {
    pub id: usize,
    pub indices: Vec<usize>,
    pub params: ModelParams,
    sampler: BatchSampler,
}

impl AgencyState {
    fn new(id: usize, indices: Vec<usize>, params: ModelParams, seed: u64) -> Self {
        let sampler = BatchSampler::new(indices.len(), seed, Stream::Sampler(id));
        AgencyState {
            id,
            indices,
            params,
            sampler,
        }
    }
}

/// State shared by one run: datasets, cost units, ledger and metrics.
struct Run<'a> {
    config: &'a FederationConfig,
    train: &'a Dataset,
    test: &'a Dataset,
    cost: CostParams,
    unit: DataUnit,
    schedule: ComputeSchedule,
    ledger: TrafficLedger,
    compute: ComputeLog,
    records: Vec<RoundRecord>,
    snapshots: Vec<ModelParams>,
    warnings: Vec<String>,
}

impl<'a> Run<'a> {
    fn new(
        config: &'a FederationConfig,
        train: &'a Dataset,
        test: &'a Dataset,
        schedule: ComputeSchedule,
    ) -> Result<Self> {
        config.validate_for(train, test)?;
        let unit = DataUnit {
            examples: train.len() as f64 / config.agencies as f64,
            bytes_per_example: train.bytes_per_example(),
        };
        let model_reduction = config.model_bytes() as f64 / unit.bytes();
        let cost = CostParams::new(config.k_n, config.k_s, config.agencies, model_reduction)?;
        Ok(Run {
            config,
            train,
            test,
            cost,
            unit,
            schedule,
            ledger: TrafficLedger::new(),
            compute: ComputeLog::new(config.agencies),
            records: Vec::new(),
            snapshots: Vec::new(),
            warnings: Vec::new(),
        })
    }

    fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    fn transfer(
        &mut self,
        src: Endpoint,
        dst: Endpoint,
        bytes: u64,
        kind: TransferKind,
    ) -> Result<()> {
        self.ledger.record_transfer(src, dst, bytes, kind)
    }

    fn record_exchange(&mut self, shards: &LocalShards) -> Result<()> {
        let bpe = self.train.bytes_per_example();
        for t in &shards.transfers {
            self.transfer(
                Endpoint::Agency(t.from),
                Endpoint::Agency(t.to),
                t.examples as u64 * bpe,
                TransferKind::Data,
            )?;
        }
        Ok(())
    }

    fn check_batch_sizes(&mut self, shards: &[Vec<usize>]) {
        for (agency, shard) in shards.iter().enumerate() {
            if !shard.is_empty() && self.config.batch_size > shard.len() {
                self.warn(format!(
                    "agency {agency}: batch size {} exceeds its {} examples; clamping",
                    self.config.batch_size,
                    shard.len()
                ));
            }
        }
    }

    fn checkpoint(&mut self, params: &ModelParams) -> Result<Evaluation> {
        let eval = evaluate(params, &self.config.network, &self.test.all())?;
        let sim_time = simulated_time(
            &self.ledger,
            &self.cost,
            &self.compute,
            self.schedule,
            self.unit,
        );
        self.records.push(RoundRecord {
            round: self.records.len() + 1,
            accuracy: eval.accuracy,
            loss: eval.mean_loss,
            bytes_up: self.ledger.bytes_up(),
            bytes_down: self.ledger.bytes_down(),
            sim_time,
        });
        if self.config.keep_snapshots {
            self.snapshots.push(params.clone());
        }
        Ok(eval)
    }

    fn finish(self, final_params: ModelParams, final_eval: Evaluation) -> RunOutput {
        RunOutput {
            records: self.records,
            final_params,
            final_eval,
            ledger: self.ledger,
            compute: self.compute,
            warnings: self.warnings,
            snapshots: self.snapshots,
        }
    }
}

fn initial_params(config: &FederationConfig) -> ModelParams {
    init_params(&config.network, config.seed)
}

/// Builds the partition the configuration asks for.
pub fn make_plan(config: &FederationConfig, train: &Dataset) -> Result<PartitionPlan> {
    match config.partition {
        PartitionMode::Random => partition_random(train, config.agencies, config.seed),
        PartitionMode::ByClass => partition_by_class(train, config.agencies),
    }
}

/// Every agency ships its raw shard to the server once, then the server
/// trains on the pooled data for `rounds * local_steps` steps, evaluating
/// every `local_steps` steps.
pub fn run_centralized(
    config: &FederationConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<RunOutput> {
    let plan = make_plan(config, train)?;
    run_centralized_on(config, train, &plan, test)
}

/// [`run_centralized`] with an explicit plan. The pooled data is the
/// concatenation of the shards in agency order.
pub fn run_centralized_on(
    config: &FederationConfig,
    train: &Dataset,
    plan: &PartitionPlan,
    test: &Dataset,
) -> Result<RunOutput> {
    let mut run = Run::new(config, train, test, ComputeSchedule::Sequential)?;
    let bpe = train.bytes_per_example();
    for (agency, shard) in plan.shards().iter().enumerate() {
        run.transfer(
            Endpoint::Agency(agency),
            Endpoint::Server,
            shard.len() as u64 * bpe,
            TransferKind::Data,
        )?;
    }
    let pooled: Vec<usize> = plan.shards().concat();
    run.check_batch_sizes(std::slice::from_ref(&pooled));
    let data = train.subset(&pooled)?;

    let mut params = initial_params(config);
    let mut sampler = BatchSampler::new(pooled.len(), config.seed, Stream::Sampler(0));
    let mut eval = None;
    for _ in 0..config.rounds {
        let (next, seen) = nn::train_with_sampler(
            &params,
            &config.network,
            &data,
            &mut sampler,
            config.local_steps,
            config.batch_size,
            config.lr,
        )?;
        params = next;
        run.compute.record(0, seen as u64);
        eval = Some(run.checkpoint(&params)?);
    }
    Ok(run.finish(params, eval.expect("rounds >= 1")))
}

fn agency_states(config: &FederationConfig, shards: &[Vec<usize>]) -> Vec<AgencyState> {
    let init = initial_params(config);
    shards
        .iter()
        .enumerate()
        .map(|(id, ix)| AgencyState::new(id, ix.clone(), init.clone(), config.seed))
        .collect()
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {workers} worker threads: {e}")))
}

/// Synchronized online federation over the given local shards.
pub fn run_flavor1(
    config: &FederationConfig,
    train: &Dataset,
    shards: &LocalShards,
    test: &Dataset,
) -> Result<RunOutput> {
    let mut run = Run::new(config, train, test, ComputeSchedule::Parallel)?;
    check_shard_count(config, shards)?;
    run.record_exchange(shards)?;
    flavor1_rounds(run, shards)
}

fn check_shard_count(config: &FederationConfig, shards: &LocalShards) -> Result<()> {
    if shards.shards.len() != config.agencies {
        return Err(Error::Config(format!(
            "{} shards for {} agencies",
            shards.shards.len(),
            config.agencies
        )));
    }
    Ok(())
}

fn flavor1_rounds(mut run: Run<'_>, shards: &LocalShards) -> Result<RunOutput> {
    let config = run.config;
    let train = run.train;
    let spec = &config.network;
    let model_bytes = config.model_bytes();
    run.check_batch_sizes(&shards.shards);
    for (agency, shard) in shards.shards.iter().enumerate() {
        if shard.is_empty() {
            run.warn(format!(
                "agency {agency} holds no data; it returns the global model unchanged"
            ));
        }
    }
    let mut agencies = agency_states(config, &shards.shards);
    let weights: Vec<f64> = agencies
        .iter()
        .map(|a| match config.weighting {
            Weighting::Equal => 1.0,
            Weighting::DataSize => a.indices.len().max(1) as f64,
        })
        .collect();
    let pool = worker_pool(config.workers)?;
    let mut global = initial_params(config);
    let mut eval = None;

    for _ in 0..config.rounds {
        let results: Vec<Result<usize>> = pool.install(|| {
            agencies
                .par_iter_mut()
                .map(|agency| {
                    if agency.indices.is_empty() {
                        agency.params = global.clone();
                        return Ok(0);
                    }
                    let data = train.subset(&agency.indices)?;
                    let (params, seen) = nn::train_with_sampler(
                        &global,
                        spec,
                        &data,
                        &mut agency.sampler,
                        config.local_steps,
                        config.batch_size,
                        config.lr,
                    )?;
                    agency.params = params;
                    Ok(seen)
                })
                .collect()
        });
        for (agency, seen) in results.into_iter().enumerate() {
            run.compute.record(agency, seen? as u64);
            run.transfer(
                Endpoint::Agency(agency),
                Endpoint::Server,
                model_bytes,
                TransferKind::Model,
            )?;
        }
        let entries: Vec<(&ModelParams, f64)> = agencies
            .iter()
            .map(|a| &a.params)
            .zip(weights.iter().copied())
            .collect();
        global = average_params(&entries)?;
        for agency in agencies.iter_mut() {
            agency.params = global.clone();
            run.ledger.record_transfer(
                Endpoint::Server,
                Endpoint::Agency(agency.id),
                model_bytes,
                TransferKind::Model,
            )?;
        }
        eval = Some(run.checkpoint(&global)?);
    }
    Ok(run.finish(global, eval.expect("rounds >= 1")))
}

/// Sequential model relay: the server dispatches the model to agency 0,
/// which trains `epochs_per_visit` epochs on its shard and hands the model
/// to agency 1, and so on. One record per visit.
pub fn run_flavor2(
    config: &FederationConfig,
    train: &Dataset,
    shards: &LocalShards,
    test: &Dataset,
) -> Result<RunOutput> {
    let mut run = Run::new(config, train, test, ComputeSchedule::Sequential)?;
    check_shard_count(config, shards)?;
    run.record_exchange(shards)?;
    flavor2_visits(run, shards)
}

fn flavor2_visits(mut run: Run<'_>, shards: &LocalShards) -> Result<RunOutput> {
    let config = run.config;
    let train = run.train;
    let model_bytes = config.model_bytes();
    run.check_batch_sizes(&shards.shards);
    let mut agencies = agency_states(config, &shards.shards);
    let mut params = initial_params(config);
    let mut holder = Endpoint::Server;
    let mut eval = None;

    for _ in 0..config.passes {
        for agency in agencies.iter_mut() {
            let here = Endpoint::Agency(agency.id);
            run.transfer(holder, here, model_bytes, TransferKind::Model)?;
            holder = here;
            if agency.indices.is_empty() {
                run.warn(format!(
                    "agency {} holds no data; passing the model on",
                    agency.id
                ));
            } else {
                let data = train.subset(&agency.indices)?;
                let steps =
                    config.epochs_per_visit * batches_per_epoch(data.len(), config.batch_size);
                let (next, seen) = nn::train_with_sampler(
                    &params,
                    &config.network,
                    &data,
                    &mut agency.sampler,
                    steps,
                    config.batch_size,
                    config.lr,
                )?;
                params = next;
                run.compute.record(agency.id, seen as u64);
            }
            agency.params = params.clone();
            eval = Some(run.checkpoint(&params)?);
        }
    }
    Ok(run.finish(params, eval.expect("passes >= 1 and agencies >= 1")))
}

/// Exchanges `exchange_per_class` samples of every class with each agency,
/// then runs the base flavor on the enlarged shards.
pub fn run_flavor3(
    config: &FederationConfig,
    train: &Dataset,
    plan: &PartitionPlan,
    test: &Dataset,
) -> Result<RunOutput> {
    let shards = apply_exchange(train, plan, config.exchange_per_class, config.seed)?;
    match config.flavor {
        Flavor::Flavor1 => run_flavor1(config, train, &shards, test),
        Flavor::Flavor2 => run_flavor2(config, train, &shards, test),
        Flavor::Centralized => Err(Error::Config(
            "data exchange needs flavor1 or flavor2 as the base flavor".into(),
        )),
    }
}

/// Partitions per the configuration and dispatches to the right flavor.
pub fn run_experiment(
    config: &FederationConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<RunOutput> {
    config.validate_for(train, test)?;
    let plan = make_plan(config, train)?;
    match (config.flavor, config.exchange_per_class) {
        (Flavor::Centralized, _) => run_centralized_on(config, train, &plan, test),
        (Flavor::Flavor1, 0) => run_flavor1(config, train, &LocalShards::unchanged(&plan), test),
        (Flavor::Flavor2, 0) => run_flavor2(config, train, &LocalShards::unchanged(&plan), test),
        _ => run_flavor3(config, train, &plan, test),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub exchange_per_class: usize,
    pub final_accuracy: f64,
}

/// Final flavor-1 accuracy for each exchange amount, all other settings
/// held fixed.
pub fn sweep_exchange(
    config: &FederationConfig,
    train: &Dataset,
    test: &Dataset,
    k_values: &[usize],
) -> Result<Vec<SweepPoint>> {
    if config.flavor != Flavor::Flavor1 {
        return Err(Error::Config("the exchange sweep runs on flavor1".into()));
    }
    k_values
        .iter()
        .map(|&k| {
            let mut c = config.clone();
            c.exchange_per_class = k;
            run_experiment(&c, train, test).map(|out| SweepPoint {
                exchange_per_class: k,
                final_accuracy: out.final_accuracy(),
            })
        })
        .collect()
}

/// Trailing moving average with the given window; the first entries
/// average over what is available.
pub fn smooth(series: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, &v) in series.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= series[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

pub fn is_non_decreasing(series: &[f64]) -> bool {
    series.windows(2).all(|w| w[1] >= w[0])
}
