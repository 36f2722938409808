//! C ABI over `fedsim`.
//!
//! Objects are opaque handles returned through out-pointers by the
//! constructors (`fedsim_dataset_synthetic`, `fedsim_experiment_load`,
//! `fedsim_experiment_run`, ...) and released with the matching `_free`. Every fallible call returns a
//! [`FedsimStatus`]; on failure the message is available from
//! [`fedsim_last_error_message`] on the same thread until the next failing
//! call. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use fedsim::config::{load_experiment, ExperimentFile};
use fedsim::cost_model::{self, CostParams};
use fedsim::data::{generate_synthetic, load_idx, Dataset};
use fedsim::federation::{run_experiment, RunOutput};
use fedsim::report;
use fedsim::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FedsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Data = 5,
    Internal = 6,
}

impl From<&Error> for FedsimStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => FedsimStatus::Config,
            Error::Io { .. } | Error::Csv(_) => FedsimStatus::Io,
            Error::BadMagic { .. } | Error::Truncated { .. } | Error::CountMismatch { .. } => {
                FedsimStatus::Data
            }
            _ => FedsimStatus::InvalidArgument,
        }
    }
}

/// Training or test examples.
pub struct FedsimDataset(Dataset);

/// A parsed experiment file.
pub struct FedsimExperiment(ExperimentFile);

/// The outcome of one run.
pub struct FedsimRun(RunOutput);

/// Metrics after one round or relay visit.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FedsimRoundRecord {
    pub round: u64,
    pub accuracy: f64,
    pub loss: f64,
    pub bytes_up: u64,
    pub bytes_down: u64,
    pub sim_time: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: FedsimStatus, msg: impl Into<String>) -> FedsimStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), FedsimStatus>) -> FedsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FedsimStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(FedsimStatus::Internal, "internal panic"),
    }
}

fn lift<T>(r: fedsim::Result<T>) -> Result<T, FedsimStatus> {
    r.map_err(|e| fail(FedsimStatus::from(&e), e.to_string()))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, FedsimStatus> {
    if p.is_null() {
        return Err(fail(FedsimStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map(PathBuf::from).map_err(|_| {
        fail(
            FedsimStatus::InvalidArgument,
            format!("{what} is not UTF-8"),
        )
    })
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, FedsimStatus> {
    p.as_ref()
        .ok_or_else(|| fail(FedsimStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, FedsimStatus> {
    p.as_mut()
        .ok_or_else(|| fail(FedsimStatus::NullPointer, format!("{what} is null")))
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fedsim_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Centralized over federated training time for `N = k_n / k_s`.
///
/// # Safety
/// `ratio` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn fedsim_time_ratio(
    k_n: f64,
    k_s: f64,
    agencies: usize,
    model_reduction: f64,
    ratio: *mut f64,
) -> FedsimStatus {
    guard(|| {
        let ratio = out(ratio, "ratio")?;
        let cp = lift(CostParams::new(k_n, k_s, agencies, model_reduction))?;
        *ratio = cost_model::time_ratio(&cp);
        Ok(())
    })
}

/// Gaussian-blob dataset with `classes * per_class` examples.
///
/// # Safety
/// `dataset` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn fedsim_dataset_synthetic(
    classes: usize,
    per_class: usize,
    dim: usize,
    seed: u64,
    dataset: *mut *mut FedsimDataset,
) -> FedsimStatus {
    guard(|| {
        let slot = out(dataset, "dataset")?;
        let d = lift(generate_synthetic(classes, per_class, dim, seed))?;
        *slot = Box::into_raw(Box::new(FedsimDataset(d)));
        Ok(())
    })
}

/// Loads an IDX image/label file pair.
///
/// # Safety
/// Paths must be null or nul-terminated; `dataset` must be null or point
/// to writable memory.
#[no_mangle]
pub unsafe extern "C" fn fedsim_dataset_load_idx(
    images: *const c_char,
    labels: *const c_char,
    dataset: *mut *mut FedsimDataset,
) -> FedsimStatus {
    guard(|| {
        let slot = out(dataset, "dataset")?;
        let images = path_arg(images, "images")?;
        let labels = path_arg(labels, "labels")?;
        let d = lift(load_idx(images, labels))?;
        *slot = Box::into_raw(Box::new(FedsimDataset(d)));
        Ok(())
    })
}

/// Number of examples, or 0 for null.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fedsim_dataset_len(dataset: *const FedsimDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.len())
}

/// Features per example, or 0 for null.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fedsim_dataset_dim(dataset: *const FedsimDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.dim())
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fedsim_dataset_free(dataset: *mut FedsimDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Parses an experiment file.
///
/// # Safety
/// `path` must be null or nul-terminated; `experiment` must be null or
/// point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn fedsim_experiment_load(
    path: *const c_char,
    experiment: *mut *mut FedsimExperiment,
) -> FedsimStatus {
    guard(|| {
        let slot = out(experiment, "experiment")?;
        let path = path_arg(path, "path")?;
        let e = lift(load_experiment(&path))?;
        *slot = Box::into_raw(Box::new(FedsimExperiment(e)));
        Ok(())
    })
}

/// Replaces the experiment seed.
///
/// # Safety
/// `experiment` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fedsim_experiment_set_seed(
    experiment: *mut FedsimExperiment,
    seed: u64,
) -> FedsimStatus {
    guard(|| {
        out(experiment, "experiment")?.0.override_seed(seed);
        Ok(())
    })
}

/// Loads the experiment's data and runs it.
///
/// # Safety
/// `experiment` must be null or a live handle; `run` must be null or point
/// to writable memory.
#[no_mangle]
pub unsafe extern "C" fn fedsim_experiment_run(
    experiment: *const FedsimExperiment,
    run: *mut *mut FedsimRun,
) -> FedsimStatus {
    guard(|| {
        let exp = &deref(experiment, "experiment")?.0;
        let slot = out(run, "run")?;
        let (train, test) = lift(exp.load_data())?;
        let config = lift(exp.federation_config(&train, &test))?;
        let output = lift(run_experiment(&config, &train, &test))?;
        *slot = Box::into_raw(Box::new(FedsimRun(output)));
        Ok(())
    })
}

/// Runs the experiment's settings on caller-supplied data.
///
/// # Safety
/// Handles must be null or live; `run` must be null or point to writable
/// memory.
#[no_mangle]
pub unsafe extern "C" fn fedsim_experiment_run_on(
    experiment: *const FedsimExperiment,
    train: *const FedsimDataset,
    test: *const FedsimDataset,
    run: *mut *mut FedsimRun,
) -> FedsimStatus {
    guard(|| {
        let exp = &deref(experiment, "experiment")?.0;
        let train = &deref(train, "train")?.0;
        let test = &deref(test, "test")?.0;
        let slot = out(run, "run")?;
        let config = lift(exp.federation_config(train, test))?;
        let output = lift(run_experiment(&config, train, test))?;
        *slot = Box::into_raw(Box::new(FedsimRun(output)));
        Ok(())
    })
}

/// # Safety
/// `experiment` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fedsim_experiment_free(experiment: *mut FedsimExperiment) {
    if !experiment.is_null() {
        drop(Box::from_raw(experiment));
    }
}

/// Number of recorded rounds, or 0 for null.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fedsim_run_round_count(run: *const FedsimRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.records.len())
}

/// Copies round `index` (0-based) into `record`.
///
/// # Safety
/// `run` must be null or a live handle; `record` must be null or point to
/// writable memory.
#[no_mangle]
pub unsafe extern "C" fn fedsim_run_round(
    run: *const FedsimRun,
    index: usize,
    record: *mut FedsimRoundRecord,
) -> FedsimStatus {
    guard(|| {
        let r = &deref(run, "run")?.0;
        let slot = out(record, "record")?;
        let rec = r.records.get(index).ok_or_else(|| {
            fail(
                FedsimStatus::InvalidArgument,
                format!(
                    "round index {index} out of range ({} rounds)",
                    r.records.len()
                ),
            )
        })?;
        *slot = FedsimRoundRecord {
            round: rec.round as u64,
            accuracy: rec.accuracy,
            loss: rec.loss,
            bytes_up: rec.bytes_up,
            bytes_down: rec.bytes_down,
            sim_time: rec.sim_time,
        };
        Ok(())
    })
}

/// Test accuracy of the final model, or NaN for null.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fedsim_run_final_accuracy(run: *const FedsimRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.0.final_accuracy())
}

/// Bytes moved during the run, or 0 for null.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fedsim_run_total_bytes(run: *const FedsimRun) -> u64 {
    run.as_ref().map_or(0, |r| r.0.ledger.total_bytes())
}

/// Writes `rounds.csv` and `summary.csv` into an existing directory.
///
/// # Safety
/// `run` must be null or a live handle; `dir` must be null or
/// nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn fedsim_run_write_csv(
    run: *const FedsimRun,
    dir: *const c_char,
) -> FedsimStatus {
    guard(|| {
        let r = &deref(run, "run")?.0;
        let dir = path_arg(dir, "dir")?;
        lift(report::write_rounds(&dir.join("rounds.csv"), &r.records))?;
        lift(report::write_summary(&dir.join("summary.csv"), r))
    })
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fedsim_run_free(run: *mut FedsimRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
