//! Traffic ledger and simulated elapsed time.
//!
//! Time is measured in the cost model's units: moving one data unit costs
//! `K_n`, training on one data unit costs `K_s`. One data unit is the size
//! of an average agency shard.

use std::fmt;

use crate::cost_model::CostParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    /// The coordinating agency's federation server / data warehouse.
    Server,
    Agency(usize),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Server => write!(f, "server"),
            Endpoint::Agency(i) => write!(f, "agency{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    Model,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransferEvent {
    pub src: Endpoint,
    pub dst: Endpoint,
    pub bytes: u64,
    pub kind: TransferKind,
}

/// Ordered log of every transfer in a run. Bytes sent by an agency count
/// as upload, bytes sent by the server as download.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrafficLedger {
    events: Vec<TransferEvent>,
    bytes_up: u64,
    bytes_down: u64,
}

impl TrafficLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_transfer(
        &mut self,
        src: Endpoint,
        dst: Endpoint,
        bytes: u64,
        kind: TransferKind,
    ) -> Result<()> {
        if bytes == 0 {
            return Err(Error::InvalidArgument("transfer of zero bytes".into()));
        }
        if src == dst {
            return Err(Error::InvalidArgument(format!(
                "transfer from {src} to itself"
            )));
        }
        match src {
            Endpoint::Server => self.bytes_down += bytes,
            Endpoint::Agency(_) => self.bytes_up += bytes,
        }
        self.events.push(TransferEvent {
            src,
            dst,
            bytes,
            kind,
        });
        Ok(())
    }

    pub fn events(&self) -> &[TransferEvent] {
        &self.events
    }

    pub fn bytes_up(&self) -> u64 {
        self.bytes_up
    }

    pub fn bytes_down(&self) -> u64 {
        self.bytes_down
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes_up + self.bytes_down
    }

    pub fn bytes_of(&self, kind: TransferKind) -> u64 {
        self.events
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| e.bytes)
            .sum()
    }

    /// Transfers the coordinator has to wait for. Broadcasts the server
    /// issues after the last transfer it receives do not delay the final
    /// model and are left out.
    pub fn critical_path(&self) -> impl Iterator<Item = &TransferEvent> {
        let cutoff = self.events.iter().rposition(|e| e.dst == Endpoint::Server);
        self.events
            .iter()
            .enumerate()
            .filter_map(move |(i, e)| match cutoff {
                Some(c) if i > c && e.src == Endpoint::Server => None,
                _ => Some(e),
            })
    }

    pub fn critical_path_bytes(&self) -> u64 {
        self.critical_path().map(|e| e.bytes).sum()
    }
}

/// Examples trained per agency.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComputeLog {
    examples: Vec<u64>,
}

impl ComputeLog {
    pub fn new(agencies: usize) -> Self {
        ComputeLog {
            examples: vec![0; agencies],
        }
    }

    pub fn record(&mut self, agency: usize, examples: u64) {
        if agency >= self.examples.len() {
            self.examples.resize(agency + 1, 0);
        }
        self.examples[agency] += examples;
    }

    pub fn per_agency(&self) -> &[u64] {
        &self.examples
    }

    pub fn total(&self) -> u64 {
        self.examples.iter().sum()
    }

    pub fn max(&self) -> u64 {
        self.examples.iter().copied().max().unwrap_or(0)
    }
}

/// How agencies' compute overlaps in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComputeSchedule {
    /// All agencies train at once; the slowest one sets the pace.
    Parallel,
    /// One trainer at a time.
    Sequential,
}

/// Size of one data unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataUnit {
    pub examples: f64,
    pub bytes_per_example: u64,
}

impl DataUnit {
    pub fn bytes(&self) -> f64 {
        self.examples * self.bytes_per_example as f64
    }
}

/// `K_n` times the data units on the critical transfer path plus `K_s`
/// times the data units trained along the compute schedule.
pub fn simulated_time(
    ledger: &TrafficLedger,
    cp: &CostParams,
    compute: &ComputeLog,
    schedule: ComputeSchedule,
    unit: DataUnit,
) -> f64 {
    let transfer_units = if ledger.events().is_empty() {
        0.0
    } else {
        ledger.critical_path_bytes() as f64 / unit.bytes()
    };
    let trained = match schedule {
        ComputeSchedule::Parallel => compute.max(),
        ComputeSchedule::Sequential => compute.total(),
    };
    let compute_units = if trained == 0 {
        0.0
    } else {
        trained as f64 / unit.examples
    };
    cp.k_n() * transfer_units + cp.k_s() * compute_units
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: DataUnit = DataUnit {
        examples: 100.0,
        bytes_per_example: 10,
    };

    #[test]
    fn totals_and_order() {
        let mut l = TrafficLedger::new();
        l.record_transfer(
            Endpoint::Agency(0),
            Endpoint::Server,
            100,
            TransferKind::Model,
        )
        .unwrap();
        assert_eq!(l.total_bytes(), 100);
        l.record_transfer(
            Endpoint::Server,
            Endpoint::Agency(1),
            30,
            TransferKind::Model,
        )
        .unwrap();
        l.record_transfer(
            Endpoint::Agency(1),
            Endpoint::Agency(2),
            7,
            TransferKind::Data,
        )
        .unwrap();
        assert_eq!(l.bytes_up(), 107);
        assert_eq!(l.bytes_down(), 30);
        assert_eq!(
            l.events().iter().map(|e| e.bytes).collect::<Vec<_>>(),
            vec![100, 30, 7]
        );
        assert_eq!(l.bytes_of(TransferKind::Data), 7);
        assert!(l
            .record_transfer(
                Endpoint::Server,
                Endpoint::Agency(0),
                0,
                TransferKind::Model
            )
            .is_err());
    }

    #[test]
    fn empty_run_takes_no_time() {
        let cp = CostParams::new(3.0, 2.0, 4, 0.1).unwrap();
        let t = simulated_time(
            &TrafficLedger::new(),
            &cp,
            &ComputeLog::new(4),
            ComputeSchedule::Parallel,
            UNIT,
        );
        assert_eq!(t, 0.0);
    }

    #[test]
    fn trailing_broadcast_off_critical_path() {
        let mut l = TrafficLedger::new();
        for a in 0..2 {
            l.record_transfer(
                Endpoint::Agency(a),
                Endpoint::Server,
                50,
                TransferKind::Model,
            )
            .unwrap();
        }
        for a in 0..2 {
            l.record_transfer(
                Endpoint::Server,
                Endpoint::Agency(a),
                50,
                TransferKind::Model,
            )
            .unwrap();
        }
        assert_eq!(l.critical_path_bytes(), 100);
        l.record_transfer(
            Endpoint::Agency(0),
            Endpoint::Server,
            50,
            TransferKind::Model,
        )
        .unwrap();
        assert_eq!(l.critical_path_bytes(), 250);
    }

    #[test]
    fn parallel_counts_one_shard() {
        let cp = CostParams::new(0.0, 2.0, 3, 0.0).unwrap();
        let mut c = ComputeLog::new(3);
        for a in 0..3 {
            c.record(a, 100);
        }
        let l = TrafficLedger::new();
        assert_eq!(
            simulated_time(&l, &cp, &c, ComputeSchedule::Parallel, UNIT),
            2.0
        );
        assert_eq!(
            simulated_time(&l, &cp, &c, ComputeSchedule::Sequential, UNIT),
            6.0
        );
    }
}
