use rand::seq::index;

use super::{Dataset, PartitionPlan};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Examples moved from one agency to another during an exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExchangeTransfer {
    pub from: usize,
    pub to: usize,
    pub examples: usize,
}

/// Per-agency training indices after an exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalShards {
    pub shards: Vec<Vec<usize>>,
    /// Aggregated by (donor, recipient), ordered by recipient then donor.
    pub transfers: Vec<ExchangeTransfer>,
}

impl LocalShards {
    pub fn unchanged(plan: &PartitionPlan) -> Self {
        LocalShards {
            shards: plan.shards().to_vec(),
            transfers: Vec::new(),
        }
    }

    pub fn exchanged_examples(&self) -> usize {
        self.transfers.iter().map(|t| t.examples).sum()
    }
}

/// Gives every agency `k` extra examples of each class, drawn without
/// replacement from that class's examples held by other agencies. When
/// fewer than `k` foreign examples exist (the agency already owns the
/// class), all foreign ones are taken. Draws are appended after the
/// agency's own shard.
pub fn apply_exchange(
    data: &Dataset,
    plan: &PartitionPlan,
    k: usize,
    seed: u64,
) -> Result<LocalShards> {
    let by_class = data.class_indices();
    if let Some((class, members)) = by_class.iter().enumerate().find(|(_, m)| m.len() < k) {
        return Err(Error::InvalidArgument(format!(
            "exchange of {k} per class exceeds the {} examples of class {class}",
            members.len()
        )));
    }
    if k == 0 {
        return Ok(LocalShards::unchanged(plan));
    }
    if plan.total() != data.len() {
        return Err(Error::DimensionMismatch(format!(
            "plan covers {} examples, dataset has {}",
            plan.total(),
            data.len()
        )));
    }

    let agencies = plan.agencies();
    let mut owner = vec![0usize; data.len()];
    for (agency, shard) in plan.shards().iter().enumerate() {
        for &i in shard {
            owner[i] = agency;
        }
    }

    let mut rng = rng::for_stream(seed, Stream::Exchange);
    let mut shards = Vec::with_capacity(agencies);
    let mut transfers = Vec::new();
    for (agency, own) in plan.shards().iter().enumerate() {
        let mut local = own.clone();
        let mut received = vec![0usize; agencies];
        for members in &by_class {
            let pool: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&i| owner[i] != agency)
                .collect();
            let take = k.min(pool.len());
            for pos in index::sample(&mut rng, pool.len(), take) {
                let idx = pool[pos];
                received[owner[idx]] += 1;
                local.push(idx);
            }
        }
        transfers.extend(
            received
                .into_iter()
                .enumerate()
                .filter(|&(_, n)| n > 0)
                .map(|(from, examples)| ExchangeTransfer {
                    from,
                    to: agency,
                    examples,
                }),
        );
        shards.push(local);
    }
    Ok(LocalShards { shards, transfers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, partition_by_class, partition_random};

    #[test]
    fn zero_exchange_is_identity() {
        let d = generate_synthetic(4, 10, 2, 1).unwrap();
        let plan = partition_random(&d, 3, 2).unwrap();
        let out = apply_exchange(&d, &plan, 0, 9).unwrap();
        assert_eq!(out.shards, plan.shards());
        assert!(out.transfers.is_empty());
    }

    #[test]
    fn per_class_gains_foreign_only() {
        let d = generate_synthetic(5, 20, 2, 1).unwrap();
        let plan = partition_by_class(&d, 5).unwrap();
        let out = apply_exchange(&d, &plan, 3, 4).unwrap();
        for (a, shard) in out.shards.iter().enumerate() {
            assert_eq!(shard.len(), 20 + 3 * 4);
            let mut hist = [0; 5];
            for &i in shard {
                hist[d.labels()[i]] += 1;
            }
            for (c, &h) in hist.iter().enumerate() {
                assert_eq!(h, if c == a { 20 } else { 3 });
            }
            let mut dedup = shard.clone();
            dedup.sort_unstable();
            dedup.dedup();
            assert_eq!(dedup.len(), shard.len());
        }
        assert_eq!(out.exchanged_examples(), 5 * 4 * 3);
        assert!(out
            .transfers
            .iter()
            .all(|t| t.from != t.to && t.examples == 3));
        assert_eq!(out, apply_exchange(&d, &plan, 3, 4).unwrap());
    }

    #[test]
    fn rejects_oversized_k() {
        let d = generate_synthetic(2, 5, 2, 1).unwrap();
        let plan = partition_random(&d, 2, 2).unwrap();
        assert!(apply_exchange(&d, &plan, 6, 0).is_err());
        assert!(apply_exchange(&d, &plan, 5, 0).is_ok());
    }
}
