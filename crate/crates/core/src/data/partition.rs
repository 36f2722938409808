use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Disjoint assignment of example indices to agencies `0..A`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    assignments: Vec<Vec<usize>>,
}

impl PartitionPlan {
    /// Checks disjointness, coverage of `0..n` and that no agency is empty.
    pub fn new(assignments: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::InvalidArgument("plan has no agencies".into()));
        }
        let mut seen = vec![false; n];
        for (agency, shard) in assignments.iter().enumerate() {
            if shard.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "agency {agency} holds no examples"
                )));
            }
            for &i in shard {
                match seen.get_mut(i) {
                    None => {
                        return Err(Error::InvalidArgument(format!(
                            "index {i} out of range for {n} examples"
                        )))
                    }
                    Some(true) => {
                        return Err(Error::InvalidArgument(format!(
                            "index {i} assigned to more than one agency"
                        )))
                    }
                    Some(s) => *s = true,
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!(
                "index {missing} not assigned"
            )));
        }
        Ok(PartitionPlan { assignments })
    }

    pub fn agencies(&self) -> usize {
        self.assignments.len()
    }

    pub fn shard(&self, agency: usize) -> &[usize] {
        &self.assignments[agency]
    }

    pub fn shards(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    pub fn total(&self) -> usize {
        self.assignments.iter().map(Vec::len).sum()
    }
}

/// Seeded shuffle of all indices dealt round-robin; shard sizes differ by
/// at most one.
pub fn partition_random(data: &Dataset, agencies: usize, seed: u64) -> Result<PartitionPlan> {
    let n = data.len();
    if agencies == 0 || agencies > n {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} examples across {agencies} agencies"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::for_stream(seed, Stream::Partition));
    let mut assignments = vec![Vec::with_capacity(n / agencies + 1); agencies];
    for (pos, idx) in order.into_iter().enumerate() {
        assignments[pos % agencies].push(idx);
    }
    PartitionPlan::new(assignments, n)
}

/// Class `c` goes to agency `c mod A`.
pub fn partition_by_class(data: &Dataset, agencies: usize) -> Result<PartitionPlan> {
    let classes = data.class_count();
    if agencies == 0 || agencies > classes {
        return Err(Error::InvalidArgument(format!(
            "class-pure split needs 1 <= agencies <= classes ({agencies} agencies, {classes} classes)"
        )));
    }
    let mut assignments = vec![Vec::new(); agencies];
    for (i, &label) in data.labels().iter().enumerate() {
        assignments[label % agencies].push(i);
    }
    PartitionPlan::new(assignments, data.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;

    #[test]
    fn plan_validation() {
        assert!(PartitionPlan::new(vec![vec![0, 1], vec![2]], 3).is_ok());
        assert!(PartitionPlan::new(vec![vec![0, 1], vec![1, 2]], 3).is_err());
        assert!(PartitionPlan::new(vec![vec![0], vec![2]], 3).is_err());
        assert!(PartitionPlan::new(vec![vec![0, 1, 2], vec![]], 3).is_err());
        assert!(PartitionPlan::new(vec![vec![0, 3]], 3).is_err());
    }

    #[test]
    fn random_single_agency_and_sizes() {
        let d = generate_synthetic(3, 7, 2, 1).unwrap();
        let one = partition_random(&d, 1, 5).unwrap();
        let mut all = one.shard(0).to_vec();
        all.sort_unstable();
        assert_eq!(all, (0..21).collect::<Vec<_>>());
        let four = partition_random(&d, 4, 5).unwrap();
        let sizes: Vec<usize> = four.shards().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![6, 5, 5, 5]);
        assert_eq!(four, partition_random(&d, 4, 5).unwrap());
        assert_ne!(four, partition_random(&d, 4, 6).unwrap());
        assert!(partition_random(&d, 22, 5).is_err());
        assert!(partition_random(&d, 0, 5).is_err());
    }

    #[test]
    fn by_class_mod_rule() {
        let d = generate_synthetic(10, 3, 2, 1).unwrap();
        let plan = partition_by_class(&d, 5).unwrap();
        let labels: std::collections::BTreeSet<usize> =
            plan.shard(0).iter().map(|&i| d.labels()[i]).collect();
        assert_eq!(labels.into_iter().collect::<Vec<_>>(), vec![0, 5]);
        let pure = partition_by_class(&d, 10).unwrap();
        for a in 0..10 {
            assert!(pure.shard(a).iter().all(|&i| d.labels()[i] == a));
        }
        assert!(partition_by_class(&d, 11).is_err());
    }
}
