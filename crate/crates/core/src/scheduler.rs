//! Question selection.
//!
//! Binary cubes are scheduled along Hansel chains: chains are visited from
//! shortest to longest and the lowest undetermined element of the current
//! chain is asked. Once every chain of length `s - 2` is settled, closure
//! leaves at most two undetermined elements on a chain of length `s`, which
//! gives the `C(n, n/2) + C(n, n/2 + 1)` worst case.
//!
//! General k-valued lattices use a greedy maximin rule over bound
//! tightenings.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Lattice, Point};
use crate::monotone::PartialMonotoneFn;

pub const MAX_HANSEL_DIM: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchedulerError {
    #[error("Hansel chains need a dimension in 1..={MAX_HANSEL_DIM}, got {0}")]
    DimensionOutOfRange(usize),
    #[error("Hansel scheduling needs binary factors and a binary output scale")]
    NotBinary,
    #[error("chain partition is for dimension {partition}, function has {function}")]
    PartitionMismatch { partition: usize, function: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Hansel,
    Greedy,
}

impl Strategy {
    /// Hansel for all-binary lattices with binary output, greedy otherwise.
    pub fn preferred_for(f: &PartialMonotoneFn) -> Self {
        if f.lattice().is_binary() && f.out_scale().is_binary() {
            Strategy::Hansel
        } else {
            Strategy::Greedy
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hansel" => Ok(Strategy::Hansel),
            "greedy" => Ok(Strategy::Greedy),
            other => Err(format!("unknown strategy {other:?} (expected hansel or greedy)")),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Hansel => "hansel",
            Strategy::Greedy => "greedy",
        })
    }
}

/// Hansel chains covering the binary n-cube, stored in visit order.
///
/// Elements are dense lattice indices: the last coordinate is the least
/// significant bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainPartition {
    n: usize,
    chains: Vec<Vec<u32>>,
}

impl ChainPartition {
    pub fn new(n: usize) -> Result<Self, SchedulerError> {
        if !(1..=MAX_HANSEL_DIM).contains(&n) {
            return Err(SchedulerError::DimensionOutOfRange(n));
        }
        let mut chains: Vec<Vec<u32>> = vec![vec![0, 1]];
        for _ in 1..n {
            let mut next = Vec::with_capacity(chains.len() * 2);
            for c in &chains {
                let last = *c.last().expect("chains are never empty");
                let mut low: Vec<u32> = c.iter().map(|&v| v << 1).collect();
                low.push((last << 1) | 1);
                next.push(low);
                if c.len() > 1 {
                    next.push(c[..c.len() - 1].iter().map(|&v| (v << 1) | 1).collect());
                }
            }
            chains = next;
        }
        chains.sort_by(|a, b| a.len().cmp(&b.len()).then(a[0].cmp(&b[0])));
        Ok(Self { n, chains })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    /// Chains in visit order, as dense indices.
    pub fn chain_indices(&self) -> &[Vec<u32>] {
        &self.chains
    }

    pub fn point(&self, idx: u32) -> Point {
        Point::new((0..self.n).map(|d| ((idx >> (self.n - 1 - d)) & 1) as usize).collect())
    }

    pub fn chain(&self, i: usize) -> Vec<Point> {
        self.chains[i].iter().map(|&v| self.point(v)).collect()
    }

    pub fn chains(&self) -> impl Iterator<Item = Vec<Point>> + '_ {
        (0..self.chains.len()).map(|i| self.chain(i))
    }
}

/// Alias matching the usual name of the construction.
pub fn hansel_chains(n: usize) -> Result<ChainPartition, SchedulerError> {
    ChainPartition::new(n)
}

fn check_hansel(part: &ChainPartition, f: &PartialMonotoneFn) -> Result<(), SchedulerError> {
    if !f.lattice().is_binary() || !f.out_scale().is_binary() {
        return Err(SchedulerError::NotBinary);
    }
    if part.dim() != f.lattice().dim() {
        return Err(SchedulerError::PartitionMismatch { partition: part.dim(), function: f.lattice().dim() });
    }
    Ok(())
}

fn scan_chains(part: &ChainPartition, f: &PartialMonotoneFn, from: usize) -> Option<(usize, Point)> {
    for (ci, chain) in part.chains.iter().enumerate().skip(from) {
        if let Some(&idx) = chain.iter().find(|&&idx| !f.is_determined_at(idx as usize)) {
            return Some((ci, part.point(idx)));
        }
    }
    None
}

/// Lowest undetermined element of the first unsettled chain, or `None`
/// when every point is determined.
pub fn next_question_hansel(
    part: &ChainPartition,
    f: &PartialMonotoneFn,
) -> Result<Option<Point>, SchedulerError> {
    check_hansel(part, f)?;
    Ok(scan_chains(part, f, 0).map(|(_, p)| p))
}

/// Greedy maximin selection over undetermined points.
///
/// Each candidate `p` is scored by the smallest total bound tightening
/// (sum of `hi - lo` reductions) any feasible answer would cause; the best
/// score wins, ties going to lower rank then lexicographic order.
pub fn next_question_greedy(f: &PartialMonotoneFn) -> Option<Point> {
    let lattice = f.lattice();
    let mut best: Option<(usize, Point)> = None;
    for p in lattice.enumerate() {
        let idx = lattice.index_of(&p).expect("enumerated point") as usize;
        let (lo, hi) = f.bounds_at(idx);
        if lo == hi {
            continue;
        }
        let up = indices(lattice, lattice.up_set(&p).expect("valid point"));
        let down = indices(lattice, lattice.down_set(&p).expect("valid point"));
        let score = (lo..=hi)
            .map(|v| {
                let raise: usize = up.iter().map(|&q| v.saturating_sub(f.bounds_at(q).0)).sum();
                let lower: usize = down.iter().map(|&q| f.bounds_at(q).1.saturating_sub(v)).sum();
                raise + lower
            })
            .min()
            .unwrap_or(0);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, p));
        }
    }
    best.map(|(_, p)| p)
}

fn indices(lattice: &Lattice, points: Vec<Point>) -> Vec<usize> {
    points.iter().map(|q| lattice.index_of(q).expect("valid point") as usize).collect()
}

/// Per-session schedule state.
#[derive(Debug, Clone)]
pub struct QuestionPlan {
    strategy: Strategy,
    chains: Option<Arc<ChainPartition>>,
    cursor: usize,
}

impl QuestionPlan {
    pub fn new(strategy: Strategy, f: &PartialMonotoneFn) -> Result<Self, SchedulerError> {
        let chains = match strategy {
            Strategy::Hansel => {
                let part = ChainPartition::new(f.lattice().dim())?;
                check_hansel(&part, f)?;
                Some(Arc::new(part))
            }
            Strategy::Greedy => None,
        };
        Ok(Self { strategy, chains, cursor: 0 })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Forget the chain cursor; needed after answers are withdrawn.
    pub fn reset(&mut self) {
        self.cursor = 0;
    }

    /// Next point to ask, never a determined one.
    pub fn next_question(&mut self, f: &PartialMonotoneFn) -> Option<Point> {
        match &self.chains {
            Some(part) => {
                // Settled chains stay settled, so the scan resumes at the cursor.
                let found = scan_chains(part, f, self.cursor);
                match found {
                    Some((ci, p)) => {
                        self.cursor = ci;
                        Some(p)
                    }
                    None => {
                        self.cursor = part.len();
                        None
                    }
                }
            }
            None => next_question_greedy(f),
        }
    }
}

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Worst-case question count for restoring a monotone Boolean function of
/// `n` variables: `C(n, n/2) + C(n, n/2 + 1)`.
pub fn question_bound(n: usize) -> u128 {
    let n = n as u64;
    binomial(n, n / 2) + binomial(n, n / 2 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ValueScale;

    fn p(c: &[usize]) -> Point {
        Point::new(c.to_vec())
    }

    #[test]
    fn small_partitions() {
        let one = ChainPartition::new(1).unwrap();
        assert_eq!(one.chains().collect::<Vec<_>>(), vec![vec![p(&[0]), p(&[1])]]);
        let two = ChainPartition::new(2).unwrap();
        let chains: Vec<_> = two.chains().collect();
        assert_eq!(chains, vec![vec![p(&[0, 1])], vec![p(&[0, 0]), p(&[1, 0]), p(&[1, 1])]]);
        assert_eq!(ChainPartition::new(11).unwrap().len(), 462);
    }

    #[test]
    fn dimension_range() {
        assert_eq!(ChainPartition::new(0), Err(SchedulerError::DimensionOutOfRange(0)));
        assert_eq!(ChainPartition::new(21), Err(SchedulerError::DimensionOutOfRange(21)));
    }

    #[test]
    fn bounds() {
        assert_eq!(question_bound(2), 3);
        assert_eq!(question_bound(3), 6);
        assert_eq!(question_bound(11), 924);
        assert_eq!(binomial(11, 5), 462);
    }

    #[test]
    fn first_hansel_question_is_shortest_chain() {
        let f = PartialMonotoneFn::new(Lattice::binary_cube(2).unwrap(), ValueScale::binary()).unwrap();
        let part = ChainPartition::new(2).unwrap();
        assert_eq!(next_question_hansel(&part, &f).unwrap(), Some(p(&[0, 1])));
    }

    #[test]
    fn hansel_rejects_non_binary_output() {
        let f = PartialMonotoneFn::new(
            Lattice::binary_cube(2).unwrap(),
            ValueScale::new(["a", "b", "c"]).unwrap(),
        )
        .unwrap();
        let part = ChainPartition::new(2).unwrap();
        assert_eq!(next_question_hansel(&part, &f), Err(SchedulerError::NotBinary));
        assert!(QuestionPlan::new(Strategy::Hansel, &f).is_err());
    }

    #[test]
    fn greedy_breaks_ties_by_rank() {
        let f = PartialMonotoneFn::new(Lattice::binary_cube(1).unwrap(), ValueScale::binary()).unwrap();
        assert_eq!(next_question_greedy(&f), Some(p(&[0])));
    }

    #[test]
    fn done_when_complete() {
        let mut f = PartialMonotoneFn::new(Lattice::binary_cube(2).unwrap(), ValueScale::binary()).unwrap();
        f.record(&p(&[0, 0]), 1).unwrap();
        let part = ChainPartition::new(2).unwrap();
        assert_eq!(next_question_hansel(&part, &f).unwrap(), None);
        assert_eq!(next_question_greedy(&f), None);
    }
}
