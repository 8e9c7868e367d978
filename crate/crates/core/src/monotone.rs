//! Partial and total monotone k-valued functions over a [`Lattice`].
//!
//! A [`PartialMonotoneFn`] stores a lower and upper bound per point. Every
//! recorded answer `f(p) = v` raises the lower bound of the up-set of `p` to
//! `v` and lowers the upper bound of its down-set to `v`, so both bound
//! vectors stay monotone and `lo <= hi` holds everywhere. A point is
//! determined once its bounds meet.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Lattice, LatticeError, Point, ValueScale};

/// Largest lattice stored densely unless a caller raises the cap.
pub const DEFAULT_MAX_POINTS: u64 = 1 << 20;

/// Largest lattice [`PartialMonotoneFn::enumerate_consistent`] accepts by default.
pub const DEFAULT_ENUMERATION_CAP: u64 = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonotoneError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(
        "lattice has {points} points, above the cap of {cap}; \
         group the factors under intermediate nodes to deepen the hierarchy"
    )]
    TooLarge { points: u64, cap: u64 },
    #[error("value {value} is outside the output scale of size {size}")]
    ValueOutOfRange { value: usize, size: usize },
    #[error("{0}")]
    Conflict(Conflict),
    #[error("assignment is not monotone: f{lower} = {lower_value} > f{upper} = {upper_value}")]
    NotMonotone { lower: Point, lower_value: usize, upper: Point, upper_value: usize },
    #[error("assignment has {got} values, lattice has {expected} points")]
    LengthMismatch { expected: usize, got: usize },
    #[error("enumeration needs at most {cap} points, lattice has {points}")]
    EnumerationCap { points: u64, cap: u64 },
}

/// One logged oracle answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub point: Point,
    pub value: usize,
    pub seq: u64,
}

/// An answer that monotone closure of earlier answers rules out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub point: Point,
    pub value: usize,
    pub lo: usize,
    pub hi: usize,
    /// Prior answers that each exclude `value` at `point` on their own.
    pub culprits: Vec<Answer>,
}

impl std::fmt::Display for Conflict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "answer {} at {} contradicts earlier answers (allowed range [{}, {}]); conflicting:",
            self.value, self.point, self.lo, self.hi
        )?;
        for a in &self.culprits {
            write!(f, " #{} f{}={}", a.seq, a.point, a.value)?;
        }
        Ok(())
    }
}

fn check_cap(lattice: &Lattice, cap: u64) -> Result<usize, MonotoneError> {
    let points = lattice.point_count();
    if points > cap {
        return Err(MonotoneError::TooLarge { points, cap });
    }
    Ok(points as usize)
}

fn check_out_scale(out: &ValueScale) -> Result<(), MonotoneError> {
    if out.size() > u16::MAX as usize + 1 {
        return Err(MonotoneError::ValueOutOfRange { value: out.size(), size: u16::MAX as usize });
    }
    Ok(())
}

/// Dense neighbourhood walker over lattice indices.
struct Neighbours<'a> {
    lattice: &'a Lattice,
    sizes: Vec<usize>,
}

impl<'a> Neighbours<'a> {
    fn new(lattice: &'a Lattice) -> Self {
        Self { lattice, sizes: lattice.sizes().collect() }
    }

    fn coord(&self, idx: usize, dim: usize) -> usize {
        (idx as u64 / self.lattice.stride(dim)) as usize % self.sizes[dim]
    }

    fn up(&self, idx: usize, mut visit: impl FnMut(usize)) {
        for d in 0..self.sizes.len() {
            if self.coord(idx, d) + 1 < self.sizes[d] {
                visit(idx + self.lattice.stride(d) as usize);
            }
        }
    }

    fn down(&self, idx: usize, mut visit: impl FnMut(usize)) {
        for d in 0..self.sizes.len() {
            if self.coord(idx, d) > 0 {
                visit(idx - self.lattice.stride(d) as usize);
            }
        }
    }
}

/// The expert's model under construction: value bounds per scenario.
#[derive(Debug, Clone)]
pub struct PartialMonotoneFn {
    lattice: Lattice,
    out: ValueScale,
    lo: Vec<u16>,
    hi: Vec<u16>,
    determined: usize,
    answers: Vec<Answer>,
    next_seq: u64,
}

impl PartialMonotoneFn {
    pub fn new(lattice: Lattice, out: ValueScale) -> Result<Self, MonotoneError> {
        Self::with_cap(lattice, out, DEFAULT_MAX_POINTS)
    }

    pub fn with_cap(lattice: Lattice, out: ValueScale, cap: u64) -> Result<Self, MonotoneError> {
        let n = check_cap(&lattice, cap)?;
        check_out_scale(&out)?;
        let top = out.top() as u16;
        Ok(Self {
            lattice,
            out,
            lo: vec![0; n],
            hi: vec![top; n],
            determined: 0,
            answers: Vec::new(),
            next_seq: 0,
        })
    }

    /// Rebuilds a function by recording `answers` in order.
    pub fn replay<I>(lattice: Lattice, out: ValueScale, answers: I) -> Result<Self, MonotoneError>
    where
        I: IntoIterator<Item = (Point, usize)>,
    {
        let mut f = Self::new(lattice, out)?;
        for (p, v) in answers {
            f.record(&p, v)?;
        }
        Ok(f)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn out_scale(&self) -> &ValueScale {
        &self.out
    }

    pub fn point_count(&self) -> usize {
        self.lo.len()
    }

    pub fn answers(&self) -> &[Answer] {
        &self.answers
    }

    pub fn determined_count(&self) -> usize {
        self.determined
    }

    pub fn is_complete(&self) -> bool {
        self.determined == self.lo.len()
    }

    pub fn bounds(&self, p: &Point) -> Result<(usize, usize), MonotoneError> {
        let i = self.lattice.index_of(p)? as usize;
        Ok(self.bounds_at(i))
    }

    pub fn bounds_at(&self, idx: usize) -> (usize, usize) {
        (self.lo[idx] as usize, self.hi[idx] as usize)
    }

    pub fn is_determined(&self, p: &Point) -> Result<bool, MonotoneError> {
        let (lo, hi) = self.bounds(p)?;
        Ok(lo == hi)
    }

    pub fn is_determined_at(&self, idx: usize) -> bool {
        self.lo[idx] == self.hi[idx]
    }

    /// Checks an answer against the current closure without recording it.
    pub fn check(&self, p: &Point, v: usize) -> Result<(), MonotoneError> {
        let i = self.lattice.index_of(p)? as usize;
        if v >= self.out.size() {
            return Err(MonotoneError::ValueOutOfRange { value: v, size: self.out.size() });
        }
        let (lo, hi) = self.bounds_at(i);
        if v < lo || v > hi {
            let culprits = self
                .answers
                .iter()
                .filter(|a| {
                    (a.value > v && a.point.leq(p).unwrap_or(false))
                        || (a.value < v && p.leq(&a.point).unwrap_or(false))
                })
                .cloned()
                .collect();
            return Err(MonotoneError::Conflict(Conflict {
                point: p.clone(),
                value: v,
                lo,
                hi,
                culprits,
            }));
        }
        Ok(())
    }

    /// Records `f(p) = v` and applies monotone closure. On error nothing
    /// changes. Returns the answer's sequence number.
    pub fn record(&mut self, p: &Point, v: usize) -> Result<u64, MonotoneError> {
        self.check(p, v)?;
        let start = self.lattice.index_of(p)? as usize;
        let v16 = v as u16;
        let walker = Neighbours::new(&self.lattice);

        // Raising lo: once a point already has lo >= v, so does its up-set.
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            if self.lo[i] >= v16 {
                continue;
            }
            let was = self.lo[i] == self.hi[i];
            self.lo[i] = v16;
            if !was && self.lo[i] == self.hi[i] {
                self.determined += 1;
            }
            walker.up(i, |j| {
                if self.lo[j] < v16 {
                    queue.push_back(j);
                }
            });
        }
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            if self.hi[i] <= v16 {
                continue;
            }
            let was = self.lo[i] == self.hi[i];
            self.hi[i] = v16;
            if !was && self.lo[i] == self.hi[i] {
                self.determined += 1;
            }
            walker.down(i, |j| {
                if self.hi[j] > v16 {
                    queue.push_back(j);
                }
            });
        }

        let seq = self.next_seq;
        self.next_seq += 1;
        self.answers.push(Answer { point: p.clone(), value: v, seq });
        Ok(seq)
    }

    /// Total function taking the lower bound everywhere.
    pub fn min_extension(&self) -> TotalMonotoneFn {
        TotalMonotoneFn { lattice: self.lattice.clone(), out: self.out.clone(), values: self.lo.clone() }
    }

    /// Total function taking the upper bound everywhere.
    pub fn max_extension(&self) -> TotalMonotoneFn {
        TotalMonotoneFn { lattice: self.lattice.clone(), out: self.out.clone(), values: self.hi.clone() }
    }

    /// All total monotone functions agreeing with the recorded answers.
    ///
    /// Works from the answer log alone (not the stored bounds) by
    /// backtracking over points in rank order.
    pub fn enumerate_consistent(&self) -> Result<Vec<TotalMonotoneFn>, MonotoneError> {
        self.enumerate_consistent_capped(DEFAULT_ENUMERATION_CAP)
    }

    pub fn enumerate_consistent_capped(&self, cap: u64) -> Result<Vec<TotalMonotoneFn>, MonotoneError> {
        let points = self.lattice.point_count();
        if points > cap {
            return Err(MonotoneError::EnumerationCap { points, cap });
        }
        let order: Vec<usize> = self
            .lattice
            .enumerate()
            .iter()
            .map(|p| self.lattice.index_of(p).map(|i| i as usize))
            .collect::<Result<_, _>>()?;
        let walker = Neighbours::new(&self.lattice);
        let preds: Vec<Vec<usize>> = (0..points as usize)
            .map(|i| {
                let mut v = Vec::new();
                walker.down(i, |j| v.push(j));
                v
            })
            .collect();
        let mut fixed: BTreeMap<usize, u16> = BTreeMap::new();
        for a in &self.answers {
            let i = self.lattice.index_of(&a.point)? as usize;
            if let Some(&w) = fixed.get(&i) {
                if w as usize != a.value {
                    return Ok(Vec::new());
                }
            }
            fixed.insert(i, a.value as u16);
        }

        let mut out = Vec::new();
        let mut assign = vec![0u16; points as usize];
        let top = self.out.top() as u16;
        self.backtrack(0, &order, &preds, &fixed, top, &mut assign, &mut out);
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn backtrack(
        &self,
        pos: usize,
        order: &[usize],
        preds: &[Vec<usize>],
        fixed: &BTreeMap<usize, u16>,
        top: u16,
        assign: &mut [u16],
        out: &mut Vec<TotalMonotoneFn>,
    ) {
        let Some(&idx) = order.get(pos) else {
            out.push(TotalMonotoneFn {
                lattice: self.lattice.clone(),
                out: self.out.clone(),
                values: assign.to_vec(),
            });
            return;
        };
        let floor = preds[idx].iter().map(|&j| assign[j]).max().unwrap_or(0);
        let (from, to) = match fixed.get(&idx) {
            Some(&w) if w >= floor => (w, w),
            Some(_) => return,
            None => (floor, top),
        };
        for v in from..=to {
            assign[idx] = v;
            self.backtrack(pos + 1, order, preds, fixed, top, assign, out);
        }
    }
}

/// A monotone assignment of an output value to every lattice point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TotalMonotoneFn {
    lattice: Lattice,
    out: ValueScale,
    values: Vec<u16>,
}

impl TotalMonotoneFn {
    /// `values` are in dense index order (see [`Lattice::iter_lex`]).
    pub fn try_new(lattice: Lattice, out: ValueScale, values: Vec<usize>) -> Result<Self, MonotoneError> {
        let n = check_cap(&lattice, DEFAULT_MAX_POINTS)?;
        check_out_scale(&out)?;
        if values.len() != n {
            return Err(MonotoneError::LengthMismatch { expected: n, got: values.len() });
        }
        if let Some(&value) = values.iter().find(|&&v| v >= out.size()) {
            return Err(MonotoneError::ValueOutOfRange { value, size: out.size() });
        }
        if let Some((lower, upper)) = first_violation(&lattice, &values) {
            return Err(MonotoneError::NotMonotone {
                lower_value: values[lower],
                upper_value: values[upper],
                lower: lattice.point_at(lower as u64),
                upper: lattice.point_at(upper as u64),
            });
        }
        let values = values.into_iter().map(|v| v as u16).collect();
        Ok(Self { lattice, out, values })
    }

    pub fn from_fn(
        lattice: Lattice,
        out: ValueScale,
        f: impl Fn(&Point) -> usize,
    ) -> Result<Self, MonotoneError> {
        check_cap(&lattice, DEFAULT_MAX_POINTS)?;
        let values = lattice.iter_lex().map(|p| f(&p)).collect();
        Self::try_new(lattice, out, values)
    }

    pub fn constant(lattice: Lattice, out: ValueScale, v: usize) -> Result<Self, MonotoneError> {
        Self::from_fn(lattice, out, |_| v)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn out_scale(&self) -> &ValueScale {
        &self.out
    }

    pub fn value(&self, p: &Point) -> Result<usize, MonotoneError> {
        Ok(self.values[self.lattice.index_of(p)? as usize] as usize)
    }

    pub fn value_at(&self, idx: usize) -> usize {
        self.values[idx] as usize
    }

    /// Values in dense index order.
    pub fn values(&self) -> Vec<usize> {
        self.values.iter().map(|&v| v as usize).collect()
    }

    /// Points where two functions on the same lattice differ, in dense
    /// index order.
    pub fn differing_points(&self, other: &TotalMonotoneFn) -> Vec<Point> {
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| self.lattice.point_at(i as u64))
            .collect()
    }
}

/// Whether `values` (dense index order) is monotone on `lattice`.
/// Checks every covering pair.
pub fn is_monotone(lattice: &Lattice, values: &[usize]) -> bool {
    values.len() as u64 == lattice.point_count() && first_violation(lattice, values).is_none()
}

fn first_violation(lattice: &Lattice, values: &[usize]) -> Option<(usize, usize)> {
    let walker = Neighbours::new(lattice);
    for i in 0..values.len() {
        let mut bad = None;
        walker.up(i, |j| {
            if bad.is_none() && values[i] > values[j] {
                bad = Some(j);
            }
        });
        if let Some(j) = bad {
            return Some((i, j));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[usize]) -> Point {
        Point::new(c.to_vec())
    }

    fn cube3() -> PartialMonotoneFn {
        PartialMonotoneFn::new(Lattice::binary_cube(3).unwrap(), ValueScale::binary()).unwrap()
    }

    fn ternary() -> ValueScale {
        ValueScale::new(["low", "moderate", "high"]).unwrap()
    }

    #[test]
    fn fresh_function_is_unconstrained() {
        let f = cube3();
        assert_eq!(f.determined_count(), 0);
        assert_eq!(f.point_count(), 8);
        let g = PartialMonotoneFn::new(Lattice::new(vec![ternary(); 2]).unwrap(), ternary()).unwrap();
        for q in g.lattice().iter_lex() {
            assert_eq!(g.bounds(&q).unwrap(), (0, 2));
        }
    }

    #[test]
    fn yes_propagates_upwards() {
        let mut f = cube3();
        f.record(&p(&[1, 0, 0]), 1).unwrap();
        for q in [[1, 0, 1], [1, 1, 0], [1, 1, 1]] {
            assert_eq!(f.bounds(&p(&q)).unwrap(), (1, 1));
        }
        assert_eq!(f.determined_count(), 4);
        assert_eq!(f.bounds(&p(&[0, 1, 1])).unwrap(), (0, 1));
    }

    #[test]
    fn no_propagates_downwards() {
        let mut f = cube3();
        f.record(&p(&[1, 0, 1]), 0).unwrap();
        for q in [[1, 0, 0], [0, 0, 1], [0, 0, 0]] {
            assert_eq!(f.bounds(&p(&q)).unwrap(), (0, 0));
        }
    }

    #[test]
    fn conflicting_answer_is_rejected_without_change() {
        let mut f = cube3();
        f.record(&p(&[1, 0, 0]), 1).unwrap();
        let before = f.clone();
        let err = f.record(&p(&[1, 1, 1]), 0).unwrap_err();
        let MonotoneError::Conflict(c) = err else { panic!("expected conflict") };
        assert_eq!(c.culprits.len(), 1);
        assert_eq!(c.culprits[0].point, p(&[1, 0, 0]));
        assert_eq!(f.answers(), before.answers());
        assert_eq!(f.min_extension(), before.min_extension());
        assert_eq!(f.max_extension(), before.max_extension());
    }

    #[test]
    fn extensions_of_fresh_function_are_constant() {
        let f = cube3();
        assert!(f.min_extension().values().iter().all(|&v| v == 0));
        assert!(f.max_extension().values().iter().all(|&v| v == 1));
    }

    #[test]
    fn too_large_is_rejected() {
        let five = ValueScale::new(["a", "b", "c", "d", "e"]).unwrap();
        let l = Lattice::new(vec![five; 20]).unwrap();
        let err = PartialMonotoneFn::new(l, ValueScale::binary()).unwrap_err();
        assert!(matches!(err, MonotoneError::TooLarge { points: 95_367_431_640_625, .. }));
        assert!(err.to_string().contains("deepen the hierarchy"));
        assert!(PartialMonotoneFn::new(Lattice::binary_cube(20).unwrap(), ValueScale::binary()).is_ok());
    }

    #[test]
    fn is_monotone_examples() {
        let l = Lattice::binary_cube(2).unwrap();
        assert!(is_monotone(&l, &[0, 0, 0, 0]));
        assert!(is_monotone(&l, &[1, 1, 1, 1]));
        // f(0,1) = 1, f(1,1) = 0
        assert!(!is_monotone(&l, &[0, 1, 0, 0]));
    }

    #[test]
    fn enumerate_consistent_counts() {
        assert_eq!(cube3().enumerate_consistent().unwrap().len(), 20);
        let mut f = cube3();
        for q in f.lattice().iter_lex().collect::<Vec<_>>() {
            let v = usize::from(q.coords()[0] == 1);
            if !f.is_determined(&q).unwrap() {
                f.record(&q, v).unwrap();
            }
        }
        assert!(f.is_complete());
        assert_eq!(f.enumerate_consistent().unwrap().len(), 1);
        let big = PartialMonotoneFn::new(Lattice::binary_cube(6).unwrap(), ValueScale::binary()).unwrap();
        assert!(matches!(big.enumerate_consistent(), Err(MonotoneError::EnumerationCap { .. })));
    }

    #[test]
    fn total_fn_rejects_non_monotone() {
        let l = Lattice::binary_cube(2).unwrap();
        let err = TotalMonotoneFn::try_new(l, ValueScale::binary(), vec![0, 1, 0, 0]).unwrap_err();
        assert!(matches!(err, MonotoneError::NotMonotone { .. }));
    }
}
