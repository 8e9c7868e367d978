//! Product posets of ordinal value scales.
//!
//! A [`Lattice`] is the scenario space of one decision node: every child
//! factor contributes a [`ValueScale`] and a scenario is a [`Point`] holding
//! one value index per factor. Value indices are ordinal, with 0 always the
//! least favorable label, so the partial order is plain componentwise `<=`.
//!
//! Points are addressed densely in mixed radix with the last coordinate
//! varying fastest. Numeric index order therefore coincides with the
//! lexicographic order of coordinates.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("a lattice needs at least one scale")]
    NoScales,
    #[error("a value scale needs at least 2 labels, got {0}")]
    ScaleTooSmall(usize),
    #[error("duplicate label {0:?} in value scale")]
    DuplicateLabel(String),
    #[error("point has {got} coordinates, lattice has {expected} dimensions")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coordinate {index} = {value} is outside scale of size {size}")]
    CoordinateOutOfRange { index: usize, value: usize, size: usize },
    #[error("lattice point count overflows 64 bits")]
    TooManyPoints,
}

/// An ordered list of labels, ascending in favorability.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ValueScale {
    labels: Vec<String>,
}

impl ValueScale {
    pub fn new<I, S>(labels: I) -> Result<Self, LatticeError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(LatticeError::ScaleTooSmall(labels.len()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(LatticeError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { labels })
    }

    /// The `{no, yes}` scale.
    pub fn binary() -> Self {
        Self { labels: vec!["no".into(), "yes".into()] }
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn is_binary(&self) -> bool {
        self.labels.len() == 2
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, value: usize) -> Option<&str> {
        self.labels.get(value).map(String::as_str)
    }

    pub fn top(&self) -> usize {
        self.labels.len() - 1
    }

    /// Resolves user input to a value index. Exact label matches win over
    /// numeric readings, then case-insensitive label matches, then indices.
    pub fn parse_value(&self, input: &str) -> Option<usize> {
        let input = input.trim();
        if let Some(i) = self.labels.iter().position(|l| l == input) {
            return Some(i);
        }
        if let Some(i) = self.labels.iter().position(|l| l.eq_ignore_ascii_case(input)) {
            return Some(i);
        }
        input.parse::<usize>().ok().filter(|&i| i < self.size())
    }

    pub fn reversed(&self) -> Self {
        let mut labels = self.labels.clone();
        labels.reverse();
        Self { labels }
    }
}

impl TryFrom<Vec<String>> for ValueScale {
    type Error = LatticeError;

    fn try_from(labels: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(labels)
    }
}

impl From<ValueScale> for Vec<String> {
    fn from(s: ValueScale) -> Self {
        s.labels
    }
}

/// A scenario: one value index per lattice dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    coords: Vec<usize>,
}

impl Point {
    pub fn new(coords: Vec<usize>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Coordinate sum.
    pub fn rank(&self) -> usize {
        self.coords.iter().sum()
    }

    /// Componentwise `self <= other`.
    pub fn leq(&self, other: &Point) -> Result<bool, LatticeError> {
        if self.dim() != other.dim() {
            return Err(LatticeError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self.coords.iter().zip(&other.coords).all(|(a, b)| a <= b))
    }
}

impl From<Vec<usize>> for Point {
    fn from(coords: Vec<usize>) -> Self {
        Self::new(coords)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// Product of value scales under the componentwise order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    dims: Vec<ValueScale>,
    strides: Vec<u64>,
    count: u64,
}

impl Lattice {
    pub fn new(dims: Vec<ValueScale>) -> Result<Self, LatticeError> {
        if dims.is_empty() {
            return Err(LatticeError::NoScales);
        }
        let mut strides = vec![0u64; dims.len()];
        let mut acc: u64 = 1;
        for (i, d) in dims.iter().enumerate().rev() {
            if d.size() < 2 {
                return Err(LatticeError::ScaleTooSmall(d.size()));
            }
            strides[i] = acc;
            acc = acc.checked_mul(d.size() as u64).ok_or(LatticeError::TooManyPoints)?;
        }
        Ok(Self { dims, strides, count: acc })
    }

    /// `n` binary dimensions.
    pub fn binary_cube(n: usize) -> Result<Self, LatticeError> {
        Self::new(vec![ValueScale::binary(); n])
    }

    pub fn dims(&self) -> &[ValueScale] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.dims.iter().map(ValueScale::size)
    }

    pub fn point_count(&self) -> u64 {
        self.count
    }

    pub fn is_binary(&self) -> bool {
        self.dims.iter().all(ValueScale::is_binary)
    }

    pub fn bottom(&self) -> Point {
        Point::new(vec![0; self.dim()])
    }

    pub fn top(&self) -> Point {
        Point::new(self.dims.iter().map(ValueScale::top).collect())
    }

    pub fn max_rank(&self) -> usize {
        self.dims.iter().map(ValueScale::top).sum()
    }

    pub fn check(&self, p: &Point) -> Result<(), LatticeError> {
        if p.dim() != self.dim() {
            return Err(LatticeError::DimensionMismatch { expected: self.dim(), got: p.dim() });
        }
        for (index, (&value, d)) in p.coords.iter().zip(&self.dims).enumerate() {
            if value >= d.size() {
                return Err(LatticeError::CoordinateOutOfRange { index, value, size: d.size() });
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.check(p).is_ok()
    }

    /// Componentwise order, checked against this lattice.
    pub fn leq(&self, a: &Point, b: &Point) -> Result<bool, LatticeError> {
        self.check(a)?;
        self.check(b)?;
        a.leq(b)
    }

    /// Dense index of a point (last coordinate fastest).
    pub fn index_of(&self, p: &Point) -> Result<u64, LatticeError> {
        self.check(p)?;
        Ok(p.coords.iter().zip(&self.strides).map(|(&c, &s)| c as u64 * s).sum())
    }

    pub fn point_at(&self, mut index: u64) -> Point {
        debug_assert!(index < self.count);
        let mut coords = Vec::with_capacity(self.dim());
        for &s in &self.strides {
            coords.push((index / s) as usize);
            index %= s;
        }
        Point::new(coords)
    }

    pub(crate) fn stride(&self, dim: usize) -> u64 {
        self.strides[dim]
    }

    /// `{q : p <= q}`, including `p`, in lexicographic order.
    pub fn up_set(&self, p: &Point) -> Result<Vec<Point>, LatticeError> {
        self.check(p)?;
        let lo = p.coords.clone();
        let hi: Vec<usize> = self.dims.iter().map(ValueScale::top).collect();
        Ok(BoxIter::new(lo, hi).map(Point::new).collect())
    }

    /// `{q : q <= p}`, including `p`, in lexicographic order.
    pub fn down_set(&self, p: &Point) -> Result<Vec<Point>, LatticeError> {
        self.check(p)?;
        let lo = vec![0; self.dim()];
        Ok(BoxIter::new(lo, p.coords.clone()).map(Point::new).collect())
    }

    /// Points covering `p` (one coordinate raised by one).
    pub fn successors(&self, p: &Point) -> Vec<Point> {
        (0..self.dim())
            .filter(|&i| p.coords[i] < self.dims[i].top())
            .map(|i| {
                let mut c = p.coords.clone();
                c[i] += 1;
                Point::new(c)
            })
            .collect()
    }

    /// Points covered by `p` (one coordinate lowered by one).
    pub fn predecessors(&self, p: &Point) -> Vec<Point> {
        (0..self.dim())
            .filter(|&i| p.coords[i] > 0)
            .map(|i| {
                let mut c = p.coords.clone();
                c[i] -= 1;
                Point::new(c)
            })
            .collect()
    }

    /// Every point exactly once, ordered by ascending rank, then
    /// lexicographically.
    pub fn enumerate(&self) -> Vec<Point> {
        let mut by_rank: Vec<Vec<Point>> = vec![Vec::new(); self.max_rank() + 1];
        for p in self.iter_lex() {
            by_rank[p.rank()].push(p);
        }
        by_rank.into_iter().flatten().collect()
    }

    /// Every point in dense index (lexicographic) order.
    pub fn iter_lex(&self) -> impl Iterator<Item = Point> + '_ {
        BoxIter::new(vec![0; self.dim()], self.dims.iter().map(ValueScale::top).collect())
            .map(Point::new)
    }
}

/// Odometer over the box `[lo, hi]`, last coordinate fastest.
struct BoxIter {
    lo: Vec<usize>,
    hi: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl BoxIter {
    fn new(lo: Vec<usize>, hi: Vec<usize>) -> Self {
        let next = lo.iter().zip(&hi).all(|(a, b)| a <= b).then(|| lo.clone());
        Self { lo, hi, next }
    }
}

impl Iterator for BoxIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for i in (0..succ.len()).rev() {
            if succ[i] < self.hi[i] {
                succ[i] += 1;
                self.next = Some(succ);
                return Some(current);
            }
            succ[i] = self.lo[i];
        }
        Some(current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[usize]) -> Point {
        Point::new(c.to_vec())
    }

    fn ternary() -> ValueScale {
        ValueScale::new(["low", "moderate", "high"]).unwrap()
    }

    #[test]
    fn point_counts() {
        assert_eq!(Lattice::binary_cube(3).unwrap().point_count(), 8);
        assert_eq!(Lattice::binary_cube(20).unwrap().point_count(), 1_048_576);
        assert_eq!(Lattice::new(vec![ternary(); 5]).unwrap().point_count(), 243);
        let five = ValueScale::new(["a", "b", "c", "d", "e"]).unwrap();
        assert_eq!(Lattice::new(vec![five; 20]).unwrap().point_count(), 95_367_431_640_625);
    }

    #[test]
    fn constructor_errors() {
        assert_eq!(Lattice::new(vec![]), Err(LatticeError::NoScales));
        assert_eq!(ValueScale::new(["only"]), Err(LatticeError::ScaleTooSmall(1)));
        assert!(matches!(ValueScale::new(["a", "a"]), Err(LatticeError::DuplicateLabel(_))));
    }

    #[test]
    fn leq_examples() {
        let l = Lattice::binary_cube(3).unwrap();
        assert!(l.leq(&p(&[1, 0, 0]), &p(&[1, 0, 1])).unwrap());
        assert!(l.leq(&p(&[1, 0, 0]), &p(&[1, 0, 0])).unwrap());
        assert!(!l.leq(&p(&[1, 0, 0]), &p(&[0, 1, 1])).unwrap());
        assert!(!l.leq(&p(&[0, 1, 1]), &p(&[1, 0, 0])).unwrap());
        assert!(matches!(
            p(&[1, 0]).leq(&p(&[1, 0, 0])),
            Err(LatticeError::DimensionMismatch { .. })
        ));
        assert!(l.leq(&p(&[2, 0, 0]), &p(&[1, 1, 1])).is_err());
    }

    #[test]
    fn up_set_of_single_yes() {
        let l = Lattice::binary_cube(3).unwrap();
        let up = l.up_set(&p(&[1, 0, 0])).unwrap();
        assert_eq!(up, vec![p(&[1, 0, 0]), p(&[1, 0, 1]), p(&[1, 1, 0]), p(&[1, 1, 1])]);
        assert_eq!(l.up_set(&l.top()).unwrap(), vec![l.top()]);
        assert_eq!(l.down_set(&l.bottom()).unwrap(), vec![l.bottom()]);
    }

    #[test]
    fn enumerate_orders_by_rank_then_lex() {
        let l = Lattice::binary_cube(2).unwrap();
        assert_eq!(l.enumerate(), vec![p(&[0, 0]), p(&[0, 1]), p(&[1, 0]), p(&[1, 1])]);
        assert_eq!(Lattice::new(vec![ternary(); 2]).unwrap().enumerate().len(), 9);
        assert_eq!(Lattice::new(vec![ternary(); 8]).unwrap().enumerate().len(), 6561);
    }

    #[test]
    fn index_round_trip() {
        let l = Lattice::new(vec![ternary(), ValueScale::binary(), ternary()]).unwrap();
        for (i, q) in l.iter_lex().enumerate() {
            assert_eq!(l.index_of(&q).unwrap(), i as u64);
            assert_eq!(l.point_at(i as u64), q);
        }
    }

    #[test]
    fn parse_value_prefers_labels() {
        let s = ValueScale::new(["1", "0"]).unwrap();
        assert_eq!(s.parse_value("1"), Some(0));
        assert_eq!(ternary().parse_value("HIGH"), Some(2));
        assert_eq!(ternary().parse_value("1"), Some(1));
        assert_eq!(ternary().parse_value("7"), None);
    }

    #[test]
    fn covers() {
        let l = Lattice::new(vec![ternary(), ValueScale::binary()]).unwrap();
        assert_eq!(l.successors(&p(&[1, 0])), vec![p(&[2, 0]), p(&[1, 1])]);
        assert_eq!(l.predecessors(&p(&[0, 1])), vec![p(&[0, 0])]);
        assert!(l.successors(&l.top()).is_empty());
    }
}
