//! Brute-force helpers shared by the integration tests. Nothing here uses
//! the library's own order or closure code.
#![allow(dead_code)]

use emm_core::lattice::Point;

/// Every point of the box `sizes`, last coordinate fastest.
pub fn all_points(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &s in sizes {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..s).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn leq(a: &[usize], b: &[usize]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// All monotone maps from the box `sizes` to `0..k`, as value vectors in
/// [`all_points`] order. Exhaustive over `k^N` assignments.
pub fn monotone_functions(sizes: &[usize], k: usize) -> Vec<Vec<usize>> {
    let pts = all_points(sizes);
    let n = pts.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && leq(&pts[i], &pts[j]))
        .collect();
    let total = (k as u64).pow(n as u32);
    let mut out = Vec::new();
    let mut vals = vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for v in vals.iter_mut().rev() {
            *v = (c % k as u64) as usize;
            c /= k as u64;
        }
        if pairs.iter().all(|&(i, j)| vals[i] <= vals[j]) {
            out.push(vals.clone());
        }
    }
    out
}

pub fn point(c: &[usize]) -> Point {
    Point::new(c.to_vec())
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}
