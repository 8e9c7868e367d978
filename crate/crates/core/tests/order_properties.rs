mod common;

use proptest::prelude::*;

use common::{all_points, leq, monotone_functions, point};
use emm_core::lattice::{Lattice, Point, ValueScale};
use emm_core::monotone::{is_monotone, MonotoneError, PartialMonotoneFn, TotalMonotoneFn};

fn scale(k: usize) -> ValueScale {
    ValueScale::new((0..k).map(|i| format!("v{i}"))).unwrap()
}

fn lattice_of(sizes: &[usize]) -> Lattice {
    Lattice::new(sizes.iter().map(|&s| scale(s)).collect()).unwrap()
}

prop_compose! {
    fn sizes()(sizes in prop::collection::vec(2usize..=4, 1..=4)) -> Vec<usize> { sizes }
}

prop_compose! {
    fn lattice_and_points()(sizes in sizes())
        (a in sizes.iter().map(|&s| 0..s).collect::<Vec<_>>(),
         b in sizes.iter().map(|&s| 0..s).collect::<Vec<_>>(),
         c in sizes.iter().map(|&s| 0..s).collect::<Vec<_>>(),
         sizes in Just(sizes)) -> (Vec<usize>, Point, Point, Point) {
        (sizes, Point::new(a), Point::new(b), Point::new(c))
    }
}

proptest! {
    #[test]
    fn order_laws((sizes, a, b, c) in lattice_and_points()) {
        let l = lattice_of(&sizes);
        prop_assert!(l.leq(&a, &a).unwrap());
        if l.leq(&a, &b).unwrap() && l.leq(&b, &a).unwrap() {
            prop_assert_eq!(&a, &b);
        }
        if l.leq(&a, &b).unwrap() && l.leq(&b, &c).unwrap() {
            prop_assert!(l.leq(&a, &c).unwrap());
        }
        prop_assert_eq!(l.leq(&a, &b).unwrap(), leq(a.coords(), b.coords()));
    }

    #[test]
    fn up_down_duality((sizes, a, b, _c) in lattice_and_points()) {
        let l = lattice_of(&sizes);
        let up = l.up_set(&a).unwrap();
        let down = l.down_set(&b).unwrap();
        prop_assert_eq!(up.contains(&b), down.contains(&a));
        prop_assert_eq!(up.contains(&b), leq(a.coords(), b.coords()));
    }

    #[test]
    fn index_round_trip((sizes, a, _b, _c) in lattice_and_points()) {
        let l = lattice_of(&sizes);
        let i = l.index_of(&a).unwrap();
        prop_assert_eq!(l.point_at(i), a);
    }

    #[test]
    fn covers_differ_by_one_step((sizes, a, _b, _c) in lattice_and_points()) {
        let l = lattice_of(&sizes);
        for s in l.successors(&a) {
            prop_assert_eq!(s.rank(), a.rank() + 1);
            prop_assert!(leq(a.coords(), s.coords()));
        }
        for p in l.predecessors(&a) {
            prop_assert_eq!(p.rank() + 1, a.rank());
            prop_assert!(l.successors(&p).contains(&a));
        }
    }

    /// Any permutation of a consistent answer set gives the same bounds.
    #[test]
    fn answer_order_is_irrelevant(
        sizes in prop::collection::vec(2usize..=3, 2..=3),
        target_seed in any::<u64>(),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..8),
        perm_seed in any::<u64>(),
    ) {
        let l = lattice_of(&sizes);
        let k = 3;
        // A monotone target: clamped, weighted coordinate sum.
        let weights: Vec<u64> = (0..sizes.len()).map(|i| (target_seed >> (i * 4)) & 3).collect();
        let target = |p: &Point| -> usize {
            let s: u64 = p.coords().iter().zip(&weights).map(|(&c, &w)| c as u64 * w).sum();
            (s as usize / 2).min(k - 1)
        };
        let pts: Vec<Point> = l.iter_lex().collect();
        let answers: Vec<(Point, usize)> = picks.iter().map(|ix| {
            let p = ix.get(&pts).clone();
            let v = target(&p);
            (p, v)
        }).collect();
        let a = PartialMonotoneFn::replay(l.clone(), scale(k), answers.clone()).unwrap();
        let mut shuffled = answers;
        let n = shuffled.len();
        for i in 0..n {
            let j = ((perm_seed.rotate_left(i as u32 * 7)) as usize) % n;
            shuffled.swap(i, j);
        }
        let b = PartialMonotoneFn::replay(l, scale(k), shuffled).unwrap();
        prop_assert_eq!(a.min_extension(), b.min_extension());
        prop_assert_eq!(a.max_extension(), b.max_extension());
        prop_assert!(is_monotone(a.lattice(), &a.min_extension().values()));
        prop_assert!(is_monotone(a.lattice(), &a.max_extension().values()));
    }
}

#[test]
fn is_monotone_matches_brute_force() {
    let sizes = [2, 3];
    let pts = all_points(&sizes);
    let l = lattice_of(&sizes);
    let monotone = monotone_functions(&sizes, 3);
    let mut count = 0;
    for code in 0..3u32.pow(6) {
        let vals: Vec<usize> = (0..6).map(|i| (code / 3u32.pow(5 - i) % 3) as usize).collect();
        let expected = monotone.contains(&vals);
        assert_eq!(is_monotone(&l, &vals), expected, "{vals:?}");
        assert_eq!(TotalMonotoneFn::try_new(l.clone(), scale(3), vals.clone()).is_ok(), expected);
        count += usize::from(expected);
    }
    assert_eq!(count, monotone.len());
    assert_eq!(pts.len(), 6);
}

#[test]
fn enumerate_consistent_matches_brute_force() {
    let sizes = [2, 2, 2];
    let pts = all_points(&sizes);
    let all = monotone_functions(&sizes, 2);
    let mut f = PartialMonotoneFn::new(lattice_of(&sizes), ValueScale::binary()).unwrap();
    assert_eq!(f.enumerate_consistent().unwrap().len(), all.len());
    f.record(&point(&[0, 1, 1]), 1).unwrap();
    f.record(&point(&[1, 0, 0]), 0).unwrap();
    let want: Vec<&Vec<usize>> = all.iter().filter(|g| g[3] == 1 && g[4] == 0).collect();
    let got = f.enumerate_consistent().unwrap();
    assert_eq!(got.len(), want.len());
    for g in got {
        let vals: Vec<usize> = pts.iter().map(|p| g.value(&point(p)).unwrap()).collect();
        assert!(want.contains(&&vals));
    }
}

#[test]
fn binary_answers_propagate_as_documented() {
    let mut f = PartialMonotoneFn::new(Lattice::binary_cube(3).unwrap(), ValueScale::binary()).unwrap();
    f.record(&point(&[1, 0, 0]), 1).unwrap();
    for p in [[1, 0, 0], [1, 1, 0], [1, 0, 1], [1, 1, 1]] {
        assert_eq!(f.bounds(&point(&p)).unwrap(), (1, 1));
    }
    assert_eq!(f.determined_count(), 4);
    let mut g = PartialMonotoneFn::new(Lattice::binary_cube(3).unwrap(), ValueScale::binary()).unwrap();
    g.record(&point(&[0, 1, 1]), 0).unwrap();
    for p in [[0, 0, 0], [0, 1, 0], [0, 0, 1], [0, 1, 1]] {
        assert_eq!(g.bounds(&point(&p)).unwrap(), (0, 0));
    }
    assert!(matches!(g.record(&point(&[0, 1, 1]), 1), Err(MonotoneError::Conflict(_))));
}
