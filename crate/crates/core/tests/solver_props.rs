use proptest::prelude::*;

use revsplit::{
    brute_force_solve, extract_unit_matching, solve, Assignment, Error, MatchSpec, PapMode,
    SimilarityMatrix,
};

/// Entries on a dyadic grid so that sums are exact and ties are common.
fn entry() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), (0u32..=16).prop_map(|k| k as f64 / 16.0), 0.0..=1.0f64]
}

fn dyadic_entry() -> impl Strategy<Value = f64> {
    (0u32..=64).prop_map(|k| k as f64 / 64.0)
}

fn matrix_with(
    max_r: usize,
    max_p: usize,
    cell: fn() -> BoxedStrategy<f64>,
) -> impl Strategy<Value = SimilarityMatrix> {
    (1..=max_r, 1..=max_p)
        .prop_flat_map(move |(r, p)| prop::collection::vec(prop::collection::vec(cell(), p), r))
        .prop_map(|rows| SimilarityMatrix::from_rows(rows).unwrap())
}

fn any_cell() -> BoxedStrategy<f64> {
    entry().boxed()
}

fn dyadic_cell() -> BoxedStrategy<f64> {
    dyadic_entry().boxed()
}

#[derive(Debug, Clone)]
struct Case {
    s: SimilarityMatrix,
    spec: MatchSpec,
}

fn case() -> impl Strategy<Value = Case> {
    (
        matrix_with(6, 6, any_cell),
        1u32..=2,
        1u32..=2,
        prop_oneof![Just(PapMode::Exact), Just(PapMode::AtMost), Just(PapMode::FloorCeil)],
        prop::collection::vec(any::<bool>(), 36),
    )
        .prop_map(|(s, ell_rev, ell_pap, mode, excl)| {
            let excluded = (0..s.n_reviewers())
                .flat_map(|r| (0..s.n_papers()).map(move |p| (r, p)))
                .filter(|&(r, p)| excl[r * 6 + p] && (r + p) % 3 == 0)
                .collect();
            let mut spec = MatchSpec::full(&s, ell_rev, ell_pap).with_mode(mode).with_exclusions(excluded);
            if mode == PapMode::FloorCeil {
                spec.ell_pap -= 0.5;
            }
            Case { s, spec }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn solve_matches_brute_force(c in case()) {
        match (solve(&c.s, &c.spec), brute_force_solve(&c.s, &c.spec)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.value(), b.value()),
            (Err(Error::Infeasible(_)), Err(Error::Infeasible(_))) => {}
            (a, b) => prop_assert!(false, "solve {:?} vs brute force {:?}", a, b),
        }
    }

    #[test]
    fn solution_respects_loads_and_exclusions(c in case()) {
        let Ok(a) = solve(&c.s, &c.spec) else { return Ok(()) };
        for &(r, p) in a.pairs() {
            prop_assert!(!c.spec.excluded_pairs.contains(&(r, p)));
        }
        for (r, &l) in a.reviewer_loads(c.s.n_reviewers()).iter().enumerate() {
            prop_assert!(l <= c.spec.ell_rev, "reviewer {} load {}", r, l);
        }
        let lo = c.spec.ell_pap.floor() as u32;
        let hi = c.spec.ell_pap.ceil() as u32;
        for &l in &a.paper_loads(c.s.n_papers()) {
            match c.spec.pap_mode {
                PapMode::Exact => prop_assert_eq!(l, lo),
                PapMode::AtMost => prop_assert!(l <= lo),
                PapMode::FloorCeil => prop_assert!(l == lo || l == hi),
            }
        }
        if c.spec.pap_mode == PapMode::FloorCeil {
            prop_assert_eq!(a.len(), (c.spec.ell_pap * c.s.n_papers() as f64).floor() as usize);
        }
    }

    #[test]
    fn at_most_dominates_exact(c in case()) {
        let mut exact = c.spec.clone();
        exact.pap_mode = PapMode::Exact;
        exact.ell_pap = exact.ell_pap.ceil();
        let Ok(e) = solve(&c.s, &exact) else { return Ok(()) };
        let m = solve(&c.s, &exact.clone().with_mode(PapMode::AtMost)).unwrap();
        prop_assert!(m.value() >= e.value());
        if exact.ell_pap == 1.0 && exact.excluded_pairs.is_empty() {
            prop_assert_eq!(m.value(), e.value());
        }
    }

    #[test]
    fn value_is_permutation_invariant(
        s in matrix_with(6, 6, dyadic_cell),
        seed in any::<u64>(),
        ell_rev in 1u32..=2,
    ) {
        let rotate = |n: usize| -> Vec<usize> {
            let k = (seed as usize) % n;
            (0..n).map(|i| (i + k) % n).rev().collect()
        };
        let t = s.permuted(&rotate(s.n_reviewers()), &rotate(s.n_papers()));
        let a = solve(&s, &MatchSpec::full(&s, ell_rev, 1));
        let b = solve(&t, &MatchSpec::full(&t, ell_rev, 1));
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.value(), b.value()),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn extraction_keeps_a_mu_fraction(
        s in matrix_with(20, 20, dyadic_cell),
        mu in 1u32..=8,
        picks in prop::collection::vec(any::<bool>(), 400),
    ) {
        let (lambda, n) = (s.n_reviewers(), s.n_papers());
        let (mut rl, mut pl) = (vec![0u32; lambda], vec![0u32; n]);
        let mut pairs = Vec::new();
        for r in 0..lambda {
            for p in 0..n {
                if picks[r * 20 + p] && rl[r] < mu && pl[p] < mu {
                    rl[r] += 1;
                    pl[p] += 1;
                    pairs.push((r, p));
                }
            }
        }
        let a = Assignment::from_pairs(&s, pairs).unwrap();
        let m = extract_unit_matching(&s, &a, mu).unwrap();
        prop_assert!(m.max_load() <= 1);
        prop_assert!(m.pairs().iter().all(|&(r, p)| a.contains(r, p)));
        prop_assert!(m.value() * mu as f64 >= a.value());
    }
}

#[test]
fn at_most_can_beat_exact_with_double_loads() {
    // Papers 0 and 1 share two good reviewers; paper 2 only has a poor one
    // left over, so at-most loads leave it short.
    let s = SimilarityMatrix::from_rows(vec![
        vec![1.0, 1.0, 0.0],
        vec![1.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0],
    ])
    .unwrap();
    let exact = MatchSpec::full(&s, 2, 2);
    let at_most = exact.clone().with_mode(PapMode::AtMost);
    assert_eq!(solve(&s, &at_most).unwrap().value(), 4.0);
    assert_eq!(solve(&s, &exact).unwrap().value(), 3.0);
}

#[test]
fn extraction_rejects_overloaded_input() {
    let s = SimilarityMatrix::from_rows(vec![vec![0.5, 0.5]]).unwrap();
    let a = Assignment::from_pairs(&s, vec![(0, 0), (0, 1)]).unwrap();
    assert!(matches!(extract_unit_matching(&s, &a, 1), Err(Error::Precondition(_))));
    assert_eq!(extract_unit_matching(&s, &a, 2).unwrap().value(), 0.5);
}
