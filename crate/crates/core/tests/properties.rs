use num_traits::{One, Zero};
use proptest::prelude::*;
use ssm_core::format::{parse_mechanism, render_mechanism};
use ssm_core::{
    canonicalize, check_simple, compatible_polytope, mixed_ud, pure_ud, q, validate, Classification, Mechanism,
    MechanismTable, OrdinalDomain, Preference, Utility, UtilityBelief, Q,
};

const LABELS: [&str; 3] = ["a", "b", "c"];

fn mechanism() -> impl Strategy<Value = Mechanism> {
    (2usize..=3, 1usize..=3, 1usize..=3)
        .prop_flat_map(|(m, rows, cols)| (Just(m), Just(rows), Just(cols), prop::collection::vec(0..m, rows * cols)))
        .prop_filter_map("invalid table", |(m, rows, cols, cells)| {
            let table = MechanismTable {
                alternatives: LABELS[..m].iter().map(|s| s.to_string()).collect(),
                strategies: vec![
                    (1..=rows).map(|s| format!("r{s}")).collect(),
                    (1..=cols).map(|s| format!("c{s}")).collect(),
                ],
                outcomes: cells.into_iter().map(Some).collect(),
            };
            if validate(&table).is_valid() {
                Mechanism::try_from(table).ok()
            } else {
                None
            }
        })
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<usize>>()).prop_shuffle()
}

/// A mechanism together with random alternative and strategy permutations.
fn relabeled() -> impl Strategy<Value = (Mechanism, Vec<usize>, Vec<Vec<usize>>)> {
    mechanism().prop_flat_map(|m| {
        let alts = permutation(m.alternatives().len());
        let perms = (permutation(m.num_strategies(0)), permutation(m.num_strategies(1)));
        (Just(m), alts, perms).prop_map(|(m, a, (p0, p1))| (m, a, vec![p0, p1]))
    })
}

fn utility(m: usize, order: usize, interior: u32) -> Utility {
    let pref = Preference::all(m)[order % Preference::all(m).len()].clone();
    let inner: Vec<Q> = if m == 3 { vec![q(interior as i64, 100)] } else { vec![] };
    Utility::for_preference(&pref, &inner).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn render_then_parse_round_trips(m in mechanism()) {
        let text = render_mechanism(&m).unwrap();
        prop_assert_eq!(parse_mechanism(&text).unwrap(), m);
    }

    #[test]
    fn mixed_undominated_strategies_are_pure_undominated(m in mechanism(), order in 0usize..6, interior in 1u32..100, agent in 0usize..2) {
        let u = utility(m.alternatives().len(), order, interior);
        let mixed = mixed_ud(&m, agent, &u).unwrap();
        let pure = pure_ud(&m, agent, &u.preference()).unwrap();
        prop_assert!(!mixed.is_empty());
        prop_assert!(mixed.strategies.iter().all(|&s| pure.contains(s)));
    }

    #[test]
    fn mixed_dominance_ignores_positive_affine_rescaling(
        m in mechanism(), order in 0usize..6, interior in 1u32..100, agent in 0usize..2, scale in 1i64..20, shift in -20i64..20,
    ) {
        let u = utility(m.alternatives().len(), order, interior);
        let moved: Vec<Q> = u.values().iter().map(|v| v * q(scale, 3) + q(shift, 7)).collect();
        let lo = moved.iter().min().unwrap().clone();
        let hi = moved.iter().max().unwrap().clone();
        let back = Utility::new(moved.iter().map(|v| (v - &lo) / (&hi - &lo)).collect()).unwrap();
        prop_assert_eq!(back.values(), u.values());
        prop_assert_eq!(mixed_ud(&m, agent, &back).unwrap().strategies, mixed_ud(&m, agent, &u).unwrap().strategies);
    }

    #[test]
    fn canonical_form_ignores_relabeling((m, alts, perms) in relabeled(), flip in any::<bool>()) {
        let mut r = m.relabel(&alts, &perms).unwrap();
        if flip {
            r = r.transpose().unwrap();
        }
        prop_assert_eq!(canonicalize(&r).unwrap(), canonicalize(&m).unwrap());
    }

    #[test]
    fn classification_ignores_relabeling((m, alts, perms) in relabeled()) {
        let dom = OrdinalDomain::full(2, m.alternatives().len());
        let before = check_simple(&m, &dom).unwrap();
        let after = check_simple(&m.relabel(&alts, &perms).unwrap(), &dom).unwrap();
        match (&before, &after) {
            (Classification::NotStrategicallySimple { .. }, Classification::NotStrategicallySimple { .. }) => {}
            _ => prop_assert_eq!(before, after),
        }
    }

    #[test]
    fn projected_beliefs_are_distributions_inside_the_polytope(
        m in mechanism(), orders in prop::collection::vec(0usize..6, 1..4), splits in prop::collection::vec(1i64..10, 12),
    ) {
        let k = m.alternatives().len();
        let n = orders.len() as i64;
        let support: Vec<(Vec<Utility>, Q)> = orders.iter().map(|&o| (vec![utility(k, o, 50)], q(1, n))).collect();
        let belief = UtilityBelief::new(&m, 0, support).unwrap();
        let poly = compatible_polytope(&m, &belief).unwrap();
        let mut next = splits.iter().cycle();
        let split: Vec<Vec<Q>> = poly
            .blocks()
            .iter()
            .map(|b| {
                let raw: Vec<i64> = b.profiles.iter().map(|_| *next.next().unwrap()).collect();
                let total: i64 = raw.iter().sum();
                raw.iter().map(|&r| q(r, total)).collect()
            })
            .collect();
        let point = poly.project(&split).unwrap();
        prop_assert!(point.iter().all(|p| p >= &Q::zero()));
        prop_assert!(point.iter().sum::<Q>().is_one());
        prop_assert!(poly.contains(&point).unwrap());
    }
}
