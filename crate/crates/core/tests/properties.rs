use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;

use ising_pairs::*;

fn pt(c: &[i32]) -> LatticePoint {
    LatticePoint::new(c.to_vec())
}

/// Random potential on `B^radius(0)` in dimension `d`.
fn potential_strategy(d: usize, radius: u32) -> impl Strategy<Value = PairwisePotential> {
    let sites = LatticeBox::centered(d, radius).sites();
    let m = sites.len();
    let pairs = m * (m - 1) / 2;
    proptest::collection::vec(prop_oneof![3 => Just(0.0), 2 => -0.6f64..0.6], pairs).prop_map(
        move |values| {
            let mut edges = Vec::new();
            let mut k = 0;
            for a in 0..m {
                for b in a + 1..m {
                    if values[k] != 0.0 {
                        edges.push((sites.point(a).clone(), sites.point(b).clone(), values[k]));
                    }
                    k += 1;
                }
            }
            PairwisePotential::new(sites.clone(), edges).unwrap()
        },
    )
}

/// Random potential of range at most 1 on a 3x3 box.
fn short_range_strategy() -> impl Strategy<Value = PairwisePotential> {
    potential_strategy(2, 1)
}

fn sample_strategy(m: usize, max_n: usize) -> impl Strategy<Value = Vec<Vec<Spin>>> {
    proptest::collection::vec(
        proptest::collection::vec(prop_oneof![Just(Spin::Up), Just(Spin::Down)], m),
        1..max_n,
    )
}

fn square_sample(rows: Vec<Vec<Spin>>) -> Sample {
    Sample::from_rows(Arc::new(LatticeBox::centered(2, 1).sites()), rows, 0, 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn couplings_are_symmetric(pot in potential_strategy(1, 3)) {
        for p in pot.volume().iter() {
            for q in pot.volume().iter() {
                prop_assert_eq!(pot.coupling(p, q), pot.coupling(q, p));
            }
        }
    }

    #[test]
    fn truncation_is_idempotent_and_shrinks(pot in potential_strategy(1, 3), l in 1u32..5) {
        let t = pot.truncate(l).unwrap();
        prop_assert_eq!(t.truncate(l).unwrap().to_toml(), t.to_toml());
        prop_assert!(t.edge_count() <= pot.edge_count());
        prop_assert!(t.range() <= l);
        prop_assert!(t.dobrushin_coefficient().r <= pot.dobrushin_coefficient().r + 1e-15);
        for (a, b, v) in t.edges() {
            prop_assert_eq!(pot.coupling(a, b), v);
        }
    }

    #[test]
    fn tail_sum_is_nonincreasing(pot in potential_strategy(1, 3)) {
        let tails: Vec<f64> = (1..=7).map(|l| pot.tail_sum(l).unwrap()).collect();
        prop_assert!(tails.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(tails[6], 0.0);
        prop_assert!(tails[0] <= pot.dobrushin_coefficient().r + 1e-15);
    }

    #[test]
    fn potential_file_round_trip(pot in potential_strategy(2, 1)) {
        let back = PairwisePotential::from_toml(&pot.to_toml()).unwrap();
        prop_assert_eq!(back.to_toml(), pot.to_toml());
        for (a, b, v) in pot.edges() {
            prop_assert_eq!(back.coupling(a, b).to_bits(), v.to_bits());
        }
    }

    #[test]
    fn joint_law_is_a_coupling(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let law = joint_update_law(a, b);
        prop_assert!(law.iter().all(|&m| m >= 0.0));
        prop_assert!((law.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        // outcomes: (+,+), (-,-), (+,-), (-,+)
        prop_assert!((law[0] + law[2] - a).abs() <= 1e-12);
        prop_assert!((law[0] + law[3] - b).abs() <= 1e-12);
        prop_assert!((law[0] + law[1] - (1.0 - (a - b).abs())).abs() <= 1e-12);
    }

    #[test]
    fn oracle_is_normalized_and_additive(pot in short_range_strategy(), bits in 0u64..512, k in 0usize..9) {
        let model = exact_distribution(&pot, pot.volume()).unwrap();
        prop_assert!((model.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let config = model.configuration(bits);
        let site = pot.volume().point(k).clone();
        let others: Vec<LatticePoint> = pot.volume().iter().filter(|p| **p != site).cloned().collect();
        let rest = config.restrict(others.iter().take(4)).unwrap();
        let total = model.exact_marginal(&rest).unwrap();
        let split: f64 = Spin::BOTH
            .iter()
            .map(|&s| {
                let mut p = rest.clone();
                p.insert(site.clone(), s);
                model.exact_marginal(&p).unwrap()
            })
            .sum();
        prop_assert!((total - split).abs() <= 1e-12);
        let up = model.exact_conditional(&site, Spin::Up, &rest).unwrap();
        let down = model.exact_conditional(&site, Spin::Down, &rest).unwrap();
        prop_assert!((up + down - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn oracle_conditional_matches_local_law(pot in short_range_strategy(), bits in 0u64..512, k in 0usize..9) {
        let model = exact_distribution(&pot, pot.volume()).unwrap();
        let config = model.configuration(bits);
        let site = pot.volume().point(k).clone();
        let others: Vec<LatticePoint> = pot.volume().iter().filter(|p| **p != site).cloned().collect();
        let rest = config.restrict(others.iter()).unwrap();
        let exact = model.exact_conditional(&site, Spin::Up, &rest).unwrap();
        prop_assert!((exact - local_spec(&pot, &site, Spin::Up, &config)).abs() <= 1e-10);
    }

    #[test]
    fn exact_d_two_paths_agree(pot in short_range_strategy(), bits in 0u64..512) {
        let model = exact_distribution(&pot, pot.volume()).unwrap();
        let center = pt(&[0, 0]);
        let x = model.configuration(bits);
        for (j, max_d) in model.exact_max_d(&center, 1).unwrap() {
            let d = model.exact_d(&center, &j, 1, &x).unwrap();
            prop_assert!(d <= max_d + 1e-12);
        }
    }

    #[test]
    fn screening_off_the_graph(pot in short_range_strategy()) {
        let model = exact_distribution(&pot, pot.volume()).unwrap();
        let center = pt(&[0, 0]);
        let neighbors = pot.interaction_neighborhood(&center).unwrap();
        for (j, d) in model.exact_max_d(&center, 1).unwrap() {
            if !neighbors.contains(&j) {
                prop_assert_eq!(d, 0.0);
            }
        }
        let v0 = truth_set(&pot, &center, 1, TruthMode::Population, 0.0).unwrap();
        prop_assert!(v0.is_subset(&neighbors));
    }

    #[test]
    fn empirical_prob_is_additive(rows in sample_strategy(9, 60), bits in 0u64..512, k in 0usize..9) {
        let s = square_sample(rows);
        let sites = Arc::clone(s.sites());
        let x = SpinConfiguration::from_bits(Arc::clone(&sites), bits);
        let site = sites.point(k).clone();
        let others: Vec<LatticePoint> = sites.iter().filter(|p| **p != site).cloned().collect();
        let rest = x.restrict(others.iter().take(3)).unwrap();
        let n = s.len() as f64;
        let count = |p: &Pattern| (empirical_prob(&s, p).unwrap() * n).round() as u64;
        let mut up = rest.clone();
        up.insert(site.clone(), Spin::Up);
        let mut down = rest.clone();
        down.insert(site, Spin::Down);
        prop_assert_eq!(count(&rest), count(&up) + count(&down));
    }

    #[test]
    fn restricted_max_equals_exhaustive_max(rows in sample_strategy(9, 80), eps in 0.0f64..0.2) {
        let s = square_sample(rows);
        let center = pt(&[0, 0]);
        let fast = estimate_neighborhood(&s, &center, 1, eps).unwrap();
        let slow = estimate_neighborhood_exhaustive(&s, &center, 1, eps).unwrap();
        prop_assert_eq!(&fast, &slow);
        prop_assert_eq!(
            fast.selected.clone(),
            fast.scores.iter().filter(|(_, &v)| v > eps).map(|(j, _)| j.clone()).collect::<BTreeSet<_>>()
        );
    }

    #[test]
    fn thresholding_is_monotone(rows in sample_strategy(9, 80), e1 in 0.0f64..0.2, e2 in 0.0f64..0.2) {
        let s = square_sample(rows);
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let center = pt(&[0, 0]);
        let wide = estimate_neighborhood(&s, &center, 1, lo).unwrap();
        let narrow = estimate_neighborhood(&s, &center, 1, hi).unwrap();
        prop_assert!(narrow.selected.is_subset(&wide.selected));
    }

    #[test]
    fn draw_order_does_not_matter(rows in sample_strategy(9, 40), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let s = square_sample(rows);
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let p = s.permuted(&order).unwrap();
        let center = pt(&[0, 0]);
        prop_assert_eq!(
            estimate_neighborhood(&s, &center, 1, 0.01).unwrap(),
            estimate_neighborhood(&p, &center, 1, 0.01).unwrap()
        );
        let pattern: Pattern = [(pt(&[1, 0]), Spin::Up), (pt(&[0, 1]), Spin::Down)].into_iter().collect();
        prop_assert_eq!(empirical_prob(&s, &pattern).unwrap(), empirical_prob(&p, &pattern).unwrap());
        prop_assert_eq!(
            empirical_conditional(&s, &center, Spin::Up, &pattern).unwrap(),
            empirical_conditional(&p, &center, Spin::Up, &pattern).unwrap()
        );
    }

    #[test]
    fn misid_bounds_are_monotone(
        n in 1u64..1_000_000,
        eps in 0.001f64..0.5,
        v in 0.01f64..1.0,
        l in 1u32..3,
        d in 1usize..3,
        r in 0.0f64..0.99,
        tail in 0.0f64..0.5,
    ) {
        let f = |n, v| misid_bound_finite(n, eps, v, l, d).unwrap().value;
        prop_assert!(f(n + 1, v) <= f(n, v));
        prop_assert!(f(n, v * 1.1) >= f(n, v));
        let i = |v| misid_bound_infinite(n, eps, v, l, d, r, tail).unwrap().value;
        prop_assert!(i(v) >= f(n, v));
        prop_assert!(i(v * 1.1) >= i(v));
        let b = |n| bernstein(n, eps, v, 1.0).unwrap();
        prop_assert!(b(n + 1) <= b(n));
    }

    #[test]
    fn coupling_bound_nonincreasing_in_l(pot in potential_strategy(1, 3)) {
        if pot.dobrushin_coefficient().r < 1.0 {
            let values: Vec<f64> = (1..=6).map(|l| coupling_bound(&pot, l).unwrap().value).collect();
            prop_assert!(values.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn threshold_decreases_in_n(c in 0.01f64..2.0, l in 1u32..3, d in 1usize..3, n in 1u64..100_000) {
        let t = ThresholdSchedule::theoretical(c, d).unwrap();
        prop_assert!(t.threshold(l, n + 1).unwrap() < t.threshold(l, n).unwrap());
        let s = ThresholdSchedule::simple(c).unwrap();
        prop_assert!(s.threshold(l, n + 1).unwrap() < s.threshold(l, n).unwrap());
        prop_assert!(scale_l(n + 2, d).unwrap() >= scale_l(n + 1, d).unwrap());
    }
}
