use proptest::prelude::*;

use coopsolve_core::baselines::weight_proportional;
use coopsolve_core::exact::{banzhaf_exact, minimal_winning_coalitions, shapley_exact};
use coopsolve_core::lp::{
    check_feasibility, least_core, least_core_detailed, max_excess, Formulation, LeastCoreOptions,
    LeastCoreTarget,
};
use coopsolve_core::mc::{banzhaf_mc, shapley_mc, McConfig};
use coopsolve_core::{Coalition, WeightedVotingGame, DEFAULT_ENUMERATION_CAP};

const CAP: usize = DEFAULT_ENUMERATION_CAP;

fn games(max_n: usize) -> impl Strategy<Value = WeightedVotingGame> {
    (2..=max_n)
        .prop_flat_map(|n| (prop::collection::vec(0u32..20, n), 0.0f64..1.0))
        .prop_filter("someone has weight", |(w, _)| w.iter().any(|&x| x > 0))
        .prop_map(|(w, t)| {
            let w: Vec<f64> = w.into_iter().map(f64::from).collect();
            let total: f64 = w.iter().sum();
            let q = (t * total).max(0.5).min(total);
            WeightedVotingGame::solvable(w, q).unwrap()
        })
}

fn wins(g: &WeightedVotingGame, members: &[usize]) -> bool {
    members.iter().map(|&i| g.weights()[i]).sum::<f64>() >= g.quota()
}

/// Average marginal contribution over all n! orderings.
fn shapley_by_orderings(g: &WeightedVotingGame) -> Vec<f64> {
    fn permute(order: &mut Vec<usize>, k: usize, g: &WeightedVotingGame, acc: &mut [f64], count: &mut u64) {
        if k == order.len() {
            *count += 1;
            for j in 0..order.len() {
                if !wins(g, &order[..j]) && wins(g, &order[..=j]) {
                    acc[order[j]] += 1.0;
                    break;
                }
            }
            return;
        }
        for i in k..order.len() {
            order.swap(k, i);
            permute(order, k + 1, g, acc, count);
            order.swap(k, i);
        }
    }
    let n = g.n();
    let mut acc = vec![0.0; n];
    let mut count = 0;
    permute(&mut (0..n).collect(), 0, g, &mut acc, &mut count);
    acc.iter().map(|a| a / count as f64).collect()
}

/// Swing counts over the 2^(n-1) coalitions without each player.
fn banzhaf_by_subsets(g: &WeightedVotingGame) -> Vec<f64> {
    let n = g.n();
    (0..n)
        .map(|i| {
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let swings = (0u64..1 << (n - 1))
                .filter(|mask| {
                    let mut s: Vec<usize> = others
                        .iter()
                        .enumerate()
                        .filter(|(b, _)| mask >> b & 1 == 1)
                        .map(|(_, &j)| j)
                        .collect();
                    let before = wins(g, &s);
                    s.push(i);
                    !before && wins(g, &s)
                })
                .count();
            swings as f64 / (1u64 << (n - 1)) as f64
        })
        .collect()
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
    }
}

#[test]
fn parliament_game() {
    let g = WeightedVotingGame::solvable(vec![49.0, 49.0, 2.0], 50.0).unwrap();
    assert_eq!(shapley_exact(&g, CAP).unwrap().payoffs, vec![1.0 / 3.0; 3]);
    let lc = least_core(&g, &LeastCoreOptions::default()).unwrap();
    assert!((lc.lcv.unwrap() - 1.0 / 3.0).abs() < 1e-9);
}

#[test]
fn game_with_a_non_empty_core() {
    let g = WeightedVotingGame::solvable(vec![2.8, 1.6, 6.6, 1.5], 12.1).unwrap();
    let lc = least_core(&g, &LeastCoreOptions::default()).unwrap();
    assert!(lc.lcv.unwrap().abs() < 1e-9);
    assert!(max_excess(&g, &lc.payoffs, CAP).unwrap().abs() < 1e-9);
}

#[test]
fn dictator_and_unanimity() {
    let dictator = WeightedVotingGame::solvable(vec![10.0, 1.0, 1.0], 10.0).unwrap();
    assert_eq!(
        shapley_exact(&dictator, CAP).unwrap().payoffs,
        vec![1.0, 0.0, 0.0]
    );
    assert_eq!(
        banzhaf_exact(&dictator, false, CAP).unwrap().payoffs,
        vec![1.0, 0.0, 0.0]
    );
    let unanimity = WeightedVotingGame::solvable(vec![1.0, 2.0, 3.0, 4.0], 10.0).unwrap();
    assert_close(
        &shapley_exact(&unanimity, CAP).unwrap().payoffs,
        &[0.25; 4],
        1e-15,
    );
    assert_close(
        &banzhaf_exact(&unanimity, false, CAP).unwrap().payoffs,
        &[0.125; 4],
        1e-15,
    );
    assert_eq!(
        least_core(&unanimity, &LeastCoreOptions::default()).unwrap().lcv,
        Some(0.0)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn shapley_matches_ordering_enumeration(g in games(7)) {
        assert_close(&shapley_exact(&g, CAP).unwrap().payoffs, &shapley_by_orderings(&g), 1e-12);
    }

    #[test]
    fn raw_banzhaf_matches_subset_enumeration(g in games(8)) {
        assert_close(&banzhaf_exact(&g, false, CAP).unwrap().payoffs, &banzhaf_by_subsets(&g), 1e-12);
    }

    #[test]
    fn indices_are_efficient_and_symmetric(g in games(10)) {
        for p in [shapley_exact(&g, CAP).unwrap(), banzhaf_exact(&g, true, CAP).unwrap()] {
            prop_assert!((p.total() - 1.0).abs() < 1e-12);
            prop_assert!(p.payoffs.iter().all(|&x| x >= 0.0));
            for i in 0..g.n() {
                for j in 0..g.n() {
                    if g.weights()[i] == g.weights()[j] {
                        prop_assert!((p.payoffs[i] - p.payoffs[j]).abs() < 1e-12);
                    }
                }
                if g.weights()[i] == 0.0 {
                    prop_assert_eq!(p.payoffs[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn power_of_two_rescaling_changes_nothing(g in games(9), k in -8i32..8) {
        let s = g.scaled(2f64.powi(k)).unwrap();
        prop_assert_eq!(shapley_exact(&g, CAP).unwrap(), shapley_exact(&s, CAP).unwrap());
        prop_assert_eq!(banzhaf_exact(&g, true, CAP).unwrap(), banzhaf_exact(&s, true, CAP).unwrap());
        prop_assert_eq!(weight_proportional(&g).unwrap(), weight_proportional(&s).unwrap());
        let opts = LeastCoreOptions::default();
        let (a, b) = (least_core(&g, &opts).unwrap(), least_core(&s, &opts).unwrap());
        prop_assert!((a.lcv.unwrap() - b.lcv.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn least_core_is_consistent(g in games(10)) {
        let n = g.n();
        let mut eps = Vec::new();
        for formulation in [Formulation::Naive, Formulation::Minimal] {
            for target in [LeastCoreTarget::Vertex, LeastCoreTarget::Canonical] {
                let opts = LeastCoreOptions { formulation, target, cap: CAP };
                let p = least_core(&g, &opts).unwrap();
                let e = p.lcv.unwrap();
                prop_assert!(e >= -1e-12 && e <= 1.0 - 1.0 / n as f64 + 1e-9, "lcv {}", e);
                prop_assert!(p.is_imputation(&g, 1e-9).unwrap());
                prop_assert!(check_feasibility(&g, &p.payoffs, e, 1e-9, CAP).unwrap().feasible);
                prop_assert!((max_excess(&g, &p.payoffs, CAP).unwrap() - e).abs() < 1e-8);
                eps.push(e);
            }
        }
        prop_assert!(eps.iter().all(|e| (e - eps[0]).abs() < 1e-9), "{:?}", eps);
    }

    #[test]
    fn vertex_payoffs_are_basic(g in games(8)) {
        // A vertex of the (p, eps) polytope has n + 1 tight constraints, one of them sum(p) = 1.
        let d = least_core_detailed(&g, &LeastCoreOptions::default()).unwrap();
        let (p, e) = (&d.solution.payoffs, d.solution.lcv.unwrap());
        let mwc = minimal_winning_coalitions(&g, CAP).unwrap();
        let tight_coalitions = mwc
            .coalitions
            .iter()
            .filter(|c| (c.sum_over(p) + e - 1.0).abs() < 1e-9)
            .count();
        let tight_bounds = p.iter().filter(|&&x| x.abs() < 1e-9).count() + usize::from(e.abs() < 1e-9);
        prop_assert!(tight_coalitions + tight_bounds >= g.n());
    }

    #[test]
    fn minimal_winning_coalitions_are_minimal(g in games(9)) {
        for c in minimal_winning_coalitions(&g, CAP).unwrap().coalitions {
            prop_assert!(g.is_winning(c));
            for i in c.members() {
                prop_assert!(!g.is_winning(c.without(i)));
            }
        }
    }
}

#[test]
fn sampled_indices_agree_with_exact_ones() {
    let g = WeightedVotingGame::solvable(vec![7.0, 5.0, 4.0, 3.0, 2.0, 1.0], 12.0).unwrap();
    let cfg = McConfig::new(2000, 10, 11);
    let exact_s = shapley_exact(&g, CAP).unwrap();
    let mc_s = shapley_mc(&g, &cfg).unwrap();
    for i in 0..g.n() {
        assert!((mc_s.solution.payoffs[i] - exact_s.payoffs[i]).abs() < 5.0 * mc_s.std_error[i] + 1e-12);
    }
    assert!((mc_s.solution.total() - 1.0).abs() < 1e-12);
    let exact_b = banzhaf_exact(&g, false, CAP).unwrap();
    let mc_b = banzhaf_mc(&g, &cfg, false).unwrap();
    for i in 0..g.n() {
        assert!((mc_b.solution.payoffs[i] - exact_b.payoffs[i]).abs() < 5.0 * mc_b.std_error[i] + 1e-12);
    }
    assert_eq!(shapley_mc(&g, &cfg).unwrap(), mc_s);
}

#[test]
fn coalitions_round_trip_through_members() {
    let c = Coalition::from_members([0, 3, 5]);
    assert_eq!(c.members().collect::<Vec<_>>(), vec![0, 3, 5]);
    assert_eq!(c.len(), 3);
    assert!(c.without(3).is_subset_of(c));
}

#[test]
fn sampled_shapley_is_unbiased_across_seeds() {
    let g = WeightedVotingGame::solvable(vec![9.0, 7.0, 6.0, 4.0, 3.0, 3.0, 2.0, 1.0], 18.0).unwrap();
    let exact = shapley_exact(&g, CAP).unwrap();
    let runs: Vec<_> = (0..50)
        .map(|s| shapley_mc(&g, &McConfig::new(1000, 10, s)).unwrap())
        .collect();
    for i in 0..g.n() {
        let mean = runs.iter().map(|r| r.solution.payoffs[i]).sum::<f64>() / 50.0;
        let pooled = (runs.iter().map(|r| r.std_error[i].powi(2)).sum::<f64>() / 50.0).sqrt() / 50f64.sqrt();
        assert!(
            (mean - exact.payoffs[i]).abs() < 3.0 * pooled,
            "player {i}: {mean} vs {}",
            exact.payoffs[i]
        );
    }
}
