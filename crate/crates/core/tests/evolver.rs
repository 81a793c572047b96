use copsel::cop::{GeneratorSpec, ObjectiveTag};
use copsel::evolver::{
    dominates_in, evolve, pareto_ranks, select_subset, truncate_indices, EvolverConfig, Scores, Sense, SubsetKind,
    SubsetTag,
};
use copsel::solvers::SolverKind;
use proptest::prelude::*;

fn scores() -> impl Strategy<Value = Vec<Scores>> {
    // Coarse values so that ties and duplicates are common.
    let fen = (1u32..8).prop_map(|k| f64::from(k) * 1000.0);
    prop::collection::vec(prop::array::uniform3(fen).prop_map(Scores), 1..25)
}

fn target() -> impl Strategy<Value = SolverKind> {
    prop_oneof![Just(SolverKind::DE), Just(SolverKind::ES), Just(SolverKind::PSO)]
}

fn sense() -> impl Strategy<Value = Sense> {
    prop_oneof![Just(Sense::Hard), Just(Sense::Easy)]
}

proptest! {
    #[test]
    fn rank_one_is_exactly_the_undominated_set(s in scores(), t in target(), sense in sense()) {
        let ranks = pareto_ranks(&s, t, sense);
        for i in 0..s.len() {
            let dominated = (0..s.len()).any(|j| dominates_in(&s[j], &s[i], t, sense));
            prop_assert_eq!(ranks[i] == 1, !dominated);
        }
    }

    #[test]
    fn later_ranks_are_dominated_by_the_previous_one(s in scores(), t in target(), sense in sense()) {
        let ranks = pareto_ranks(&s, t, sense);
        for i in 0..s.len() {
            prop_assert!(ranks[i] >= 1);
            for j in 0..s.len() {
                if ranks[i] == ranks[j] {
                    prop_assert!(!dominates_in(&s[j], &s[i], t, sense));
                }
            }
            if ranks[i] > 1 {
                prop_assert!((0..s.len()).any(|j| ranks[j] == ranks[i] - 1 && dominates_in(&s[j], &s[i], t, sense)));
            }
        }
    }

    #[test]
    fn truncation_keeps_whole_better_fronts(s in scores(), t in target(), sense in sense(), keep in 1usize..25) {
        let kept = truncate_indices(&s, t, sense, keep);
        prop_assert_eq!(kept.len(), keep.min(s.len()));
        let ranks = pareto_ranks(&s, t, sense);
        let worst_kept = kept.iter().map(|i| ranks[*i]).max().unwrap();
        for i in 0..s.len() {
            if ranks[i] < worst_kept {
                prop_assert!(kept.contains(&i));
            }
        }
    }
}

#[test]
fn short_run_front_is_pairwise_non_dominated() {
    let mut base = GeneratorSpec::new(ObjectiveTag::Sphere, 3);
    base.n_linear = 2;
    for (target, sense) in [(SolverKind::DE, Sense::Hard), (SolverKind::PSO, Sense::Easy)] {
        let config = EvolverConfig { population_size: 6, generations: 2, inner_budget: 1500, inner_repeats: 1, ..EvolverConfig::new(target, sense) };
        let pop = evolve(&config, &base, 21).unwrap();
        assert_eq!(pop, evolve(&config, &base, 21).unwrap());
        assert_eq!(pop.members.len(), 6);
        let front: Vec<_> = pop.front().collect();
        assert!(!front.is_empty());
        for a in &front {
            for b in &front {
                assert!(!dominates_in(&a.scores, &b.scores, target, sense));
            }
        }
        let member_scores: Vec<Scores> = pop.members.iter().map(|m| m.scores).collect();
        let ranks = pareto_ranks(&member_scores, target, sense);
        assert!(pop.members.iter().zip(&ranks).all(|(m, r)| m.pareto_rank == *r));
        let extreme = pop.extreme().unwrap();
        assert_eq!(extreme.pareto_rank, 1);
        assert!(extreme.subset_tags.contains(&SubsetTag::ExtremePoint));
        assert!(pop.members.iter().all(|m| pop.archive.iter().any(|a| a.instance == m.instance)));
        assert_eq!(pop.history.len(), 3);

        let pfr = select_subset(std::slice::from_ref(&pop), SubsetKind::PFR, 4, 1).unwrap();
        assert_eq!(pfr.iter().filter(|s| s.pool == SubsetTag::ParetoFront).count(), 2.min(front.len()));
        assert!(pfr.iter().filter(|s| s.pool == SubsetTag::ParetoFront).all(|s| s.member.pareto_rank == 1));
    }
}
