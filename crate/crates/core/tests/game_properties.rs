use std::collections::BTreeSet;

use proptest::prelude::*;
use tddyn_core::game::{
    build_payoff_matrix, classify_all, classify_subgame, iterated_elimination, payoff, Action,
    GameParams, SubgameKind,
};
use tddyn_core::verification::nash_enumeration_oracle;

fn small_game() -> impl Strategy<Value = GameParams> {
    (0i64..30, 1i64..14, 2i64..25).prop_map(|(lower, width, reward)| GameParams {
        lower,
        upper: lower + width,
        reward,
    })
}

fn game_with_pair() -> impl Strategy<Value = (GameParams, i64, i64)> {
    (0i64..60, 1i64..80, 2i64..60).prop_flat_map(|(lower, width, reward)| {
        let upper = lower + width;
        (Just(GameParams { lower, upper, reward }), lower..upper)
            .prop_flat_map(move |(g, a)| (Just(g), Just(a), (a + 1)..=upper))
    })
}

proptest! {
    #[test]
    fn undercutting_gap_is_twice_the_reward((g, a, b) in game_with_pair()) {
        let low = payoff(Action(a), Action(b), &g).unwrap();
        let high = payoff(Action(b), Action(a), &g).unwrap();
        prop_assert_eq!(low - high, 2 * g.reward);
    }

    #[test]
    fn undercutting_by_one_pays((g, _a, b) in game_with_pair()) {
        let under = payoff(Action(b - 1), Action(b), &g).unwrap();
        prop_assert_eq!(under, b - 1 + g.reward);
        prop_assert!(under > payoff(Action(b), Action(b), &g).unwrap());
    }

    #[test]
    fn matrix_agrees_with_payoff(g in small_game()) {
        let pm = build_payoff_matrix(&g).unwrap();
        for (i, a) in g.actions().enumerate() {
            for (j, b) in g.actions().enumerate() {
                prop_assert_eq!(pm.get(i, j), payoff(a, b, &g).unwrap());
            }
        }
    }

    #[test]
    fn elimination_and_nash_single_out_the_floor(g in small_game()) {
        let survivors = iterated_elimination(&g).unwrap();
        prop_assert_eq!(survivors, vec![Action(g.lower)]);
        let nash = nash_enumeration_oracle(&g).unwrap();
        prop_assert_eq!(nash, BTreeSet::from([(g.lower, g.lower)]));
    }

    #[test]
    fn subgame_kind_depends_only_on_gap((g, a, b) in game_with_pair()) {
        let class = classify_subgame(Action(a), b - a, &g).unwrap();
        let expected = if b - a < g.reward {
            SubgameKind::PrisonersDilemma
        } else {
            SubgameKind::Coordination
        };
        prop_assert_eq!(class.kind, expected);
    }
}

#[test]
fn classification_over_the_classic_range() {
    for reward in [2, 3, 4] {
        let g = GameParams::new(2, 100, reward).unwrap();
        let all = classify_all(&g).unwrap();
        assert_eq!(all.len(), 98 * 99 / 2);
        for (base, gap, class) in all {
            let pd = (1..reward).contains(&gap);
            assert_eq!(class.kind == SubgameKind::PrisonersDilemma, pd, "n={} s={gap}", base.0);
            assert_eq!(class.kind == SubgameKind::Coordination, gap >= reward, "n={} s={gap}", base.0);
        }
    }
}
