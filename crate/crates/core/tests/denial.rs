mod common;

use bcdb_core::denial::{
    classify, holds_denial, holds_denial_agg, holds_denial_cq_fd, holds_denial_cq_ind, holds_denial_dry_run,
    holds_denial_oracle, holds_denial_witness, Algorithm, Complexity, DenialConstraint,
};
use bcdb_core::query::{AggCmp, AggregateFn};
use bcdb_core::textio::{parse_bundle, parse_queries, parse_query, parse_transactions};
use common::{Mode, Shape};
use proptest::prelude::*;

const RUNNING: &str = include_str!("../fixtures/running_example.bcdb");
const ALICE: &str = include_str!("../fixtures/alice_bob.bcdb");
const Q1: &str = include_str!("../fixtures/q1.dq");

#[test]
fn running_example_queries() {
    let db = parse_bundle(RUNNING).unwrap();
    let qs = parse_queries(include_str!("../fixtures/running_queries.dq")).unwrap();
    let v = holds_denial(&db, &qs[0], None).unwrap();
    assert!(v.holds);
    let v = holds_denial(&db, &qs[1], None).unwrap();
    assert!(!v.holds);
    assert_eq!(v.counterexample.unwrap().to_string(), "R ∪ T5");
}

#[test]
fn q1_dry_runs() {
    let db = parse_bundle(ALICE).unwrap();
    let q = parse_query(Q1).unwrap();
    assert_eq!(q.body().positive.len(), 4);
    assert_eq!(q.body().comparisons.len(), 1);
    let same = parse_transactions(include_str!("../fixtures/t2_same_coin.txn"), db.schema()).unwrap();
    let other = parse_transactions(include_str!("../fixtures/t2_other_coin.txn"), db.schema()).unwrap();
    assert!(holds_denial_dry_run(&db, &q, same, None).unwrap().holds);
    let v = holds_denial_dry_run(&db, &q, other, None).unwrap();
    assert!(!v.holds);
    assert_eq!(v.counterexample.unwrap().to_string(), "R ∪ T1 ∪ T2");
}

#[test]
fn alice_spending_aggregate() {
    let q = parse_query("deny q3 [sum(a) :- TxInput(t, s, \"AlicePK\", a, nt, \"AliceSig\")] > 1").unwrap();
    let db = parse_bundle(ALICE).unwrap();
    let other = parse_transactions(include_str!("../fixtures/t2_other_coin.txn"), db.schema()).unwrap();
    assert!(holds_denial(&db, &q, None).unwrap().holds);
    assert!(!holds_denial_dry_run(&db, &q, other, None).unwrap().holds);
}

fn check_route(
    db: &bcdb_core::BlockchainDatabase,
    q: &DenialConstraint,
    expect: Algorithm,
) -> Result<(), TestCaseError> {
    let class = classify(q, db.constraints());
    prop_assert_eq!(class.algorithm, expect);
    let truth = common::holds(db, q);
    let v = match (q, expect) {
        (DenialConstraint::Conjunctive(c), Algorithm::CqFd) => holds_denial_cq_fd(db, c).unwrap(),
        (DenialConstraint::Conjunctive(c), Algorithm::CqInd) => holds_denial_cq_ind(db, c).unwrap(),
        (DenialConstraint::Aggregate(a), _) => holds_denial_agg(db, a).unwrap(),
        _ => unreachable!(),
    };
    prop_assert_eq!(v.holds, truth, "query {}", q);
    if let Some(w) = v.counterexample {
        let t: common::TupleSet = w.state.tuples().collect();
        prop_assert!(common::all_worlds(db).contains(&t));
        prop_assert!(common::query_true(q, &t));
    }
    Ok(())
}

fn shape() -> Shape {
    Shape {
        txns: 6,
        ..Shape::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cq_fd_route(seed in any::<u64>(), neg in any::<bool>(), empty in any::<bool>()) {
        let mut rng = common::rng(seed);
        let db = common::gen_db(&mut rng, if empty { Mode::Empty } else { Mode::KeyFd }, shape());
        let q = common::gen_cq(&mut rng, db.schema(), 4, 2, neg).into();
        check_route(&db, &q, Algorithm::CqFd)?;
    }

    #[test]
    fn cq_ind_route(seed in any::<u64>(), neg in any::<bool>()) {
        let mut rng = common::rng(seed);
        let db = common::gen_db(&mut rng, Mode::Ind, shape());
        let q = common::gen_cq(&mut rng, db.schema(), 4, 2, neg).into();
        check_route(&db, &q, Algorithm::CqInd)?;
    }

    #[test]
    fn small_subset_route(seed in any::<u64>(), f in 0usize..4, lt in any::<bool>(), empty in any::<bool>()) {
        let mut rng = common::rng(seed);
        let func = [AggregateFn::Count, AggregateFn::CountDistinct, AggregateFn::Sum, AggregateFn::Max][f];
        // Positive Max (any comparator) or positive `<`.
        let cmp = if lt { AggCmp::Lt } else if func == AggregateFn::Max { AggCmp::Eq } else { AggCmp::Lt };
        let db = common::gen_db(&mut rng, if empty { Mode::Empty } else { Mode::KeyFd }, shape());
        let q = common::gen_agg(&mut rng, db.schema(), 4, func, cmp, false).into();
        check_route(&db, &q, Algorithm::AggSmallSubset)?;
    }

    #[test]
    fn small_subset_max_gt_negation(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let db = common::gen_db(&mut rng, Mode::KeyFd, shape());
        let q = common::gen_agg(&mut rng, db.schema(), 4, AggregateFn::Max, AggCmp::Gt, true).into();
        check_route(&db, &q, Algorithm::AggSmallSubset)?;
    }

    #[test]
    fn maximal_world_route(seed in any::<u64>(), f in 0usize..4, empty in any::<bool>()) {
        let mut rng = common::rng(seed);
        let func = [AggregateFn::Count, AggregateFn::CountDistinct, AggregateFn::Sum, AggregateFn::Max][f];
        let db = common::gen_db(&mut rng, if empty { Mode::Empty } else { Mode::Ind }, shape());
        let q = common::gen_agg(&mut rng, db.schema(), 4, func, AggCmp::Gt, false).into();
        check_route(&db, &q, Algorithm::AggMaximalWorld)?;
    }

    #[test]
    fn max_mapping_route(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let db = common::gen_db(&mut rng, Mode::Ind, shape());
        let q = common::gen_agg(&mut rng, db.schema(), 4, AggregateFn::Max, AggCmp::Gt, true).into();
        check_route(&db, &q, Algorithm::AggMaxMapping)?;
    }

    #[test]
    fn witness_search_matches_brute_force(seed in any::<u64>(), m in 0u8..4, agg in any::<bool>(), neg in any::<bool>(), f in 0usize..4, c in 0usize..3) {
        let mut rng = common::rng(seed);
        let mode = [Mode::Empty, Mode::KeyFd, Mode::Ind, Mode::Mixed][m as usize];
        let db = common::gen_db(&mut rng, mode, shape());
        let q: DenialConstraint = if agg {
            let func = [AggregateFn::Count, AggregateFn::CountDistinct, AggregateFn::Sum, AggregateFn::Max][f];
            let cmp = [AggCmp::Eq, AggCmp::Lt, AggCmp::Gt][c];
            common::gen_agg(&mut rng, db.schema(), 4, func, cmp, neg && cmp == AggCmp::Gt).into()
        } else {
            common::gen_cq(&mut rng, db.schema(), 4, 2, neg).into()
        };
        let v = holds_denial_witness(&db, &q).unwrap();
        prop_assert_eq!(v.holds, common::holds(&db, &q), "query {}", q);
        if let Some(w) = v.counterexample {
            let t: common::TupleSet = w.state.tuples().collect();
            prop_assert!(common::all_worlds(&db).contains(&t));
            prop_assert!(common::query_true(&q, &t));
        }
    }

    #[test]
    fn dispatcher_matches_brute_force(seed in any::<u64>(), m in 0u8..4, agg in any::<bool>(), neg in any::<bool>(), f in 0usize..4, c in 0usize..3) {
        let mut rng = common::rng(seed);
        let mode = [Mode::Empty, Mode::KeyFd, Mode::Ind, Mode::Mixed][m as usize];
        let db = common::gen_db(&mut rng, mode, shape());
        let q: DenialConstraint = if agg {
            let func = [AggregateFn::Count, AggregateFn::CountDistinct, AggregateFn::Sum, AggregateFn::Max][f];
            let cmp = [AggCmp::Eq, AggCmp::Lt, AggCmp::Gt][c];
            common::gen_agg(&mut rng, db.schema(), 4, func, cmp, neg).into()
        } else {
            common::gen_cq(&mut rng, db.schema(), 4, 2, neg).into()
        };
        let v = holds_denial(&db, &q, None).unwrap();
        prop_assert_eq!(v.holds, common::holds(&db, &q), "query {}", q);
        let o = holds_denial_oracle(&db, &q, None).unwrap();
        prop_assert_eq!(o.holds, v.holds);
    }

    #[test]
    fn classification_is_total_and_stable(seed in any::<u64>(), m in 0u8..4, neg in any::<bool>(), f in 0usize..4, c in 0usize..3) {
        let mut rng = common::rng(seed);
        let mode = [Mode::Empty, Mode::KeyFd, Mode::Ind, Mode::Mixed][m as usize];
        let db = common::gen_db(&mut rng, mode, shape());
        let func = [AggregateFn::Count, AggregateFn::CountDistinct, AggregateFn::Sum, AggregateFn::Max][f];
        let cmp = [AggCmp::Eq, AggCmp::Lt, AggCmp::Gt][c];
        let q: DenialConstraint = common::gen_agg(&mut rng, db.schema(), 4, func, cmp, neg).into();
        let a = classify(&q, db.constraints());
        prop_assert_eq!(&a, &classify(&q, db.constraints()));
        if mode == Mode::Mixed {
            prop_assert_eq!(a.complexity, Complexity::ConpComplete);
        }
    }
}
