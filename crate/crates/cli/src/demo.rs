//! The running example walked through end to end.

use bcdb_core::chain::enumerate_possible_worlds;
use bcdb_core::denial::{holds_denial, holds_denial_dry_run};
use bcdb_core::query::{AggCmp, AggregateFn};
use bcdb_core::reductions::{sat_to_denial_agg_count, sat_to_denial_key_ind, CnfFormula, Problem, ReductionInstance};
use bcdb_core::sepgen::{gen_sep, Limits};
use bcdb_core::textio::{
    parse_bundle, parse_queries, parse_query, parse_separation, parse_transactions, world_records, SeparationRecord,
    VerdictRecord, WorldRecord,
};
use bcdb_core::Result;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::{Failure, Out, Outcome};

const RUNNING: &str = include_str!("../../core/fixtures/running_example.bcdb");
const RUNNING_QUERIES: &str = include_str!("../../core/fixtures/running_queries.dq");
const ALICE: &str = include_str!("../../core/fixtures/alice_bob.bcdb");
const ALICE_SPEC: &str = include_str!("../../core/fixtures/alice_bob.sep");
const Q1: &str = include_str!("../../core/fixtures/q1.dq");
const SAME_COIN: &str = include_str!("../../core/fixtures/t2_same_coin.txn");
const OTHER_COIN: &str = include_str!("../../core/fixtures/t2_other_coin.txn");

#[derive(Serialize)]
struct SelfTest {
    seed: u64,
    instances: usize,
    agreements: usize,
}

#[derive(Serialize)]
struct DemoRecord {
    bundle: &'static str,
    worlds: Vec<WorldRecord>,
    verdicts: Vec<VerdictRecord>,
    separation: SeparationRecord,
    augmented_q1: VerdictRecord,
    dry_run_same_coin: VerdictRecord,
    dry_run_other_coin: VerdictRecord,
    self_test: Option<SelfTest>,
}

fn satisfiable(phi: &CnfFormula) -> bool {
    (0u32..1 << phi.vars()).any(|bits| {
        phi.clauses().iter().all(|c| {
            c.iter().any(|&l| {
                let on = bits & (1 << (l.unsigned_abs() - 1)) != 0;
                on == (l > 0)
            })
        })
    })
}

fn random_formula(rng: &mut StdRng) -> CnfFormula {
    let vars = rng.gen_range(1..=4usize);
    let clauses = (0..rng.gen_range(1..=5))
        .map(|_| {
            let mut vs: Vec<i64> = (1..=vars as i64).collect();
            vs.shuffle(rng);
            vs.truncate(rng.gen_range(1..=vars.min(3)));
            vs.into_iter().map(|v| if rng.gen_bool(0.5) { v } else { -v }).collect()
        })
        .collect();
    CnfFormula::new(vars, clauses).expect("generated formulas are well formed")
}

fn violated(inst: &ReductionInstance) -> Result<bool> {
    match &inst.problem {
        Problem::Denial(q) => Ok(!holds_denial(&inst.db, q, None)?.holds),
        Problem::Separation(_) => unreachable!("only denial reductions are sampled"),
    }
}

/// Compiles random formulas and compares the verdicts with a truth-table
/// scan.
fn self_test(seed: u64) -> Result<SelfTest> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut t = SelfTest {
        seed,
        instances: 0,
        agreements: 0,
    };
    for _ in 0..20 {
        let phi = random_formula(&mut rng);
        let sat = satisfiable(&phi);
        for inst in [
            sat_to_denial_key_ind(&phi)?,
            sat_to_denial_agg_count(&phi, AggregateFn::Count, AggCmp::Gt)?,
        ] {
            t.instances += 1;
            if violated(&inst)? == sat {
                t.agreements += 1;
            }
        }
    }
    Ok(t)
}

fn build(seed: Option<u64>) -> Result<DemoRecord> {
    let db = parse_bundle(RUNNING)?;
    let worlds = world_records(&enumerate_possible_worlds(&db, None)?);
    let verdicts = parse_queries(RUNNING_QUERIES)?
        .iter()
        .map(|q| Ok(VerdictRecord::new(q, &holds_denial(&db, q, None)?)))
        .collect::<Result<Vec<_>>>()?;

    let alice = parse_bundle(ALICE)?;
    let q1 = parse_query(Q1)?;
    let sep = gen_sep(&alice, &parse_separation(ALICE_SPEC)?, &Limits::default())?;
    let generated = sep.transaction().cloned();
    let augmented = alice.with_pending(generated)?;
    let augmented_q1 = VerdictRecord::new(&q1, &holds_denial(&augmented, &q1, None)?);
    let same = parse_transactions(SAME_COIN, alice.schema())?;
    let other = parse_transactions(OTHER_COIN, alice.schema())?;
    Ok(DemoRecord {
        bundle: RUNNING,
        worlds,
        verdicts,
        separation: SeparationRecord::from(&sep),
        augmented_q1,
        dry_run_same_coin: VerdictRecord::new(&q1, &holds_denial_dry_run(&alice, &q1, same, None)?),
        dry_run_other_coin: VerdictRecord::new(&q1, &holds_denial_dry_run(&alice, &q1, other, None)?),
        self_test: seed.map(self_test).transpose()?,
    })
}

fn text(r: &DemoRecord) -> String {
    let mut s = String::new();
    s.push_str("== Running example: UTXO bundle ==\n\n");
    s.push_str(r.bundle);
    s.push_str("\n== Possible worlds ==\n\n");
    for w in &r.worlds {
        s.push_str(&format!("{}\n", w.world));
    }
    s.push_str("\n== Denial constraints ==\n\n");
    for v in &r.verdicts {
        s.push_str(&v.text());
    }
    s.push_str("\n== Alice pays Bob: block T1 with a transaction of our own ==\n\n");
    s.push_str(&r.separation.text());
    s.push_str("\nq1 (no double payment) once that transaction is pending:\n");
    s.push_str(&r.augmented_q1.text());
    s.push_str("\n== Dry runs of q1 ==\n\nT2 spends the same coin as T1:\n");
    s.push_str(&r.dry_run_same_coin.text());
    s.push_str("\nT2 spends Alice's other coin:\n");
    s.push_str(&r.dry_run_other_coin.text());
    if let Some(t) = &r.self_test {
        s.push_str(&format!(
            "\n== Self-test (seed {}) ==\n\n{}/{} compiled SAT instances agree with a truth-table scan\n",
            t.seed, t.agreements, t.instances
        ));
    }
    s
}

pub(crate) fn run(out: &Out, seed: Option<u64>) -> Outcome {
    let r = build(seed).map_err(|e| Failure::engine(None, &e))?;
    out.emit(&text(&r), &r);
    Ok(match &r.self_test {
        Some(t) if t.agreements != t.instances => 1,
        _ => 0,
    })
}
