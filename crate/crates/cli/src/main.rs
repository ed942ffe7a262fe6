//! `bcdb`: possible worlds, denial constraints and separating transactions
//! over blockchain database bundles.
//!
//! Exit codes:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | success; every denial constraint holds    |
//! | 1    | parse error or other diagnostic           |
//! | 2    | input file missing or unreadable          |
//! | 3    | enumeration or candidate guard exceeded   |
//! | 4    | a denial constraint is violated           |
//! | 5    | no separating transaction exists          |
//! | 6    | `in` transactions cannot share a world    |
//! | 7    | undecidable constraint mix (fd + ind)     |
//! | 8    | bound exhausted                           |

mod demo;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bcdb_core::chain::enumerate_possible_worlds;
use bcdb_core::denial::{classify, holds_denial, DenialConstraint};
use bcdb_core::query::{AggCmp, AggregateFn};
use bcdb_core::reductions::{self, ReductionInstance};
use bcdb_core::sepgen::{gen_sep, FailureReason, Limits, SeparationResult, DEFAULT_MAX_CANDIDATES};
use bcdb_core::textio::{
    parse_bundle, parse_dimacs, parse_hitting_set, parse_queries, parse_separation, parse_transactions,
    serialize_bundle, serialize_problem, world_records, worlds_text, ClassificationRecord, SeparationRecord,
    SourceDocument, ValidationRecord, VerdictRecord,
};
use bcdb_core::{BlockchainDatabase, Error};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "bcdb",
    version,
    about = "Blockchain databases: worlds, denial constraints, separating transactions"
)]
struct Cli {
    /// Output as prose or as a single JSON document.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,

    /// Largest pending pool to enumerate (default 20).
    #[arg(long, global = true, value_name = "N")]
    max_txns: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a bundle and check that the state satisfies its constraints.
    Validate { bundle: PathBuf },
    /// List the possible worlds of a bundle.
    Worlds { bundle: PathBuf },
    /// Decide the denial constraints of a query file.
    Check {
        bundle: PathBuf,
        queries: PathBuf,
        /// Transaction files added to the pool as a dry run.
        #[arg(long, num_args = 1.., value_name = "FILE")]
        hypothetical: Vec<PathBuf>,
    },
    /// Generate a separating transaction for a spec.
    Gensep {
        bundle: PathBuf,
        spec: PathBuf,
        /// Budget for bounded search: candidate transactions, or search
        /// nodes under inclusion dependencies alone.
        #[arg(long, default_value_t = DEFAULT_MAX_CANDIDATES, value_name = "N")]
        max_candidates: u64,
    },
    /// Report the complexity and algorithm for each query.
    Classify { queries: PathBuf, bundle: PathBuf },
    /// Compile a SAT or hitting-set instance into a bundle plus query or spec.
    Reduce {
        #[arg(value_enum)]
        kind: ReduceKind,
        /// DIMACS CNF, or the hitting-set format for `hitting-set`.
        source: PathBuf,
        /// Output path; `.bcdb` and `.dq` or `.sep` are written next to it.
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = AggArg::Count)]
        agg: AggArg,
        #[arg(long, value_enum, default_value_t = CmpArg::Gt)]
        cmp: CmpArg,
    },
    /// Walk through the running example.
    Demo {
        /// Also run a randomized self-test with this seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ReduceKind {
    /// Conjunctive query under a key and an inclusion dependency.
    SatKeyInd,
    /// Aggregate query under a key.
    SatAggKey,
    /// Aggregate query under an inclusion dependency.
    SatAggInd,
    /// Bounded separation under acyclic inclusion dependencies.
    SatKsepInd,
    /// Bounded separation under a key.
    HittingSet,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum AggArg {
    Count,
    Countd,
    Sum,
    Max,
}

impl From<AggArg> for AggregateFn {
    fn from(a: AggArg) -> Self {
        match a {
            AggArg::Count => AggregateFn::Count,
            AggArg::Countd => AggregateFn::CountDistinct,
            AggArg::Sum => AggregateFn::Sum,
            AggArg::Max => AggregateFn::Max,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum CmpArg {
    Lt,
    Eq,
    Gt,
}

impl From<CmpArg> for AggCmp {
    fn from(c: CmpArg) -> Self {
        match c {
            CmpArg::Lt => AggCmp::Lt,
            CmpArg::Eq => AggCmp::Eq,
            CmpArg::Gt => AggCmp::Gt,
        }
    }
}

/// A run that ends with a non-zero exit code and a message.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn engine(doc: Option<&SourceDocument>, e: &Error) -> Self {
        let code = if matches!(e, Error::Guard(_)) { 3 } else { 1 };
        let message = match doc {
            Some(d) => d.diagnostic(e),
            None => e.to_string(),
        };
        Failure { code, message }
    }
}

type Outcome = std::result::Result<u8, Failure>;

struct Out {
    format: Format,
}

impl Out {
    fn emit<T: Serialize>(&self, text: &str, record: &T) {
        match self.format {
            Format::Text => print!("{text}"),
            Format::Structured => println!("{}", serde_json::to_string_pretty(record).expect("records serialize")),
        }
    }
}

fn read(path: &Path) -> std::result::Result<SourceDocument, Failure> {
    match SourceDocument::read(path) {
        Ok(Ok(doc)) => Ok(doc),
        Ok(Err(e)) => Err(Failure::engine(
            Some(&SourceDocument::new(path.display().to_string(), "")),
            &e,
        )),
        Err(e) => Err(Failure::new(2, format!("{}: {e}", path.display()))),
    }
}

fn parsed<T>(doc: &SourceDocument, f: impl FnOnce(&str) -> bcdb_core::Result<T>) -> std::result::Result<T, Failure> {
    f(&doc.text).map_err(|e| Failure::engine(Some(doc), &e))
}

fn load_bundle(path: &Path) -> std::result::Result<BlockchainDatabase, Failure> {
    let doc = read(path)?;
    parsed(&doc, parse_bundle)
}

fn load_queries(path: &Path) -> std::result::Result<Vec<DenialConstraint>, Failure> {
    let doc = read(path)?;
    parsed(&doc, parse_queries)
}

fn validate(out: &Out, bundle: &Path) -> Outcome {
    let doc = read(bundle)?;
    let record = match parse_bundle(&doc.text) {
        Ok(db) => ValidationRecord {
            ok: true,
            relations: db.schema().relations().count(),
            constraints: db.constraints().kinds().to_string(),
            state_tuples: db.state().len(),
            transactions: db.pending().len(),
            diagnostics: vec![],
        },
        Err(e) => ValidationRecord {
            ok: false,
            relations: 0,
            constraints: String::new(),
            state_tuples: 0,
            transactions: 0,
            diagnostics: vec![doc.diagnostic(&e)],
        },
    };
    out.emit(&record.text(), &record);
    Ok(if record.ok { 0 } else { 1 })
}

fn worlds(out: &Out, bundle: &Path, max_txns: Option<usize>) -> Outcome {
    let db = load_bundle(bundle)?;
    let ws = enumerate_possible_worlds(&db, max_txns).map_err(|e| Failure::engine(None, &e))?;
    let records = world_records(&ws);
    out.emit(&worlds_text(&records), &records);
    Ok(0)
}

fn check(out: &Out, bundle: &Path, queries: &Path, hypothetical: &[PathBuf], max_txns: Option<usize>) -> Outcome {
    let mut db = load_bundle(bundle)?;
    let qs = load_queries(queries)?;
    let mut extra = Vec::new();
    for h in hypothetical {
        let doc = read(h)?;
        extra.extend(parsed(&doc, |t| parse_transactions(t, db.schema()))?);
    }
    if !extra.is_empty() {
        db = db.with_pending(extra).map_err(|e| Failure::engine(None, &e))?;
    }
    let mut records = Vec::new();
    for q in &qs {
        let v = holds_denial(&db, q, max_txns).map_err(|e| Failure::engine(None, &e))?;
        records.push(VerdictRecord::new(q, &v));
    }
    let text: String = records.iter().map(VerdictRecord::text).collect();
    out.emit(&text, &records);
    Ok(if records.iter().all(|r| r.verdict == "holds") {
        0
    } else {
        4
    })
}

fn gensep(out: &Out, bundle: &Path, spec: &Path, max_txns: Option<usize>, max_candidates: u64) -> Outcome {
    let db = load_bundle(bundle)?;
    let doc = read(spec)?;
    let spec = parsed(&doc, parse_separation)?;
    let limits = Limits {
        max_transactions: max_txns,
        max_candidates,
    };
    let r = gen_sep(&db, &spec, &limits).map_err(|e| Failure::engine(None, &e))?;
    let record = SeparationRecord::from(&r);
    out.emit(&record.text(), &record);
    Ok(match r {
        SeparationResult::Failed { reason, .. } => match reason {
            FailureReason::NoSeparatingTransaction => 5,
            FailureReason::TinInconsistent => 6,
            FailureReason::UndecidableConstraintMix => 7,
            FailureReason::BoundExhausted => 8,
        },
        _ => 0,
    })
}

fn classify_cmd(out: &Out, queries: &Path, bundle: &Path) -> Outcome {
    let db = load_bundle(bundle)?;
    let qs = load_queries(queries)?;
    let records: Vec<ClassificationRecord> = qs
        .iter()
        .map(|q| ClassificationRecord::new(q, db.constraints(), &classify(q, db.constraints())))
        .collect();
    let text: String = records.iter().map(ClassificationRecord::text).collect();
    out.emit(&text, &records);
    Ok(0)
}

#[derive(Serialize)]
struct ReduceRecord {
    bundle: String,
    problem: String,
}

fn reduce(out: &Out, kind: ReduceKind, source: &Path, output: &Path, agg: AggArg, cmp: CmpArg) -> Outcome {
    let doc = read(source)?;
    let inst: ReductionInstance = match kind {
        ReduceKind::HittingSet => {
            let hs = parsed(&doc, parse_hitting_set)?;
            parsed(&doc, |_| reductions::hitting_set_to_ksep(&hs.universe, &hs.sets, hs.k))?
        }
        _ => {
            let phi = parsed(&doc, parse_dimacs)?;
            parsed(&doc, |_| match kind {
                ReduceKind::SatKeyInd => reductions::sat_to_denial_key_ind(&phi),
                ReduceKind::SatAggKey => reductions::sat_to_denial_agg_count(&phi, agg.into(), cmp.into()),
                ReduceKind::SatAggInd => reductions::sat_to_denial_agg_ind(&phi, agg.into(), cmp.into()),
                ReduceKind::SatKsepInd => reductions::sat_to_ksep_ind(&phi),
                ReduceKind::HittingSet => unreachable!(),
            })?
        }
    };
    let stem = if output.extension().is_some_and(|e| e == "bcdb") {
        output.with_extension("")
    } else {
        output.to_path_buf()
    };
    let with_ext = |ext: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    let bundle_path = with_ext(".bcdb");
    let problem_path = with_ext(match inst.problem {
        reductions::Problem::Denial(_) => ".dq",
        reductions::Problem::Separation(_) => ".sep",
    });
    for (p, text) in [
        (&bundle_path, serialize_bundle(&inst.db)),
        (&problem_path, serialize_problem(&inst.problem)),
    ] {
        std::fs::write(p, text).map_err(|e| Failure::new(1, format!("{}: {e}", p.display())))?;
    }
    let record = ReduceRecord {
        bundle: bundle_path.display().to_string(),
        problem: problem_path.display().to_string(),
    };
    out.emit(&format!("wrote {}\nwrote {}\n", record.bundle, record.problem), &record);
    Ok(0)
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    exit_code: u8,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = Out { format: cli.format };
    let outcome = match &cli.command {
        Command::Validate { bundle } => validate(&out, bundle),
        Command::Worlds { bundle } => worlds(&out, bundle, cli.max_txns),
        Command::Check {
            bundle,
            queries,
            hypothetical,
        } => check(&out, bundle, queries, hypothetical, cli.max_txns),
        Command::Gensep {
            bundle,
            spec,
            max_candidates,
        } => gensep(&out, bundle, spec, cli.max_txns, *max_candidates),
        Command::Classify { queries, bundle } => classify_cmd(&out, queries, bundle),
        Command::Reduce {
            kind,
            source,
            output,
            agg,
            cmp,
        } => reduce(&out, *kind, source, output, *agg, *cmp),
        Command::Demo { seed } => demo::run(&out, *seed),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            match out.format {
                Format::Text => eprintln!("error: {}", f.message),
                Format::Structured => out.emit(
                    "",
                    &ErrorRecord {
                        error: &f.message,
                        exit_code: f.code,
                    },
                ),
            }
            ExitCode::from(f.code)
        }
    }
}
