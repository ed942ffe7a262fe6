use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn bcdb<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = Command::new(env!("CARGO_BIN_EXE_bcdb"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_reports_ok_and_positions() {
    let r = bcdb([fixture("running_example.bcdb")]);
    assert_ne!(r.code, 0, "a bare path is not a subcommand");

    let r = bcdb(["validate".as_ref(), fixture("running_example.bcdb").as_os_str()]);
    assert_eq!(r.code, 0, "{}", r.stderr);

    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(fixture("running_example.bcdb")).unwrap();
    let broken = write(&dir, "broken.bcdb", &text.replacen("txn T2 {", "txn T2 {{", 1));
    let r = bcdb(["validate".as_ref(), broken.as_os_str()]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.contains("broken.bcdb:"), "{}", r.stdout);

    let r = bcdb(["validate", "/definitely/missing.bcdb"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with("error:"), "{}", r.stderr);
}

#[test]
fn worlds_of_the_running_example() {
    let r = bcdb(["worlds".as_ref(), fixture("running_example.bcdb").as_os_str()]);
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout.lines().count(), 9);
    assert!(r.stdout.lines().next().unwrap().starts_with('R'));

    let r = bcdb([
        "--format".as_ref(),
        "structured".as_ref(),
        "worlds".as_ref(),
        fixture("running_example.bcdb").as_os_str(),
    ]);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 9);
}

#[test]
fn worlds_guard() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("relation R(A)\n");
    for i in 0..25 {
        text.push_str(&format!("txn T{i} {{ R({i}); }}\n"));
    }
    let big = write(&dir, "big.bcdb", &text);
    let r = bcdb(["worlds".as_ref(), big.as_os_str()]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    let r = bcdb([
        "--format".as_ref(),
        "structured".as_ref(),
        "worlds".as_ref(),
        big.as_os_str(),
    ]);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["exit_code"], 3);
}

#[test]
fn check_verdicts_and_dry_runs() {
    let r = bcdb([
        "check".as_ref(),
        fixture("running_example.bcdb").as_os_str(),
        fixture("running_queries.dq").as_os_str(),
    ]);
    assert_eq!(r.code, 4);
    assert!(r.stdout.contains("double_spend: holds"), "{}", r.stdout);
    assert!(r.stdout.contains("t5_output: violated"), "{}", r.stdout);

    let alice = fixture("alice_bob.bcdb");
    let q1 = fixture("q1.dq");
    let same = bcdb([
        "check".as_ref(),
        alice.as_os_str(),
        q1.as_os_str(),
        "--hypothetical".as_ref(),
        fixture("t2_same_coin.txn").as_os_str(),
    ]);
    assert_eq!(same.code, 0, "{}", same.stdout);
    let other = bcdb([
        "check".as_ref(),
        alice.as_os_str(),
        q1.as_os_str(),
        "--hypothetical".as_ref(),
        fixture("t2_other_coin.txn").as_os_str(),
    ]);
    assert_eq!(other.code, 4, "{}", other.stdout);
}

#[test]
fn generated_transaction_blocks_the_double_payment() {
    let alice = fixture("alice_bob.bcdb");
    let r = bcdb([
        "gensep".as_ref(),
        alice.as_os_str(),
        fixture("alice_bob.sep").as_os_str(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("TxInput(1037, 2,"), "{}", r.stdout);

    // With it pending, no world holds two payments to Bob.
    let dir = TempDir::new().unwrap();
    let mut text = std::fs::read_to_string(&alice).unwrap();
    text.push('\n');
    text.push_str(&r.stdout);
    let augmented = write(&dir, "augmented.bcdb", &text);
    let q1 = fixture("q1.dq");
    let r = bcdb(["check".as_ref(), augmented.as_os_str(), q1.as_os_str()]);
    assert_eq!(r.code, 0, "{}", r.stdout);
}

#[test]
fn gensep_failure_codes() {
    let dir = TempDir::new().unwrap();
    let running = fixture("running_example.bcdb");

    let absorbed = write(
        &dir,
        "absorbed.bcdb",
        "relation R(A, B)\nrelation S(A, C)\nind R[A] <= S[A]\nstate S(1, 0)\ntxn T1 { R(1, 2); }\ntxn T2 { R(1, 3); }\n",
    );
    let spec = write(&dir, "t1_t2.sep", "separate in = {T1} out = {T2}\n");
    assert_eq!(
        bcdb(["gensep".as_ref(), absorbed.as_os_str(), spec.as_os_str()]).code,
        5
    );

    let spec = write(&dir, "conflict.sep", "separate in = {T1, T5} out = {T3}\n");
    assert_eq!(bcdb(["gensep".as_ref(), running.as_os_str(), spec.as_os_str()]).code, 6);

    let r = bcdb([
        "gensep".as_ref(),
        fixture("gadget.bcdb").as_os_str(),
        fixture("gadget.sep").as_os_str(),
    ]);
    assert_eq!(r.code, 7);
    assert!(r.stdout.contains("undecidable-constraint-mix"), "{}", r.stdout);

    let keyed = write(
        &dir,
        "keyed.bcdb",
        "relation R(A, B)\nkey R(A)\ntxn T1 { R(1, 0); }\ntxn T2 { R(2, 0); }\n",
    );
    let one = write(&dir, "one.sep", "separate in = {} out = {T1, T2} bound = 1\n");
    assert_eq!(bcdb(["gensep".as_ref(), keyed.as_os_str(), one.as_os_str()]).code, 8);
    let two = write(&dir, "two.sep", "separate in = {} out = {T1, T2} bound = 2\n");
    assert_eq!(bcdb(["gensep".as_ref(), keyed.as_os_str(), two.as_os_str()]).code, 0);

    let spec = write(&dir, "wide.sep", "separate in = {} out = {T1} bound = 3\n");
    let r = bcdb([
        "gensep".as_ref(),
        running.as_os_str(),
        spec.as_os_str(),
        "--max-candidates".as_ref(),
        "10".as_ref(),
    ]);
    assert_eq!(r.code, 3, "{}", r.stderr);
}

#[test]
fn classify_names_route() {
    let r = bcdb([
        "classify".as_ref(),
        fixture("running_queries.dq").as_os_str(),
        fixture("running_example.bcdb").as_os_str(),
    ]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("complexity: CoNP-complete"), "{}", r.stdout);
    let r = bcdb([
        "--format".as_ref(),
        "structured".as_ref(),
        "classify".as_ref(),
        fixture("q1.dq").as_os_str(),
        fixture("alice_bob.bcdb").as_os_str(),
    ]);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
}

#[test]
fn reduce_then_decide() {
    let dir = TempDir::new().unwrap();
    let unit = write(&dir, "unit.cnf", "p cnf 1 1\n1 0\n");
    let out = dir.path().join("unit");
    let r = bcdb([
        "reduce".as_ref(),
        "sat-key-ind".as_ref(),
        unit.as_os_str(),
        out.as_os_str(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = bcdb([
        "check".as_ref(),
        dir.path().join("unit.bcdb").as_os_str(),
        dir.path().join("unit.dq").as_os_str(),
    ]);
    assert_eq!(r.code, 4, "{}", r.stdout);

    let pair = write(&dir, "pair.cnf", "p cnf 1 2\n1 0\n-1 0\n");
    let out = dir.path().join("pair.bcdb");
    let r = bcdb([
        "reduce".as_ref(),
        "sat-agg-ind".as_ref(),
        pair.as_os_str(),
        out.as_os_str(),
        "--agg".as_ref(),
        "count".as_ref(),
        "--cmp".as_ref(),
        "lt".as_ref(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = bcdb([
        "check".as_ref(),
        out.as_os_str(),
        dir.path().join("pair.dq").as_os_str(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stdout);

    let r = bcdb([
        "reduce".as_ref(),
        "sat-ksep-ind".as_ref(),
        unit.as_os_str(),
        dir.path().join("k").as_os_str(),
    ]);
    assert_eq!(r.code, 0);
    let r = bcdb([
        "gensep".as_ref(),
        dir.path().join("k.bcdb").as_os_str(),
        dir.path().join("k.sep").as_os_str(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stdout);

    let hs = write(&dir, "hs.txt", "universe a b c\nset a b\nset b c\nk 1\n");
    let r = bcdb([
        "reduce".as_ref(),
        "hitting-set".as_ref(),
        hs.as_os_str(),
        dir.path().join("hs").as_os_str(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = bcdb([
        "gensep".as_ref(),
        dir.path().join("hs.bcdb").as_os_str(),
        dir.path().join("hs.sep").as_os_str(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stdout);

    let r = bcdb([
        "reduce".as_ref(),
        "sat-agg-key".as_ref(),
        unit.as_os_str(),
        dir.path().join("bad").as_os_str(),
        "--agg".as_ref(),
        "max".as_ref(),
    ]);
    assert_eq!(r.code, 1);
}

#[test]
fn output_is_deterministic() {
    let runs = [
        vec!["worlds".into(), fixture("running_example.bcdb")],
        vec![
            "check".into(),
            fixture("running_example.bcdb"),
            fixture("running_queries.dq"),
        ],
        vec!["gensep".into(), fixture("alice_bob.bcdb"), fixture("alice_bob.sep")],
    ];
    for args in runs {
        for format in ["text", "structured"] {
            let mut full: Vec<PathBuf> = vec!["--format".into(), format.into()];
            full.extend(args.iter().cloned());
            let a = bcdb(&full);
            let b = bcdb(&full);
            assert_eq!(a.stdout, b.stdout);
            assert_eq!(a.code, b.code);
        }
    }
}

#[test]
fn demo_runs() {
    let r = bcdb(["demo"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("== Possible worlds =="));
    let r = bcdb(["--format", "structured", "demo", "--seed", "7"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["self_test"]["agreements"], v["self_test"]["instances"]);
}
