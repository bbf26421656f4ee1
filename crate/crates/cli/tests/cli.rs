use std::path::PathBuf;
use std::process::{Command, Output};

use ssm_cli::parse_mechanism;
use ssm_core::q;
use ssm_core::trade::{build_posted_price, build_price_cap, TradeDomain, SELLER};
use ssm_core::voting::{figure1, mechanism_a, mechanism_b};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn ssm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssm")).args(args).env("SSM_THREADS", "1").output().expect("run ssm")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn read(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

#[test]
fn shipped_fixtures_parse_to_the_builders() {
    assert_eq!(parse_mechanism(&read("figure1.mech")).unwrap(), figure1());
    let b = parse_mechanism(&read("mechanism_B.mech")).unwrap();
    assert_eq!(b, mechanism_b());
    assert_eq!(b.outcome_table(), figure1().outcome_table());
    assert_eq!(parse_mechanism(&read("mechanism_A.mech")).unwrap(), mechanism_a());
    let small = TradeDomain::new(vec![q(2, 1)], vec![q(1, 1), q(3, 1)], vec![q(1, 1), q(3, 1)]).unwrap();
    assert_eq!(parse_mechanism(&read("posted_price.mech")).unwrap(), build_posted_price(&small, &q(2, 1)).unwrap());
    let two =
        TradeDomain::new(vec![q(2, 1), q(4, 1)], vec![q(1, 1), q(3, 1), q(5, 1)], vec![q(1, 1), q(3, 1), q(5, 1)])
            .unwrap();
    assert_eq!(
        parse_mechanism(&read("price_cap.mech")).unwrap(),
        build_price_cap(&two, &[q(2, 1), q(4, 1)], SELLER).unwrap()
    );
}

#[test]
fn render_parse_is_identity_on_fixtures() {
    for name in
        ["figure1.mech", "mechanism_A.mech", "mechanism_B.mech", "posted_price.mech", "price_cap.mech", "pennies.mech"]
    {
        let m = parse_mechanism(&read(name)).unwrap();
        let text = ssm_cli::render_mechanism(&m).unwrap();
        assert_eq!(parse_mechanism(&text).unwrap(), m, "{name}");
        assert_eq!(ssm_cli::render_mechanism(&parse_mechanism(&text).unwrap()).unwrap(), text, "{name}");
    }
}

#[test]
fn check_mechanism_b() {
    let out = ssm(&["check", fixture("mechanism_B.mech").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("Type 2 strategically simple"), "{text}");
    // header plus 36 profiles
    let table: Vec<&str> = text.lines().skip_while(|l| !l.starts_with("profile")).collect();
    assert_eq!(table.len(), 37);
}

#[test]
fn check_csv_has_one_row_per_profile() {
    let out = ssm(&["check", fixture("figure1.mech").to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 37);
    assert!(text.lines().any(|l| l.starts_with("\"cab,cba\",\"{T,B}\",\"{C2,R}\",{1}")), "{text}");
}

#[test]
fn duplicate_strategies_are_an_input_error() {
    let out = ssm(&["check", fixture("duplicate.mech").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("M1") && err.contains("M2") && err.contains("line 8"), "{err}");
}

#[test]
fn not_simple_fails_the_check() {
    let out = ssm(&["check", fixture("pennies.mech").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("not strategically simple"));
}

#[test]
fn oracle_emits_a_witness_on_failure() {
    let out = ssm(&["oracle", fixture("pennies.mech").to_str().unwrap(), "--trials", "50", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("witness: agent"), "{text}");
    assert!(text.contains("agrees with the local-dictator test: yes"), "{text}");

    let out = ssm(&["oracle", fixture("figure1.mech").to_str().unwrap(), "--trials", "200", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn dictators_at_a_profile() {
    let out = ssm(&["dictators", fixture("figure1.mech").to_str().unwrap(), "--profile", "cab,cba"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("{1}") && text.contains("T->a B->c"), "{text}");
    let bad = ssm(&["dictators", fixture("figure1.mech").to_str().unwrap(), "--profile", "cab"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn delegation_of_the_price_cap() {
    let out = ssm(&[
        "delegation",
        fixture("price_cap.mech").to_str().unwrap(),
        "--delegate",
        "1",
        "--samples",
        "40",
        "--config",
        fixture("trade_2_4.toml").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("delegate: agent 1"));
    assert!(text.contains("same outcomes on 40 sampled profiles"), "{text}");
}

#[test]
fn delegation_requires_type1() {
    let out = ssm(&["delegation", fixture("figure1.mech").to_str().unwrap(), "--delegate", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not a delegate"));
}

#[test]
fn single_peaked_domain_flag() {
    let a = ssm(&["check", fixture("mechanism_A.mech").to_str().unwrap(), "--domain", "single-peaked"]);
    assert!(stdout(&a).contains("Type 2"));
    let b = ssm(&[
        "check",
        fixture("mechanism_B.mech").to_str().unwrap(),
        "--config",
        fixture("single_peaked.toml").to_str().unwrap(),
    ]);
    assert!(stdout(&b).contains("Type 1"), "{}", stdout(&b));
}

#[test]
fn enumerate_small_and_budget() {
    let out = ssm(&["enumerate", "--max-strategies", "3", "--filter", "type2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("0 canonical forms"));

    let out = ssm(&["enumerate", "--max-strategies", "3", "--filter", "all", "--budget", "10"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.contains("--resume"), "{err}");
}

#[test]
fn trade_search_finds_no_type2() {
    let out = ssm(&["trade-search", "--prices", "2", "--values", "1,3", "--max-strategies", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("0 Type2 mechanisms"));
    let out = ssm(&["trade-search", "--prices", "2", "--values", "1,3", "--max-strategies", "2", "--filter", "type1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("2 Type1 mechanisms") && stdout(&out).contains("s2 phi 2"), "{}", stdout(&out));
    let bad = ssm(&["trade-search", "--prices", "2", "--values", "2,3"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn trade_properties() {
    let out = ssm(&[
        "trade",
        fixture("price_cap.mech").to_str().unwrap(),
        "--config",
        fixture("trade_2_4.toml").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("Type 1"));
    let missing = ssm(&["trade", fixture("price_cap.mech").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn structure_and_star() {
    let out = ssm(&["structure", fixture("mechanism_A.mech").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("hold everywhere"));
    let star = ssm(&["star", fixture("figure1.mech").to_str().unwrap()]);
    assert_eq!(star.status.code(), Some(1));
    assert!(stdout(&star).contains("witness"));
}

#[test]
fn welfare_is_reproducible_and_written_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("welfare.csv");
    let args = ["welfare", "--samples", "20000", "--seed", "42", "--format", "csv"];
    let first = ssm(&args);
    let mut with_output = args.to_vec();
    with_output.extend(["--output", path.to_str().unwrap()]);
    let second = ssm(&with_output);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(std::fs::read(&path).unwrap(), first.stdout);
    let text = stdout(&first);
    assert!(text.starts_with("criterion,mechanism,mean,stderr,n,seed\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "seed = 5\ntrials = 30\n[domain]\nkind = \"explicit\"\nagents = [[\"cab\", \"abc\"], [\"cba\"]]\n",
    )
    .unwrap();
    let out = ssm(&["check", fixture("figure1.mech").to_str().unwrap(), "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("explicit"));
    assert_eq!(text.lines().skip_while(|l| !l.starts_with("profile")).count(), 3);

    std::fs::write(&config, "seed = -1\n").unwrap();
    let bad = ssm(&["check", fixture("figure1.mech").to_str().unwrap(), "--config", config.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn parse_errors_have_positions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.mech");
    std::fs::write(&path, read("figure1.mech").replace("M2 a b c b", "M2 a b z b")).unwrap();
    let out = ssm(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 8, column 8: unknown alternative `z`"), "{}", stderr(&out));
    std::fs::write(&path, "").unwrap();
    assert_eq!(ssm(&["check", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn identical_runs_are_byte_identical() {
    let path = fixture("mechanism_A.mech");
    let args = ["oracle", path.to_str().unwrap(), "--trials", "60", "--seed", "9"];
    let a = Command::new(env!("CARGO_BIN_EXE_ssm")).args(args).env("SSM_THREADS", "1").output().unwrap();
    let b = Command::new(env!("CARGO_BIN_EXE_ssm")).args(args).env("SSM_THREADS", "2").output().unwrap();
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.status.code(), Some(0));
}
