mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use anchor_assign::ingest::load_scenario;
use anchor_assign::pipeline::{
    self, read_population, RunSummary, Stage, POPULATION_FILE, SUMMARY_FILE,
};
use anchor_assign::Error;
use common::{random_toy, Fixture, TableSpec};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anchor-assign"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn run_cli(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = cli(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

fn summary(dir: &Path) -> RunSummary {
    serde_json::from_slice(&fs::read(dir.join(SUMMARY_FILE)).unwrap()).unwrap()
}

fn one_person() -> Fixture {
    let mut f = Fixture::new();
    f.cell("c1", 0, 0, "D1")
        .cell("c2", 0, 1, "D1")
        .landuse("c1", "residential", 3000.0)
        .landuse("c2", "commercial", 2000.0)
        .person("p1", 40, "F", "h1", "D1")
        .employees("D1", "K", 1);
    let mut occ = TableSpec::new("occupation", &["gender"]);
    occ.row(&["F"], "clerk", 1.0).row(&["M"], "clerk", 1.0);
    let mut nace = TableSpec::new("nace", &["occupation"]);
    nace.row(&["clerk"], "K", 1.0);
    f.tables = vec![occ, nace];
    f
}

#[test]
fn single_person_gets_every_anchor() {
    let tmp = tempfile::tempdir().unwrap();
    let config = one_person().write(&tmp.path().join("in"));
    let out = tmp.path().join("out");
    run_cli(&config, &out, &["--seed", "5"]);
    let text = fs::read_to_string(out.join(POPULATION_FILE)).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert_eq!(row, "p1,h1,40,F,D1,c1,clerk,K,D1,C,c2");
    let s = summary(&out);
    assert_eq!(
        (s.status.as_str(), s.completed_stage, s.seed),
        ("complete", Stage::Report, 5)
    );
    for name in [
        "consistency_report.csv",
        "escalations.csv",
        "od_matrix.csv",
        "cell_counts_residents.csv",
        "cell_counts_workers.csv",
        "cell_counts.geojson",
        "nace_report.csv",
    ] {
        assert!(out.join(name).exists(), "{name} missing");
    }
}

#[test]
fn files_load_like_in_memory_fixture() {
    let f = random_toy(11, 5, 30, 200, false);
    let tmp = tempfile::tempdir().unwrap();
    let config = f.write(tmp.path());
    let loaded = load_scenario(&config).unwrap();
    let direct = f.scenario();
    assert_eq!(loaded.persons, direct.persons);
    assert_eq!(loaded.grid.cells(), direct.grid.cells());
    assert_eq!(loaded.register, direct.register);
    assert_eq!(loaded.tables, direct.tables);
    let a = pipeline::run(&loaded, Stage::Lastmile).unwrap();
    let b = pipeline::run(&direct, Stage::Lastmile).unwrap();
    assert_eq!(a.persons, b.persons);
}

#[test]
fn unknown_residence_district_is_reported_with_line() {
    let mut f = one_person();
    f.person("p2", 30, "M", "h2", "D9");
    let err = anchor_assign::ingest::Scenario::assemble(f.config.clone(), String::new(), f.parts())
        .unwrap_err();
    match err {
        Error::Referential {
            file,
            line,
            message,
        } => {
            assert_eq!(file, "persons.csv");
            assert_eq!(line, 3);
            assert!(message.contains("D9"), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }

    let tmp = tempfile::tempdir().unwrap();
    let config = f.write(tmp.path());
    let o = cli(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let stderr = String::from_utf8_lossy(&o.stderr);
    let report: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(report["error"], "referential");
}

#[test]
fn duplicate_person_is_rejected() {
    let mut f = one_person();
    f.person("p1", 30, "M", "h2", "D1");
    let err = anchor_assign::ingest::Scenario::assemble(f.config.clone(), String::new(), f.parts())
        .unwrap_err();
    assert!(matches!(err, Error::DuplicatePerson(id) if id == "p1"));
}

#[test]
fn nace_stage_stops_before_work_districts() {
    let tmp = tempfile::tempdir().unwrap();
    let config = random_toy(3, 4, 20, 150, false).write(&tmp.path().join("in"));
    let out = tmp.path().join("out");
    run_cli(&config, &out, &["--stage", "nace"]);
    assert!(out.join("consistency_report.csv").exists());
    assert!(!out.join("od_matrix.csv").exists());
    let persons = read_population(fs::File::open(out.join(POPULATION_FILE)).unwrap()).unwrap();
    assert!(persons
        .iter()
        .all(|p| p.work_district.is_none() && p.work_cell.is_none()));
    assert!(persons
        .iter()
        .all(|p| p.residence_cell.is_some() && p.occupation.is_some()));
    assert_eq!(summary(&out).status, "partial");
}

#[test]
fn stage_prefix_then_resume_matches_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = random_toy(8, 6, 40, 400, false).write(&tmp.path().join("in"));
    let full = tmp.path().join("full");
    run_cli(&config, &full, &[]);
    for stop in ["ingest", "residence", "nace", "subzone", "lastmile"] {
        let part = tmp.path().join(format!("part_{stop}"));
        run_cli(&config, &part, &["--stage", stop]);
        run_cli(&config, &part, &["--resume", part.to_str().unwrap()]);
        for name in [
            POPULATION_FILE,
            "od_matrix.csv",
            "nace_report.csv",
            "consistency_report.csv",
            "escalations.csv",
        ] {
            assert_eq!(
                fs::read(full.join(name)).unwrap(),
                fs::read(part.join(name)).unwrap(),
                "{name} differs after resuming from {stop}"
            );
        }
        assert_eq!(summary(&full).escalations, summary(&part).escalations);
    }
}

#[test]
fn resume_accepts_summary_path_and_new_out_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let config = random_toy(21, 4, 20, 100, true).write(&tmp.path().join("in"));
    let first = tmp.path().join("first");
    run_cli(&config, &first, &["--stage", "subzone"]);
    let second = tmp.path().join("second");
    run_cli(
        &config,
        &second,
        &["--resume", first.join(SUMMARY_FILE).to_str().unwrap()],
    );
    let full = tmp.path().join("full");
    run_cli(&config, &full, &[]);
    for name in [POPULATION_FILE, "escalations.csv", "nace_report.csv"] {
        assert_eq!(
            fs::read(full.join(name)).unwrap(),
            fs::read(second.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn same_seed_same_bytes_other_seed_differs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = random_toy(5, 5, 30, 300, false).write(&tmp.path().join("in"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    run_cli(&config, &a, &["--threads", "2"]);
    run_cli(&config, &b, &["--threads", "3"]);
    run_cli(&config, &c, &["--seed", "99"]);
    let read = |d: &Path| fs::read(d.join(POPULATION_FILE)).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_ne!(summary(&a).config_hash, summary(&c).config_hash);
}

#[test]
fn flag_overrides_reach_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = random_toy(9, 5, 30, 300, false).write(&tmp.path().join("in"));
    let base = tmp.path().join("base");
    let off = tmp.path().join("off");
    let steep = tmp.path().join("steep");
    run_cli(&config, &base, &[]);
    run_cli(&config, &off, &["--gravity-mask", "off"]);
    run_cli(&config, &steep, &["--distance-exponent", "3"]);
    let bad = cli(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("bad").to_str().unwrap(),
        "--distance-exponent",
        "-1",
    ]);
    assert!(!bad.status.success());
    let hashes: Vec<String> = [&base, &off, &steep]
        .iter()
        .map(|d| summary(d).config_hash)
        .collect();
    assert_ne!(hashes[0], hashes[1]);
    assert_ne!(hashes[0], hashes[2]);
}

#[test]
fn failed_run_writes_failed_summary() {
    let mut f = one_person();
    // no occupation row for men
    f.tables[0] = {
        let mut occ = TableSpec::new("occupation", &["gender"]);
        occ.row(&["F"], "clerk", 1.0);
        occ
    };
    f.config.stages.table_backoff = false;
    f.person("p2", 30, "M", "h2", "D1");
    let tmp = tempfile::tempdir().unwrap();
    let config = f.write(&tmp.path().join("in"));
    let out = tmp.path().join("out");
    let o = cli(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let s = summary(&out);
    assert_eq!(s.status, "failed");
    assert!(s.error.unwrap().contains("occupation"));
    let report: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&o.stderr).lines().last().unwrap()).unwrap();
    assert_eq!(report["error"], "missing_distribution");
}
