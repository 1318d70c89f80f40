//! End-to-end runs of the `mloglin` binary: exit codes, report files, and
//! determinism of the verification and simulation commands.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mloglin_cli::formats::{
    write_counts_csv, CoordRef, DeletedDef, RolesDef, SpecFile, TermDef, VariableDef,
};
use mloglin_core::{build_prop3_spec, FactorSpace, MllSpec, Table};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mloglin"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn names(space: &FactorSpace, vars: &[usize]) -> Vec<String> {
    vars.iter().map(|&v| space.name(v).to_string()).collect()
}

fn decode_local(space: &FactorSpace, effect: &[usize], mut local: usize) -> Vec<usize> {
    let mut levels = vec![0usize; effect.len()];
    for (j, &v) in effect.iter().enumerate().rev() {
        let l = space.levels(v) - 1;
        levels[j] = local % l + 1;
        local /= l;
    }
    levels
}

/// Serializes a core `MllSpec` plus whole-block zero constraints into the
/// JSON the binary consumes.
fn spec_file_from(spec: &MllSpec, zero_blocks: &[(&[usize], &[usize])]) -> SpecFile {
    let space = spec.space();
    SpecFile {
        variables: (0..space.num_vars())
            .map(|v| VariableDef {
                name: space.name(v).to_string(),
                levels: space.levels(v),
            })
            .collect(),
        terms: spec
            .terms()
            .iter()
            .map(|t| TermDef {
                effect: names(space, t.effect()),
                margin: names(space, t.margin()),
                coding: "Rc".to_string(),
            })
            .collect(),
        deleted: spec
            .deleted()
            .iter()
            .map(|&(ti, local)| {
                let effect = spec.terms()[ti].effect();
                DeletedDef {
                    effect: names(space, effect),
                    levels: decode_local(space, effect, local),
                }
            })
            .collect(),
        zero_constraints: zero_blocks
            .iter()
            .map(|&(effect, margin)| CoordRef {
                effect: names(space, effect),
                margin: names(space, margin),
                levels: None,
            })
            .collect(),
        linear_constraints: vec![],
        roles: None,
        theta: None,
        coding: None,
    }
}

fn write_counts(path: &Path, table: &Table) {
    let mut buf = Vec::new();
    write_counts_csv(&mut buf, table).unwrap();
    fs::write(path, buf).unwrap();
}

fn saturated_spec_json(dir: &Path) -> std::path::PathBuf {
    let spec = SpecFile {
        variables: vec![
            VariableDef { name: "X".into(), levels: 2 },
            VariableDef { name: "Y".into(), levels: 2 },
        ],
        terms: vec![],
        deleted: vec![],
        zero_constraints: vec![],
        linear_constraints: vec![],
        roles: None,
        theta: None,
        coding: None,
    };
    let path = dir.join("spec.json");
    spec.save(&path).unwrap();
    path
}

#[test]
fn saturated_fit_reports_zero_deviance() {
    let dir = tempfile::tempdir().unwrap();
    let space = FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap();
    let counts = Table::counts(space, vec![18.0, 11.0, 7.0, 24.0]).unwrap();
    let data = dir.path().join("data.csv");
    write_counts(&data, &counts);
    let spec = saturated_spec_json(dir.path());
    let out_dir = dir.path().join("out");

    let out = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let summary = fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("deviance:    0.0000"), "{summary}");
    assert!(summary.contains("dof:         0"));
    assert!(summary.contains("converged:   yes"));

    let estimates = fs::read_to_string(out_dir.join("estimates.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(estimates.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    // Saturated fit reproduces the empirical table, so the XY estimate is
    // the empirical log odds ratio.
    let target = (18.0f64 * 24.0 / (11.0 * 7.0)).ln();
    let est: f64 = rows[2][3].parse().unwrap();
    assert!((est - target).abs() < 1e-8, "{est} vs {target}");
}

#[test]
fn structural_spec_reports_seven_degrees_of_freedom() {
    let dir = tempfile::tempdir().unwrap();
    let space = FactorSpace::new(&[("X", 4), ("U", 2), ("V", 2), ("Y", 2)]).unwrap();
    let core_spec = build_prop3_spec(&space, 0, &[1, 2], 3, None).unwrap();
    let all = [0usize, 1, 2, 3];
    let spec = spec_file_from(
        &core_spec,
        &[
            (&[0, 1, 2], &[0, 1, 2]),
            (&[1, 2, 3], &all),
            (&[0, 2, 3], &all),
        ],
    );
    let spec_path = dir.path().join("m1.json");
    spec.save(&spec_path).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = Table::random_positive(space, &mut rng);
    let counts = mloglin_core::simulate(&p, 4000, 9).unwrap();
    let data = dir.path().join("data.csv");
    write_counts(&data, &counts);
    let out_dir = dir.path().join("out");

    let out = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--spec",
        spec_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("dof:         7"), "{summary}");
}

#[test]
fn missing_count_column_is_a_line_numbered_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    fs::write(&data, "X,Y,n\n0,0,12\n").unwrap();
    let spec = saturated_spec_json(dir.path());

    let out = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("line 1") && err.contains("count"), "{err}");
}

#[test]
fn bad_rows_report_their_line_and_malformed_json_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = saturated_spec_json(dir.path());
    let data = dir.path().join("data.csv");
    fs::write(&data, "X,Y,count\n0,0,3\n1,5,2\n").unwrap();
    let out = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let bad_spec = dir.path().join("bad.json");
    fs::write(&bad_spec, "{ not json").unwrap();
    fs::write(&data, "X,Y,count\n0,0,3\n").unwrap();
    let out = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--spec",
        bad_spec.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_is_deterministic_and_fails_under_a_hostile_tolerance() {
    let a = run(&["verify", "--seed", "0", "--trials", "10"]);
    let b = run(&["verify", "--seed", "0", "--trials", "10"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout, "verify output must be byte-identical");
    assert!(stdout(&a).contains("RESULT: PASS"));

    let c = run(&["verify", "--seed", "0", "--trials", "5", "--tol", "1e-20"]);
    assert_eq!(c.status.code(), Some(2));
    let text = stdout(&c);
    assert!(text.contains("FAIL") && text.contains("RESULT: FAIL"), "{text}");
}

#[test]
fn mediate_writes_reports_with_additive_effects() {
    let dir = tempfile::tempdir().unwrap();
    let space = FactorSpace::new(&[("X", 2), ("W", 2), ("Y", 2)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let p = Table::random_positive(space, &mut rng);
    let counts = mloglin_core::simulate(&p, 1500, 2).unwrap();
    let data = dir.path().join("data.csv");
    write_counts(&data, &counts);

    let mut spec = SpecFile {
        variables: vec![
            VariableDef { name: "X".into(), levels: 2 },
            VariableDef { name: "W".into(), levels: 2 },
            VariableDef { name: "Y".into(), levels: 2 },
        ],
        terms: vec![],
        deleted: vec![],
        zero_constraints: vec![],
        linear_constraints: vec![],
        roles: Some(RolesDef {
            exposure: "X".into(),
            mediators: vec!["W".into()],
            response: "Y".into(),
        }),
        theta: None,
        coding: None,
    };
    let spec_path = dir.path().join("spec.json");
    spec.save(&spec_path).unwrap();
    let out_dir = dir.path().join("out");

    let out = run(&[
        "mediate",
        "--data",
        data.to_str().unwrap(),
        "--spec",
        spec_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--B",
        "25",
        "--seed",
        "4",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let mediation = fs::read_to_string(out_dir.join("mediation.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(mediation.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1, "binary exposure has one adjacent transition");
    assert_eq!(&rows[0][0], "0->1");
    let nde: f64 = rows[0][1].parse().unwrap();
    let nie: f64 = rows[0][3].parse().unwrap();
    let te: f64 = rows[0][5].parse().unwrap();
    assert!((te - (nde + nie)).abs() < 1e-12);
    let se_te: f64 = rows[0][6].parse().unwrap();
    assert!(se_te > 0.0);
    assert!(out_dir.join("estimates.csv").exists());
    assert!(fs::read_to_string(out_dir.join("summary.txt"))
        .unwrap()
        .contains("natural effect decomposition"));

    // Without roles the same command is an input error.
    spec.roles = None;
    spec.save(&spec_path).unwrap();
    let out = run(&[
        "mediate",
        "--data",
        data.to_str().unwrap(),
        "--spec",
        spec_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--B",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_is_deterministic_and_feeds_back_into_fit() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SpecFile {
        variables: vec![
            VariableDef { name: "X".into(), levels: 2 },
            VariableDef { name: "Y".into(), levels: 2 },
        ],
        terms: vec![],
        deleted: vec![],
        zero_constraints: vec![],
        linear_constraints: vec![],
        roles: None,
        theta: Some(vec![0.4, -0.2, 0.7]),
        coding: None,
    };
    let spec_path = dir.path().join("spec.json");
    spec.save(&spec_path).unwrap();

    let sample = dir.path().join("sample.csv");
    let args = [
        "simulate",
        "--spec",
        spec_path.to_str().unwrap(),
        "--n",
        "500",
        "--seed",
        "3",
        "--out",
        sample.to_str().unwrap(),
    ];
    let a = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    let first = fs::read(&sample).unwrap();
    let b = run(&args);
    assert!(b.status.success());
    assert_eq!(first, fs::read(&sample).unwrap());

    let text = String::from_utf8(first).unwrap();
    let total: f64 = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert_eq!(total, 500.0);

    let out = run(&[
        "fit",
        "--data",
        sample.to_str().unwrap(),
        "--spec",
        spec_path.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn usage_and_exit_codes() {
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("mloglin"));

    let unknown = run(&["fit", "--bogus"]);
    assert_eq!(unknown.status.code(), Some(1));

    let missing = run(&[
        "fit",
        "--data",
        "/nonexistent/data.csv",
        "--spec",
        "/nonexistent/spec.json",
        "--out",
        "/tmp/never",
    ]);
    assert_eq!(missing.status.code(), Some(1));
}
