use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use traderank::rank::rank_table;
use traderank::trade_graph::load_flows;
use traderank::{MoneyMatrix, PowerIteration};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_traderank"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn ok(args: &[&str], out: &Path) {
    let o = run(args, out);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn meta(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn rank_output_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("three_country.csv");
    ok(
        &["rank", "--input", input.to_str().unwrap(), "--year", "2008"],
        dir.path(),
    );
    let m = load_flows(fs::File::open(&input).unwrap(), 2008, "TOTAL").unwrap();
    let mut expected = Vec::new();
    rank_table(&m, 0.5, PowerIteration::default())
        .unwrap()
        .write_csv(&mut expected)
        .unwrap();
    assert_eq!(
        fs::read(dir.path().join("rank_table.csv")).unwrap(),
        expected
    );
    assert!(dir.path().join("rank_top20.csv").exists());
    assert!(dir.path().join("rank.meta.json").exists());
}

/// A small network whose PageRank order differs between α = 0.5 and 0.85.
fn alpha_sensitive_network() -> MoneyMatrix {
    let opts = PowerIteration::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    loop {
        let n = 8;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i != j && rng.random::<f64>() < 0.4 {
                            rng.random_range(1..100) as f64
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let m = MoneyMatrix::from_rows(&rows).unwrap();
        let (Ok(a), Ok(b)) = (rank_table(&m, 0.5, opts), rank_table(&m, 0.85, opts)) else {
            continue;
        };
        let order =
            |t: &traderank::RankTable| t.rows.iter().map(|r| r.code.clone()).collect::<Vec<_>>();
        if order(&a) != order(&b) {
            return m;
        }
    }
}

#[test]
fn alpha_changes_pagerank_but_not_mass_ranks() {
    let m = alpha_sensitive_network();
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("flows.csv");
    let mut csv = String::from("year,commodity,exporter,importer,value_usd\n");
    for i in 0..m.n() {
        for j in 0..m.n() {
            if m.get(i, j) > 0.0 {
                let (e, im) = (m.registry().code(j), m.registry().code(i));
                csv.push_str(&format!("2008,TOTAL,{e},{im},{}\n", m.get(i, j)));
            }
        }
    }
    fs::write(&input, csv).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["rank", "--input", input.to_str().unwrap()], &a);
    ok(
        &[
            "rank",
            "--input",
            input.to_str().unwrap(),
            "--alpha",
            "0.85",
        ],
        &b,
    );

    let by_code = |p: &Path| {
        let mut rows = csv_rows(&p.join("rank_table.csv"));
        rows.sort();
        rows
    };
    let (ra, rb) = (by_code(&a), by_code(&b));
    assert!(
        ra.iter().zip(&rb).any(|(x, y)| x[1] != y[1]),
        "K column unchanged"
    );
    for (x, y) in ra.iter().zip(&rb) {
        assert_eq!(x[0], y[0]);
        assert_eq!(x[4..], y[4..], "mass ranks changed for {}", x[0]);
    }
    assert_eq!(meta(&b.join("rank.meta.json"))["config"]["alpha"], 0.85);
}

#[test]
fn input_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        "year,commodity,exporter,importer,value_usd\n2008,TOTAL,A,B,-5\n",
    )
    .unwrap();
    let three = fixture("three_country.csv");
    let three = three.to_str().unwrap();
    for args in [
        vec!["rank", "--input", "/nonexistent/flows.csv"],
        vec!["rank", "--input", bad.to_str().unwrap()],
        vec!["rank", "--input", three],
        vec!["rank", "--input", three, "--year", "2008", "--alpha", "0"],
        vec!["rank", "--input", three, "--year", "1999"],
        vec!["velocity", "--input", three, "--year", "2008"],
    ] {
        let o = run(&args, dir.path());
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let o = bin()
        .args(["summary", "--input", three, "--out"])
        .arg(dir.path())
        .env("TRADERANK_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let three = fixture("three_country.csv");
    let o = run(
        &[
            "rank",
            "--input",
            three.to_str().unwrap(),
            "--year",
            "2008",
            "--max-iter",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(!dir.path().join("rank_table.csv").exists());
}

#[test]
fn uniform_network_has_zero_correlators() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("uniform.csv");
    ok(
        &["correlator", "--input", input.to_str().unwrap()],
        dir.path(),
    );
    let rows = csv_rows(&dir.path().join("correlator.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "2008");
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn rmwtn_ensemble_has_every_point() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["rmwtn", "--rescale"], dir.path());
    let rows = csv_rows(&dir.path().join("rmwtn_ensemble.csv"));
    assert_eq!(rows.len(), 100 * 227);
    let total: u64 = csv_rows(&dir.path().join("rmwtn_spindle.csv"))
        .iter()
        .map(|r| r[2].parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 100 * 227);
    let m = meta(&dir.path().join("rmwtn.meta.json"));
    assert_eq!(m["results"]["points"], 100 * 227);
    assert_eq!(
        m["results"]["realization_seeds"].as_array().unwrap().len(),
        100
    );
}

#[test]
fn velocity_over_two_years_has_one_sample_per_shared_country() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("three_country.csv");
    ok(
        &[
            "velocity",
            "--input",
            input.to_str().unwrap(),
            "--year",
            "2007-2008",
        ],
        dir.path(),
    );
    let rows = csv_rows(&dir.path().join("velocity_samples.csv"));
    let codes: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(codes, ["CN", "DE", "US"]);
    assert!(rows.iter().all(|r| r[1] == "2007" && r[2] == "2008"));
    assert!(dir.path().join("velocity_curve.csv").exists());
    assert!(dir.path().join("velocity_bands.csv").exists());
}

#[test]
fn summary_lists_each_year() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("three_country.csv");
    ok(&["summary", "--input", input.to_str().unwrap()], dir.path());
    let rows = csv_rows(&dir.path().join("summary.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][0].as_str(), rows[0][1].as_str()), ("2007", "4"));
    assert_eq!(
        (
            rows[1][0].as_str(),
            rows[1][1].as_str(),
            rows[1][2].as_str()
        ),
        ("2008", "3", "6")
    );
}

#[test]
fn mirror_imports_fill_missing_flows() {
    let dir = tempfile::tempdir().unwrap();
    let (e, i) = (fixture("mirror_exports.csv"), fixture("mirror_imports.csv"));
    ok(
        &[
            "rank",
            "--input",
            e.to_str().unwrap(),
            "--imports",
            i.to_str().unwrap(),
        ],
        dir.path(),
    );
    let mut codes: Vec<String> = csv_rows(&dir.path().join("rank_table.csv"))
        .into_iter()
        .map(|r| r[0].clone())
        .collect();
    codes.sort();
    assert_eq!(codes, ["CN", "DE", "JP", "US"]);
    assert_eq!(meta(&dir.path().join("rank.meta.json"))["results"]["n"], 4);
}

#[test]
fn metadata_echoes_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("three_country.csv");
    let input = input.to_str().unwrap();
    ok(
        &[
            "spectrum", "--input", input, "--year", "2008", "--tol", "1e-10",
        ],
        dir.path(),
    );
    let m = meta(&dir.path().join("spectrum.meta.json"));
    assert_eq!(m["command"], "spectrum");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    let c = &m["config"];
    assert_eq!(c["alpha"], 0.5);
    assert_eq!(c["tol"], 1e-10);
    assert_eq!(c["max_iter"], 1000);
    assert_eq!(c["commodity"], "TOTAL");
    assert_eq!(c["gap"], 0.02);
    assert_eq!(c["year"]["first"], 2008);
    assert_eq!(c["input"][0], input);
    assert_eq!(m["outputs"][0], "spectrum.csv");
    assert!(m.get("elapsed_ms").is_none());

    ok(
        &["spectrum", "--input", input, "--year", "2008", "--timings"],
        dir.path(),
    );
    let m = meta(&dir.path().join("spectrum.meta.json"));
    assert!(m["elapsed_ms"].as_f64().unwrap() >= 0.0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("three_country.csv");
    let args = [
        "spindle",
        "--input",
        input.to_str().unwrap(),
        "--cell",
        "2x2",
    ];
    ok(&args, dir.path());
    let first = fs::read(dir.path().join("spindle.csv")).unwrap();
    let first_meta = fs::read(dir.path().join("spindle.meta.json")).unwrap();
    ok(&args, dir.path());
    assert_eq!(fs::read(dir.path().join("spindle.csv")).unwrap(), first);
    assert_eq!(
        fs::read(dir.path().join("spindle.meta.json")).unwrap(),
        first_meta
    );
}
