//! Regenerates the synthetic CSV fixtures bundled under `tests/fixtures/`.
//!
//! The bundled fixtures are single pinned realizations of the two simulation
//! designs, chosen so the specification-test outcome on them is stable and
//! comfortably away from the decision threshold:
//!
//! * `case1_*`: pure autoregression; the dynamic-specification test must not
//!   reject (p-value well above 0.05).
//! * `case2_*`: autoregression driven by a lagged latent factor; the first
//!   stage must reject (p-value well below 0.05) and the factor-augmented
//!   second stage must not.
//! * `rank1_panel.csv`: a near-noiseless one-factor panel on which the
//!   information criterion must select k = 1.
//!
//! Run without arguments to rewrite the fixtures from the pinned seeds and
//! re-verify the outcomes by invoking the CLI on the written files (the
//! process exits nonzero if any expectation fails). Run with
//! `--search <case1|case2> <start> <count>` to scan candidate seeds when a
//! pin needs to move.

use std::fs;
use std::path::{Path, PathBuf};

use faqar::cli;
use faqar::monte_carlo::{simulate_dgp, DgpCase, DgpSpec};
use faqar::rng::Streams;

/// Pinned master seeds; chosen by `--search` and fixed thereafter.
const PIN_CASE1: u64 = 11;
const PIN_CASE2: u64 = 5;
/// Series length and companion-panel width of the bundled realizations.
const T_LEN: usize = 300;
const PANEL_N: usize = 100;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let code = match args.first().map(String::as_str) {
        Some("--search") => search(&args[1..]),
        None => regenerate(),
        Some(other) => {
            eprintln!("unknown argument `{other}`; usage: regen_fixtures [--search case1|case2 start count]");
            2
        }
    };
    std::process::exit(code);
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Writes one simulated realization as series + panel CSVs into `dir`.
fn write_realization(case: DgpCase, seed: u64, dir: &Path, prefix: &str) -> (PathBuf, PathBuf) {
    let mut spec = DgpSpec::new(case, T_LEN);
    spec.panel_n = PANEL_N;
    let sim = simulate_dgp(&spec, &Streams::new(seed), 0).expect("simulation");

    let series_path = dir.join(format!("{prefix}_series.csv"));
    let mut text = String::from("period,y\n");
    for (period, value) in sim.y.periods().iter().zip(sim.y.values()) {
        text.push_str(&format!("{period},{value}\n"));
    }
    fs::write(&series_path, text).expect("write series");

    let panel_path = dir.join(format!("{prefix}_panel.csv"));
    let mut text = String::from("period");
    for id in sim.panel.series_ids() {
        text.push_str(&format!(",{id}"));
    }
    text.push('\n');
    for (j, period) in sim.panel.periods().iter().enumerate() {
        text.push_str(period);
        for i in 0..sim.panel.n_series() {
            text.push_str(&format!(",{}", sim.panel.values()[(i, j)]));
        }
        text.push('\n');
    }
    fs::write(&panel_path, text).expect("write panel");
    (series_path, panel_path)
}

fn write_rank1_panel(dir: &Path) -> PathBuf {
    use faqar::rng::standard_normal;
    let streams = Streams::new(7);
    let mut f_rng = streams.stream("fixture-rank1-factor", 0);
    let mut l_rng = streams.stream("fixture-rank1-loading", 0);
    let mut e_rng = streams.stream("fixture-rank1-noise", 0);
    // Moderate noise and loadings bounded away from zero: the log-scale
    // information criterion over-selects on near-noiseless panels, and
    // per-series standardization turns a zero-loading series into a pure
    // noise direction strong enough to masquerade as a factor.
    let (n, t) = (100usize, 100usize);
    let noise_sd = 0.3;
    let factor: Vec<f64> = (0..t).map(|_| standard_normal(&mut f_rng)).collect();
    let loadings: Vec<f64> = (0..n)
        .map(|_| 1.0 + 0.3 * standard_normal(&mut l_rng))
        .collect();
    let path = dir.join("rank1_panel.csv");
    let mut text = String::from("period");
    for i in 0..n {
        text.push_str(&format!(",s{}", i + 1));
    }
    text.push('\n');
    for (j, &f) in factor.iter().enumerate() {
        text.push_str(&format!("p{:03}", j + 1));
        for &lambda in &loadings {
            text.push_str(&format!(
                ",{}",
                lambda * f + noise_sd * standard_normal(&mut e_rng)
            ));
        }
        text.push('\n');
    }
    fs::write(&path, text).expect("write rank1 panel");
    path
}

/// Runs the CLI `test` subcommand on a written realization and returns the
/// stage-1 and (if present) stage-2 CvM p-values parsed from the report.
fn test_outcome(series: &Path, panel: &Path, out_dir: &Path) -> (f64, Option<f64>) {
    let code = cli::run_with([
        "faqar",
        "test",
        "--series",
        series.to_str().unwrap(),
        "--panel",
        panel.to_str().unwrap(),
        "--k",
        "1",
        "--tau-points",
        "17",
        "--boot-reps",
        "199",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "test subcommand failed");
    let report = fs::read_to_string(out_dir.join("test_report.txt")).expect("report");
    let mut stages = Vec::new();
    for line in report.lines() {
        if let Some(rest) = line.split("p_cvm = ").nth(1) {
            let token = rest.split(',').next().unwrap_or("");
            stages.push(token.trim().parse::<f64>().expect("p-value"));
        }
    }
    match stages.len() {
        1 => (stages[0], None),
        2 => (stages[0], Some(stages[1])),
        other => panic!("expected 1 or 2 stage rows, found {other}"),
    }
}

fn regenerate() -> i32 {
    let dir = fixtures_dir();
    fs::create_dir_all(&dir).expect("fixtures dir");
    let mut failures = 0;

    let (series1, panel1) = write_realization(DgpCase::Case1, PIN_CASE1, &dir, "case1");
    let scratch = tempfile::tempdir().expect("tempdir");
    let (p1, _) = test_outcome(&series1, &panel1, scratch.path());
    println!("case1 seed {PIN_CASE1}: stage-1 p = {p1}");
    if p1 < 0.10 {
        eprintln!("FAIL: case1 fixture must not reject (want p >= 0.10)");
        failures += 1;
    }

    let (series2, panel2) = write_realization(DgpCase::Case2, PIN_CASE2, &dir, "case2");
    let scratch = tempfile::tempdir().expect("tempdir");
    let (p1, p2) = test_outcome(&series2, &panel2, scratch.path());
    println!("case2 seed {PIN_CASE2}: stage-1 p = {p1}, stage-2 p = {p2:?}");
    if p1 >= 0.04 {
        eprintln!("FAIL: case2 fixture must reject stage 1 (want p < 0.04)");
        failures += 1;
    }
    match p2 {
        Some(p2) if p2 >= 0.10 => {}
        _ => {
            eprintln!("FAIL: case2 fixture must keep stage 2 (want p >= 0.10)");
            failures += 1;
        }
    }

    let rank1 = write_rank1_panel(&dir);
    let scratch = tempfile::tempdir().expect("tempdir");
    let code = cli::run_with([
        "faqar",
        "factors",
        "--panel",
        rank1.to_str().unwrap(),
        "--out-dir",
        scratch.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "factors subcommand failed");
    let report = fs::read_to_string(scratch.path().join("factor_report.txt")).expect("report");
    let selected = report
        .lines()
        .find_map(|l| l.strip_prefix("selected_k = "))
        .map(str::to_string)
        .unwrap_or_default();
    println!("rank1 panel: selected_k = {selected}");
    if selected != "1" {
        eprintln!("FAIL: rank1 fixture must select k = 1");
        failures += 1;
    }

    if failures == 0 {
        println!("fixtures regenerated and verified in {}", dir.display());
        0
    } else {
        eprintln!("{failures} fixture expectation(s) failed");
        1
    }
}

fn search(args: &[String]) -> i32 {
    let case = match args.first().map(String::as_str) {
        Some("case1") => DgpCase::Case1,
        Some("case2") => DgpCase::Case2,
        _ => {
            eprintln!("usage: regen_fixtures --search case1|case2 <start> <count>");
            return 2;
        }
    };
    let start: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let count: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    for seed in start..start + count {
        let scratch = tempfile::tempdir().expect("tempdir");
        let (series, panel) = write_realization(case, seed, scratch.path(), "candidate");
        let run_dir = scratch.path().join("run");
        let (p1, p2) = test_outcome(&series, &panel, &run_dir);
        let verdict = match case {
            DgpCase::Case1 => {
                if p1 >= 0.10 {
                    "OK"
                } else {
                    "reject"
                }
            }
            DgpCase::Case2 => match p2 {
                Some(p2) if p1 < 0.04 && p2 >= 0.10 => "OK",
                _ => "reject",
            },
        };
        println!("seed {seed}: stage-1 p = {p1}, stage-2 p = {p2:?} -> {verdict}");
    }
    0
}
