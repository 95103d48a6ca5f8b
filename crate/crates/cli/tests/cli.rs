use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 14] = [
    "--agents",
    "4",
    "--anchors",
    "4",
    "--roi",
    "40",
    "--steps",
    "3",
    "--trials",
    "2",
    "--t-star",
    "2",
    "--seeds-per-family",
    "5",
];

fn bpmf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bpmf")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr:\n{}", String::from_utf8_lossy(&out.stderr));
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_writes_the_scenario_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scn");
    let mut args = vec!["generate", "--seed", "4", "--out", path_str(&out)];
    args.extend(SMALL);
    ok(&bpmf(&args));
    for f in bpmf_core::netmodel::TIMELINE_FILES {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let tl = bpmf_core::netmodel::read_timeline(&out).unwrap();
    assert_eq!(tl.n_steps(), 3);
    assert_eq!(tl.config.n_agents, 4);
}

#[test]
fn run_is_reproducible_and_writes_report_trace_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let report = dir.path().join(format!("{name}.csv"));
        let trace = dir.path().join(format!("{name}_trace.csv"));
        let mut args = vec![
            "run",
            "--motion",
            "random-walk",
            "--seed",
            "9",
            "--out",
            path_str(&report),
            "--trace",
            path_str(&trace),
        ];
        args.extend(SMALL);
        ok(&bpmf(&args));
        (std::fs::read(&report).unwrap(), report, trace)
    };
    let (a, report, trace) = run("a");
    let (b, _, _) = run("b");
    assert_eq!(a, b);
    assert_eq!(first_line(&report), "trial,n,agent,true_x,true_y,est_x,est_y,error");
    assert_eq!(first_line(&trace), "n,t,sender,mu_px,mu_py,c_p");
    // 2 trials × 3 steps × 4 agents
    assert_eq!(std::fs::read_to_string(&report).unwrap().lines().count(), 1 + 24);
    let meta = std::fs::read_to_string(report.with_extension("toml")).unwrap();
    assert!(meta.contains("master_seed = 9"));
    assert!(meta.contains("pooled over agents and trials"));
}

#[test]
fn run_accepts_a_config_file_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "motion = \"random_walk\"\nmaster_seed = 5\nn_trials = 1\nn_steps = 2\nn_agents = 3\nn_anchors = 4\nroi_width = 40.0\nroi_height = 40.0\nt_star = 1\n").unwrap();
    let report = dir.path().join("r.csv");
    ok(&bpmf(&["run", "--config", path_str(&cfg), "--steps", "1", "--out", path_str(&report)]));
    let text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().count(), 1 + 3);
    let meta = std::fs::read_to_string(report.with_extension("toml")).unwrap();
    assert!(meta.contains("n_steps = 1") && meta.contains("master_seed = 5"));
}

#[test]
fn curve_has_one_row_per_time_and_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.csv");
    let mut args = vec!["run", "--seed", "2", "--out", path_str(&report)];
    args.extend(SMALL);
    ok(&bpmf(&args));
    let curve = dir.path().join("curve.csv");
    ok(&bpmf(&["curve", "--report", path_str(&report), "--out", path_str(&curve)]));
    let text = std::fs::read_to_string(&curve).unwrap();
    assert_eq!(first_line(&curve), "n,tau,p_out,rmse,count");
    assert_eq!(text.lines().count(), 1 + 3 * 41);
    for line in text.lines().skip(1) {
        let p: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn oracle_compares_projection_and_grid_posterior() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("scn");
    ok(&bpmf(&[
        "generate",
        "--motion",
        "random-walk",
        "--seed",
        "6",
        "--agents",
        "6",
        "--anchors",
        "9",
        "--roi",
        "40",
        "--steps",
        "1",
        "--out",
        path_str(&scn),
    ]));
    let out = dir.path().join("oracle.csv");
    ok(&bpmf(&["oracle", "--scenario", path_str(&scn), "--step", "0.05", "--out", path_str(&out)]));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(
        text.starts_with("n,agent,anchors,true_x,true_y,grid_x,grid_y,grid_var_x,grid_var_y,proj_x,proj_y,distance\n")
    );
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(!rows.is_empty());
    for row in rows {
        let d: f64 = row.split(',').next_back().unwrap().parse().unwrap();
        assert!(d.is_finite() && d >= 0.0);
    }
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    // no master seed
    assert!(!bpmf(&["run", "--trials", "1"]).status.success());
    // unknown key in the configuration file
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "n_trails = 3\n").unwrap();
    let out = bpmf(&["run", "--config", path_str(&bad)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    // missing report
    let out = bpmf(&[
        "curve",
        "--report",
        path_str(&dir.path().join("none.csv")),
        "--out",
        path_str(&dir.path().join("c.csv")),
    ]);
    assert!(!out.status.success());
    // oracle grid coarser than σ_w / 10
    let scn = dir.path().join("scn");
    ok(&bpmf(&[
        "generate",
        "--seed",
        "1",
        "--agents",
        "2",
        "--anchors",
        "4",
        "--roi",
        "30",
        "--steps",
        "1",
        "--out",
        path_str(&scn),
    ]));
    let out =
        bpmf(&["oracle", "--scenario", path_str(&scn), "--step", "0.5", "--out", path_str(&dir.path().join("o.csv"))]);
    assert!(!out.status.success());
}
