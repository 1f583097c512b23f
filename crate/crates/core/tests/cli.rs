use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str =
    "t,I,J,E_phi,mass,energy,loc_norm,sup_ux,sup_v,gamma_min,integra_partial,fixed_window_partial";

fn bi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bi"))
        .args(args)
        .output()
        .expect("run bi")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

const SMALL: [&str; 6] = [
    "--set",
    "points=256",
    "--set",
    "half_length=20",
    "--set",
    "horizon=6",
];

#[test]
fn vacuum_simulation_writes_zero_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("vac");
    let mut args = vec![
        "simulate",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "family=vacuum",
        "--set",
        "plots=true",
    ];
    args.extend(SMALL);
    let o = bi(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&out.join("timeseries.csv"));
    assert_eq!(header, HEADER);
    assert_eq!(rows.len(), 41);
    for r in &rows {
        for (i, v) in r.iter().enumerate() {
            let expected = match i {
                0 => r[0],
                9 => 1.0,
                _ => 0.0,
            };
            assert_eq!(*v, expected);
        }
    }
    let meta = fs::read_to_string(out.join("run_meta.toml")).unwrap();
    assert!(meta.contains("status = \"completed\""));
    assert!(meta.contains("wall_time_s"));
    assert!(out.join("loc_norm.svg").exists());
}

#[test]
fn same_spec_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "points = 512\nhalf_length = 30\nhorizon = 15\namplitude = 0.05\ncenter = 0.5\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = bi(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        outputs.push(fs::read(out.join("timeseries.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let (_, rows) = csv_rows(&dir.path().join("a/timeseries.csv"));
    assert!(rows.windows(2).all(|w| w[1][10] >= w[0][10]));
    assert!(rows.last().unwrap()[10] > 0.0);
}

#[test]
fn breakdown_exits_two_and_keeps_clean_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("brk");
    let mut args = vec![
        "simulate",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "family=uniform_velocity",
        "--set",
        "velocity=0.999",
    ];
    args.extend(SMALL);
    let o = bi(&args);
    assert_eq!(code(&o), 2);
    let text = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert!(text.starts_with(HEADER));
    assert!(!text.to_lowercase().contains("nan"));
    let meta: toml::Table =
        toml::from_str(&fs::read_to_string(out.join("run_meta.toml")).unwrap()).unwrap();
    let run = meta["run"].as_table().unwrap();
    assert_eq!(run["status"].as_str(), Some("breakdown"));
    assert_eq!(run["failure_t"].as_float(), Some(2.0));
    assert!(run["failure_message"]
        .as_str()
        .unwrap()
        .contains("breakdown"));
}

#[test]
fn configuration_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = out.to_str().unwrap();
    assert_eq!(
        code(&bi(&["simulate", "--out", o, "--set", "unknown_key=1"])),
        3
    );
    assert_eq!(code(&bi(&["simulate", "--out", o, "--set", "cfl=0.9"])), 3);
    assert_eq!(code(&bi(&["integrate", "--out", o])), 3);
    assert_eq!(
        code(&bi(&[
            "simulate",
            "--out",
            o,
            "--config",
            "/nonexistent/run.toml"
        ])),
        3
    );
    assert_eq!(
        code(&bi(&["convergence", "--out", o, "--set", "ladder=[1024]"])),
        3
    );
    assert_eq!(
        code(&bi(&[
            "convergence",
            "--out",
            o,
            "--set",
            "ladder=[2048, 1024]"
        ])),
        3
    );
    assert_eq!(
        code(&bi(&[
            "convergence",
            "--out",
            o,
            "--set",
            "family=gaussian"
        ])),
        3
    );
    assert_eq!(code(&bi(&["--help"])), 0);
}

#[test]
fn convergence_on_vacuum_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv");
    let o = bi(&[
        "convergence",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "family=vacuum",
        "--set",
        "ladder=[64, 128]",
    ]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(out.join("convergence.csv")).unwrap();
    let errors: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(errors, vec![0.0, 0.0]);
}

#[test]
fn verify_identities_on_vacuum_has_zero_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("id");
    let o = bi(&[
        "verify-identities",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "7",
        "--set",
        "family=vacuum",
        "--set",
        "points=128",
        "--set",
        "horizon=4",
        "--set",
        "jet_samples=1000",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let text = fs::read_to_string(out.join("identities.csv")).unwrap();
    assert!(text.contains("qnum,seed=7,1000"));
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("virial") || l.starts_with("energy"))
        .collect();
    assert_eq!(rows.len(), 6);
    for r in rows {
        assert_eq!(
            r.split(',').nth(4).unwrap().parse::<f64>().unwrap(),
            0.0,
            "{r}"
        );
    }
}

#[test]
fn seeded_identity_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut tables = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = bi(&[
            "verify-identities",
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "3",
            "--set",
            "points=512",
            "--set",
            "half_length=30",
            "--set",
            "horizon=5",
            "--set",
            "jet_samples=5000",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
        tables.push(fs::read_to_string(out.join("identities.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn decay_study_on_vacuum_summarises_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("decay");
    let mut args = vec![
        "decay-study",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "family=vacuum",
        "--set",
        "control=false",
    ];
    args.extend(SMALL);
    let o = bi(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    for eps in ["0.005", "0.01", "0.02"] {
        assert!(out.join(format!("eps_{eps}/timeseries.csv")).exists());
    }
    let text = fs::read_to_string(out.join("summary.csv")).unwrap();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1], "completed");
        assert_eq!(f[2].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn traveling_simulation_conserves_energy_and_leaves_the_window() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trav");
    let o = bi(&[
        "simulate",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "family=traveling",
        "--set",
        "amplitude=0.1",
        "--set",
        "center=-5",
        "--set",
        "points=2048",
        "--set",
        "half_length=60",
        "--set",
        "horizon=40",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = csv_rows(&out.join("timeseries.csv"));
    let e0 = rows[0][5];
    assert!(rows.iter().all(|r| ((r[5] - e0) / e0).abs() < 1e-6));
    let peak = rows.iter().map(|r| r[6]).fold(0.0, f64::max);
    assert!(peak > 0.05);
    assert!(rows.last().unwrap()[6] < 1e-6 * peak);
}
