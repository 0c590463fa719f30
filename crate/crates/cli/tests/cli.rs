use std::path::PathBuf;
use std::process::{Command, Output};

use coopmotion::fd_scheme::MeshFn;
use coopmotion::verify::ReportDoc;
use coopmotion::Pmf;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coopmotion"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("coopmotion-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn evolve_two_steps_from_a_point_mass() {
    let o = run(&["evolve", "--m", "1", "--n", "2", "--init", "delta:0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = Pmf::from_csv(&stdout(&o)).unwrap();
    assert_eq!(p.support(), Some((-2, 2)));
    assert_eq!(p.weights(), &[0.125, 0.25, 0.25, 0.25, 0.125]);
    assert!(stderr(&o).contains("max_p=0.25"));
}

#[test]
fn evolve_zero_steps_echoes_input() {
    let o = run(&["evolve", "--m", "1", "--n", "0", "--init", "uniform:-1..1"]);
    assert!(o.status.success());
    let p = Pmf::from_csv(&stdout(&o)).unwrap();
    assert_eq!(p.support(), Some((-1, 1)));
    assert!(p.weights().iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-14));
}

#[test]
fn evolve_file_round_trip() {
    let src = scratch("mu.csv");
    std::fs::write(&src, Pmf::uniform(0, 3).unwrap().to_csv()).unwrap();
    let dst = scratch("out.csv");
    let init = format!("csv:{}", src.display());
    let o = run(&[
        "evolve",
        "--m",
        "2",
        "--n",
        "5",
        "--init",
        &init,
        "--out",
        dst.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("mass_drift="));
    let p = Pmf::from_csv(&std::fs::read_to_string(&dst).unwrap()).unwrap();
    assert!((p.total_mass() - 1.0).abs() < 1e-12);
}

#[test]
fn invalid_m_exits_with_two_and_names_the_flag() {
    let o = run(&["evolve", "--m", "-1", "--n", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("--m") && err.contains("m > 0"), "{err}");
}

#[test]
fn bad_init_exits_with_two() {
    let o = run(&["evolve", "--m", "1", "--n", "2", "--init", "gamma:3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--init"));
}

#[test]
fn runtime_errors_exit_with_three() {
    let o = run(&["verify", "pstar", "--m", "0.5", "--cap", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("CapExceeded"));
}

#[test]
fn sample_needs_a_seed_and_is_deterministic() {
    assert_eq!(
        run(&["sample", "--m", "1", "--n", "1"]).status.code(),
        Some(2)
    );
    let args = [
        "sample", "--m", "1", "--n", "1", "--init", "delta:0", "--count", "1000", "--seed", "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    let freqs: Vec<(i64, f64)> = stdout(&a)
        .lines()
        .skip(1)
        .map(|l| {
            let (k, f) = l.split_once(',').unwrap();
            (k.parse().unwrap(), f.parse().unwrap())
        })
        .collect();
    assert_eq!(freqs.iter().map(|x| x.0).collect::<Vec<_>>(), vec![-1, 1]);
    assert!(freqs.iter().all(|x| (x.1 - 0.5).abs() < 0.06));
}

#[test]
fn sample_rejects_fractional_m() {
    let o = run(&["sample", "--m", "1.5", "--n", "2", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_samples() {
    let args = [
        "sample", "--m", "2", "--n", "3", "--count", "20000", "--seed", "3",
    ];
    let one = Command::new(env!("CARGO_BIN_EXE_coopmotion"))
        .args(args)
        .env("COOPMOTION_THREADS", "1")
        .output()
        .unwrap();
    let four = Command::new(env!("CARGO_BIN_EXE_coopmotion"))
        .args(args)
        .env("COOPMOTION_THREADS", "4")
        .output()
        .unwrap();
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn zkb_density_at_origin() {
    let o = run(&["zkb", "--m", "1", "--theta", "1", "--t", "1", "--eval", "0"]);
    assert!(o.status.success());
    let row = stdout(&o)
        .lines()
        .find(|l| l.starts_with("0,"))
        .unwrap()
        .to_string();
    let density: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((density - 0.4543).abs() < 1e-4);
    assert_eq!(
        run(&["zkb", "--m", "1", "--t", "-1", "--eval", "0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn scheme_output_round_trips() {
    let dst = scratch("mesh.csv");
    let o = run(&[
        "scheme",
        "--kind",
        "heat",
        "--N",
        "8",
        "--init",
        "gauss:0.25",
        "--t",
        "0.5",
        "--out",
        dst.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (mesh, _) = MeshFn::from_csv(&std::fs::read_to_string(&dst).unwrap()).unwrap();
    assert!((mesh.time - 0.5).abs() < 1e-12);
    assert!(mesh.is_nondecreasing(1e-12));
    // continue from the written mesh
    let init = format!("mesh:{}", dst.display());
    let o = run(&[
        "scheme", "--kind", "heat", "--N", "8", "--init", &init, "--t", "0.5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (later, _) = MeshFn::from_csv(&stdout(&o)).unwrap();
    assert!((later.time - 1.0).abs() < 1e-12);
}

#[test]
fn verify_convergence_json() {
    let o = run(&[
        "verify",
        "convergence",
        "--m",
        "1",
        "--init",
        "delta:0",
        "--n",
        "16,256,4096",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = ReportDoc::from_json(&stdout(&o)).unwrap();
    let d = &doc.arrays["distance"];
    assert_eq!(d.len(), 3);
    assert!(d.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn verify_subcommands_emit_reports() {
    let cases: [&[&str]; 5] = [
        &["verify", "pstar", "--m", "1"],
        &["verify", "sandwich", "--m", "1", "--eps", "0.2"],
        &["verify", "residual", "--m", "1"],
        &["verify", "clt", "--N", "16"],
        &["verify", "mzero", "--m", "0.1,0.05"],
    ];
    for args in cases {
        let o = run(args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        let doc = ReportDoc::from_json(&stdout(&o)).unwrap();
        assert_eq!(doc.kind, args[1]);
    }
}

#[test]
fn verify_writes_csv() {
    let json = scratch("mz.json");
    let csv = scratch("mz.csv");
    let o = run(&[
        "verify",
        "mzero",
        "--out",
        json.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let doc = ReportDoc::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let arrays = ReportDoc::arrays_from_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(arrays["m"], doc.arrays["m"]);
}

#[test]
fn coarse_sandwich_mesh_is_a_runtime_error() {
    let o = run(&["verify", "sandwich", "--m", "1", "--N", "8"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("MeshTooCoarse"));
}
