use std::path::Path;
use std::process::Command;

fn surfrd(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_surfrd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn entries(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn gen_manifold_writes_only_inside_its_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = surfrd(&["gen-manifold", "--out", out, "--set", "sfem.n=20"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let top = entries(tmp.path());
    assert_eq!(top.len(), 1);
    assert!(top[0].starts_with("gen-manifold-"));
    let run = tmp.path().join(&top[0]);
    assert_eq!(
        entries(&run),
        ["config.echo", "log.txt", "manifold.csv", "manifold.vtk", "manifold_stats.csv"]
    );
    let printed = String::from_utf8_lossy(&o.stdout);
    assert_eq!(Path::new(printed.trim()), run);

    let stats = std::fs::read_to_string(run.join("manifold_stats.csv")).unwrap();
    let area: f64 = stats
        .lines()
        .find_map(|l| l.strip_prefix("surface_area,"))
        .and_then(|r| r.split(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((1.4..=1.9).contains(&area), "area {area}");

    let header = std::fs::read_to_string(run.join("manifold.csv")).unwrap();
    assert!(header.starts_with("u,v,z,det_g,K,H,phi\n"));
    assert_eq!(header.lines().count(), 1 + 201 * 201);
}

#[test]
fn overrides_appear_in_the_config_echo() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = surfrd(&[
        "gen-manifold",
        "--preset",
        "ci-small",
        "--out",
        out,
        "--set",
        "output.grid=9",
        "--set",
        "output.vtk=false",
        "--set",
        "manifold.grf.seed=77",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join(&entries(tmp.path())[0]);
    let echo = std::fs::read_to_string(run.join("config.echo")).unwrap();
    let cfg = surfrd_cli::resolve(None, Some(("echo", &echo)), &[]).unwrap();
    assert_eq!(cfg.output.grid, 9);
    assert!(!cfg.output.vtk);
    assert_eq!(cfg.manifold.grf.seed, 77);
    assert_eq!(cfg.network.width, 64);
}

#[test]
fn invalid_configuration_exits_nonzero_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let o = surfrd(&[
        "train",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "physics.epsilon=1.5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("physics.epsilon"), "{err}");
    assert!(!out.exists());

    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[train]\nn_epochs = \"many\"\n").unwrap();
    let o = surfrd(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse error"));

    let o = surfrd(&["train", "--preset", "huge", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_model_file_is_a_categorized_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = surfrd(&[
        "export",
        "--preset",
        "ci-small",
        "--out",
        out,
        "--model",
        tmp.path().join("absent.bin").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(7));
    let run = tmp.path().join(&entries(tmp.path())[0]);
    let log = std::fs::read_to_string(run.join("log.txt")).unwrap();
    assert!(log.contains("export failed (network)"), "{log}");
}

#[test]
fn solve_sfem_writes_snapshots_and_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = surfrd(&[
        "solve-sfem",
        "--out",
        out,
        "--threads",
        "1",
        "--set",
        "sfem.n=8",
        "--set",
        "sfem.t_end=4.0",
        "--set",
        "sfem.checkpoints=[2.0]",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join(&entries(tmp.path())[0]);
    let files = entries(&run);
    for f in ["sfem-t0.csv", "sfem-t2.csv", "sfem-t4.csv", "sfem-t4.vtk", "sfem_audit.csv", "sfem_mass.csv"] {
        assert!(files.iter().any(|x| x == f), "{f} missing from {files:?}");
    }
    let snap = std::fs::read_to_string(run.join("sfem-t4.csv")).unwrap();
    assert!(snap.starts_with("u,v,x,y,z,U,V\n"));
    assert_eq!(snap.lines().count(), 1 + 81);
}
