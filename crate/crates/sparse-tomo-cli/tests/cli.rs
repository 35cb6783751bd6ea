use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-tomo"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sparse-tomo-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sweep_config(dir: &Path) -> PathBuf {
    let cfg = dir.join("sweep.json");
    std::fs::write(
        &cfg,
        r#"{"wavelet_order": 1, "j_max": 3, "j0": 2,
            "betas": [0.01, 0.02, 0.04, 0.08],
            "m_rule": {"rule": "fixed", "values": [24]},
            "seeds": [0, 1]}"#,
    )
    .unwrap();
    cfg
}

#[test]
fn atlas_build_writes_header_and_patches() {
    let dir = scratch("atlas");
    let stdout = run(&["atlas", "build", "--wavelet-order", "1", "--jmax", "3", "--out", path(&dir)]);
    assert!(stdout.contains("[16, 12, 48, 180]"), "{stdout}");
    assert!(dir.join("atlas_header.txt").exists());
    assert!(dir.join("atlas_patches.bin").metadata().unwrap().len() > 0);
}

#[test]
fn reconstruct_writes_images_and_recovers_sparse_phantom() {
    let dir = scratch("reconstruct");
    run(&[
        "reconstruct", "--wavelet-order", "1", "--jmax", "3", "--j0", "2", "--m", "16", "--s", "4", "--zeta", "1",
        "--out", path(&dir),
    ]);
    for f in ["truth.pgm", "recon.pgm", "truth.bin", "recon.bin", "sinogram.csv", "trace.csv", "records.csv"] {
        assert!(dir.join(f).exists(), "missing {f}");
    }
    let pgm = std::fs::read(dir.join("recon.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n193 193\n255\n"));
    let bin_len = dir.join("recon.bin").metadata().unwrap().len();
    assert_eq!(bin_len, 193 * 193 * 8);
    let records = std::fs::read_to_string(dir.join("records.csv")).unwrap();
    let row: Vec<&str> = records.lines().nth(1).unwrap().split(',').collect();
    let err_rel: f64 = row[7].parse().unwrap();
    assert!(err_rel < 1e-6, "{records}");
}

#[test]
fn certify_writes_certificate() {
    let dir = scratch("certify");
    run(&["certify", "--wavelet-order", "1", "--jmax", "3", "--j0", "1", "--out", path(&dir)]);
    let text = std::fs::read_to_string(dir.join("certificate.txt")).unwrap();
    for key in ["sigma_min", "inv_norm", "b_fit", "c_hat", "C_hat", "delta_star"] {
        assert!(text.contains(key), "certificate lacks {key}");
    }
    assert!(dir.join("rip.csv").exists());
    assert!(dir.join("coherence.csv").exists());
}

#[test]
fn sweep_is_byte_identical_across_runs_and_worker_counts() {
    let dir = scratch("sweep");
    let cfg = sweep_config(&dir);
    let (a, b) = (dir.join("a"), dir.join("b"));
    run(&["sweep", "--config", path(&cfg), "--out", path(&a)]);
    run(&["sweep", "--config", path(&cfg), "--out", path(&b), "--workers", "2"]);
    let ra = std::fs::read(a.join("records.csv")).unwrap();
    let rb = std::fs::read(b.join("records.csv")).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(String::from_utf8(ra).unwrap().lines().count(), 1 + 4 * 2);
    assert!(a.join("fit.txt").exists());
    assert!(a.join("timings.csv").exists());
}

#[test]
fn fit_reads_records_and_flags_override_config() {
    let dir = scratch("fit");
    let cfg = sweep_config(&dir);
    let sweep_out = dir.join("sweep");
    run(&["sweep", "--config", path(&cfg), "--seed", "3", "--out", path(&sweep_out)]);
    let records = std::fs::read_to_string(sweep_out.join("records.csv")).unwrap();
    assert!(records.lines().skip(1).all(|l| l.split(',').nth(4) == Some("3")));
    let stdout = run(&["fit", "--records", path(&sweep_out.join("records.csv")), "--out", path(&dir)]);
    assert!(stdout.contains("exponent"));
    let fit = std::fs::read_to_string(dir.join("fit.txt")).unwrap();
    assert!(fit.contains("axis = beta"));
}

#[test]
fn invalid_config_is_reported() {
    let dir = scratch("invalid");
    let cfg = dir.join("bad.json");
    std::fs::write(&cfg, r#"{"no_such_key": 1}"#).unwrap();
    let out = bin().args(["certify", "--config", path(&cfg), "--out", path(&dir)]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let out = bin().args(["reconstruct", "--model", "mri"]).output().unwrap();
    assert!(!out.status.success());
}
