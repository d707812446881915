use std::path::Path;
use std::process::Command;

const TINY_LINE: &str = r#"
[line.profile]
N = 60
[protocol]
discard = "2 ns"
record = "5 ns"
"#;

fn twpa(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_twpa"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn twpa")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn show_prints_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let out = twpa(&["show", "gain"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("kind = \"gain-sweep\""));
    let out = twpa(&["show", "nothing"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn tiny_tone_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tiny.toml",
        &format!("kind = \"tone-evolution\"\n[drive]\nfp = \"12.8 GHz\"\nfs = \"6.6 GHz\"\n{TINY_LINE}"),
    );
    let out = twpa(&["run", &cfg, "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("gain"), "{stdout}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("res/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["kind"], "tone-evolution");
    assert!(dir.path().join("res/tones.csv").exists());
}

#[test]
fn verb_with_config_keeps_its_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "g.toml",
        &format!(
            "[drive]\nfp = \"12.8 GHz\"\n[sweep]\nfp = [\"12.8 GHz\"]\nfs = [\"6 GHz\", \"6.2 GHz\", \"6.6 GHz\"]\n{TINY_LINE}"
        ),
    );
    let out = twpa(&["gain", "--config", &cfg, "--workers", "2", "--out", "g"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("g/gain_12.80GHz.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn failed_points_give_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    // no signal drive: every point has an undefined S21
    let cfg = write(
        dir.path(),
        "bad.toml",
        &format!(
            "kind = \"gain-sweep\"\n[drive]\nsignal = \"0 A\"\n[sweep]\nfp = [\"12.8 GHz\"]\nfs = [\"6 GHz\", \"6.2 GHz\"]\n{TINY_LINE}"
        ),
    );
    let out = twpa(&["run", &cfg, "--out", "bad"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("3 point(s) failed"), "{stderr}");
    assert!(dir.path().join("bad/manifest.json").exists());
}

#[test]
fn bad_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "off.toml", "kind = \"tone-evolution\"\n[drive]\nfs = \"6.71 GHz\"\n");
    let out = twpa(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("DFT resolution"));
    let out = twpa(&["tones", "--dt=-1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = twpa(&["run", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn dispersion_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = twpa(&["dispersion", "--out", "d"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("stop-band 11.117-12.320 GHz"), "{stdout}");
    for f in ["dispersion.csv", "gaps.csv", "mismatch_12.92GHz.csv", "sparams.csv", "summary.json"] {
        assert!(dir.path().join("d").join(f).exists(), "{f}");
    }
}
