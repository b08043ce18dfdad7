use std::path::Path;
use std::process::Command;

use chern_currents::harness::symbolic_tables;

const GOLDEN: &str = include_str!("golden/symbolic_5.txt");

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chern-currents"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn symbolic_tables_match_golden() {
    assert_eq!(symbolic_tables(5, 2).unwrap(), GOLDEN);
}

#[test]
fn symbolic_subcommand_writes_tables_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", "pipeline = \"symbolic\"\n[symbolic]\nmax_degree = 5\nrank = 2\n");
    let out = dir.path().join("out");
    let status = bin().arg("symbolic").arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert_eq!(std::fs::read_to_string(out.join("symbolic_5.txt")).unwrap(), GOLDEN);

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "pass");
    assert_eq!(report["pipeline"], "symbolic");
}

#[test]
fn degree_above_codimension_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "d.toml",
        "pipeline = \"converge\"\ndegree = 2\n[example]\nname = \"divisor\"\n[chart]\nradius = 1.0\nresolution = 16\n",
    );
    let status = bin().arg("converge").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&status.stderr).contains("codimension"));
}

#[test]
fn smooth_pipelines_refuse_singular_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.toml",
        "degree = 1\n[example]\nname = \"poincare-lelong\"\n[chart]\nradius = 1.0\nresolution = 16\n",
    );
    let status = bin().arg("chern-forms").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&status.stderr).contains("singular"));
}

#[test]
fn malformed_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "degree = \"two\"\n");
    let status = bin().arg("converge").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
}

#[test]
fn misplaced_keys_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.toml", "pipeline = \"converge\"\nfamilies = [\"bump\"]\n");
    let status = bin().arg("converge").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&status.stderr).contains("families"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = chern_currents::harness::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate(cfg.pipeline.expect("configs name their pipeline")).unwrap();
        seen += 1;
    }
    assert!(seen >= 8);
}
