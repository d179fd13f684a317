use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "trial,seed,scheme,d,m,delta,E,theta_err,total_time,success,stages";

fn hamest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamest"))
        .args(args)
        .output()
        .expect("spawn hamest")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = "model = phase\nd = 2\nscheme = adaptive\nE = 1\ndelta = 0.2\ntrials = 6\nseed = 3\n";

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.conf", SMALL);
    let out = dir.path().join("a.csv");
    let o = hamest(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(HEADER));
    assert_eq!(lines.count(), 6);

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    for key in ["success_rate", "median_T", "q1_T", "q3_T"] {
        assert!(json[key].is_number(), "missing {key}");
    }
    assert!(json.get("slope").is_none());
}

#[test]
fn run_is_deterministic_and_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.conf", SMALL);
    let a = hamest(&["run", "--config", &cfg, "--jobs", "1", "--seed", "11"]);
    let b = hamest(&["run", "--config", &cfg, "--jobs", "3", "--seed", "11"]);
    let c = hamest(&["run", "--config", &cfg, "--jobs", "1", "--seed", "12"]);
    assert!(a.status.success() && b.status.success() && c.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert!(String::from_utf8_lossy(&a.stdout).starts_with(HEADER));
}

#[test]
fn unknown_scheme_exits_2_and_lists_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.conf", &SMALL.replace("adaptive", "greedy"));
    let o = hamest(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for s in ["one_channel", "adaptive", "many_channel"] {
        assert!(err.contains(s), "{err}");
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("ratio.conf", SMALL.replace("delta = 0.2", "delta = 0.5")),
        ("key.conf", format!("{SMALL}colour = red\n")),
        ("dup.conf", format!("{SMALL}d = 3\n")),
    ] {
        let cfg = write_config(dir.path(), name, &body);
        let o = hamest(&["run", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(2), "{name}");
    }
    let o = hamest(&["run", "--config", "/nonexistent/x.conf"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_reports_slope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.conf", SMALL);
    let out = dir.path().join("s.csv");
    let o = hamest(&["sweep", "--config", &cfg, "--delta-list", "0.2,0.1,0.05", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 1 + 18);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert!(json["slope"].as_f64().unwrap() < 0.0);
}

#[test]
fn sweep_rejects_bad_delta_lists() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.conf", SMALL);
    for list in ["0.1,0.2", "0.2", "0.4,0.1", "0.2,abc"] {
        let o = hamest(&["sweep", "--config", &cfg, "--delta-list", list]);
        assert_eq!(o.status.code(), Some(2), "{list}");
    }
    let o = hamest(&["sweep", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_and_rejects_unknown_suite() {
    let o = hamest(&["verify", "qfi"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("PASS") && !text.contains("FAIL"), "{text}");

    let o = hamest(&["verify", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for scheme in ["one_channel", "adaptive", "many_channel"] {
        let text = std::fs::read_to_string(root.join(format!("{scheme}.conf"))).unwrap();
        assert!(text.contains(&format!("scheme = {scheme}")));
    }
}
