use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_imagnoise"));
    c.env_remove("IMAGNOISE_OUT_DIR");
    c
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p
}

const TWO_PARTICLE: &str = r#"{
    "scenario": "two-particle annihilation",
    "channels": [{"j": 2, "l": 0, "rate": 1.5}],
    "initial": {"kind": "deterministic", "n0": 2},
    "engines": ["master", "distributional"],
    "times": [0, 0.25, 0.5, 1, 2],
    "seed": 7
}"#;

#[test]
fn run_two_particle_passes_and_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TWO_PARTICLE);
    let out = tmp.path().join("out");
    let st = bin()
        .arg("run")
        .arg(&cfg)
        .env("IMAGNOISE_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    let dir = out.join("two-particle-annihilation");
    for f in [
        "master.csv",
        "distributional.csv",
        "report.csv",
        "report.json",
        "manifest.json",
    ] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let dist = fs::read_to_string(dir.join("distributional.csv")).unwrap();
    for line in dist.lines().filter(|l| l.starts_with("P_2,")) {
        let f: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        assert!((f[1] - (-1.5 * f[0]).exp()).abs() < 1e-14, "{line}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["report"]["passed"], true);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "scenario": "repro",
            "channels": [{"j": 2, "l": 0, "rate": 1}],
            "initial": {"kind": "poisson", "mu": 1},
            "engines": ["ssa", "sde_em"],
            "times": [0, 0.5],
            "seed": 11,
            "ssa": {"n_paths": 2000},
            "sde": {"n_paths": 2000, "dt": 0.01}
        }"#,
    );
    let mut bodies = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let st = bin().arg("run").arg(&cfg).arg("--out-dir").arg(&out).output().unwrap();
        assert!(matches!(st.status.code(), Some(0 | 1)));
        let dir = out.join("repro");
        bodies.push(["ssa.csv", "sde_em.csv", "report.csv"].map(|f| fs::read(dir.join(f)).unwrap()));
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn config_errors_exit_2_with_pointer() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &TWO_PARTICLE.replace("[0, 0.25, 0.5, 1, 2]", "[]"));
    let st = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("/times"));

    let cfg = write_config(
        tmp.path(),
        &TWO_PARTICLE.replace("\"seed\": 7", "\"seed\": 7, \"colour\": 1"),
    );
    let st = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn engine_errors_exit_3_naming_the_engine() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &TWO_PARTICLE.replace(r#""master", "distributional""#, r#""master", "appendix_d""#),
    );
    let st = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&st.stderr).contains("appendix_d"));
}

#[test]
fn comparison_failure_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    // truncated moments of a point mass agree with the exact ones; the loose
    // SSA ensemble cannot meet a zero tolerance
    let cfg = write_config(
        tmp.path(),
        r#"{
            "scenario": "strict",
            "channels": [{"j": 2, "l": 0, "rate": 1}],
            "initial": {"kind": "deterministic", "n0": 4},
            "engines": ["moments_closed", "ssa"],
            "times": [0, 1],
            "ssa": {"n_paths": 50},
            "tolerances": {"abs": 0, "k_se": 0}
        }"#,
    );
    let st = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(1));
}

#[test]
fn compare_subcommand_rules() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    fs::write(&a, "observable,t,value,stderr\nP_1,0,0.5,0.01\nP_1,1,0.25,0.01\n").unwrap();
    fs::write(&b, "observable,t,value,stderr\nP_1,0,0.5,0\nP_1,1,0.3,0.01\n").unwrap();
    let code = |rule: &str, k: &str| {
        bin()
            .args(["compare"])
            .arg(&a)
            .arg(&b)
            .args(["--rule", rule, "--k", k])
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(code("abs", "0.05"), Some(0));
    assert_eq!(code("abs", "0.04"), Some(1));
    assert_eq!(code("rel", "0.2"), Some(0));
    assert_eq!(code("kse", "2"), Some(1));
    assert_eq!(code("kse", "2.5"), Some(0));

    let c = tmp.path().join("c.csv");
    fs::write(&c, "observable,t,value\nP_1,0,0.5\nP_1,2,0.3\n").unwrap();
    let st = bin().arg("compare").arg(&a).arg(&c).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn schema_is_json() {
    let st = bin().arg("schema").output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&st.stdout).unwrap();
    assert_eq!(v["type"], "object");
}
