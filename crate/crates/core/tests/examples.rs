//! Runs every example binary with small inputs and checks its output.

use std::path::PathBuf;
use std::process::Command;

fn examples_dir() -> PathBuf {
    let bin = PathBuf::from(env!("CARGO_BIN_EXE_trafficmon"));
    bin.parent().unwrap().join("examples")
}

fn run(name: &str, args: &[&str]) -> String {
    let exe = examples_dir().join(name);
    if !exe.exists() {
        let status = Command::new(env!("CARGO"))
            .args([
                "build",
                "--examples",
                "--manifest-path",
                concat!(env!("CARGO_MANIFEST_DIR"), "/Cargo.toml"),
            ])
            .status()
            .expect("cargo runs");
        assert!(status.success());
    }
    let out = Command::new(&exe)
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("example runs");
    assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn every_example_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |sub: &str| {
        let p = tmp.path().join(sub);
        std::fs::create_dir_all(&p).unwrap();
        p.to_str().unwrap().to_owned()
    };

    let out = run("generate_corpus", &[&dir("corpus")]);
    assert!(out.contains("30"), "{out}");

    let out = run("simulate_scenario", &["s03"]);
    assert!(out.contains("first collision at tick"), "{out}");

    let out = run("render_frame", &["s03", "cam-sw", "300", &dir("render")]);
    assert!(
        out.contains("grounded: ") && !out.contains("grounded: Vehicle 1 is on Section"),
        "{out}"
    );

    let out = run(
        "ground_caption",
        &[
            "cam-sw",
            "Vehicle 1 is on section a moving upward. No collision is observed.",
        ],
    );
    assert!(out.contains("grounded: Vehicle 1 is on Gladstone Avenue west"), "{out}");

    let out = run("detector_metrics", &["0", "0"]);
    assert!(out.contains("precision 1.000 recall 1.000 f1 1.000"), "{out}");

    let out = run("export_dataset", &[&dir("dataset"), "s03"]);
    assert!(out.starts_with("28 records"), "{out}");

    let out = run("evaluate_oracle", &["0", "0", "s03"]);
    assert!(
        out.contains("location 1.0000, steering 1.0000, collision 1.0000"),
        "{out}"
    );

    let out = run("query_remote", &[]);
    assert!(out.contains("grounded: Vehicle 1 is on Gladstone Avenue west"), "{out}");

    let out = run("serve_api", &[]);
    assert!(out.contains(": \"done\""), "{out}");
}
