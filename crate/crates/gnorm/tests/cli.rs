//! Exercises the installed binary end to end: exit codes and report files.

use std::process::Command;

fn gnorm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gnorm"))
}

fn write_presentation(name: &str, text: &str) -> std::path::PathBuf {
    let path = std::env::temp_dir().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn bounds_reaches_loose_gap_and_writes_reports() {
    let pres = write_presentation(
        "gnorm-cli-z.txt",
        "generators: x\nrelators:\nclass: free-abelian\n",
    );
    let json = std::env::temp_dir().join("gnorm-cli-report.json");
    let csv = std::env::temp_dir().join("gnorm-cli-report.csv");
    let out = gnorm()
        .args(["bounds", "--presentation"])
        .arg(&pres)
        .args(["--element", "1 + x", "--target-gap", "0.1"])
        .arg("--json")
        .arg(&json)
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report = gnorm::decide::BoundsReport::from_json(
        &std::fs::read_to_string(&json).unwrap(),
    )
    .unwrap();
    assert!(report.gap <= 0.1);
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("index,p_n,q_n"));
}

#[test]
fn word_subcommand_decides_commutator() {
    let pres = write_presentation(
        "gnorm-cli-comm.txt",
        "generators: x y\nrelators: x*y*x^-1*y^-1\nclass: generic\n",
    );
    let out = gnorm()
        .args(["word", "--presentation"])
        .arg(&pres)
        .args(["--word", "x*y*x^-1*y^-1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("Trivial"));
}

#[test]
fn missing_presentation_is_an_input_error() {
    let out = gnorm()
        .args(["bounds", "--presentation", "/nonexistent.txt", "--element", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
