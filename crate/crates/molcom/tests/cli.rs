//! The `molcom` binary: exit codes, output locations and the CSVs it writes.

use std::path::Path;
use std::process::{Command, Output};

use molcom::config::OUTPUT_DIR_ENV;
use molcom::sweep::{BOUND_HEADER, ERROR_HEADER};

const SMALL: &str = "power_grid = 5, 50, 500\nr_max_grid = 2, 20, 200\nmc_symbols = 10000\n";

fn molcom(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_molcom")).args(args).current_dir(dir).env_remove(OUTPUT_DIR_ENV).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn error_sweep_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "small.ini", SMALL);
    let out = molcom(dir.path(), &["sweep-error", "--config", "small.ini", "--csk-p2", "0.1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("error_sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), ERROR_HEADER.join(","));
    // six schemes plus the two CSK variants, three powers each
    assert_eq!(lines.count(), 8 * 3);
    assert!(text.contains("error_sweep_csk_p2,QCSK,4,500,0.22,0.1,20,"));
    let meta = std::fs::read_to_string(dir.path().join("error_sweep.csv.meta")).unwrap();
    assert!(meta.contains("bound_gamma=r_max"));
    assert!(meta.contains("cold_start="));
}

#[test]
fn output_dir_can_be_overridden_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let elsewhere = tempfile::tempdir().unwrap();
    write(dir.path(), "small.ini", &format!("{SMALL}output_dir = ignored\n"));
    let out = Command::new(env!("CARGO_BIN_EXE_molcom"))
        .args(["sweep-bound", "--config", "small.ini"])
        .current_dir(dir.path())
        .env(OUTPUT_DIR_ENV, elsewhere.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(elsewhere.path().join("bound_sweep.csv").exists());
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn same_seed_same_bytes_other_seed_other_bytes() {
    let run = |seed: u64| {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "c.ini", &format!("{SMALL}seed = {seed}\n"));
        assert!(molcom(dir.path(), &["sweep-error", "--config", "c.ini"]).status.success());
        std::fs::read(dir.path().join("error_sweep.csv")).unwrap()
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
}

#[test]
fn bound_csv_stays_below_binary_mocsk_where_informative() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "d.ini", "");
    assert!(molcom(dir.path(), &["sweep-bound", "--config", "d.ini"]).status.success());
    let mut rdr = csv::Reader::from_path(dir.path().join("bound_sweep.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), BOUND_HEADER);
    let mut compared = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let num = |i: usize| rec[i].parse::<f64>().unwrap();
        let (g, pe_lower, vacuous, alphabet, pe_bmocsk) = (num(10), num(12), &rec[13], &rec[5], num(15));
        if vacuous == "true" {
            assert_eq!(pe_lower, 0.0);
            continue;
        }
        // the binary comparison is only meaningful where the cap carries
        // information; a cap clamped to zero gives the trivial bound 1/2
        if alphabet == "2" && g > 0.0 {
            compared += 1;
            assert!(pe_lower <= pe_bmocsk, "r_max {}: {pe_lower} > {pe_bmocsk}", &rec[1]);
        }
    }
    assert!(compared > 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "empty_grid.ini", "power_grid =\n");
    write(dir.path(), "unknown.ini", "colour = blue\n");
    write(dir.path(), "one_row.csv", "scheme,power_per_bit,pe\nBCSK,5,0.3\n");

    let code = |args: &[&str]| molcom(dir.path(), args).status.code().unwrap();
    assert_eq!(code(&["sweep-error", "--config", "empty_grid.ini"]), 1);
    assert_eq!(code(&["sweep-error", "--config", "unknown.ini"]), 1);
    assert_eq!(code(&["sweep-bound", "--config", "missing.ini"]), 2);
    assert_eq!(code(&["no-such-command"]), 1);
    assert_eq!(code(&["sweep-error"]), 1);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(
        code(&["plot", "--input", "one_row.csv", "--output", "p.svg", "--x", "power_per_bit", "--y", "nope"]),
        1
    );
    assert_eq!(code(&["plot", "--input", "absent.csv", "--output", "p.svg", "--x", "a", "--y", "b"]), 2);
    assert_eq!(
        code(&["plot", "--input", "one_row.csv", "--output", "no/such/dir/p.svg", "--x", "power_per_bit", "--y", "pe"]),
        2
    );
}

#[test]
fn plot_from_a_sweep_with_zero_rows() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "e.csv",
        "experiment,scheme,power_per_bit,pe_analytic,pe_mc\nx,BCSK,1,0.4,0.41\nx,BCSK,10,0.01,0\nx,QCSK,1,0.6,0.6\n",
    );
    let out = molcom(
        dir.path(),
        &["plot", "--input", "e.csv", "--output", "e.svg", "--x", "power_per_bit", "--y", "pe_analytic,pe_mc"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("left off the log axis"));
    let svg = std::fs::read_to_string(dir.path().join("e.svg")).unwrap();
    let first = svg.find("x BCSK pe_analytic").unwrap();
    let last = svg.find("x QCSK pe_mc").unwrap();
    assert!(first < last);
}

#[test]
fn selftest_command_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = molcom(dir.path(), &["selftest"]);
    assert!(out.status.success());
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
