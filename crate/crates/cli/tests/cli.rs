use std::fs;
use std::process::{Command, Output};

fn rnsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rnsim")).args(args).env_remove("RNSIM_CONFIG").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn convert_examples() {
    let o = rnsim(&["convert", "23", "--moduli", "3,5,7"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "residues: 2,3,2; reconstructed: 23");

    let o = rnsim(&["convert", "0", "--moduli", "3,5,7"]);
    assert_eq!(stdout(&o).trim(), "residues: 0,0,0; reconstructed: 0");

    let o = rnsim(&["convert", "-23", "--preset", "rns4"]);
    assert!(o.status.success());
    assert!(stdout(&o).ends_with("reconstructed: -23\n"));

    let o = rnsim(&["convert", "23", "--moduli", "4,6"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("moduli 4 and 6 share factor 2"));

    let o = rnsim(&["convert", "-53", "--moduli", "3,5,7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("signed range"));
}

#[test]
fn energy_summary_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.csv");
    let o = rnsim(&["energy", "--preset", "rns4", "--h", "128", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("(168.5x)"), "{}", stdout(&o));
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("b,mode,n,b_adc_effective,dac_J,adc_J,ratio\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn rrns_perr_zero_noise() {
    let o = rnsim(&["rrns-perr", "--p", "0", "--trials", "2000", "--out", "-"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        header[..12],
        ["bit_width", "n", "k", "p", "R", "p_c", "p_d", "p_u", "p_err_analytic", "p_err_empirical", "p_err_limit", "trials"]
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!((f[8], f[9]), ("0", "0"));
    }
}

#[test]
fn dotprod_five_rows() {
    let o = rnsim(&["dotprod-error", "--b", "4..8", "--h", "128", "--trials", "300", "--out", "-"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().next().unwrap().ends_with(",ratio"));
    // summary table went to stderr since the CSV took stdout
    assert_eq!(stderr(&o).lines().count(), 7);
}

#[test]
fn config_file_env_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[rrns_perr]\np = [0.05]\nattempts = [1, 2]\ntrials = 300\nseed = 4\n").unwrap();
    let run = |extra: &[&str], env: bool| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_rnsim"));
        c.env_remove("RNSIM_CONFIG");
        if env {
            c.env("RNSIM_CONFIG", &cfg);
        }
        let o = c.args(["rrns-perr", "--out", "-"]).args(extra).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
    };
    let from_env = run(&[], true);
    assert_eq!(from_env.lines().count(), 3);
    assert!(from_env.lines().nth(1).unwrap().ends_with(",300,4"));
    let from_flag = run(&["--config", cfg.to_str().unwrap()], false);
    assert_eq!(from_env, from_flag);
    let overridden = run(&["--set", "trials=500", "--trials", "400"], true);
    assert!(overridden.lines().nth(1).unwrap().ends_with(",400,4"));
    let set_only = run(&["--set", "trials=500"], true);
    assert!(set_only.lines().nth(1).unwrap().ends_with(",500,4"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[energy]\nbogus = 1\n").unwrap();
    let o = rnsim(&["energy", "--config", cfg.to_str().unwrap(), "--out", "-"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));

    fs::write(&cfg, "[nope]\n").unwrap();
    assert_eq!(rnsim(&["energy", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(rnsim(&["energy", "--set", "h"]).status.code(), Some(2));
    assert_eq!(rnsim(&["energy", "--b", "9"]).status.code(), Some(2));
    assert_eq!(rnsim(&["accuracy", "--modes", "analog"]).status.code(), Some(2));
    assert_eq!(rnsim(&["energy", "--jobs", "0"]).status.code(), Some(2));
}

#[test]
fn io_errors_exit_3() {
    let o = rnsim(&["energy", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(o.status.code(), Some(3));
    let o = rnsim(&["energy", "--config", "/nonexistent-dir/c.toml"]);
    assert_eq!(o.status.code(), Some(3));
    let o = rnsim(&["infer", "--manifest", "/nonexistent-dir/m.toml", "--out", "-"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn help_lists_every_subcommand_and_flag() {
    let top = stdout(&rnsim(&["--help"]));
    for sub in ["convert", "dotprod-error", "accuracy", "noise-sweep", "rrns-perr", "energy", "infer"] {
        assert!(top.contains(sub), "{sub}");
        let help = stdout(&rnsim(&[sub, "--help"]));
        for flag in ["--config", "--set", "--jobs", "--out"] {
            assert!(help.contains(flag), "{sub} {flag}");
        }
    }
    let help = stdout(&rnsim(&["rrns-perr", "--help"]));
    for flag in ["--moduli", "--preset", "--k", "--p", "--attempts", "--trials", "--seed", "--exact"] {
        assert!(help.contains(flag), "{flag}");
    }
}

#[test]
fn infer_modes() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("snap.toml");
    let o = rnsim(&["infer", "--mode", "rns", "--b", "6", "--samples", "100", "--out", "-", "--snapshot", snap.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 101);
    assert!(stderr(&o).contains("accuracy"));
    let snapshot = fs::read_to_string(&snap).unwrap();
    assert!(snapshot.contains("mode = \"rns\"") && snapshot.contains("samples = 100"));

    // the snapshot replays the run
    let cfg = dir.path().join("replay.toml");
    fs::write(&cfg, format!("[infer]\n{snapshot}")).unwrap();
    let again = rnsim(&["infer", "--config", cfg.to_str().unwrap(), "--out", "-"]);
    assert_eq!(stdout(&again), stdout(&o));

    let o = rnsim(&["infer", "--mode", "fixed_point", "--b", "4", "--p", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = rnsim(&["infer", "--mode", "rns", "--attempts", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn infer_with_manifest_file() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures");
    fs::copy(format!("{fixtures}/digits_mlp.rtf"), dir.path().join("digits_mlp.rtf")).unwrap();
    fs::copy(format!("{fixtures}/digits_mlp.toml"), dir.path().join("model.toml")).unwrap();
    let m = dir.path().join("model.toml");
    let a = rnsim(&["infer", "--manifest", m.to_str().unwrap(), "--mode", "float", "--out", "-"]);
    let b = rnsim(&["infer", "--mode", "float", "--out", "-"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stderr(&a).contains("accuracy 0.9750"));
}
