use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hybridqed::config::RunConfig;
use hybridqed::dynamics::{run_chevron, ChevronSetup, DecoherenceRates};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybridqed"))
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name)
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("spawn hybridqed")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL_SPECTRUM: &str = "\
[experiment]
kind = spectrum
name = small

[operating_point]
preset = table1

[layout]
n_tr = 3
n_sq = 3
n_50 = 2

[sweep]
axis = delta
start = 0 GHz
stop = 1 GHz
points = 21
transitions = 4
";

const SMALL_CHEVRON: &str = "\
[experiment]
kind = chevron
name = tiny

[chevron]
two_j = 21.6 MHz
omega_dqd = 3.66 GHz
t1 = 185 ns
t2star = 127 ns
gamma2 = 2.6 MHz
filter_sigma = 3 ns
prep_offset = 23 ns
max_step = 0.05 ns
amplitude_start = 0.5
amplitude_stop = 0.7
amplitude_points = 3
plateau_start = 0 ns
plateau_stop = 60 ns
plateau_points = 4
";

#[test]
fn presets_run_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    for (sub, file) in [("spectrum", "table1.cfg"), ("rabi", "rabi_dqd.cfg"), ("s11", "s11_multiplexed.cfg")] {
        let out = run(sub, &preset(file), dir.path(), &[]);
        assert_eq!(out.status.code(), Some(0), "{file}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["table1.csv", "table1.json", "rabi_dqd.csv", "s11_multiplexed.json"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
}

#[test]
fn unknown_key_is_config_error_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_SPECTRUM.replace("points = 21", "points = 21\nbogus = 1");
    let cfg = write(dir.path(), "bad.cfg", &text);
    let out = run("spectrum", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus") && err.contains("line 18"), "{err}");
}

#[test]
fn missing_unit_and_empty_range_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let no_unit = write(dir.path(), "a.cfg", &SMALL_SPECTRUM.replace("stop = 1 GHz", "stop = 1"));
    assert_eq!(run("spectrum", &no_unit, dir.path(), &[]).status.code(), Some(2));
    let empty = write(dir.path(), "b.cfg", &SMALL_SPECTRUM.replace("stop = 1 GHz", "stop = 0 GHz"));
    assert_eq!(run("spectrum", &empty, dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn subcommand_mismatch_and_bad_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", SMALL_SPECTRUM);
    assert_eq!(run("chevron", &cfg, dir.path(), &[]).status.code(), Some(2));
    assert_eq!(run("spectrum", &cfg, dir.path(), &["--threads", "0"]).status.code(), Some(2));
    assert_eq!(run("spectrum", &dir.path().join("nope.cfg"), dir.path(), &[]).status.code(), Some(2));
    assert_eq!(bin().arg("spectrum").output().unwrap().status.code(), Some(2));
}

#[test]
fn missing_crossing_is_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_SPECTRUM.to_string() + "crossing = 0, 1\nwindow_start = 0.9 GHz\nwindow_stop = 1 GHz\n";
    let cfg = write(dir.path(), "c.cfg", &text);
    let out = run("spectrum", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn output_is_byte_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    for (sub, text, stem) in [("spectrum", SMALL_SPECTRUM, "small"), ("chevron", SMALL_CHEVRON, "tiny")] {
        let cfg = write(dir.path(), &format!("{stem}.cfg"), text);
        let mut outputs = Vec::new();
        for (k, threads) in ["1", "4", "4"].iter().enumerate() {
            let out_dir = dir.path().join(format!("{stem}{k}"));
            let out = run(sub, &cfg, &out_dir, &["--threads", threads]);
            assert_eq!(out.status.code(), Some(0));
            outputs.push((
                std::fs::read(out_dir.join(format!("{stem}.csv"))).unwrap(),
                std::fs::read(out_dir.join(format!("{stem}.json"))).unwrap(),
            ));
        }
        assert!(outputs.windows(2).all(|w| w[0] == w[1]), "{stem} output differs between runs");
    }
}

#[test]
fn csv_header_and_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", SMALL_SPECTRUM);
    assert_eq!(run("spectrum", &cfg, dir.path(), &[]).status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("small.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "delta");
    assert_eq!(header.len(), 1 + 3 * 4);
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 21);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), header.len());
        assert!((r[0] - i as f64 * 0.05).abs() < 1e-12);
    }
    for field in text.lines().skip(1).flat_map(|l| l.split(',')) {
        let mantissa = field.split(['e', 'E']).next().unwrap();
        let digits = mantissa.chars().filter(|c| c.is_ascii_digit()).collect::<String>();
        assert!(digits.trim_start_matches('0').len() <= 12, "{field}");
    }
}

#[test]
fn json_embeds_resolved_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write(dir.path(), "s.cfg", SMALL_SPECTRUM);
    assert_eq!(run("spectrum", &cfg_path, dir.path(), &[]).status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("small.json")).unwrap()).unwrap();
    assert_eq!(json["experiment"], "spectrum");
    let original = RunConfig::from_file(&cfg_path).unwrap();
    let reparsed = RunConfig::parse(json["config_text"].as_str().unwrap()).unwrap();
    assert_eq!(reparsed, original);
    assert_eq!(json["parameters"]["device"], serde_json::to_value(original.device).unwrap());
}

#[test]
fn chevron_csv_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write(dir.path(), "t.cfg", SMALL_CHEVRON);
    assert_eq!(run("chevron", &cfg_path, dir.path(), &[]).status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("tiny.csv")).unwrap();
    let values: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(values.len(), 12);
    let cfg = RunConfig::from_file(&cfg_path).unwrap();
    let ch = cfg.chevron.expect("chevron section");
    let amps = ch.amplitudes.values().unwrap();
    let plats = ch.plateaus.values().unwrap();
    let lib = run_chevron(&ch.setup, &amps, &plats).unwrap();
    for row in &values {
        let i = amps.iter().position(|&a| (a - row[0]).abs() < 1e-12).unwrap();
        let j = plats.iter().position(|&p| (p - row[2]).abs() < 1e-12).unwrap();
        let p = *row.last().unwrap();
        assert!((p - lib.population[i][j]).abs() <= 1e-11 * p.abs().max(1.0), "{p} vs {}", lib.population[i][j]);
    }
}

#[test]
fn zero_plateau_without_exchange_is_pure_decay() {
    let rates = DecoherenceRates { t1_tr: 185.0, t2star_tr: 370.0, gamma2_dqd: 0.0 };
    let setup = ChevronSetup { two_j: 0.0, rates, ..ChevronSetup::default() };
    let cell = setup.cell(0.6, 0.0).unwrap();
    let readout = setup.protocol(0.6, 0.0).readout_time();
    let expected = (-readout / 185.0f64).exp();
    assert!((cell.population - expected).abs() < 1e-9, "{} vs {expected}", cell.population);
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(bin().arg("--version").output().unwrap().status.code(), Some(0));
}

#[test]
fn s11_matches_golden_csv() {
    let golden_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let dir = tempfile::tempdir().unwrap();
    let out = run("s11", &golden_dir.join("s11_small.cfg"), dir.path(), &["--threads", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let produced = std::fs::read(dir.path().join("s11_small.csv")).unwrap();
    let golden_path = golden_dir.join("s11_small.csv");
    if std::env::var_os("HYBRIDQED_BLESS").is_some() {
        std::fs::write(&golden_path, &produced).unwrap();
    }
    let golden = std::fs::read(&golden_path).unwrap();
    assert!(produced == golden, "s11_small.csv differs from golden; rerun with HYBRIDQED_BLESS=1 if intended");
}
