use std::path::Path;
use std::process::{Command, Output};

use spinmem::config::{parse_config, DetuningSetting};
use spinmem::runner::{self, Figure, Overrides, FIG3_CONFIG, FIG4_CONFIG};
use spinmem::Error;

fn spinmem(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinmem"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// `(t, F)` rows of a fidelity CSV.
fn fidelity_table(csv: &str) -> Vec<(f64, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let c: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (c[0], c[3])
        })
        .collect()
}

#[test]
fn shipped_fig4_resolves_to_reference_parameters() {
    let cfg = parse_config(FIG4_CONFIG).unwrap();
    assert_eq!(cfg.width_mhz, Some(1.0));
    assert_eq!(cfg.kappa, 0.1);
    assert_eq!(cfg.gamma, 1e-4);
    assert_eq!(cfg.drive, Some((10.0, 10.5)));
    assert_eq!(cfg.coupling, Some(10.0));
    assert_eq!(cfg.target_time, 50.0);
    assert!(matches!(cfg.detuning, DetuningSetting::Optimize { .. }));
}

#[test]
fn errors_name_the_key_and_position() {
    let text = "[units]\nwidth = \"1 MHz\"\n\n[cavity]\nkappa = \"-0.1 MHz\"\nbogus = 1\n\n[run]\nhorizon = 50\n";
    let Err(Error::Config(issues)) = parse_config(text) else {
        panic!("expected configuration errors");
    };
    let keys: Vec<&str> = issues.iter().filter_map(|i| i.key.as_deref()).collect();
    assert!(keys.contains(&"cavity.kappa"), "{issues:?}");
    assert!(keys.contains(&"cavity.bogus"), "{issues:?}");
    assert!(keys.contains(&"run.horizon"), "{issues:?}");
    let kappa = issues.iter().find(|i| i.key.as_deref() == Some("cavity.kappa")).unwrap();
    assert_eq!(kappa.line, 5);
    let horizon = issues.iter().find(|i| i.key.as_deref() == Some("run.horizon")).unwrap();
    assert!(horizon.message.contains("unit"), "{horizon:?}");
}

#[test]
fn resolved_config_round_trips() {
    for text in [runner::FIG2_CONFIG, FIG3_CONFIG, FIG4_CONFIG] {
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.to_toml(), cfg.to_toml());
    }
    let bracket = "[ensemble]\ncoupling = \"3 Delta\"\nwindow_min = \"-50 Delta\"\nwindow_max = \"60 Delta\"\n\
                   [cavity]\ndetuning = \"optimize\"\ndetuning_min = \"0.25 Delta\"\n";
    let cfg = parse_config(bracket).unwrap();
    assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn physical_units_and_dimensionless_twin_agree() {
    let mhz = "[units]\nwidth = \"2 MHz\"\n[ensemble]\ncoupling = \"16 MHz\"\ngamma = \"2e-4 MHz\"\nn_spins = 300\n\
               [drive]\nb_min = \"20 MHz\"\nb_max = \"21 MHz\"\n\
               [cavity]\nkappa = \"0.2 MHz\"\ndetuning = \"3000 kHz\"\n\
               [run]\nhorizon = \"10 us\"\ndt = \"50 ns\"\n";
    let delta = "[ensemble]\ncoupling = \"8 Delta\"\ngamma = \"1e-4 Delta\"\nn_spins = 300\n\
                 [drive]\nb_min = \"10 Delta\"\nb_max = \"10.5 Delta\"\n\
                 [cavity]\nkappa = \"0.1 Delta\"\ndetuning = \"1.5 Delta\"\n\
                 [run]\nhorizon = \"20 1/Delta\"\ndt = \"0.1 1/Delta\"\n";
    let tmp = tempfile::tempdir().unwrap();
    let mut tables = Vec::new();
    for (k, text) in [mhz, delta].into_iter().enumerate() {
        let out = tmp.path().join(k.to_string());
        runner::run(runner::Command::Memory, text, &Overrides::default(), &out).unwrap();
        tables.push(fidelity_table(&String::from_utf8(read(&out, "memory.csv")).unwrap()));
    }
    assert_eq!(tables[0].len(), 201);
    assert_eq!(tables[0].len(), tables[1].len());
    for (a, b) in tables[0].iter().zip(&tables[1]) {
        assert!((a.0 - b.0).abs() < 1e-10 && (a.1 - b.1).abs() < 1e-10, "{a:?} vs {b:?}");
    }
}

#[test]
fn fig3_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs = ["a", "b"];
    for d in dirs {
        let o = spinmem(&["reproduce", "fig3", "--n-spins", "400", "--out", d], tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let manifest: serde_json::Value = serde_json::from_slice(&read(&tmp.path().join("a"), "manifest.json")).unwrap();
    let outputs: Vec<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    for name in [
        "fig3_transmission_undriven.csv",
        "fig3_transmission_driven.csv",
        "fig3_rabi_undriven.csv",
        "fig3_rabi_driven.csv",
        "fig3_peaks.txt",
        "resolved.toml",
        "manifest.json",
    ] {
        assert!(outputs.iter().any(|o| o == name), "{name} not in manifest");
    }
    for name in &outputs {
        assert_eq!(read(&tmp.path().join("a"), name), read(&tmp.path().join("b"), name), "{name} differs");
    }
    assert_eq!(manifest["config"]["n_spins"], 400);
    assert_eq!(manifest["config_sha1"], runner::git_blob_sha1(FIG3_CONFIG.as_bytes()));
}

#[test]
fn fig2_dressed_density_vanishes_below_the_band() {
    let tmp = tempfile::tempdir().unwrap();
    runner::run(runner::Command::Reproduce(Figure::Fig2), Figure::Fig2.default_config(), &Overrides::default(), tmp.path())
        .unwrap();
    // Offsets are relative to the dressed line centre (b_min + b_max)/2 = 10.25.
    let csv = String::from_utf8(read(tmp.path(), "fig2_dressed.csv")).unwrap();
    let mut seen = 0;
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v.len(), 2);
        if v[0] + 10.25 < 10.0 {
            assert_eq!(v[1], 0.0, "{line}");
            seen += 1;
        }
    }
    assert!(seen > 100);
    assert!(read(tmp.path(), "fig2_lorentzian.csv").starts_with(b"omega,density\n"));
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("scenario.toml");
    std::fs::write(
        &cfg,
        "[ensemble]\ncoupling = \"10 Delta\"\ngamma = \"1e-4 Delta\"\nn_spins = 300\n\
         [drive]\nb_min = \"10 Delta\"\nb_max = \"10.5 Delta\"\n\
         [cavity]\nkappa = \"0.1 Delta\"\n[run]\nhorizon = \"20 1/Delta\"\nscan_points = 16\n",
    )
    .unwrap();
    for (threads, out) in [("1", "t1"), ("3", "t3")] {
        let o = spinmem(&["optimize", "--config", "scenario.toml", "--threads", threads, "--out", out], tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["optimize_scan.csv", "optimize.txt", "manifest.json"] {
        assert_eq!(read(&tmp.path().join("t1"), name), read(&tmp.path().join("t3"), name), "{name}");
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "[cavity]\nkappa = \"-0.1 MHz\"\n[units]\nwidth = \"1 MHz\"\n").unwrap();
    let o = spinmem(&["memory", "--config", "bad.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("cavity.kappa"), "{err}");

    let o = spinmem(&["memory"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let o = spinmem(&["memory", "--config", "missing.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let o = spinmem(&["reproduce", "fig9"], tmp.path());
    assert_ne!(o.status.code(), Some(0));

    // A lossless single spin probed exactly on its own frequency is a pole.
    std::fs::write(
        tmp.path().join("pole.toml"),
        "[ensemble]\ncoupling = \"1 Delta\"\nn_spins = 1\n[cavity]\nkappa = \"0.1 Delta\"\n\
         [run]\ngrid_min = \"-1 Delta\"\ngrid_max = \"1 Delta\"\ngrid_points = 3\n",
    )
    .unwrap();
    let o = spinmem(&["transmission", "--config", "pole.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    std::fs::write(
        tmp.path().join("ok.toml"),
        "[ensemble]\ncoupling = \"2 Delta\"\nn_spins = 50\ngamma = \"0.01 Delta\"\n[cavity]\nkappa = \"0.1 Delta\"\n",
    )
    .unwrap();
    let o = spinmem(&["spectrum", "--config", "ok.toml", "--seed", "3"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("out/spectrum_lorentzian.csv").exists());
    let o = spinmem(&["rabi", "--config", "ok.toml", "--threads", "0"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}
