use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gwcca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwcca"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    gwcca(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_synth(dir: &Path) -> String {
    let prefix = dir.join("d");
    let out = gwcca(&[
        "synth",
        "--dataset",
        "1",
        "--n",
        "300",
        "--seed",
        "4",
        "--out",
        p(&prefix),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    format!("{}_data.csv", p(&prefix))
}

#[test]
fn synth_fit_eval_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_synth(dir.path());
    let truth = data.replace("_data.csv", "_truth.csv");
    let header = fs::read_to_string(&truth).unwrap();
    assert!(header.starts_with("id,x,y,rho1_true,rho2_true\n"));

    let fit = dir.path().join("f");
    let out = gwcca(&["fit", "--data", &data, "--out", p(&fit), "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for suffix in [
        "local.csv",
        "rho.csv",
        "long.csv",
        "global.csv",
        "scan.csv",
        "summary_rho.csv",
        "summary_loadings.csv",
        "manifest.toml",
    ] {
        assert!(dir.path().join(format!("f_{suffix}")).exists(), "{suffix}");
    }

    let table = dir.path().join("eval.csv");
    let rho = format!("{}_rho.csv", p(&fit));
    let global = format!("{}_global.csv", p(&fit));
    assert_eq!(
        code(&[
            "eval",
            "--fit",
            &rho,
            "--truth",
            &truth,
            "--baseline",
            &global,
            "--out",
            p(&table),
            "--label",
            "I"
        ]),
        0
    );
    let text = fs::read_to_string(&table).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "dataset,variate,metric,gwcca,cca");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("I,1,MAE,"));

    let local = format!("{}_local.csv", p(&fit));
    let sum = dir.path().join("s");
    assert_eq!(code(&["summarize", "--results", &local, "--out", p(&sum)]), 0);
    let rho_rows = fs::read_to_string(dir.path().join("s_summary_rho.csv")).unwrap();
    assert!(rho_rows.starts_with("variate,min,q25,median,q75,max,mean,global,n\n1,"));
}

#[test]
fn fixed_bandwidths_and_scan() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_synth(dir.path());
    let a = dir.path().join("a");
    assert_eq!(
        code(&[
            "fit",
            "--data",
            &data,
            "--k",
            "60",
            "--kernel",
            "bisquare",
            "--out",
            p(&a)
        ]),
        0
    );
    let manifest = fs::read_to_string(dir.path().join("a_manifest.toml")).unwrap();
    assert!(manifest.contains("bandwidth = \"adaptive k=60\""));
    assert!(manifest.contains("kernel = \"bisquare\""));
    assert!(!dir.path().join("a_scan.csv").exists());

    let b = dir.path().join("b");
    assert_eq!(
        code(&["fit", "--data", &data, "--bandwidth", "0.4", "--out", p(&b)]),
        0
    );

    let s = dir.path().join("s");
    let out = gwcca(&["scan", "--data", &data, "--out", p(&s)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("chosen k = "));
    assert!(dir.path().join("s_scan.csv").exists());
}

#[test]
fn identical_bytes_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_synth(dir.path());
    let mut files: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for (run, threads) in ["1", "1", "8", "8"].iter().enumerate() {
        let prefix = dir.path().join(format!("r{run}"));
        assert_eq!(
            code(&["fit", "--data", &data, "--threads", threads, "--out", p(&prefix)]),
            0
        );
        let mut got = Vec::new();
        for suffix in [
            "local.csv",
            "rho.csv",
            "long.csv",
            "global.csv",
            "scan.csv",
            "summary_rho.csv",
            "manifest.toml",
        ] {
            got.push((
                suffix.to_string(),
                fs::read(dir.path().join(format!("r{run}_{suffix}"))).unwrap(),
            ));
        }
        files.push(got);
    }
    for other in &files[1..] {
        assert_eq!(&files[0], other);
    }
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_synth(dir.path());
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!("[data]\npath = \"{data}\"\n[kernel]\nfamily = \"tricube\"\nbandwidth = 0.5\n[run]\nout = \"{}\"\n", p(&dir.path().join("c"))),
    )
    .unwrap();
    assert_eq!(code(&["fit", "--config", p(&cfg)]), 0);
    let m = fs::read_to_string(dir.path().join("c_manifest.toml")).unwrap();
    assert!(m.contains("kernel = \"tricube\""));
    // --k on the command line replaces the file's distance bandwidth
    assert_eq!(
        code(&[
            "fit",
            "--config",
            p(&cfg),
            "--k",
            "50",
            "--out",
            p(&dir.path().join("d"))
        ]),
        0
    );
    let m = fs::read_to_string(dir.path().join("d_manifest.toml")).unwrap();
    assert!(m.contains("adaptive k=50"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_synth(dir.path());
    let out = p(&dir.path().join("o")).to_string();

    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);

    // input and schema
    assert_eq!(code(&["fit", "--data", "/no/such/file.csv", "--out", &out]), 2);
    let cfg = dir.path().join("schema.toml");
    fs::write(&cfg, "[data]\ny_columns = [\"y1\", \"missing\"]\n").unwrap();
    assert_eq!(
        code(&["fit", "--config", p(&cfg), "--data", &data, "--out", &out]),
        2
    );
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "id,x,y,x1,y1\n0,0,0,abc,1\n").unwrap();
    assert_eq!(code(&["fit", "--data", p(&bad), "--out", &out]), 2);

    // numerical: a constant variable cannot be standardised
    let mut text = String::from("id,x,y,x1,x2,y1,y2\n");
    for i in 0..40 {
        let f = i as f64;
        text += &format!(
            "{i},{},{},{},1.0,{},{}\n",
            f.sin(),
            f.cos(),
            f * 0.37 % 1.0,
            (f * 0.71) % 1.0,
            (f * 0.13).sin()
        );
    }
    let flat = dir.path().join("flat.csv");
    fs::write(&flat, text).unwrap();
    assert_eq!(code(&["fit", "--data", p(&flat), "--k", "20", "--out", &out]), 3);

    // configuration
    assert_eq!(
        code(&[
            "fit",
            "--data",
            &data,
            "--k",
            "5",
            "--bandwidth",
            "1",
            "--out",
            &out
        ]),
        4
    );
    assert_eq!(
        code(&["fit", "--data", &data, "--kernel", "cosine", "--out", &out]),
        4
    );
    assert_eq!(code(&["fit", "--data", &data]), 4);
    assert_eq!(code(&["fit", "--data", &data, "--k", "100000", "--out", &out]), 4);
    fs::write(&cfg, "[kernel]\nwidth = 2\n").unwrap();
    assert_eq!(
        code(&["fit", "--config", p(&cfg), "--data", &data, "--out", &out]),
        4
    );
    assert_eq!(code(&["synth", "--dataset", "3", "--out", &out]), 4);
    assert_eq!(code(&["synth", "--dataset", "1", "--p", "1", "--out", &out]), 4);
    assert_eq!(code(&["frobnicate"]), 4);
}
