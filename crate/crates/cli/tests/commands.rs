use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shl_cli::io::{read_counts, read_outcomes, write_counts, write_outcomes};
use shl_cli::report::{from_json, to_json, ReportDocument};

fn shl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shl"))
        .args(args)
        .env_remove("SHL_THREADS")
        .output()
        .expect("run shl")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Self(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }
}

fn report(path: &Path) -> ReportDocument {
    from_json(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_device_writes_deterministic_rows() {
    let d = Dir::new();
    let run = |name: &str| {
        shl(&[
            "simulate-device",
            "--runs",
            "4",
            "--items",
            "250",
            "--seed",
            "3",
            "--out",
            &d.arg(name),
        ])
    };
    let o = run("a.csv");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 6);
    assert!(stdout(&o).contains("pooled"));
    let a = fs::read(d.path("a.csv")).unwrap();
    assert_eq!(a.iter().filter(|&&b| b == b'\n').count(), 1001);
    assert!(a.starts_with(b"run_id,t,outcome\n1,1,"));
    run("b.csv");
    assert_eq!(a, fs::read(d.path("b.csv")).unwrap());
}

#[test]
fn outcomes_csv_round_trips_byte_for_byte() {
    let d = Dir::new();
    shl(&[
        "simulate-device",
        "--runs",
        "3",
        "--items",
        "100",
        "--out",
        &d.arg("a.csv"),
    ]);
    let bytes = fs::read(d.path("a.csv")).unwrap();
    let rs = read_outcomes(&bytes[..]).unwrap();
    let mut again = Vec::new();
    write_outcomes(&mut again, &rs).unwrap();
    assert_eq!(bytes, again);
}

#[test]
fn single_run_cannot_be_audited() {
    let d = Dir::new();
    shl(&[
        "simulate-device",
        "--runs",
        "1",
        "--items",
        "500",
        "--out",
        &d.arg("a.csv"),
    ]);
    let o = shl(&["audit", "--in", &d.arg("a.csv"), "--out", &d.arg("r.json")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("at least 2 runs"), "{}", stderr(&o));
}

#[test]
fn audit_flags_pooled_contexts() {
    let d = Dir::new();
    shl(&[
        "simulate-device",
        "--runs",
        "8",
        "--items",
        "2000",
        "--out",
        &d.arg("a.csv"),
    ]);
    let o = shl(&[
        "audit",
        "--in",
        &d.arg("a.csv"),
        "--perm",
        "99",
        "--out",
        &d.arg("r.json"),
    ]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let doc = report(&d.path("r.json"));
    let hom = doc.homogeneity.unwrap();
    assert!(hom.result("chi2_homogeneity").unwrap().p_value < 1e-300);
    assert!(doc.verdict_text.contains("INHOMOGENEOUS"));
}

#[test]
fn audit_passes_single_context() {
    let d = Dir::new();
    shl(&[
        "simulate-device",
        "--runs",
        "8",
        "--items",
        "2000",
        "--context",
        "L",
        "--seed",
        "2",
        "--out",
        &d.arg("a.csv"),
    ]);
    let o = shl(&["audit", "--in", &d.arg("a.csv"), "--out", &d.arg("r.json")]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn audit_rejects_truncated_rows_with_line_number() {
    let d = Dir::new();
    fs::write(d.path("bad.csv"), "run_id,t,outcome\n1,1,4\n1,2,4\n1,3\n").unwrap();
    let o = shl(&[
        "audit",
        "--in",
        &d.arg("bad.csv"),
        "--out",
        &d.arg("r.json"),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn audit_reads_value_series() {
    let d = Dir::new();
    let body: String = (0..60)
        .map(|i| format!("{}\n", (i * 37 % 11) as f64 + 0.5))
        .collect();
    fs::write(d.path("v.csv"), format!("value\n{body}")).unwrap();
    let o = shl(&["audit", "--in", &d.arg("v.csv"), "--out", &d.arg("r.json")]);
    assert!([0, 1].contains(&code(&o)), "{}", stderr(&o));
    let doc = report(&d.path("r.json"));
    assert_eq!(doc.significance.unwrap().n, 60);
    assert_eq!(doc.homogeneity.unwrap().results.len(), 4);
}

#[test]
fn eberhard_divisibility_is_enforced() {
    let d = Dir::new();
    let o = shl(&[
        "simulate-eberhard",
        "--pairs",
        "29",
        "--bins",
        "30",
        "--out",
        &d.arg("c.csv"),
    ]);
    assert_eq!(code(&o), 2);
}

fn mean_and_k(d: &Dir, pairs: &str) -> (f64, f64) {
    let name = format!("c{pairs}.csv");
    let o = shl(&[
        "simulate-eberhard",
        "--eta",
        "1",
        "--r",
        "1",
        "--angles",
        "0,45,67.5,112.5",
        "--pairs",
        pairs,
        "--out",
        &d.arg(&name),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let grab = |key: &str| -> f64 {
        out.lines()
            .find(|l| l.starts_with(key))
            .and_then(|l| l.split_whitespace().last())
            .unwrap()
            .parse()
            .unwrap()
    };
    (grab("mean J per bin"), grab("k_sigma"))
}

#[test]
fn optimal_angles_violate_more_clearly_with_more_pairs() {
    let d = Dir::new();
    let (m1, k1) = mean_and_k(&d, "30000");
    let (m2, k2) = mean_and_k(&d, "3000000");
    assert!(m1 < 0.0 && m2 < 0.0);
    assert!(k2.abs() > k1.abs());
}

#[test]
fn counts_csv_round_trips_byte_for_byte() {
    let d = Dir::new();
    shl(&[
        "simulate-eberhard",
        "--eta",
        "0.9",
        "--r",
        "0.5",
        "--pairs",
        "3000",
        "--out",
        &d.arg("c.csv"),
    ]);
    let bytes = fs::read(d.path("c.csv")).unwrap();
    assert!(bytes
        .starts_with(b"a,b,bin,n_oo,n_oe,n_eo,n_ee,n_ou,n_uo,n_eu,n_ue,n_uu,nA_o,nB_o,trials\n"));
    let counts = read_counts(&bytes[..]).unwrap();
    assert_eq!(counts.len(), 120);
    let mut again = Vec::new();
    write_counts(&mut again, &counts).unwrap();
    assert_eq!(bytes, again);
}

#[test]
fn violating_counts_are_rejected_and_clean() {
    let d = Dir::new();
    shl(&[
        "simulate-eberhard",
        "--pairs",
        "300000",
        "--seed",
        "4",
        "--out",
        &d.arg("c.csv"),
    ]);
    let o = shl(&[
        "significance",
        "--in",
        &d.arg("c.csv"),
        "--out",
        &d.arg("r.json"),
        "--audit",
    ]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let doc = report(&d.path("r.json"));
    assert!(
        doc.verdict_text.contains("H0 rejected"),
        "{}",
        doc.verdict_text
    );
    assert!(
        doc.verdict_text.contains("audit: HOMOGENEOUS"),
        "{}",
        doc.verdict_text
    );
    assert_eq!(doc.per_bin_j.as_ref().unwrap().len(), 30);
    assert!(doc.chebyshev_conf.unwrap() > 0.99);
}

#[test]
fn interleaved_sub_experiments_fail_the_audit() {
    let d = Dir::new();
    shl(&[
        "simulate-eberhard",
        "--eta",
        "1",
        "--pairs",
        "300000",
        "--seed",
        "1",
        "--out",
        &d.arg("a.csv"),
    ]);
    shl(&[
        "simulate-eberhard",
        "--eta",
        "0.9",
        "--pairs",
        "300000",
        "--seed",
        "2",
        "--out",
        &d.arg("b.csv"),
    ]);
    let a = read_counts(&fs::read(d.path("a.csv")).unwrap()[..]).unwrap();
    let b = read_counts(&fs::read(d.path("b.csv")).unwrap()[..]).unwrap();
    let mixed: Vec<_> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| if x.bin % 2 == 0 { *x } else { *y })
        .collect();
    let mut buf = Vec::new();
    write_counts(&mut buf, &mixed).unwrap();
    fs::write(d.path("mixed.csv"), buf).unwrap();
    let o = shl(&[
        "significance",
        "--in",
        &d.arg("mixed.csv"),
        "--out",
        &d.arg("r.json"),
        "--audit",
    ]);
    assert_eq!(code(&o), 1, "{}{}", stdout(&o), stderr(&o));
    let doc = report(&d.path("r.json"));
    assert!(doc.significance.unwrap().k_sigma.unwrap().abs() > 10.0);
    assert!(doc.verdict_text.contains("H0 rejected"));
    assert!(
        doc.verdict_text.contains("audit: INHOMOGENEOUS"),
        "{}",
        doc.verdict_text
    );
}

fn zero_counts(bins: u64, skip_last: bool) -> String {
    let mut s =
        String::from("a,b,bin,n_oo,n_oe,n_eo,n_ee,n_ou,n_uo,n_eu,n_ue,n_uu,nA_o,nB_o,trials\n");
    for bin in 0..bins {
        for (a, b) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            if skip_last && bin == bins - 1 && (a, b) == (2, 2) {
                continue;
            }
            s.push_str(&format!("{a},{b},{bin},0,0,0,0,0,0,0,0,0,0,0,0\n"));
        }
    }
    s
}

#[test]
fn all_zero_counts_are_degenerate() {
    let d = Dir::new();
    fs::write(d.path("z.csv"), zero_counts(30, false)).unwrap();
    let o = shl(&[
        "significance",
        "--in",
        &d.arg("z.csv"),
        "--out",
        &d.arg("r.json"),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = report(&d.path("r.json"));
    assert!(doc.significance.unwrap().degenerate);
    assert!(doc.verdict_text.contains("not rejected"));
    assert_eq!(doc.chebyshev_conf, None);
}

#[test]
fn missing_setting_is_an_error() {
    let d = Dir::new();
    fs::write(d.path("z.csv"), zero_counts(30, true)).unwrap();
    let o = shl(&[
        "significance",
        "--in",
        &d.arg("z.csv"),
        "--out",
        &d.arg("r.json"),
    ]);
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("settings") || stderr(&o).contains("setting"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn unequal_trials_are_rescaled_with_a_warning() {
    let d = Dir::new();
    shl(&[
        "simulate-eberhard",
        "--pairs",
        "3000",
        "--out",
        &d.arg("c.csv"),
    ]);
    let mut counts = read_counts(&fs::read(d.path("c.csv")).unwrap()[..]).unwrap();
    counts[0].joint[2][2] += 3;
    counts[0].trials += 3;
    let mut buf = Vec::new();
    write_counts(&mut buf, &counts).unwrap();
    fs::write(d.path("u.csv"), buf).unwrap();
    let o = shl(&[
        "significance",
        "--in",
        &d.arg("u.csv"),
        "--out",
        &d.arg("r.json"),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = report(&d.path("r.json"));
    assert_eq!(doc.warnings.len(), 1);
    assert!(doc.warnings[0].contains("[0]"));
}

fn optimize_j(eta: &str) -> f64 {
    let d = Dir::new();
    let o = shl(&[
        "optimize",
        "--eta",
        eta,
        "--multistart",
        "8",
        "--out",
        &d.arg("s.json"),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path("s.json")).unwrap()).unwrap();
    assert!(v["angles_deg"]["alpha1"].is_f64() && v["angles_rad"]["beta2"].is_f64());
    v["j_pp"].as_f64().unwrap()
}

#[test]
fn optimize_command() {
    assert!((optimize_j("1") + 0.2071).abs() < 1e-4);
    assert!(optimize_j("0.6") >= -1e-6);
    let d = Dir::new();
    assert_eq!(
        code(&shl(&[
            "optimize",
            "--eta",
            "1.5",
            "--out",
            &d.arg("s.json")
        ])),
        2
    );
}

#[test]
fn optimized_settings_feed_the_simulator() {
    let d = Dir::new();
    shl(&[
        "optimize",
        "--eta",
        "0.9",
        "--multistart",
        "6",
        "--out",
        &d.arg("s.json"),
    ]);
    let o = shl(&[
        "simulate-eberhard",
        "--settings",
        &d.arg("s.json"),
        "--pairs",
        "30000",
        "--out",
        &d.arg("c.csv"),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("model J per bin"));
}

#[test]
fn report_emits_svg_and_tsv() {
    let d = Dir::new();
    shl(&[
        "simulate-eberhard",
        "--pairs",
        "30000",
        "--out",
        &d.arg("c.csv"),
    ]);
    shl(&[
        "significance",
        "--in",
        &d.arg("c.csv"),
        "--out",
        &d.arg("r.json"),
    ]);
    let o = shl(&[
        "report",
        "--in",
        &d.arg("r.json"),
        "--svg",
        &d.arg("j.svg"),
        "--tsv",
        &d.arg("j.tsv"),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg = fs::read_to_string(d.path("j.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).expect("well-formed SVG");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert!(!svg.contains("href"));
    let tsv = fs::read_to_string(d.path("j.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 31);
    assert_eq!(tsv.lines().next(), Some("bin\tj"));
}

#[test]
fn report_without_per_bin_values_is_an_error() {
    let d = Dir::new();
    shl(&[
        "simulate-device",
        "--runs",
        "3",
        "--items",
        "200",
        "--out",
        &d.arg("a.csv"),
    ]);
    shl(&["audit", "--in", &d.arg("a.csv"), "--out", &d.arg("r.json")]);
    let o = shl(&[
        "report",
        "--in",
        &d.arg("r.json"),
        "--svg",
        &d.arg("j.svg"),
        "--tsv",
        &d.arg("j.tsv"),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no per-bin J values"), "{}", stderr(&o));
    fs::write(d.path("bad.json"), "{").unwrap();
    let o = shl(&[
        "report",
        "--in",
        &d.arg("bad.json"),
        "--svg",
        &d.arg("j.svg"),
        "--tsv",
        &d.arg("j.tsv"),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn report_json_round_trips() {
    let d = Dir::new();
    shl(&[
        "simulate-eberhard",
        "--eta",
        "0.85",
        "--r",
        "0.4",
        "--pairs",
        "30000",
        "--out",
        &d.arg("c.csv"),
    ]);
    shl(&[
        "significance",
        "--in",
        &d.arg("c.csv"),
        "--out",
        &d.arg("r.json"),
        "--audit",
    ]);
    let text = fs::read_to_string(d.path("r.json")).unwrap();
    let doc = from_json(&text).unwrap();
    assert_eq!(to_json(&doc).unwrap(), text);
    assert_eq!(from_json(&to_json(&doc).unwrap()).unwrap(), doc);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let d = Dir::new();
    for t in ["1", "4"] {
        let c = format!("c{t}.csv");
        let r = format!("r{t}.json");
        shl(&[
            "--threads",
            t,
            "simulate-eberhard",
            "--pairs",
            "30000",
            "--out",
            &d.arg(&c),
        ]);
        shl(&[
            "--threads",
            t,
            "significance",
            "--in",
            &d.arg("c1.csv"),
            "--audit",
            "--out",
            &d.arg(&r),
        ]);
    }
    assert_eq!(
        fs::read(d.path("c1.csv")).unwrap(),
        fs::read(d.path("c4.csv")).unwrap()
    );
    assert_eq!(
        fs::read(d.path("r1.json")).unwrap(),
        fs::read(d.path("r4.json")).unwrap()
    );
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&shl(&["bogus"])), 2);
    assert_eq!(code(&shl(&["audit"])), 2);
    assert_eq!(code(&shl(&["--help"])), 0);
}
