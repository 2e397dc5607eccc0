use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmpfa-pricer")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn price_writes_surface_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let price: f64 = ok(&["price", "--grid", "9", "--steps", "8", "--out", path(&out)]).trim().parse().unwrap();
    assert!(price > 0.0 && price.is_finite());

    let surface = fs::read_to_string(out.join("surface.txt")).unwrap();
    let mut lines = surface.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# lmpfa-surface N=9 xmax=300 ymax=300 tau="), "{header}");
    assert!(header.ends_with(" payoff=call-on-max"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r.split_whitespace().count() == 11));

    let tsv = fs::read_to_string(out.join("diagnostics.tsv")).unwrap();
    let records: Vec<_> = tsv.lines().skip(1).collect();
    assert_eq!(records.len(), 8);
    assert!(records.iter().all(|r| r.split('\t').count() == 4));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn table_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = |o: &str| {
        vec!["table", "--grid", "9,14", "--steps", "8", "--scheme", "all", "--seed", "5", "--out"]
            .into_iter()
            .map(String::from)
            .chain([o.to_string()])
            .collect::<Vec<_>>()
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let v = args(path(d));
        ok(&v.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let csv = fs::read(a.join("errors.csv")).unwrap();
    assert_eq!(csv, fs::read(b.join("errors.csv")).unwrap());
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("N,M,fitted-fv,lmpfa-up1,lmpfa-up2,fitted-lmpfa-up1,fitted-lmpfa-up2\n"));
    assert_eq!(text.lines().count(), 3);
    let manifest: String = fs::read_to_string(a.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 5"));
    // the manifest carries per-cell timings, so only the errors are compared bytewise
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# study\ngrid=9\nsteps=4\nscheme=lmpfa-up1\n").unwrap();
    let from_file = ok(&["table", "--config", path(&cfg)]);
    assert!(from_file.lines().nth(1).unwrap().starts_with("9,4,"));
    let overridden = ok(&["table", "--config", path(&cfg), "--steps", "6"]);
    assert!(overridden.lines().nth(1).unwrap().starts_with("9,6,"));
}

#[test]
fn bad_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "grdi=9\n").unwrap();
    let out = run(&["table", "--config", path(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn dump_matrix_layout() {
    let text = ok(&["dump-matrix", "--grid", "4", "--scheme", "lmpfa-up2"]);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# lmpfa-pricer matrix N=4 scheme=lmpfa-up2");
    let mut diag = 0;
    for l in lines {
        let f: Vec<&str> = l.split(' ').collect();
        assert_eq!(f.len(), 3, "{l}");
        let (r, c): (usize, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        let _: f64 = f[2].parse().unwrap();
        assert!(r < 16 && c < 16);
        diag += usize::from(r == c);
    }
    assert_eq!(diag, 16);
}

#[test]
fn stored_reference_on_another_domain_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ref");
    ok(&["price", "--grid", "9", "--steps", "4", "--out", path(&out)]);
    let file = out.join("surface.txt");
    let stored = format!("stored:{}", path(&file));
    // resampled onto a non-nested grid of the same domain
    ok(&["table", "--grid", "14", "--steps", "4", "--reference", &stored]);

    let text = fs::read_to_string(&file).unwrap().replacen("xmax=300", "xmax=150", 1);
    fs::write(&file, text).unwrap();
    let bad = run(&["table", "--grid", "9", "--steps", "4", "--reference", &stored]);
    let stderr = String::from_utf8_lossy(&bad.stderr);
    assert!(!bad.status.success());
    assert!(stderr.contains("grid mismatch") || stderr.contains("different domain"), "{stderr}");
}
