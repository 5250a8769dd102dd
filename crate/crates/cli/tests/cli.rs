use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn core(p: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core").join(p)
}

fn gridloom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridloom"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_run_then_drc_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let net = core("fixtures/ota5t.sp");
    let pdk = core("data/pdk/mock14.json");
    let o = gridloom(&["--netlist", s(&net), "--pdk", s(&pdk), "--out", s(&out), "--emit-gds", "--emit-dot", "--report-parasitics"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["layout.json", "layout.gds", "graph.dot", "parasitics.csv", "summary.json", "constraints.json", "floorplan.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let check = dir.path().join("check");
    let o = gridloom(&["drc-only", "--layout", s(&out.join("layout.json")), "--pdk", s(&pdk), "--out", s(&check)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("clean"));
}

#[test]
fn missing_pdk_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let net = core("fixtures/ota5t.sp");
    let o = gridloom(&["--netlist", s(&net), "--pdk", "/no/such/pdk.json", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_flag_exits_2() {
    assert_eq!(gridloom(&["--frobnicate"]).status.code(), Some(2));
    assert_eq!(gridloom(&[]).status.code(), Some(2));
}

#[test]
fn malformed_netlist_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.sp");
    std::fs::write(&bad, ".subckt t a b\nr1 a b 1k\nq1 a b c npn\n.ends\n").unwrap();
    let o = gridloom(&["parse-only", "--netlist", s(&bad), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn drc_only_flags_a_broken_layout() {
    let dir = tempfile::tempdir().unwrap();
    let layout = dir.path().join("bad.json");
    std::fs::write(
        &layout,
        r#"{"name":"t","bbox":{"x0":0,"y0":0,"x1":800,"y1":800},"shapes":[{"layer":"M1","rect":{"x0":24,"y0":0,"x1":56,"y1":40},"net":"a"}],"pins":{},"children":[],"props":{}}"#,
    )
    .unwrap();
    let pdk = core("data/pdk/mock14.json");
    let o = gridloom(&["drc-only", "--layout", s(&layout), "--pdk", s(&pdk), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(dir.path().join("drc.json").exists());
}

#[test]
fn split_stages_match_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let net = core("fixtures/scfilter.sp");
    let pdk = core("data/pdk/mock14.json");
    let full = dir.path().join("full");
    let o = gridloom(&["--netlist", s(&net), "--pdk", s(&pdk), "--out", s(&full), "--seed", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let st = dir.path().join("staged");
    let steps: Vec<Vec<String>> = vec![
        vec!["parse-only".into(), "--netlist".into(), s(&net).into()],
        vec!["annotate-only".into(), "--flat".into(), s(&st.join("flat.json")).into()],
        vec![
            "place-only".into(),
            "--annotation".into(),
            s(&st.join("annotation.json")).into(),
            "--pdk".into(),
            s(&pdk).into(),
            "--seed".into(),
            "7".into(),
        ],
        vec![
            "route-only".into(),
            "--annotation".into(),
            s(&st.join("annotation.json")).into(),
            "--floorplan".into(),
            s(&st.join("floorplan.json")).into(),
            "--pdk".into(),
            s(&pdk).into(),
        ],
    ];
    for mut step in steps {
        step.push("--out".into());
        step.push(s(&st).into());
        let args: Vec<&str> = step.iter().map(String::as_str).collect();
        let o = gridloom(&args);
        assert!(o.status.success(), "{:?}: {}", step, String::from_utf8_lossy(&o.stderr));
    }
    for f in ["flat.json", "annotation.json", "floorplan.json", "layout.json"] {
        assert_eq!(std::fs::read(full.join(f)).unwrap(), std::fs::read(st.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn equal_seeds_give_identical_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let net = core("fixtures/cmota.sp");
    let pdk = core("data/pdk/mock65.json");
    let mut outs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("r{k}"));
        let o = gridloom(&["--netlist", s(&net), "--pdk", s(&pdk), "--out", s(&out), "--seed", "3", "--emit-gds"]);
        assert!(o.status.success());
        outs.push(out);
    }
    for f in ["layout.json", "layout.gds"] {
        assert_eq!(std::fs::read(outs[0].join(f)).unwrap(), std::fs::read(outs[1].join(f)).unwrap(), "{f}");
    }
}
