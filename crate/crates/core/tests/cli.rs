mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::write;

fn maple(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maple")).arg("--workspace").arg(ws).args(args).output().unwrap()
}

fn text(out: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
}

fn nfv() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = maple(dir.path(), &["init", "--fixture", "nfv"]);
    assert!(out.status.success(), "{}", text(&out));
    dir
}

/// Compares against `tests/golden/<name>`; `MAPLE_BLESS=1` rewrites it.
fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("MAPLE_BLESS").is_some() {
        write(path.parent().unwrap(), name, actual);
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(actual, expected, "{name} differs from golden output");
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(maple(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(maple(dir.path(), &["--version"]).status.code(), Some(0));
    assert_eq!(maple(dir.path(), &["bogus"]).status.code(), Some(1));
    assert_eq!(maple(dir.path(), &["enact", "x.pm.json"]).status.code(), Some(1));
}

#[test]
fn full_fixture_enactment() {
    let ws = nfv();
    let out = maple(ws.path(), &["enact", "flows/main.pm.json", "--config", "launch.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let t = text(&out);
    assert!(t.contains("report: .maple/runs/nfv-1/report.json"), "{t}");
    for f in ["out/nfontology.model", "out/nsdinfo.model", "out/catalog-notification.model"] {
        assert!(ws.path().join(f).is_file(), "{f} missing");
    }
    let report = maple(ws.path(), &["report", "nfv-1"]);
    assert!(report.status.success());
    assert!(text(&report).contains("NSOnboarding.ValidateAndCatalog"));
    let json = maple(ws.path(), &["--json", "report", "nfv-1"]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v["outcome"]["status"], "success");
}

#[test]
fn failing_step_exits_one() {
    let ws = nfv();
    let flow = ws.path().join("flows/NSDesign.pm.json");
    let pm = std::fs::read_to_string(&flow).unwrap();
    std::fs::write(&flow, pm.replace("refine_nsd.builtin.json", "fail.builtin.json")).unwrap();
    write(
        ws.path(),
        "transformations/fail.builtin.json",
        r#"{"name": "fail", "op": "fail", "parameters": [
  {"name": "in", "direction": "in", "metamodel": "nsd", "modelRef": "in"},
  {"name": "out", "direction": "out", "metamodel": "nsd", "modelRef": "out"}]}"#,
    );
    let out = maple(ws.path(), &["enact", "flows/main.pm.json", "--config", "launch.json"]);
    assert_eq!(out.status.code(), Some(1), "{}", text(&out));
    assert!(text(&out).contains("NSDesign.RefineNSD"));
}

#[test]
fn cyclic_model_is_rejected() {
    let ws = tempfile::tempdir().unwrap();
    write(
        ws.path(),
        "loop.pm.json",
        r#"{"name": "Loop", "nodes": [
  {"name": "s", "kind": "initial"}, {"name": "a", "kind": "action", "impl": "x.builtin.json"},
  {"name": "b", "kind": "action", "impl": "x.builtin.json"}, {"name": "e", "kind": "final"}],
 "edges": [
  {"kind": "control", "source": "s", "target": "a"}, {"kind": "control", "source": "a", "target": "b"},
  {"kind": "control", "source": "b", "target": "a"}, {"kind": "control", "source": "b", "target": "e"}]}"#,
    );
    let out = maple(ws.path(), &["pm", "validate", "loop.pm.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).contains("cycle"), "{}", text(&out));
}

#[test]
fn malformed_inputs_do_not_crash() {
    let ws = tempfile::tempdir().unwrap();
    let junk = ["", "{", "[]", "{\"name\": 3}", "\u{0}\u{1}binary", "{\"name\":\"x\",\"nodes\":[{}]}"];
    for (i, body) in junk.iter().enumerate() {
        let rel = format!("bad{i}.pm.json");
        write(ws.path(), &rel, body);
        for args in [vec!["pm", "validate", rel.as_str()], vec!["translate", rel.as_str()], vec!["register", rel.as_str()]] {
            let out = maple(ws.path(), &args);
            assert_eq!(out.status.code(), Some(1), "{args:?} on {body:?}: {}", text(&out));
        }
    }
    write(ws.path(), "launch.json", "{not json");
    write(ws.path(), "ok.pm.json", "{}");
    let out = maple(ws.path(), &["enact", "ok.pm.json", "--config", "launch.json"]);
    assert_eq!(out.status.code(), Some(1), "{}", text(&out));
}

#[test]
fn run_step_operations() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    std::fs::write(p("a"), "one\n").unwrap();
    std::fs::write(p("b"), "two\n").unwrap();
    let run = |args: &[&str]| Command::new(env!("CARGO_BIN_EXE_maple")).arg("run-step").args(args).output().unwrap();
    assert!(run(&["copy", "--in", &p("a"), "--out", &p("c")]).status.success());
    assert_eq!(std::fs::read_to_string(p("c")).unwrap(), "one\n");
    assert!(run(&["concat", "--in", &p("a"), "--in", &p("b"), "--out", &p("d")]).status.success());
    assert_eq!(std::fs::read_to_string(p("d")).unwrap(), "one\ntwo\n");
    assert_eq!(run(&["fail", "--in", &p("a"), "--out", &p("e")]).status.code(), Some(1));
    assert!(!Path::new(&p("e")).exists());
    assert_eq!(run(&["copy", "--in", &p("missing"), "--out", &p("f")]).status.code(), Some(1));
}

#[test]
fn chain_dot_matches_golden() {
    let ws = nfv();
    let out = maple(ws.path(), &["translate", "flows/main.pm.json", "--dot"]);
    assert!(out.status.success(), "{}", text(&out));
    golden("nfv_chain.dot", &String::from_utf8(out.stdout).unwrap());
}

#[test]
fn megamodel_dot_matches_golden() {
    let ws = nfv();
    assert!(maple(ws.path(), &["discover"]).status.success());
    let out = maple(ws.path(), &["mgm", "show", "--dot"]);
    assert!(out.status.success(), "{}", text(&out));
    golden("nfv_megamodel.dot", &String::from_utf8(out.stdout).unwrap());
}

#[test]
fn discover_twice_registers_nothing_new() {
    let ws = nfv();
    let first = text(&maple(ws.path(), &["discover"]));
    assert!(first.contains("registered 19 new"), "{first}");
    let second = text(&maple(ws.path(), &["discover"]));
    assert!(second.contains("registered 0 new, 19 unchanged"), "{second}");
}
