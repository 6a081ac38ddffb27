//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or exceeds its time limit.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use common::*;
use maple::chain::store::{load_chain, save_chain};
use maple::chain::{GatewayKind, TransformationChain};
use maple::cli::fixture::NFV_MAIN;
use maple::discovery::discover_workspace;
use maple::enactor::{
    enact, enact_sequential, Handler, HandlerError, Handlers, LaunchConfig, Outcome, StepContext, StepStatus,
};
use maple::megamodel::store::{load_with_root, save};
use maple::megamodel::{RelationKind, ResourceKind, SharedMegamodel, META_PRODUCER};
use maple::weave::{load_weave, save_weave};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: [(&str, u64, Check); 9] = [
        ("fixture topology", 5, fixture_topology),
        ("heterogeneous dispatch", 10, heterogeneous_dispatch),
        ("live megamodel update", 10, live_megamodel_update),
        ("oracle equivalence", 60, oracle_equivalence),
        ("precedence preservation", 30, precedence_preservation),
        ("writer serialization", 30, writer_serialization),
        ("persistence round-trips", 15, round_trips),
        ("idempotent discovery", 5, idempotent_discovery),
        ("failure semantics", 10, failure_semantics),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let late = elapsed > Duration::from_secs(*limit);
        let (tag, detail) = match (&result, late) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over time limit")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("{tag} {} {name} [{:.2}s / {limit}s] {detail}", i + 1, elapsed.as_secs_f64());
        std::io::stdout().flush().ok();
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

fn reaches(chain: &TransformationChain, from: &str, to: &str) -> bool {
    let mut stack = vec![from];
    let mut seen = BTreeSet::new();
    while let Some(n) = stack.pop() {
        for s in chain.successors(n) {
            if s == to {
                return true;
            }
            if seen.insert(s) {
                stack.push(s);
            }
        }
    }
    false
}

fn fixture_topology() -> Result<String, String> {
    let mut nfv = Nfv::new();
    let chain = nfv.translate().chain;
    ensure!(chain.steps.len() == 8, "expected 8 steps, got {}", chain.steps.len());
    let (refine, enrich) = ("NSDesign.RefineNSD", "NSDesign.EnrichOntology");
    let forks = chain.gateways.iter().filter(|g| g.kind == GatewayKind::Fork && g.synthesized);
    let joins: Vec<_> = chain.gateways.iter().filter(|g| g.kind == GatewayKind::Join && g.synthesized).collect();
    let pair = forks
        .flat_map(|f| joins.iter().map(move |j| (f, *j)))
        .find(|(f, j)| {
            [refine, enrich].iter().all(|s| reaches(&chain, &f.id, s) && reaches(&chain, s, &j.id))
                && !reaches(&chain, refine, enrich)
                && !reaches(&chain, enrich, refine)
        });
    let Some((fork, join)) = pair else {
        return Err("no synthesized fork/join pair encloses the parallel design steps".into());
    };
    let order = chain.step_order();
    let ids = |p: &str| chain.steps.iter().filter(|s| s.id.starts_with(p)).map(|s| s.id.clone()).collect::<Vec<_>>();
    let (design, onboarding) = (ids("NSDesign."), ids("NSOnboarding."));
    ensure!(design.len() == 5 && onboarding.len() == 3, "unexpected split {design:?} / {onboarding:?}");
    for d in &design {
        for o in &onboarding {
            ensure!(order.contains(&(d.clone(), o.clone())), "{d} does not precede {o}");
        }
    }
    Ok(format!("8 steps, {} .. {} around the parallel pair", fork.id, join.id))
}

fn run_fixture() -> (Nfv, SharedMegamodel, TransformationChain, maple::enactor::EnactmentReport) {
    let mut nfv = Nfv::new();
    let chain = nfv.translate().chain;
    let launch = nfv.launch();
    let mgm = SharedMegamodel::new(nfv.mgm.clone());
    let report = enact(&chain, &launch, &mgm, &Handlers::standard()).unwrap();
    (nfv, mgm, chain, report)
}

fn heterogeneous_dispatch() -> Result<String, String> {
    let (_nfv, _, _, report) = run_fixture();
    ensure!(report.is_success(), "run failed: {:?}", report.outcome);
    let kinds: BTreeSet<&str> = report.per_step.values().map(|r| r.handler_kind.as_str()).collect();
    ensure!(kinds.contains("builtin") && kinds.contains("exec"), "handler kinds {kinds:?}");
    Ok(format!("kinds {kinds:?}"))
}

fn live_megamodel_update() -> Result<String, String> {
    let (nfv, mgm, chain, report) = run_fixture();
    ensure!(report.is_success(), "run failed: {:?}", report.outcome);
    let before = &nfv.mgm;
    let after = mgm.read();
    let produced: BTreeSet<&str> =
        chain.data_nodes.iter().filter(|d| !chain.writers(&d.id).is_empty()).map(|d| d.id.as_str()).collect();
    ensure!(produced.len() == 8, "fixture should produce 8 data nodes, found {}", produced.len());
    let new: BTreeSet<_> = after
        .resources()
        .filter(|r| r.kind == ResourceKind::ModelInstance && !before.contains(&r.id))
        .map(|r| r.id.clone())
        .collect();
    ensure!(new.len() == produced.len(), "{} new model instances for {} data nodes", new.len(), produced.len());
    ensure!(
        new == report.mgm_delta.iter().cloned().collect(),
        "report delta {:?} differs from store {:?}",
        report.mgm_delta,
        new
    );
    for a in &report.artifacts {
        let node = chain.data_node(&a.data_node).unwrap();
        let res = after.get(&a.resource).ok_or(format!("{} not registered", a.resource))?;
        let conforms: Vec<_> =
            after.relations().filter(|r| r.kind == RelationKind::ConformsTo && r.source == res.id).collect();
        let mm = after.metamodel_named(&node.metamodel).unwrap();
        ensure!(conforms.len() == 1 && &conforms[0].target == mm, "{} conformance {conforms:?}", a.data_node);
        ensure!(
            res.meta.get(META_PRODUCER).map(String::as_str) == Some(a.producer.as_str())
                && chain.writers(&a.data_node).contains(a.producer.as_str()),
            "{} producer annotation {:?}",
            a.data_node,
            res.meta.get(META_PRODUCER)
        );
    }
    ensure!(
        report.artifacts.iter().map(|a| a.data_node.as_str()).collect::<BTreeSet<_>>() == produced,
        "artifacts do not cover every produced data node"
    );
    Ok(format!("{} new model instances", new.len()))
}

fn oracle_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let handlers = Handlers::standard();
    let mut steps = 0;
    for trial in 0..100 {
        let pm = gen_data_pm(&mut rng, 8);
        steps += pm.steps;
        let (dir, mgm, t) = materialize(&pm.files, &pm.root);
        let mgm = SharedMegamodel::new(mgm);
        let launch = |id: &str, n: usize| LaunchConfig::new(id).bind("In", "models/input.txt").with_max_parallel(n);
        let reference = enact_sequential(&t.chain, &launch("seq", 1), &mgm, &handlers).unwrap();
        ensure!(reference.is_success(), "trial {trial}: reference run failed");
        let expected = artifact_bytes(&reference, dir.path());
        for n in [2, 4, 8] {
            let report = enact(&t.chain, &launch(&format!("par{n}"), n), &mgm, &handlers).unwrap();
            ensure!(
                report.steps_with(StepStatus::Completed) == reference.steps_with(StepStatus::Completed),
                "trial {trial}: completed sets differ at maxParallel={n}"
            );
            ensure!(
                artifact_bytes(&report, dir.path()) == expected,
                "trial {trial}: artifacts differ at maxParallel={n}"
            );
        }
    }
    Ok(format!("100/100 chains ({steps} steps) x maxParallel 2,4,8"))
}

fn precedence_preservation() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pairs = 0;
    for trial in 0..100 {
        let pm = gen_hierarchical(&mut rng, 12);
        let (_dir, _mgm, t) = materialize(&pm.files, &pm.root);
        let steps: BTreeSet<String> = t.chain.steps.iter().map(|s| s.id.clone()).collect();
        ensure!(steps == pm.actions, "trial {trial}: steps {steps:?} vs actions {:?}", pm.actions);
        let order = t.chain.step_order();
        ensure!(order == pm.expected, "trial {trial}: order {order:?} vs expected {:?} for {:?}", pm.expected, pm.shape);
        pairs += order.len();
    }
    Ok(format!("100/100 models, {pairs} ordered pairs"))
}

/// Appends a few tagged chunks to each output, pausing between writes,
/// and logs the write interval of every step.
struct Append {
    log: Arc<Mutex<Vec<(String, Instant, Instant)>>>,
}

impl Handler for Append {
    fn kind(&self) -> &str {
        "append"
    }

    fn run(&self, ctx: &StepContext<'_>) -> Result<(), HandlerError> {
        let start = Instant::now();
        for (_, path) in ctx.outputs {
            for chunk in 0..4 {
                let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
                writeln!(f, "{} {chunk}", ctx.step.id)?;
                drop(f);
                std::thread::sleep(Duration::from_millis(2));
            }
        }
        self.log.lock().unwrap().push((ctx.step.id.clone(), start, Instant::now()));
        Ok(())
    }
}

fn two_writers_pm(first: &str, second: &str) -> Vec<(String, String)> {
    let pins = r#"[{"name": "in0", "direction": "in", "metamodel": "txt"},
                   {"name": "out", "direction": "out", "metamodel": "txt"}]"#;
    let action = |n: &str| format!(r#"{{"name": "{n}", "kind": "action", "impl": "impl/copy.builtin.json", "pins": {pins}}}"#);
    let pm = format!(
        r#"{{"name": "Writers",
  "parameters": [{{"name": "In", "direction": "in", "metamodel": "txt"}}],
  "nodes": [{{"name": "start", "kind": "initial"}}, {{"name": "split", "kind": "fork"}}, {a}, {b},
            {{"name": "merge", "kind": "join"}}, {{"name": "end", "kind": "final"}},
            {{"name": "Shared", "kind": "object", "metamodel": "txt"}}],
  "edges": [
    {{"kind": "control", "source": "start", "target": "split"}},
    {{"kind": "control", "source": "split", "target": "{first}"}},
    {{"kind": "control", "source": "split", "target": "{second}"}},
    {{"kind": "control", "source": "{first}", "target": "merge"}},
    {{"kind": "control", "source": "{second}", "target": "merge"}},
    {{"kind": "control", "source": "merge", "target": "end"}},
    {{"kind": "object", "source": "In", "target": "{first}.in0"}},
    {{"kind": "object", "source": "In", "target": "{second}.in0"}},
    {{"kind": "object", "source": "{first}.out", "target": "Shared"}},
    {{"kind": "object", "source": "{second}.out", "target": "Shared"}}]}}"#,
        a = action(first),
        b = action(second),
    );
    let mut files = data_support_files();
    files.push(("flows/Writers.pm.json".into(), pm));
    files
}

fn writer_serialization() -> Result<String, String> {
    use rand::RngExt;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let log = Arc::new(Mutex::new(Vec::new()));
    let handlers = Handlers::standard().with(Append { log: log.clone() });
    for trial in 0..50 {
        let (a, b) = loop {
            let a = format!("W{}", rng.random_range(0..100u32));
            let b = format!("W{}", rng.random_range(0..100u32));
            if a != b {
                break (a, b);
            }
        };
        let (dir, mgm, t) = materialize(&two_writers_pm(&a, &b), "flows/Writers.pm.json");
        let mut chain = t.chain;
        for s in &mut chain.steps {
            s.handler_kind = "append".into();
        }
        log.lock().unwrap().clear();
        let launch = LaunchConfig::new(format!("w{trial}")).bind("In", "models/input.txt").with_max_parallel(8);
        let report = enact(&chain, &launch, &SharedMegamodel::new(mgm), &handlers).unwrap();
        ensure!(report.is_success(), "trial {trial}: {:?}", report.outcome);
        let (lo, hi) = if a < b { (&a, &b) } else { (&b, &a) };
        let entries = log.lock().unwrap().clone();
        ensure!(entries.len() == 2, "trial {trial}: {} log entries", entries.len());
        ensure!(
            &entries[0].0 == lo && &entries[1].0 == hi && entries[0].2 <= entries[1].1,
            "trial {trial}: writes of {a} and {b} overlap or run out of order"
        );
        let shared = report.artifacts.iter().find(|x| x.data_node.ends_with("Shared")).ok_or("no artifact")?;
        let text = std::fs::read_to_string(dir.path().join(&shared.path)).unwrap();
        let expected: String = [lo, hi].iter().flat_map(|s| (0..4).map(move |c| format!("{s} {c}\n"))).collect();
        ensure!(text == expected, "trial {trial}: interleaved content {text:?}");
    }
    Ok("50/50 trials serialized".into())
}

fn round_trips() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dir = tempfile::tempdir().unwrap();
    for i in 0..100 {
        let root = dir.path().join(format!("m{i}"));
        let mgm = gen_megamodel(&mut rng, &root);
        let path = root.join("store.json");
        save(&mgm, &path).map_err(|e| e.to_string())?;
        let back = load_with_root(&path, &root).map_err(|e| e.to_string())?;
        ensure!(back == mgm, "megamodel {i} changed across save/load");

        let weave = gen_weave(&mut rng);
        let path = dir.path().join(format!("w{i}.json"));
        save_weave(&weave, &path).map_err(|e| e.to_string())?;
        ensure!(load_weave(&path).map_err(|e| e.to_string())? == weave, "weave {i} changed across save/load");

        let chain = gen_chain(&mut rng);
        let path = dir.path().join(format!("c{i}.json"));
        save_chain(&chain, &path).map_err(|e| e.to_string())?;
        ensure!(load_chain(&path).map_err(|e| e.to_string())? == chain, "chain {i} changed across save/load");
    }
    Ok("100/100 per format".into())
}

fn idempotent_discovery() -> Result<String, String> {
    let nfv = Nfv::new();
    let mut mgm = nfv.mgm.clone();
    let first = mgm.len();
    let report = discover_workspace(nfv.root(), &mut mgm);
    ensure!(report.registered.is_empty(), "second scan registered {:?}", report.registered);
    ensure!(mgm == nfv.mgm, "second scan modified the megamodel");
    Ok(format!("{first} resources, 0 new on rescan ({} unchanged)", report.unchanged.len()))
}

fn failure_semantics() -> Result<String, String> {
    let mut nfv = Nfv::new();
    write(
        nfv.root(),
        "transformations/upload_fail.builtin.json",
        r#"{"name": "upload_fail", "op": "fail", "parameters": [
  {"name": "info", "direction": "in", "metamodel": "nsdinfo", "modelRef": "info"},
  {"name": "nsd", "direction": "in", "metamodel": "nsd", "modelRef": "nsd"},
  {"name": "out", "direction": "out", "metamodel": "nsdinfo", "modelRef": "out"}]}"#,
    );
    let flow = nfv.root().join("flows/NSOnboarding.pm.json");
    let text = std::fs::read_to_string(&flow).unwrap();
    ensure!(text.contains("upload_nsd.process"), "fixture layout changed");
    std::fs::write(&flow, text.replace("upload_nsd.process", "upload_fail.builtin.json")).unwrap();
    discover_workspace(nfv.dir.path(), &mut nfv.mgm);
    let chain = maple::cli::pipeline::translate(&nfv.root().join(NFV_MAIN), &mut nfv.mgm).unwrap().chain;
    let mgm = SharedMegamodel::new(nfv.mgm.clone());
    let report = enact(&chain, &nfv.launch(), &mgm, &Handlers::standard()).unwrap();
    let upload = "NSOnboarding.UploadNSD";
    ensure!(report.outcome == Outcome::Failed { step: upload.into() }, "outcome {:?}", report.outcome);
    ensure!(
        report.status("NSOnboarding.ValidateAndCatalog") == Some(StepStatus::NotStarted),
        "ValidateAndCatalog was {:?}",
        report.status("NSOnboarding.ValidateAndCatalog")
    );
    let order = chain.step_order();
    let upstream: BTreeSet<&str> =
        chain.steps.iter().map(|s| s.id.as_str()).filter(|s| order.contains(&(s.to_string(), upload.to_string()))).collect();
    let mgm = mgm.read();
    let mut registered = 0;
    for step in &upstream {
        ensure!(report.status(step) == Some(StepStatus::Completed), "{step} did not complete");
        for d in chain.data_edges.iter().filter(|e| e.step == *step && e.direction == maple::procmodel::Direction::Out) {
            let a = report.artifacts.iter().find(|a| a.data_node == d.data).ok_or(format!("no artifact for {}", d.data))?;
            ensure!(mgm.contains(&a.resource), "{} not in the megamodel", a.resource);
            registered += 1;
        }
    }
    let by_step: BTreeMap<_, _> = report.per_step.iter().map(|(k, v)| (k.as_str(), v.status)).collect();
    Ok(format!("{} upstream steps, {registered} artifacts registered; statuses {by_step:?}", upstream.len()))
}
