//! Workspace builders and random generators shared by the integration
//! tests and the benchmark.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use maple::chain::{
    Binding, ControlEdge, DataEdge, DataNode, Gateway, GatewayKind, Step, StepPin, TransformationChain,
};
use maple::cli::fixture::{write_nfv, NFV_LAUNCH, NFV_MAIN};
use maple::cli::pipeline::{translate, Translation};
use maple::discovery::discover_workspace;
use maple::enactor::{parse_launch_config, LaunchConfig};
use maple::megamodel::{Megamodel, NewResource, Relation, RelationKind, ResourceId, ResourceKind};
use maple::procmodel::Direction;
use maple::weave::{Mapping, MappingKind, PinBinding, WeaveModel, WEAVE_VERSION};
use rand::seq::SliceRandom;
use rand::{Rng, RngExt};
use serde_json::{json, Value};

pub fn write(root: &Path, rel: &str, text: &str) {
    let path = root.join(rel);
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
}

/// PATH for exec steps, with the `maple` binary under test first.
pub fn step_env() -> BTreeMap<String, String> {
    let bin = Path::new(env!("CARGO_BIN_EXE_maple")).parent().unwrap().to_path_buf();
    let rest = std::env::var_os("PATH").unwrap_or_default();
    let joined = std::env::join_paths(std::iter::once(bin).chain(std::env::split_paths(&rest))).unwrap();
    BTreeMap::from([("PATH".to_string(), joined.to_string_lossy().into_owned())])
}

/// A fresh copy of the NFV workspace with its discovered megamodel.
pub struct Nfv {
    pub dir: tempfile::TempDir,
    pub mgm: Megamodel,
}

impl Nfv {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_nfv(dir.path()).unwrap();
        let mut mgm = Megamodel::base(dir.path());
        let report = discover_workspace(dir.path(), &mut mgm);
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);
        Self { dir, mgm }
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn translate(&mut self) -> Translation {
        translate(&self.root().join(NFV_MAIN), &mut self.mgm).unwrap()
    }

    pub fn launch(&self) -> LaunchConfig {
        let text = std::fs::read_to_string(self.root().join(NFV_LAUNCH)).unwrap();
        let (mut launch, _) = parse_launch_config(&text).unwrap();
        launch.env = step_env();
        launch
    }
}

// ---------------------------------------------------------------------
// Series-parallel hierarchical process models

/// Shape of a generated process model body.
#[derive(Debug, Clone)]
pub enum Sp {
    Action(String),
    Seq(Vec<Sp>),
    Par(Vec<Sp>),
    /// A call activity with this node name invoking a generated model.
    Call(String, Box<Sp>),
}

impl Sp {
    fn actions(&self) -> usize {
        match self {
            Sp::Action(_) => 1,
            Sp::Seq(c) | Sp::Par(c) => c.iter().map(Sp::actions).sum(),
            Sp::Call(_, b) => b.actions(),
        }
    }
}

struct SpGen<'r, R: Rng> {
    rng: &'r mut R,
    next: usize,
}

impl<R: Rng> SpGen<'_, R> {
    fn fresh(&mut self, prefix: &str) -> String {
        self.next += 1;
        format!("{prefix}{}", self.next)
    }

    fn gen(&mut self, depth: usize, budget: usize) -> Sp {
        if budget <= 1 || self.rng.random_bool(0.25) {
            return Sp::Action(self.fresh("a"));
        }
        if depth < 3 && self.rng.random_bool(0.25) {
            let name = self.fresh("c");
            return Sp::Call(name, Box::new(self.gen(depth + 1, budget)));
        }
        let width = self.rng.random_range(2..=3usize).min(budget);
        let mut children = Vec::new();
        let mut left = budget;
        for i in 0..width {
            let share = if i + 1 == width { left } else { self.rng.random_range(1..=left - (width - i - 1)) };
            let child = self.gen(depth, share);
            left -= child.actions();
            children.push(child);
            if left == 0 {
                break;
            }
        }
        if children.len() == 1 {
            return children.pop().unwrap();
        }
        if self.rng.random_bool(0.5) {
            Sp::Seq(children)
        } else {
            Sp::Par(children)
        }
    }
}

/// A generated model family plus the expected action order.
pub struct HierPm {
    pub files: Vec<(String, String)>,
    pub root: String,
    pub shape: Sp,
    pub actions: BTreeSet<String>,
    /// `(a, b)`: `a` must complete before `b` starts.
    pub expected: BTreeSet<(String, String)>,
}

const NOOP_IMPL: &str = "impl/noop.builtin.json";

struct PmBuilder {
    name: String,
    nodes: Vec<Value>,
    edges: Vec<Value>,
    calls: Vec<String>,
    gateways: usize,
}

impl PmBuilder {
    fn new(name: &str) -> Self {
        Self { name: name.into(), nodes: vec![], edges: vec![], calls: vec![], gateways: 0 }
    }

    fn control(&mut self, a: &str, b: &str) {
        self.edges.push(json!({"kind": "control", "source": a, "target": b}));
    }

    /// Returns the (first, last) node of the emitted fragment.
    fn emit(&mut self, sp: &Sp, files: &mut Vec<(String, String)>) -> (String, String) {
        match sp {
            Sp::Action(name) => {
                self.nodes.push(json!({"name": name, "kind": "action", "impl": NOOP_IMPL}));
                (name.clone(), name.clone())
            }
            Sp::Call(name, body) => {
                let callee = format!("P{name}");
                let file = emit_pm(&callee, body, files);
                files.push(file);
                self.nodes.push(json!({"name": name, "kind": "call", "callee": callee}));
                self.calls.push(callee);
                (name.clone(), name.clone())
            }
            Sp::Seq(children) => {
                let parts: Vec<(String, String)> = children.iter().map(|c| self.emit(c, files)).collect();
                for w in parts.windows(2) {
                    self.control(&w[0].1, &w[1].0);
                }
                (parts[0].0.clone(), parts[parts.len() - 1].1.clone())
            }
            Sp::Par(children) => {
                self.gateways += 1;
                let fork = format!("fork{}", self.gateways);
                let join = format!("join{}", self.gateways);
                self.nodes.push(json!({"name": fork, "kind": "fork"}));
                self.nodes.push(json!({"name": join, "kind": "join"}));
                for c in children {
                    let (first, last) = self.emit(c, files);
                    self.control(&fork, &first);
                    self.control(&last, &join);
                }
                (fork, join)
            }
        }
    }
}

fn emit_pm(name: &str, body: &Sp, files: &mut Vec<(String, String)>) -> (String, String) {
    let mut b = PmBuilder::new(name);
    b.nodes.push(json!({"name": "start", "kind": "initial"}));
    let (first, last) = b.emit(body, files);
    b.nodes.push(json!({"name": "end", "kind": "final"}));
    b.control("start", &first);
    b.control(&last, "end");
    let doc = json!({"name": b.name, "nodes": b.nodes, "edges": b.edges, "calls": b.calls});
    (format!("flows/{name}.pm.json"), serde_json::to_string_pretty(&doc).unwrap())
}

/// Expected order by lowest common ancestor: two actions are ordered iff
/// they meet under a sequence, in the order of their branches.
fn sp_order(sp: &Sp, prefix: &str, actions: &mut BTreeSet<String>, order: &mut BTreeSet<(String, String)>) -> Vec<String> {
    match sp {
        Sp::Action(name) => {
            let id = format!("{prefix}{name}");
            actions.insert(id.clone());
            vec![id]
        }
        Sp::Call(name, body) => sp_order(body, &format!("{prefix}{name}."), actions, order),
        Sp::Par(children) => children.iter().flat_map(|c| sp_order(c, prefix, actions, order)).collect(),
        Sp::Seq(children) => {
            let groups: Vec<Vec<String>> = children.iter().map(|c| sp_order(c, prefix, actions, order)).collect();
            for (i, earlier) in groups.iter().enumerate() {
                for later in &groups[i + 1..] {
                    for a in earlier {
                        for b in later {
                            order.insert((a.clone(), b.clone()));
                        }
                    }
                }
            }
            groups.concat()
        }
    }
}

/// A random hierarchical model with at most `max_actions` actions and
/// call depth at most 3.
pub fn gen_hierarchical(rng: &mut impl Rng, max_actions: usize) -> HierPm {
    let budget = rng.random_range(1..=max_actions);
    let shape = SpGen { rng, next: 0 }.gen(0, budget);
    let mut files = vec![(NOOP_IMPL.to_string(), r#"{"name": "noop", "op": "fail"}"#.to_string())];
    let top = emit_pm("Top", &shape, &mut files);
    let root = top.0.clone();
    files.push(top);
    let mut actions = BTreeSet::new();
    let mut expected = BTreeSet::new();
    sp_order(&shape, "", &mut actions, &mut expected);
    HierPm { files, root, shape, actions, expected }
}

// ---------------------------------------------------------------------
// Data-flow process models with pure builtin steps

pub struct DataPm {
    pub files: Vec<(String, String)>,
    pub root: String,
    pub steps: usize,
}

fn builtin_spec(name: &str, op: &str, inputs: usize) -> String {
    let mut params: Vec<Value> = (0..inputs)
        .map(|i| json!({"name": format!("in{i}"), "direction": "in", "metamodel": "txt", "modelRef": format!("in{i}")}))
        .collect();
    params.push(json!({"name": "out", "direction": "out", "metamodel": "txt", "modelRef": "out"}));
    serde_json::to_string_pretty(&json!({"name": name, "op": op, "parameters": params})).unwrap()
}

/// Support files shared by every data model: the `txt` metamodel, the
/// input model and one builtin spec per operation and arity.
pub fn data_support_files() -> Vec<(String, String)> {
    vec![
        ("mm/txt.mm.json".into(), r#"{"name": "txt"}"#.into()),
        ("models/input.txt".into(), "input line\n".into()),
        ("models/input.txt.conforms".into(), "txt\n".into()),
        ("impl/copy.builtin.json".into(), builtin_spec("copy", "copy", 1)),
        ("impl/template.builtin.json".into(), builtin_spec("template", "template", 1)),
        ("impl/concat1.builtin.json".into(), builtin_spec("concat1", "concat", 1)),
        ("impl/concat2.builtin.json".into(), builtin_spec("concat2", "concat", 2)),
        ("impl/concat3.builtin.json".into(), builtin_spec("concat3", "concat", 3)),
    ]
}

/// A random acyclic model of `1..=max_steps` pure steps. Each step reads
/// up to three earlier results (or the input parameter) and every result
/// feeds at most three readers.
pub fn gen_data_pm(rng: &mut impl Rng, max_steps: usize) -> DataPm {
    let n = rng.random_range(1..=max_steps);
    let mut readers = vec![0usize; n];
    let mut preds: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let mut open: Vec<usize> = (0..i).filter(|&p| readers[p] < 3).collect();
        open.shuffle(rng);
        let k = if open.is_empty() || rng.random_bool(0.15) { 0 } else { rng.random_range(1..=open.len().min(3)) };
        let mut chosen: Vec<usize> = open.into_iter().take(k).collect();
        chosen.sort();
        for &p in &chosen {
            readers[p] += 1;
        }
        preds.push(chosen);
    }

    let mut nodes = vec![json!({"name": "start", "kind": "initial"})];
    let mut edges = Vec::new();
    let control = |edges: &mut Vec<Value>, a: &str, b: &str| {
        edges.push(json!({"kind": "control", "source": a, "target": b}));
    };
    let obj = |edges: &mut Vec<Value>, a: &str, b: &str| {
        edges.push(json!({"kind": "object", "source": a, "target": b}));
    };
    for (i, ps) in preds.iter().enumerate() {
        let name = format!("s{i}");
        let inputs = ps.len().max(1);
        let implementation = match inputs {
            1 => ["impl/copy.builtin.json", "impl/template.builtin.json", "impl/concat1.builtin.json"]
                [rng.random_range(0..3)]
            .to_string(),
            k => format!("impl/concat{k}.builtin.json"),
        };
        let mut pins: Vec<Value> =
            (0..inputs).map(|j| json!({"name": format!("in{j}"), "direction": "in", "metamodel": "txt"})).collect();
        pins.push(json!({"name": "out", "direction": "out", "metamodel": "txt"}));
        nodes.push(json!({"name": name, "kind": "action", "impl": implementation, "pins": pins}));
        nodes.push(json!({"name": format!("d{i}"), "kind": "object", "metamodel": "txt"}));
        obj(&mut edges, &format!("{name}.out"), &format!("d{i}"));
        if ps.is_empty() {
            obj(&mut edges, "In", &format!("{name}.in0"));
            control(&mut edges, "start", &name);
        }
        for (j, p) in ps.iter().enumerate() {
            obj(&mut edges, &format!("d{p}"), &format!("{name}.in{j}"));
            control(&mut edges, &format!("s{p}"), &name);
        }
    }
    nodes.push(json!({"name": "end", "kind": "final"}));
    for i in (0..n).filter(|&i| readers[i] == 0) {
        control(&mut edges, &format!("s{i}"), "end");
    }
    let doc = json!({
        "name": "Data",
        "parameters": [{"name": "In", "direction": "in", "metamodel": "txt"}],
        "nodes": nodes,
        "edges": edges,
    });
    let mut files = data_support_files();
    files.push(("flows/Data.pm.json".into(), serde_json::to_string_pretty(&doc).unwrap()));
    DataPm { files, root: "flows/Data.pm.json".into(), steps: n }
}

/// Writes generated files into a fresh directory, discovers it and
/// translates `root`.
pub fn materialize(files: &[(String, String)], root: &str) -> (tempfile::TempDir, Megamodel, Translation) {
    let dir = tempfile::tempdir().unwrap();
    for (rel, text) in files {
        write(dir.path(), rel, text);
    }
    let mut mgm = Megamodel::base(dir.path());
    discover_workspace(dir.path(), &mut mgm);
    let t = translate(&dir.path().join(root), &mut mgm).unwrap_or_else(|e| panic!("{e}\n{files:#?}"));
    (dir, mgm, t)
}

/// Backing files of every produced data node, keyed by data node id.
pub fn artifact_bytes(report: &maple::enactor::EnactmentReport, root: &Path) -> BTreeMap<String, Vec<u8>> {
    report
        .artifacts
        .iter()
        .map(|a| (a.data_node.clone(), std::fs::read(root.join(&a.path)).unwrap()))
        .collect()
}

// ---------------------------------------------------------------------
// Random persistent documents

fn ident(rng: &mut impl Rng, prefix: &str) -> String {
    let tails = ["", "_x", ".y", "-z", " sp", "\"q\"", "é", "#1"];
    format!("{prefix}{}{}", rng.random_range(0..1000u32), tails[rng.random_range(0..tails.len())])
}

/// A random megamodel over files created in `root`.
pub fn gen_megamodel(rng: &mut impl Rng, root: &Path) -> Megamodel {
    let mut mgm = Megamodel::base(root);
    let core = mgm.metamodel_named("core").cloned().unwrap();
    let mut metamodels = vec![core.clone()];
    for i in 0..rng.random_range(0..5) {
        let name = format!("mm{i}");
        let res = NewResource::virtual_(ResourceKind::MetamodelDescriptor, &name)
            .conforming_to(core.clone())
            .with_meta("doc", ident(rng, "d"));
        metamodels.push(mgm.register(res).unwrap());
    }
    let mut ids: Vec<ResourceId> = Vec::new();
    for i in 0..rng.random_range(0..15) {
        let kinds = [ResourceKind::ModelInstance, ResourceKind::Transformation, ResourceKind::ExecutableSpec];
        let kind = kinds[rng.random_range(0..kinds.len())];
        let mm = metamodels[rng.random_range(0..metamodels.len())].clone();
        let res = if rng.random_bool(0.5) {
            let rel = format!("files/{i}/{}.dat", ident(rng, "f").replace(['/', '\\'], "_"));
            write(root, &rel, "x");
            NewResource::new(kind, ident(rng, "n"), rel)
        } else {
            NewResource::virtual_(kind, ident(rng, "v"))
        };
        let mut res = res.conforming_to(mm);
        if rng.random_bool(0.3) {
            res = res.with_meta("producer", ident(rng, "s"));
        }
        ids.push(mgm.register(res).unwrap());
    }
    for _ in 0..rng.random_range(0..10) {
        if ids.len() < 2 {
            break;
        }
        let a = ids[rng.random_range(0..ids.len())].clone();
        let b = ids[rng.random_range(0..ids.len())].clone();
        let kind = [RelationKind::InputOf, RelationKind::OutputOf, RelationKind::DerivedFrom][rng.random_range(0..3)];
        let _ = mgm.add_relation(Relation::new(kind, a, b));
    }
    mgm
}

pub fn gen_weave(rng: &mut impl Rng) -> WeaveModel {
    let kinds = [MappingKind::ActionMapping, MappingKind::ObjectNodeMapping, MappingKind::InOutMapping];
    let mappings = (0..rng.random_range(0..12))
        .map(|_| {
            let kind = kinds[rng.random_range(0..3)];
            let pin = (kind == MappingKind::InOutMapping).then(|| PinBinding {
                name: ident(rng, "p"),
                direction: if rng.random_bool(0.5) { Direction::In } else { Direction::Out },
                carrier: ident(rng, "c"),
            });
            Mapping {
                kind,
                pm_element: ident(rng, "e"),
                mgm_resource: ResourceId::new(format!("r{:06}", rng.random_range(1..999_999u32))),
                pin,
            }
        })
        .collect();
    WeaveModel { version: WEAVE_VERSION, pm: ResourceId::new(ident(rng, "r")), mappings }
}

pub fn gen_chain(rng: &mut impl Rng) -> TransformationChain {
    let dir = |rng: &mut _| if RngExt::random_bool(rng, 0.5) { Direction::In } else { Direction::Out };
    let steps: Vec<Step> = (0..rng.random_range(0..8))
        .map(|i| {
            let pins = |rng: &mut _, p: &str| {
                (0..RngExt::random_range(rng, 0..3))
                    .map(|j| StepPin { name: format!("{p}{j}"), metamodel: ident(rng, "m") })
                    .collect::<Vec<_>>()
            };
            Step {
                id: format!("S{i}.{}", ident(rng, "x")),
                implementation: ResourceId::new(ident(rng, "r")),
                handler_kind: ["builtin", "exec", "custom"][rng.random_range(0..3)].into(),
                in_pins: pins(rng, "in"),
                out_pins: pins(rng, "out"),
            }
        })
        .collect();
    let data_nodes: Vec<DataNode> = (0..rng.random_range(0..8))
        .map(|i| {
            let binding = match rng.random_range(0..4) {
                0 => Binding::Unbound,
                1 => Binding::LaunchParameter { name: ident(rng, "P"), direction: dir(rng) },
                2 => Binding::Intermediate { resource: ResourceId::new(ident(rng, "r")) },
                _ => Binding::Artifact { path: format!("out/{}", ident(rng, "f")) },
            };
            DataNode { id: format!("D{i}"), metamodel: ident(rng, "m"), binding }
        })
        .collect();
    let gateways: Vec<Gateway> = (0..rng.random_range(0..4))
        .map(|i| Gateway {
            id: format!("fork#{i}"),
            kind: if rng.random_bool(0.5) { GatewayKind::Fork } else { GatewayKind::Join },
            synthesized: rng.random_bool(0.5),
        })
        .collect();
    let names: Vec<String> =
        steps.iter().map(|s| s.id.clone()).chain(gateways.iter().map(|g| g.id.clone())).collect();
    let mut control_edges = Vec::new();
    let mut data_edges = Vec::new();
    if !names.is_empty() {
        for _ in 0..rng.random_range(0..10) {
            let source = names[rng.random_range(0..names.len())].clone();
            let target = names[rng.random_range(0..names.len())].clone();
            control_edges.push(ControlEdge { source, target });
        }
    }
    if !steps.is_empty() && !data_nodes.is_empty() {
        for _ in 0..rng.random_range(0..10) {
            data_edges.push(DataEdge {
                data: data_nodes[rng.random_range(0..data_nodes.len())].id.clone(),
                step: steps[rng.random_range(0..steps.len())].id.clone(),
                pin: ident(rng, "p"),
                direction: dir(rng),
            });
        }
    }
    TransformationChain { name: ident(rng, "C"), steps, data_nodes, gateways, control_edges, data_edges }
}

pub fn paths_under(root: &Path) -> Vec<PathBuf> {
    walkdir(root)
}

fn walkdir(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    if let Ok(entries) = std::fs::read_dir(root) {
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                out.extend(walkdir(&p));
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}
