//! Chain execution with token semantics.
//!
//! Every step and gateway waits for a token on each incoming control edge.
//! A step additionally waits until all of its input data nodes are ready,
//! which happens once every writer of the node has completed. Gateways fire
//! as soon as they hold all their tokens. Unordered writers of one data
//! node are serialized in lexicographic step order by extra ordering
//! constraints added before the run starts; a per-path reader/writer lock
//! table guards admission on top of that.
//!
//! [`enact`] runs up to `maxParallel` steps at once on a thread pool, with
//! a single coordinator owning the marking. [`enact_sequential`] is a much
//! simpler interpreter that always runs the lexicographically smallest
//! enabled step; it serves as the reference the concurrent engine is
//! checked against.

mod handlers;
mod launch;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::chain::graph::Dag;
use crate::chain::{Binding, TransformationChain};
use crate::megamodel::{Relation, RelationKind, Resource, ResourceId, ResourceKind, SharedMegamodel};
use crate::procmodel::Direction;
use crate::util::resolve_location;

pub use handlers::{
    run_builtin, BuiltinHandler, ExecHandler, Handler, HandlerError, Handlers, StepContext, STEP_ID_VAR,
};
pub use launch::{parse_launch_config, LaunchConfig, LaunchError, DEFAULT_MAX_PARALLEL};
pub use report::{
    load_report, report_path, run_dir, save_report, ArtifactRecord, EnactmentReport, Outcome, StepRecord, StepStatus,
};

#[derive(Debug, Error)]
pub enum EnactError {
    #[error("step `{step}`: no handler for kind `{kind}`")]
    HandlerMissing { step: String, kind: String },
    #[error("step `{0}`: implementation is not registered")]
    UnknownImplementation(String),
    #[error("data node `{0}`: metamodel is not registered")]
    UnknownMetamodel(String),
    #[error("input parameter `{0}` is not bound in the launch configuration")]
    MissingBinding(String),
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("run stalled with steps never enabled: {}", .0.join(", "))]
    Stalled(Vec<String>),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Extra ordering constraints `(earlier, later)` that serialize unordered
/// writers of each data node. Writers of a node are ordered by a
/// topological sort of the current precedence with lexicographic tie
/// breaking; a constraint is only added between steps that are still
/// unordered, so no cycle can arise.
pub fn writer_serialization(chain: &TransformationChain) -> Vec<(String, String)> {
    let mut dag = chain.precedence();
    if dag.topo_lex().is_none() {
        return Vec::new();
    }
    let mut added = Vec::new();
    let mut nodes: Vec<&str> = chain.data_nodes.iter().map(|d| d.id.as_str()).collect();
    nodes.sort();
    for data in nodes {
        let writers: Vec<usize> = chain.writers(data).iter().map(|w| dag.index[*w]).collect();
        if writers.len() < 2 {
            continue;
        }
        let mut reach = dag.descendants();
        let mut sub = Dag::new(writers.iter().map(|&w| dag.names[w].clone()));
        for &a in &writers {
            for &b in &writers {
                if reach[a].contains(b) {
                    sub.add_edge(&dag.names[a], &dag.names[b]);
                }
            }
        }
        let order: Vec<usize> = sub
            .topo_lex()
            .expect("sub-order of a DAG is acyclic")
            .into_iter()
            .map(|i| dag.index[&sub.names[i]])
            .collect();
        for pair in order.windows(2) {
            let (u, v) = (pair[0], pair[1]);
            if !reach[u].contains(v) && !reach[v].contains(u) {
                dag.add_edge_idx(u, v);
                added.push((dag.names[u].clone(), dag.names[v].clone()));
                reach = dag.descendants();
            }
        }
    }
    added
}

/// A chain prepared for one run: nodes indexed, paths resolved,
/// implementations and handlers looked up.
struct Plan<'a> {
    chain: &'a TransformationChain,
    /// Steps (in chain order) followed by gateways.
    names: Vec<String>,
    step_count: usize,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    inputs: Vec<Vec<(String, String)>>,
    outputs: Vec<Vec<(String, String)>>,
    paths: BTreeMap<String, PathBuf>,
    writers: BTreeMap<String, usize>,
    metamodels: BTreeMap<String, ResourceId>,
    implementations: Vec<Resource>,
    handlers: Vec<Arc<dyn Handler>>,
    env: BTreeMap<String, String>,
    workspace: PathBuf,
    logs: PathBuf,
}

impl<'a> Plan<'a> {
    fn new(
        chain: &'a TransformationChain,
        launch: &LaunchConfig,
        mgm: &SharedMegamodel,
        handlers: &Handlers,
    ) -> Result<Self, EnactError> {
        let snapshot = mgm.read();
        let workspace = snapshot.workspace_root().to_path_buf();
        let run = run_dir(&workspace, &launch.run_id);

        let names: Vec<String> =
            chain.steps.iter().map(|s| s.id.clone()).chain(chain.gateways.iter().map(|g| g.id.clone())).collect();
        let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        if index.len() != names.len() {
            return Err(EnactError::InvalidChain("duplicate step or gateway id".into()));
        }
        if !chain.is_acyclic() {
            return Err(EnactError::InvalidChain("chain contains a cycle".into()));
        }
        let mut preds = vec![Vec::new(); names.len()];
        let mut succs = vec![Vec::new(); names.len()];
        let edges = chain
            .control_edges
            .iter()
            .map(|e| (e.source.clone(), e.target.clone()))
            .chain(writer_serialization(chain));
        for (a, b) in edges {
            let (Some(&u), Some(&v)) = (index.get(a.as_str()), index.get(b.as_str())) else {
                return Err(EnactError::InvalidChain(format!("control edge `{a}` -> `{b}` has an unknown end")));
            };
            preds[v].push(u);
            succs[u].push(v);
        }

        let mut paths = BTreeMap::new();
        let mut metamodels = BTreeMap::new();
        for d in &chain.data_nodes {
            let path = match &d.binding {
                Binding::LaunchParameter { name, direction: Direction::In } => {
                    let bound = launch.bindings.get(name).ok_or_else(|| EnactError::MissingBinding(name.clone()))?;
                    resolve_location(&workspace, bound)
                }
                Binding::LaunchParameter { name, direction: Direction::Out } => match launch.bindings.get(name) {
                    Some(bound) => resolve_location(&workspace, bound),
                    None => run.join("outputs").join(name),
                },
                Binding::Artifact { path } => resolve_location(&workspace, path),
                Binding::Intermediate { .. } | Binding::Unbound => run.join("intermediates").join(&d.id),
            };
            paths.insert(d.id.clone(), path);
            let mm = snapshot
                .metamodel_named(&d.metamodel)
                .cloned()
                .ok_or_else(|| EnactError::UnknownMetamodel(d.id.clone()))?;
            metamodels.insert(d.id.clone(), mm);
        }

        let mut inputs = vec![Vec::new(); chain.steps.len()];
        let mut outputs = vec![Vec::new(); chain.steps.len()];
        let mut writers: BTreeMap<String, usize> = chain.data_nodes.iter().map(|d| (d.id.clone(), 0)).collect();
        let mut implementations = Vec::new();
        let mut step_handlers = Vec::new();
        for (i, step) in chain.steps.iter().enumerate() {
            let pin_data = |pin: &str, dir: Direction| {
                chain
                    .data_edges
                    .iter()
                    .find(|e| e.step == step.id && e.pin == pin && e.direction == dir)
                    .map(|e| e.data.clone())
                    .ok_or_else(|| EnactError::InvalidChain(format!("pin `{}.{pin}` is not connected", step.id)))
            };
            for p in &step.in_pins {
                inputs[i].push((p.name.clone(), pin_data(&p.name, Direction::In)?));
            }
            for p in &step.out_pins {
                let data = pin_data(&p.name, Direction::Out)?;
                *writers.get_mut(&data).ok_or_else(|| EnactError::InvalidChain(format!("unknown data `{data}`")))? +=
                    1;
                outputs[i].push((p.name.clone(), data));
            }
            for (_, data) in &inputs[i] {
                if !paths.contains_key(data) {
                    return Err(EnactError::InvalidChain(format!("unknown data `{data}`")));
                }
            }
            let res = snapshot
                .get(&step.implementation)
                .cloned()
                .ok_or_else(|| EnactError::UnknownImplementation(step.id.clone()))?;
            implementations.push(res);
            let handler = handlers.get(&step.handler_kind).cloned().ok_or_else(|| EnactError::HandlerMissing {
                step: step.id.clone(),
                kind: step.handler_kind.clone(),
            })?;
            step_handlers.push(handler);
        }

        Ok(Self {
            chain,
            names,
            step_count: chain.steps.len(),
            preds,
            succs,
            inputs,
            outputs,
            paths,
            writers,
            metamodels,
            implementations,
            handlers: step_handlers,
            env: launch.env.clone(),
            workspace,
            logs: run.join("logs"),
        })
    }

    /// Removes stale files behind produced data nodes and creates the log
    /// directory.
    fn prepare(&self) -> Result<(), EnactError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| EnactError::Io { path, source }
        };
        for (data, &n) in &self.writers {
            let path = &self.paths[data];
            if n > 0 && path.exists() {
                std::fs::remove_file(path).map_err(io(path))?;
            }
        }
        std::fs::create_dir_all(&self.logs).map_err(io(&self.logs))
    }

    fn is_step(&self, i: usize) -> bool {
        i < self.step_count
    }

    fn records(&self) -> BTreeMap<String, StepRecord> {
        self.chain
            .steps
            .iter()
            .map(|s| {
                let rec = StepRecord {
                    status: StepStatus::NotStarted,
                    handler_kind: s.handler_kind.clone(),
                    started_at: None,
                    ended_at: None,
                    exit_info: None,
                };
                (s.id.clone(), rec)
            })
            .collect()
    }
}

/// Result of one step invocation.
struct Finished {
    index: usize,
    started: u64,
    ended: u64,
    result: Result<Vec<ArtifactRecord>, String>,
}

fn run_step(plan: &Plan<'_>, i: usize, mgm: &SharedMegamodel) -> Finished {
    let started = now_ms();
    let result = execute(plan, i, mgm);
    Finished { index: i, started, ended: now_ms(), result }
}

fn execute(plan: &Plan<'_>, i: usize, mgm: &SharedMegamodel) -> Result<Vec<ArtifactRecord>, String> {
    let step = &plan.chain.steps[i];
    let resolve = |pins: &[(String, String)]| -> Vec<(String, PathBuf)> {
        pins.iter().map(|(pin, data)| (pin.clone(), plan.paths[data].clone())).collect()
    };
    let inputs = resolve(&plan.inputs[i]);
    let outputs = resolve(&plan.outputs[i]);
    for (pin, path) in &inputs {
        if !path.is_file() {
            return Err(format!("input `{pin}` missing at {}", path.display()));
        }
    }
    for (_, path) in &outputs {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| e.to_string())?;
        }
    }
    let stdout = plan.logs.join(format!("{}.out", step.id));
    let stderr = plan.logs.join(format!("{}.err", step.id));
    for log in [&stdout, &stderr] {
        std::fs::File::create(log).map_err(|e| e.to_string())?;
    }
    let ctx = StepContext {
        step,
        implementation: &plan.implementations[i],
        inputs: &inputs,
        outputs: &outputs,
        env: &plan.env,
        workspace: &plan.workspace,
        stdout: &stdout,
        stderr: &stderr,
    };
    plan.handlers[i].run(&ctx).map_err(|e| e.to_string())?;
    for (pin, path) in &outputs {
        if !path.is_file() {
            return Err(HandlerError::MissingDeclaredOutput { step: step.id.clone(), pin: pin.clone() }.to_string());
        }
    }

    let mut guard = mgm.write();
    let sources: Vec<ResourceId> =
        inputs.iter().filter_map(|(_, p)| guard.by_location(ResourceKind::ModelInstance, p).cloned()).collect();
    let mut artifacts = Vec::new();
    for ((_, data), (_, path)) in plan.outputs[i].iter().zip(&outputs) {
        let id = guard.record_artifact(path, &plan.metamodels[data], &step.id).map_err(|e| e.to_string())?;
        for src in &sources {
            if *src != id {
                guard.add_relation(Relation::new(RelationKind::DerivedFrom, id.clone(), src.clone())).ok();
            }
        }
        let location = guard.get(&id).map(|r| r.location.clone()).unwrap_or_default();
        artifacts.push(ArtifactRecord { data_node: data.clone(), path: location, resource: id, producer: step.id.clone() });
    }
    Ok(artifacts)
}

/// Token state of a run, owned by the coordinator.
#[derive(Debug, Clone)]
pub struct Marking {
    /// Tokens still missing on incoming edges, per node.
    pending: Vec<usize>,
    writers_left: BTreeMap<String, usize>,
    fired: Vec<bool>,
    pub data_ready: BTreeSet<String>,
    pub running: BTreeSet<String>,
    pub completed: BTreeSet<String>,
    pub failed: BTreeSet<String>,
    /// Fire count per gateway.
    pub gateway_fires: BTreeMap<String, usize>,
}

impl Marking {
    fn new(plan: &Plan<'_>) -> Self {
        let data_ready =
            plan.writers.iter().filter(|(d, &n)| n == 0 && plan.paths[*d].is_file()).map(|(d, _)| d.clone()).collect();
        Self {
            pending: plan.preds.iter().map(Vec::len).collect(),
            writers_left: plan.writers.clone(),
            fired: vec![false; plan.names.len()],
            data_ready,
            running: BTreeSet::new(),
            completed: BTreeSet::new(),
            failed: BTreeSet::new(),
            gateway_fires: BTreeMap::new(),
        }
    }

    fn emit(&mut self, plan: &Plan<'_>, i: usize) {
        for &s in &plan.succs[i] {
            self.pending[s] -= 1;
        }
    }

    /// Fires every gateway holding all its tokens, until none is left.
    fn fire_gateways(&mut self, plan: &Plan<'_>) {
        loop {
            let ready: Vec<usize> = (plan.step_count..plan.names.len())
                .filter(|&g| !self.fired[g] && self.pending[g] == 0)
                .collect();
            if ready.is_empty() {
                return;
            }
            for g in ready {
                self.fired[g] = true;
                *self.gateway_fires.entry(plan.names[g].clone()).or_default() += 1;
                self.emit(plan, g);
            }
        }
    }

    /// Enabled steps in lexicographic order.
    fn enabled(&self, plan: &Plan<'_>) -> Vec<usize> {
        let mut out: Vec<usize> = (0..plan.step_count)
            .filter(|&i| !self.fired[i] && self.pending[i] == 0)
            .filter(|&i| plan.inputs[i].iter().all(|(_, d)| self.data_ready.contains(d)))
            .collect();
        out.sort_by(|a, b| plan.names[*a].cmp(&plan.names[*b]));
        out
    }

    fn start(&mut self, plan: &Plan<'_>, i: usize) {
        self.fired[i] = true;
        self.running.insert(plan.names[i].clone());
    }

    fn complete(&mut self, plan: &Plan<'_>, i: usize) {
        self.running.remove(&plan.names[i]);
        self.completed.insert(plan.names[i].clone());
        for (_, data) in &plan.outputs[i] {
            let left = self.writers_left.get_mut(data).expect("known data node");
            *left -= 1;
            if *left == 0 {
                self.data_ready.insert(data.clone());
            }
        }
        self.emit(plan, i);
    }

    fn fail(&mut self, plan: &Plan<'_>, i: usize) {
        self.running.remove(&plan.names[i]);
        self.failed.insert(plan.names[i].clone());
    }
}

/// Reader/writer holds per backing path.
#[derive(Default)]
struct Locks {
    held: BTreeMap<PathBuf, (usize, bool)>,
}

impl Locks {
    fn try_acquire(&mut self, plan: &Plan<'_>, i: usize) -> bool {
        let reads = plan.inputs[i].iter().map(|(_, d)| &plan.paths[d]);
        let writes: Vec<&PathBuf> = plan.outputs[i].iter().map(|(_, d)| &plan.paths[d]).collect();
        let free_to_read = |p: &PathBuf| self.held.get(p).is_none_or(|(_, w)| !w);
        let free_to_write = |p: &PathBuf| self.held.get(p).is_none_or(|(r, w)| *r == 0 && !w);
        if !reads.clone().all(free_to_read) || !writes.iter().all(|p| free_to_write(p)) {
            return false;
        }
        for p in reads {
            self.held.entry(p.clone()).or_default().0 += 1;
        }
        for p in writes {
            self.held.entry(p.clone()).or_default().1 = true;
        }
        true
    }

    fn release(&mut self, plan: &Plan<'_>, i: usize) {
        for (_, d) in &plan.inputs[i] {
            if let Some(h) = self.held.get_mut(&plan.paths[d]) {
                h.0 -= 1;
            }
        }
        for (_, d) in &plan.outputs[i] {
            if let Some(h) = self.held.get_mut(&plan.paths[d]) {
                h.1 = false;
            }
        }
        self.held.retain(|_, (r, w)| *r > 0 || *w);
    }
}

/// What a coordinator hands back to the report builder.
struct RunState {
    records: BTreeMap<String, StepRecord>,
    artifacts: Vec<ArtifactRecord>,
    failed: Option<String>,
}

impl RunState {
    fn new(plan: &Plan<'_>) -> Self {
        Self { records: plan.records(), artifacts: Vec::new(), failed: None }
    }

    /// Applies a finished step; returns whether it succeeded.
    fn absorb(&mut self, plan: &Plan<'_>, fin: Finished) -> bool {
        let rec = self.records.get_mut(&plan.names[fin.index]).expect("known step");
        rec.started_at = Some(fin.started);
        rec.ended_at = Some(fin.ended);
        match fin.result {
            Ok(arts) => {
                rec.status = StepStatus::Completed;
                rec.exit_info = Some("ok".into());
                self.artifacts.extend(arts);
                true
            }
            Err(info) => {
                rec.status = StepStatus::Failed;
                rec.exit_info = Some(info);
                self.failed.get_or_insert_with(|| plan.names[fin.index].clone());
                false
            }
        }
    }
}

/// The concurrent coordinator. `dispatch` starts a step somewhere and
/// `wait` blocks until any started step finishes.
fn coordinate(
    plan: &Plan<'_>,
    max_parallel: usize,
    dispatch: &mut dyn FnMut(usize),
    wait: &mut dyn FnMut() -> Finished,
) -> (RunState, Marking) {
    let mut state = RunState::new(plan);
    let mut marking = Marking::new(plan);
    let mut locks = Locks::default();
    let mut stop = false;
    loop {
        marking.fire_gateways(plan);
        if !stop {
            for i in marking.enabled(plan) {
                if marking.running.len() >= max_parallel {
                    break;
                }
                if !locks.try_acquire(plan, i) {
                    continue;
                }
                marking.start(plan, i);
                state.records.get_mut(&plan.names[i]).expect("known step").status = StepStatus::Running;
                dispatch(i);
            }
        }
        if marking.running.is_empty() {
            break;
        }
        let fin = wait();
        let i = fin.index;
        locks.release(plan, i);
        if state.absorb(plan, fin) {
            marking.complete(plan, i);
        } else {
            marking.fail(plan, i);
            stop = true;
        }
    }
    (state, marking)
}

#[cfg(feature = "parallel")]
fn run_concurrent(plan: &Plan<'_>, max_parallel: usize, mgm: &SharedMegamodel) -> Result<(RunState, Marking), EnactError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(max_parallel)
        .thread_name(|i| format!("maple-step-{i}"))
        .build()
        .map_err(|e| EnactError::Pool(e.to_string()))?;
    let (tx, rx) = std::sync::mpsc::channel::<Finished>();
    Ok(pool.in_place_scope(|scope| {
        let mut dispatch = |i: usize| {
            let tx = tx.clone();
            scope.spawn(move |_| {
                tx.send(run_step(plan, i, mgm)).ok();
            });
        };
        let mut wait = || rx.recv().expect("a running step always reports back");
        coordinate(plan, max_parallel, &mut dispatch, &mut wait)
    }))
}

#[cfg(not(feature = "parallel"))]
fn run_concurrent(plan: &Plan<'_>, max_parallel: usize, mgm: &SharedMegamodel) -> Result<(RunState, Marking), EnactError> {
    // Jobs run inline at dispatch; `wait` hands the results back in order.
    let queue = std::cell::RefCell::new(std::collections::VecDeque::new());
    let mut dispatch = |i: usize| queue.borrow_mut().push_back(run_step(plan, i, mgm));
    let mut wait = || queue.borrow_mut().pop_front().expect("a dispatched step has finished");
    Ok(coordinate(plan, max_parallel, &mut dispatch, &mut wait))
}

fn finish(
    plan: &Plan<'_>,
    launch: &LaunchConfig,
    mgm: &SharedMegamodel,
    before: &BTreeSet<ResourceId>,
    mut state: RunState,
) -> Result<EnactmentReport, EnactError> {
    let outcome = match state.failed.take() {
        Some(step) => Outcome::Failed { step },
        None => {
            let stuck: Vec<String> = state
                .records
                .iter()
                .filter(|(_, r)| r.status != StepStatus::Completed)
                .map(|(id, _)| id.clone())
                .collect();
            if !stuck.is_empty() {
                return Err(EnactError::Stalled(stuck));
            }
            Outcome::Success
        }
    };
    state.artifacts.sort();
    // One record per data node: the last writer in serialization order.
    let mut per_node: BTreeMap<String, ArtifactRecord> = BTreeMap::new();
    let ended = |a: &ArtifactRecord| state.records.get(&a.producer).and_then(|r| r.ended_at);
    for a in &state.artifacts {
        match per_node.get(&a.data_node) {
            Some(prev) if ended(prev) > ended(a) => {}
            _ => {
                per_node.insert(a.data_node.clone(), a.clone());
            }
        }
    }
    let mgm_delta: Vec<ResourceId> = mgm.read().resources().map(|r| r.id.clone()).filter(|id| !before.contains(id)).collect();
    let report = EnactmentReport {
        run_id: launch.run_id.clone(),
        per_step: state.records,
        artifacts: per_node.into_values().collect(),
        mgm_delta,
        outcome,
    };
    let path = report_path(&plan.workspace, &launch.run_id);
    save_report(&report, &path).map_err(|e| EnactError::Io { path, source: std::io::Error::other(e.to_string()) })?;
    Ok(report)
}

fn resource_ids(mgm: &SharedMegamodel) -> BTreeSet<ResourceId> {
    mgm.read().resources().map(|r| r.id.clone()).collect()
}

/// Runs a chain with up to `launch.max_parallel` concurrent steps. The
/// report is also written to `.maple/runs/<runId>/report.json`.
pub fn enact(
    chain: &TransformationChain,
    launch: &LaunchConfig,
    mgm: &SharedMegamodel,
    handlers: &Handlers,
) -> Result<EnactmentReport, EnactError> {
    enact_traced(chain, launch, mgm, handlers).map(|(report, _)| report)
}

/// As [`enact`], also returning the final marking.
pub fn enact_traced(
    chain: &TransformationChain,
    launch: &LaunchConfig,
    mgm: &SharedMegamodel,
    handlers: &Handlers,
) -> Result<(EnactmentReport, Marking), EnactError> {
    let plan = Plan::new(chain, launch, mgm, handlers)?;
    plan.prepare()?;
    let before = resource_ids(mgm);
    let (state, marking) = run_concurrent(&plan, launch.max_parallel.max(1), mgm)?;
    Ok((finish(&plan, launch, mgm, &before, state)?, marking))
}

/// Reference interpreter: one step at a time, always the lexicographically
/// smallest enabled one.
pub fn enact_sequential(
    chain: &TransformationChain,
    launch: &LaunchConfig,
    mgm: &SharedMegamodel,
    handlers: &Handlers,
) -> Result<EnactmentReport, EnactError> {
    let plan = Plan::new(chain, launch, mgm, handlers)?;
    plan.prepare()?;
    let before = resource_ids(mgm);
    let mut state = RunState::new(&plan);
    let mut done = vec![false; plan.names.len()];
    let mut started = vec![false; plan.names.len()];
    let ready = |done: &[bool], i: usize| plan.preds[i].iter().all(|&p| done[p]);
    let data_ready = |done: &[bool], data: &str| {
        let mut writers = (0..plan.step_count).filter(|&s| plan.outputs[s].iter().any(|(_, d)| d == data)).peekable();
        if writers.peek().is_none() {
            plan.paths[data].is_file()
        } else {
            writers.all(|s| done[s])
        }
    };
    loop {
        while let Some(g) = (0..plan.names.len()).find(|&g| !plan.is_step(g) && !done[g] && ready(&done, g)) {
            done[g] = true;
        }
        let next = (0..plan.step_count)
            .filter(|&i| !started[i] && ready(&done, i))
            .filter(|&i| plan.inputs[i].iter().all(|(_, d)| data_ready(&done, d)))
            .min_by(|a, b| plan.names[*a].cmp(&plan.names[*b]));
        let Some(i) = next else { break };
        started[i] = true;
        if state.absorb(&plan, run_step(&plan, i, mgm)) {
            done[i] = true;
        } else {
            break;
        }
    }
    finish(&plan, launch, mgm, &before, state)
}
