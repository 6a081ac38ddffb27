//! The `maple` command line.
//!
//! Exit codes: 0 on success, 1 when the user's input is at fault (the
//! diagnostics say where), 2 on internal or environmental failure.
//! Relative path arguments are resolved against the workspace, except for
//! `run-step`, which resolves them against the current directory.

pub mod fixture;
pub mod pipeline;

use std::ffi::OsString;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use crate::chain::export_dot;
use crate::diag::{has_errors, Diagnostic};
use crate::discovery::spec::BuiltinOp;
use crate::discovery::{discover_pm, discover_workspace, register_file, LoaderRegistry};
use crate::enactor::{
    enact, enact_sequential, load_report, parse_launch_config, report_path, run_builtin, EnactError, EnactmentReport,
    Handlers, Outcome, STEP_ID_VAR,
};
use crate::megamodel::store::{self, StoreError, STATE_DIR};
use crate::megamodel::{to_dot, Megamodel, SharedMegamodel};
use crate::procmodel::{load_library, parse_pm_file, resolve_calls, validate_pm};
use pipeline::{check_chain, prepare, translate, PipelineError};

#[derive(Parser, Debug)]
#[command(name = "maple", version, about = "Megamodel-driven process enactment")]
struct Cli {
    /// Workspace root directory.
    #[arg(long, global = true, env = "MAPLE_WORKSPACE", default_value = ".")]
    workspace: PathBuf,
    /// Only print errors and final results.
    #[arg(long, global = true)]
    quiet: bool,
    /// Print diagnostics as JSON lines.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Create the workspace state directory, optionally with a sample workspace.
    Init {
        #[arg(long, value_enum)]
        fixture: Option<FixtureName>,
    },
    /// Register every recognizable file below ROOT (default: the workspace).
    Discover { root: Option<PathBuf> },
    /// Register a single file.
    Register { path: PathBuf },
    /// Inspect the megamodel.
    Mgm {
        #[command(subcommand)]
        command: MgmCommand,
    },
    /// Work with process models.
    Pm {
        #[command(subcommand)]
        command: PmCommand,
    },
    /// Rescan the workspace, then weave a process model and store the result.
    Weave { pm: PathBuf },
    /// Rescan the workspace, then translate a process model into a transformation chain.
    Translate {
        pm: PathBuf,
        /// Also render the chain as DOT, to FILE or to standard output.
        #[arg(long, value_name = "FILE")]
        dot: Option<Option<PathBuf>>,
        /// Check input bindings against this launch configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Discover, translate, validate and run a process model.
    Enact {
        pm: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Use the one-step-at-a-time reference interpreter.
        #[arg(long)]
        sequential: bool,
    },
    /// Show the report of a run.
    Report { run_id: String },
    /// Run a builtin operation on files.
    RunStep {
        #[arg(value_enum)]
        op: OpName,
        #[arg(long = "in", value_name = "PATH")]
        inputs: Vec<PathBuf>,
        #[arg(long = "out", value_name = "PATH")]
        outputs: Vec<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum MgmCommand {
    /// List resources, or render the megamodel graph.
    Show {
        #[arg(long)]
        dot: bool,
    },
}

#[derive(Subcommand, Debug)]
enum PmCommand {
    /// Check a process model and the models it calls.
    Validate { path: PathBuf },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FixtureName {
    Nfv,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OpName {
    Copy,
    Concat,
    Template,
    Fail,
}

impl From<OpName> for BuiltinOp {
    fn from(op: OpName) -> Self {
        match op {
            OpName::Copy => BuiltinOp::Copy,
            OpName::Concat => BuiltinOp::Concat,
            OpName::Template => BuiltinOp::Template,
            OpName::Fail => BuiltinOp::Fail,
        }
    }
}

enum Failure {
    User(Vec<Diagnostic>),
    Internal(String),
}

impl Failure {
    fn user(message: impl Into<String>) -> Self {
        Failure::User(vec![Diagnostic::error(message)])
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io { .. } => Failure::Internal(e.to_string()),
            StoreError::MalformedStore { .. } => Failure::user(e.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_internal() {
            Failure::Internal(e.to_string())
        } else {
            Failure::User(vec![e.to_diagnostic()])
        }
    }
}

type CmdResult = Result<(), Failure>;

struct Ctx<'a> {
    ws: PathBuf,
    quiet: bool,
    json: bool,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn say(&mut self, text: impl std::fmt::Display) {
        let _ = writeln!(self.out, "{text}");
    }

    fn info(&mut self, text: impl std::fmt::Display) {
        if !self.quiet {
            self.say(text);
        }
    }

    fn diag(&mut self, d: &Diagnostic) {
        if self.quiet && !d.is_error() {
            return;
        }
        let _ = if self.json {
            writeln!(self.err, "{}", serde_json::to_string(d).expect("diagnostic serializes"))
        } else {
            writeln!(self.err, "{d}")
        };
    }

    fn diags(&mut self, ds: &[Diagnostic]) {
        for d in ds {
            self.diag(d);
        }
    }

    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.ws.join(p)
        }
    }

    fn load(&self) -> Result<Megamodel, Failure> {
        Ok(store::load_or_base(&self.ws)?)
    }

    fn save(&self, mgm: &Megamodel) -> CmdResult {
        Ok(store::save(mgm, &store::store_path(&self.ws))?)
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    let result = catch_unwind(AssertUnwindSafe(|| dispatch(cli, &mut *out, &mut *err)));
    let (code, failure) = match result {
        Ok(Ok(())) => return 0,
        Ok(Err(Failure::User(diags))) => (1, diags),
        Ok(Err(Failure::Internal(msg))) => (2, vec![Diagnostic::error(format!("internal error: {msg}"))]),
        Err(_) => (2, vec![Diagnostic::error("internal error: unexpected panic")]),
    };
    for d in failure {
        let _ = writeln!(err, "{d}");
    }
    code
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    if let Command::RunStep { op, inputs, outputs } = &cli.command {
        let step = std::env::var(STEP_ID_VAR).unwrap_or_else(|_| "run-step".into());
        return run_builtin((*op).into(), &step, inputs, outputs).map_err(|e| Failure::user(format!("run-step: {e}")));
    }
    if let Command::Init { .. } = cli.command {
        std::fs::create_dir_all(&cli.workspace).map_err(|e| Failure::Internal(format!("{}: {e}", cli.workspace.display())))?;
    }
    let ws = cli
        .workspace
        .canonicalize()
        .map_err(|e| Failure::user(format!("workspace `{}`: {e}", cli.workspace.display())))?;
    let mut ctx = Ctx { ws, quiet: cli.quiet, json: cli.json, out, err };
    match cli.command {
        Command::Init { fixture } => init(&mut ctx, fixture),
        Command::Discover { root } => discover(&mut ctx, root),
        Command::Register { path } => register(&mut ctx, &path),
        Command::Mgm { command: MgmCommand::Show { dot } } => show(&mut ctx, dot),
        Command::Pm { command: PmCommand::Validate { path } } => validate(&mut ctx, &path),
        Command::Weave { pm } => weave(&mut ctx, &pm),
        Command::Translate { pm, dot, config } => translate_cmd(&mut ctx, &pm, dot, config),
        Command::Enact { pm, config, sequential } => enact_cmd(&mut ctx, &pm, &config, sequential),
        Command::Report { run_id } => report(&mut ctx, &run_id),
        Command::RunStep { .. } => unreachable!("handled above"),
    }
}

fn init(ctx: &mut Ctx<'_>, fixture: Option<FixtureName>) -> CmdResult {
    let internal = |e: std::io::Error| Failure::Internal(e.to_string());
    std::fs::create_dir_all(ctx.ws.join(STATE_DIR)).map_err(internal)?;
    if let Some(FixtureName::Nfv) = fixture {
        fixture::write_nfv(&ctx.ws).map_err(internal)?;
    }
    if !store::store_path(&ctx.ws).exists() {
        ctx.save(&Megamodel::base(&ctx.ws))?;
    }
    let ws = ctx.ws.display().to_string();
    ctx.info(format!("initialized workspace {ws}"));
    Ok(())
}

fn discover(ctx: &mut Ctx<'_>, root: Option<PathBuf>) -> CmdResult {
    let mut mgm = ctx.load()?;
    let root = root.map(|r| ctx.path(&r)).unwrap_or_else(|| ctx.ws.clone());
    if !root.is_dir() {
        return Err(Failure::user(format!("`{}` is not a directory", root.display())));
    }
    let report = discover_workspace(&root, &mut mgm);
    ctx.save(&mgm)?;
    ctx.diags(&report.warnings);
    for (path, reason) in &report.skipped {
        let rel = crate::util::relative_location(&ctx.ws, path);
        ctx.info(format!("skipped {rel}: {reason}"));
    }
    ctx.say(format!(
        "registered {} new, {} unchanged, {} skipped",
        report.registered.len(),
        report.unchanged.len(),
        report.skipped.len()
    ));
    Ok(())
}

fn register(ctx: &mut Ctx<'_>, path: &Path) -> CmdResult {
    let mut mgm = ctx.load()?;
    let (id, created) =
        register_file(&ctx.path(path), &mut mgm, &LoaderRegistry::standard()).map_err(|e| Failure::User(vec![e.to_diagnostic()]))?;
    ctx.save(&mgm)?;
    let res = mgm.get(&id).expect("just registered");
    let state = if created { "registered" } else { "already registered" };
    ctx.say(format!("{id} {} {} ({state})", res.kind, res.name));
    Ok(())
}

fn show(ctx: &mut Ctx<'_>, dot: bool) -> CmdResult {
    let mgm = ctx.load()?;
    if dot {
        let _ = write!(ctx.out, "{}", to_dot(&mgm));
    } else if ctx.json {
        let _ = write!(ctx.out, "{}", store::to_string(&mgm));
    } else {
        let rows: Vec<[String; 5]> = mgm
            .resources()
            .map(|r| {
                let mm = r.metamodel.as_ref().and_then(|m| mgm.get(m)).map(|m| m.name.clone()).unwrap_or("-".into());
                [r.id.to_string(), r.kind.to_string(), r.name.clone(), r.location.clone(), mm]
            })
            .collect();
        let header = ["ID", "KIND", "NAME", "LOCATION", "METAMODEL"].map(String::from);
        let mut widths = [0usize; 5];
        for row in std::iter::once(&header).chain(&rows) {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        for row in std::iter::once(&header).chain(&rows) {
            let line: Vec<String> = row.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
            ctx.say(line.join("  ").trim_end());
        }
    }
    Ok(())
}

fn validate(ctx: &mut Ctx<'_>, path: &Path) -> CmdResult {
    let path = ctx.path(path);
    let pm = parse_pm_file(&path).map_err(|e| Failure::User(vec![e.to_diagnostic()]))?;
    let mut diags = validate_pm(&pm);
    if !has_errors(&diags) && !pm.calls.is_empty() {
        let dir = path.parent().unwrap_or(Path::new("."));
        let lib = load_library(dir).map_err(|e| Failure::User(vec![e.to_diagnostic()]))?;
        if let Err(e) = resolve_calls(pm, &lib.models) {
            diags.push(crate::discovery::DiscoveryError::from(e).to_diagnostic());
        }
    }
    let rel = crate::util::relative_location(&ctx.ws, &path);
    let (errors, warnings): (Vec<Diagnostic>, Vec<Diagnostic>) = diags.into_iter().partition(Diagnostic::is_error);
    ctx.diags(&warnings);
    if !errors.is_empty() {
        return Err(Failure::User(errors.into_iter().map(|d| located(d, &rel)).collect()));
    }
    ctx.say(format!("{rel}: ok"));
    Ok(())
}

fn located(d: Diagnostic, file: &str) -> Diagnostic {
    match &d.location {
        Some(loc) if loc.starts_with(file) => d,
        Some(loc) => {
            let loc = format!("{file}: {loc}");
            Diagnostic { location: Some(loc), ..d }
        }
        None => d.at(file),
    }
}

/// Brings the megamodel up to date with the workspace before a model is
/// woven or translated.
fn rescan(ctx: &mut Ctx<'_>) -> Result<Megamodel, Failure> {
    let mut mgm = ctx.load()?;
    let root = ctx.ws.clone();
    let report = discover_workspace(&root, &mut mgm);
    ctx.diags(&report.warnings);
    Ok(mgm)
}

fn weave(ctx: &mut Ctx<'_>, pm: &Path) -> CmdResult {
    let mut mgm = rescan(ctx)?;
    let found = discover_pm(&ctx.path(pm), &mut mgm, None, &LoaderRegistry::standard())
        .map_err(|e| Failure::from(PipelineError::from(e)))?;
    ctx.save(&mgm)?;
    let rel = crate::util::relative_location(&ctx.ws, &found.weave_path);
    ctx.say(format!("{}: {} mappings -> {rel}", found.resolved.root.name, found.weave.mappings.len()));
    Ok(())
}

fn read_launch(ctx: &mut Ctx<'_>, config: &Path) -> Result<crate::enactor::LaunchConfig, Failure> {
    let path = ctx.path(config);
    let rel = crate::util::relative_location(&ctx.ws, &path);
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::User(vec![Diagnostic::error(e.to_string()).at(&rel)]))?;
    let (launch, warnings) = parse_launch_config(&text).map_err(|e| match e {
        crate::enactor::LaunchError::Syntax { line, column, message } => {
            Failure::User(vec![Diagnostic::error(message).at(format!("{rel}:{line}:{column}"))])
        }
    })?;
    let warnings: Vec<Diagnostic> = warnings.into_iter().map(|d| d.at(&rel)).collect();
    ctx.diags(&warnings);
    Ok(launch)
}

fn translate_cmd(ctx: &mut Ctx<'_>, pm: &Path, dot: Option<Option<PathBuf>>, config: Option<PathBuf>) -> CmdResult {
    let launch = config.map(|c| read_launch(ctx, &c)).transpose()?;
    let mut mgm = rescan(ctx)?;
    let t = translate(&ctx.path(pm), &mut mgm)?;
    ctx.save(&mgm)?;
    let (errors, warnings): (Vec<Diagnostic>, Vec<Diagnostic>) =
        check_chain(&t.chain, &mgm, launch.as_ref()).into_iter().partition(Diagnostic::is_error);
    ctx.diags(&warnings);
    if !errors.is_empty() {
        return Err(Failure::User(errors));
    }
    match dot {
        Some(None) => {
            let _ = write!(ctx.out, "{}", export_dot(&t.chain));
        }
        Some(Some(file)) => {
            let file = ctx.path(&file);
            crate::util::write_file(&file, export_dot(&t.chain).as_bytes())
                .map_err(|e| Failure::Internal(format!("{}: {e}", file.display())))?;
        }
        None => {}
    }
    let rel = crate::util::relative_location(&ctx.ws, &t.chain_path);
    let c = &t.chain;
    ctx.info(format!(
        "{}: {} steps, {} gateways, {} data nodes -> {rel}",
        c.name,
        c.steps.len(),
        c.gateways.len(),
        c.data_nodes.len()
    ));
    Ok(())
}

/// Puts the directory of the running executable first on the step PATH so
/// that exec specs can invoke `maple run-step`.
fn with_own_path(env: &mut std::collections::BTreeMap<String, String>) {
    let Some(dir) = std::env::current_exe().ok().and_then(|e| e.parent().map(Path::to_path_buf)) else { return };
    let rest = env.get("PATH").cloned().or_else(|| std::env::var("PATH").ok()).unwrap_or_default();
    let paths = std::iter::once(dir).chain(std::env::split_paths(&rest));
    if let Ok(joined) = std::env::join_paths(paths) {
        env.insert("PATH".into(), joined.to_string_lossy().into_owned());
    }
}

fn enact_cmd(ctx: &mut Ctx<'_>, pm: &Path, config: &Path, sequential: bool) -> CmdResult {
    let mut launch = read_launch(ctx, config)?;
    with_own_path(&mut launch.env);
    let mut mgm = ctx.load()?;
    let (_, t, diags) = prepare(&ctx.path(pm), &launch, &mut mgm)?;
    let (errors, warnings): (Vec<Diagnostic>, Vec<Diagnostic>) = diags.into_iter().partition(Diagnostic::is_error);
    ctx.diags(&warnings);
    if !errors.is_empty() {
        ctx.save(&mgm)?;
        return Err(Failure::User(errors));
    }
    let shared = SharedMegamodel::new(mgm);
    let handlers = Handlers::standard();
    let result =
        if sequential { enact_sequential(&t.chain, &launch, &shared, &handlers) } else { enact(&t.chain, &launch, &shared, &handlers) };
    ctx.save(&shared.into_inner())?;
    let report = result.map_err(|e| match e {
        EnactError::Stalled(_) | EnactError::Io { .. } | EnactError::Pool(_) => Failure::Internal(e.to_string()),
        other => Failure::user(other.to_string()),
    })?;
    print_summary(ctx, &report);
    let rel = crate::util::relative_location(&ctx.ws, &report_path(&ctx.ws, &report.run_id));
    ctx.say(format!("report: {rel}"));
    match &report.outcome {
        Outcome::Success => Ok(()),
        Outcome::Failed { step } => {
            let info = report.per_step[step].exit_info.clone().unwrap_or_default();
            Err(Failure::User(vec![Diagnostic::error(format!("step failed: {info}")).at(step)]))
        }
    }
}

fn print_summary(ctx: &mut Ctx<'_>, report: &EnactmentReport) {
    if ctx.quiet {
        return;
    }
    let width = report.per_step.keys().map(String::len).max().unwrap_or(4).max(4);
    ctx.say(format!("{:<width$}  {:<11}  {:<7}  EXIT", "STEP", "STATUS", "HANDLER"));
    for (id, r) in &report.per_step {
        let status = serde_json::to_value(r.status).expect("status serializes");
        let status = status.as_str().unwrap_or_default().to_string();
        let exit = r.exit_info.clone().unwrap_or_default();
        ctx.say(format!("{id:<width$}  {status:<11}  {:<7}  {exit}", r.handler_kind).trim_end());
    }
    match &report.outcome {
        Outcome::Success => ctx.say(format!("run {}: success, {} artifacts", report.run_id, report.artifacts.len())),
        Outcome::Failed { step } => ctx.say(format!("run {}: failed at {step}", report.run_id)),
    }
}

fn report(ctx: &mut Ctx<'_>, run_id: &str) -> CmdResult {
    let path = report_path(&ctx.ws, run_id);
    if !path.is_file() {
        return Err(Failure::user(format!("no report for run `{run_id}`")));
    }
    let report = load_report(&path)?;
    if ctx.json {
        let _ = writeln!(ctx.out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        return Ok(());
    }
    let quiet = std::mem::replace(&mut ctx.quiet, false);
    print_summary(ctx, &report);
    ctx.quiet = quiet;
    for a in &report.artifacts {
        ctx.say(format!("{}  {}  {}", a.data_node, a.resource, a.path));
    }
    Ok(())
}
