use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;

use thiserror::Error;

use crate::chain::Step;
use crate::discovery::spec::{substitute, BuiltinOp, SpecParameter};
use crate::discovery::{META_COMMAND, META_OP, META_PARAMETERS};
use crate::megamodel::Resource;
use crate::procmodel::Direction;

/// Environment variable carrying the id of the step being run.
pub const STEP_ID_VAR: &str = "MAPLE_STEP_ID";

/// Everything a handler needs to run one step.
pub struct StepContext<'a> {
    pub step: &'a Step,
    /// The implementing resource (transformation or executable spec).
    pub implementation: &'a Resource,
    /// Input pins with resolved paths, in pin order.
    pub inputs: &'a [(String, PathBuf)],
    /// Output pins with resolved paths, in pin order.
    pub outputs: &'a [(String, PathBuf)],
    pub env: &'a BTreeMap<String, String>,
    pub workspace: &'a Path,
    pub stdout: &'a Path,
    pub stderr: &'a Path,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum HandlerError {
    #[error("failed to spawn `{program}`: {message}")]
    SpawnFailure { program: String, message: String },
    #[error("exited with {}", .code.map(|c| format!("status {c}")).unwrap_or_else(|| "a signal".into()))]
    NonZeroExit { code: Option<i32> },
    #[error("declared output `{pin}` of `{step}` was not produced")]
    MissingDeclaredOutput { step: String, pin: String },
    #[error("{0}")]
    ArityMismatch(String),
    #[error("invalid implementation: {0}")]
    BadImplementation(String),
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for HandlerError {
    fn from(e: std::io::Error) -> Self {
        HandlerError::Io(e.to_string())
    }
}

/// Runs one kind of step implementation. A successful run must produce
/// every declared output.
pub trait Handler: Send + Sync {
    fn kind(&self) -> &str;
    fn run(&self, ctx: &StepContext<'_>) -> Result<(), HandlerError>;
}

/// Handlers keyed by kind.
#[derive(Clone, Default)]
pub struct Handlers {
    map: BTreeMap<String, Arc<dyn Handler>>,
}

impl Handlers {
    pub fn new() -> Self {
        Self::default()
    }

    /// The `builtin` and `exec` handlers.
    pub fn standard() -> Self {
        Self::new().with(BuiltinHandler).with(ExecHandler)
    }

    pub fn with(mut self, handler: impl Handler + 'static) -> Self {
        self.register(Arc::new(handler));
        self
    }

    /// Adds or replaces the handler for its kind.
    pub fn register(&mut self, handler: Arc<dyn Handler>) {
        self.map.insert(handler.kind().to_string(), handler);
    }

    pub fn get(&self, kind: &str) -> Option<&Arc<dyn Handler>> {
        self.map.get(kind)
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }
}

/// Runs a builtin operation over files. Shared by the in-process handler
/// and the `run-step` command.
pub fn run_builtin(op: BuiltinOp, step_id: &str, inputs: &[PathBuf], outputs: &[PathBuf]) -> Result<(), HandlerError> {
    op.check_arity(inputs.len(), outputs.len()).map_err(HandlerError::ArityMismatch)?;
    let write = |path: &Path, bytes: &[u8]| -> Result<(), HandlerError> {
        crate::util::write_file(path, bytes)?;
        Ok(())
    };
    match op {
        BuiltinOp::Copy => write(&outputs[0], &std::fs::read(&inputs[0])?),
        BuiltinOp::Concat => {
            let mut buf = Vec::new();
            for input in inputs {
                buf.extend(std::fs::read(input)?);
            }
            write(&outputs[0], &buf)
        }
        BuiltinOp::Template => {
            let mut buf = format!("# produced-by: {step_id}\n").into_bytes();
            buf.extend(std::fs::read(&inputs[0])?);
            write(&outputs[0], &buf)
        }
        BuiltinOp::Fail => Err(HandlerError::NonZeroExit { code: Some(1) }),
    }
}

/// In-process builtin operations (`copy`, `concat`, `template`, `fail`).
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinHandler;

impl Handler for BuiltinHandler {
    fn kind(&self) -> &str {
        "builtin"
    }

    fn run(&self, ctx: &StepContext<'_>) -> Result<(), HandlerError> {
        let op_name = ctx.implementation.meta.get(META_OP).map(String::as_str).unwrap_or_default();
        let op = BuiltinOp::parse(op_name)
            .ok_or_else(|| HandlerError::BadImplementation(format!("unknown builtin op `{op_name}`")))?;
        let ins: Vec<PathBuf> = ctx.inputs.iter().map(|(_, p)| p.clone()).collect();
        let outs: Vec<PathBuf> = ctx.outputs.iter().map(|(_, p)| p.clone()).collect();
        let result = run_builtin(op, &ctx.step.id, &ins, &outs);
        let mut log = File::create(ctx.stderr)?;
        if let Err(e) = &result {
            writeln!(log, "{op}: {e}")?;
        }
        result
    }
}

/// Spawns the command of an executable spec, placeholders replaced by
/// resolved paths.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExecHandler;

impl ExecHandler {
    /// The argument vector for a step.
    pub fn command_line(ctx: &StepContext<'_>) -> Result<Vec<String>, HandlerError> {
        let meta = &ctx.implementation.meta;
        let command = meta.get(META_COMMAND).ok_or_else(|| HandlerError::BadImplementation("no command".into()))?;
        let params: Vec<SpecParameter> = match meta.get(META_PARAMETERS) {
            Some(text) => serde_json::from_str(text).map_err(|e| HandlerError::BadImplementation(e.to_string()))?,
            None => Vec::new(),
        };
        let words = shlex::split(command)
            .ok_or_else(|| HandlerError::BadImplementation(format!("cannot split command `{command}`")))?;
        let lookup = |name: &str| -> Option<String> {
            let p = params.iter().find(|p| p.name == name)?;
            let pins = match p.direction {
                Direction::In => ctx.inputs,
                Direction::Out => ctx.outputs,
            };
            pins.iter().find(|(pin, _)| *pin == p.model_ref).map(|(_, path)| path.to_string_lossy().into_owned())
        };
        words
            .iter()
            .map(|w| substitute(w, lookup).map_err(|e| HandlerError::BadImplementation(e.to_string())))
            .collect()
    }
}

impl Handler for ExecHandler {
    fn kind(&self) -> &str {
        "exec"
    }

    fn run(&self, ctx: &StepContext<'_>) -> Result<(), HandlerError> {
        let argv = Self::command_line(ctx)?;
        let Some((program, args)) = argv.split_first() else {
            return Err(HandlerError::BadImplementation("empty command".into()));
        };
        let status = Command::new(program)
            .args(args)
            .current_dir(ctx.workspace)
            .envs(ctx.env)
            .env(STEP_ID_VAR, &ctx.step.id)
            .stdin(Stdio::null())
            .stdout(File::create(ctx.stdout)?)
            .stderr(File::create(ctx.stderr)?)
            .status()
            .map_err(|e| HandlerError::SpawnFailure { program: program.clone(), message: e.to_string() })?;
        if !status.success() {
            return Err(HandlerError::NonZeroExit { code: status.code() });
        }
        Ok(())
    }
}
