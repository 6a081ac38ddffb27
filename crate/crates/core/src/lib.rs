//! Megamodel-driven process enactment.
//!
//! The pipeline has five stages, each in its own module:
//!
//! 1. [`megamodel`] keeps a registry of every resource (metamodels, models,
//!    transformations, executable specs, process models, weave models) and
//!    the relations between them.
//! 2. [`discovery`] walks a workspace, classifies files through pluggable
//!    loaders and registers them. PM discovery additionally registers the
//!    implementations and the intermediate models a process model needs.
//! 3. [`weave`] binds process-model elements to megamodel resources.
//! 4. [`chain`] flattens the hierarchical process model into a typed
//!    transformation chain with synthesized fork/join gateways.
//! 5. [`enactor`] executes a chain with token semantics and records every
//!    produced artifact back into the megamodel.
//!
//! [`procmodel`] defines the process-model language itself and [`cli`]
//! drives the whole pipeline from the command line.

pub mod chain;
pub mod cli;
pub mod diag;
pub mod discovery;
pub mod enactor;
pub mod megamodel;
pub mod procmodel;
pub mod weave;

pub(crate) mod util;

pub use diag::{Diagnostic, Severity};
