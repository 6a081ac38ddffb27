//! File loaders.
//!
//! A loader recognizes files by suffix and extracts what the megamodel
//! needs to know about them. New formats are supported by adding a loader
//! to the [`LoaderRegistry`]; the discovery engine itself never changes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::spec::{parse_builtin_spec, parse_exec_spec, SpecError};
use super::DiscoveryError;
use crate::megamodel::ResourceKind;
use crate::procmodel::parse_pm;

/// Meta keys written by the step loaders.
pub const META_HANDLER: &str = "handler";
pub const META_COMMAND: &str = "command";
pub const META_OP: &str = "op";
pub const META_PARAMETERS: &str = "parameters";

/// What a loader extracted from a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub name: String,
    /// Name of the metamodel the file conforms to.
    pub metamodel: Option<String>,
    pub meta: BTreeMap<String, String>,
}

pub trait Loader: Send + Sync {
    fn name(&self) -> &str;
    fn extensions(&self) -> &[&'static str];
    fn kind(&self) -> ResourceKind;
    fn extract(&self, path: &Path) -> Result<Extracted, DiscoveryError>;

    fn matches(&self, path: &Path) -> bool {
        let file = path.file_name().map(|f| f.to_string_lossy()).unwrap_or_default();
        self.extensions().iter().any(|ext| file.len() > ext.len() && file.ends_with(ext))
    }
}

/// Returns the unique loader whose extension matches `path`.
pub fn classify<'a>(path: &Path, loaders: &'a [Box<dyn Loader>]) -> Option<&'a dyn Loader> {
    loaders.iter().find(|l| l.matches(path)).map(|l| l.as_ref())
}

#[derive(Default)]
pub struct LoaderRegistry {
    loaders: Vec<Box<dyn Loader>>,
}

impl LoaderRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The built-in loaders: metamodel descriptors, process models,
    /// executable specs, builtin transformations, weave and chain stores.
    pub fn standard() -> Self {
        let mut reg = Self::new();
        let all: [Box<dyn Loader>; 6] = [
            Box::new(MetamodelLoader),
            Box::new(ProcessModelLoader),
            Box::new(ExecSpecLoader),
            Box::new(BuiltinLoader),
            Box::new(StoreLoader { name: "weave", ext: [".weave.json"], kind: ResourceKind::WeaveModel }),
            Box::new(StoreLoader { name: "chain", ext: [".chain.json"], kind: ResourceKind::Chain }),
        ];
        for l in all {
            reg.add(l).expect("built-in loaders are disjoint");
        }
        reg
    }

    /// Adds a loader. No extension may be a suffix of another loader's
    /// extension, so every path classifies to at most one loader.
    pub fn add(&mut self, loader: Box<dyn Loader>) -> Result<(), DiscoveryError> {
        for existing in &self.loaders {
            for a in existing.extensions() {
                for b in loader.extensions() {
                    if a.ends_with(b) || b.ends_with(a) {
                        return Err(DiscoveryError::OverlappingExtension {
                            extension: b.to_string(),
                            existing: existing.name().to_string(),
                            added: loader.name().to_string(),
                        });
                    }
                }
            }
        }
        self.loaders.push(loader);
        Ok(())
    }

    pub fn classify(&self, path: &Path) -> Option<&dyn Loader> {
        classify(path, &self.loaders)
    }

    pub fn loaders(&self) -> &[Box<dyn Loader>] {
        &self.loaders
    }
}

fn read(path: &Path) -> Result<String, DiscoveryError> {
    std::fs::read_to_string(path).map_err(|e| DiscoveryError::Io { path: path.to_path_buf(), source: e })
}

fn spec_err(path: &Path) -> impl Fn(SpecError) -> DiscoveryError + '_ {
    move |e| DiscoveryError::Spec { path: path.to_path_buf(), source: e }
}

fn stem(path: &Path, ext: &str) -> String {
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    file.strip_suffix(ext).unwrap_or(&file).to_string()
}

/// `<name>.mm.json` → `{ "name", "doc" }`.
pub struct MetamodelLoader;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MetamodelDoc {
    name: String,
    #[serde(default)]
    doc: String,
}

impl Loader for MetamodelLoader {
    fn name(&self) -> &str {
        "metamodel"
    }

    fn extensions(&self) -> &[&'static str] {
        &[".mm.json"]
    }

    fn kind(&self) -> ResourceKind {
        ResourceKind::MetamodelDescriptor
    }

    fn extract(&self, path: &Path) -> Result<Extracted, DiscoveryError> {
        let doc: MetamodelDoc = serde_json::from_str(&read(path)?).map_err(|e| DiscoveryError::Spec {
            path: path.to_path_buf(),
            source: SpecError::Syntax { line: e.line(), column: e.column(), message: e.to_string() },
        })?;
        if doc.name.is_empty() {
            return Err(spec_err(path)(SpecError::Syntax { line: 0, column: 0, message: "empty name".into() }));
        }
        let mut meta = BTreeMap::new();
        if !doc.doc.is_empty() {
            meta.insert("doc".to_string(), doc.doc);
        }
        Ok(Extracted { name: doc.name, metamodel: Some("core".into()), meta })
    }
}

pub struct ProcessModelLoader;

impl Loader for ProcessModelLoader {
    fn name(&self) -> &str {
        "pm"
    }

    fn extensions(&self) -> &[&'static str] {
        &[".pm.json"]
    }

    fn kind(&self) -> ResourceKind {
        ResourceKind::ProcessModel
    }

    fn extract(&self, path: &Path) -> Result<Extracted, DiscoveryError> {
        let pm = parse_pm(&read(path)?).map_err(|e| DiscoveryError::Pm(e.in_file(path)))?;
        Ok(Extracted { name: pm.name, metamodel: Some("pm".into()), meta: BTreeMap::new() })
    }
}

pub struct ExecSpecLoader;

impl Loader for ExecSpecLoader {
    fn name(&self) -> &str {
        "process"
    }

    fn extensions(&self) -> &[&'static str] {
        &[".process"]
    }

    fn kind(&self) -> ResourceKind {
        ResourceKind::ExecutableSpec
    }

    fn extract(&self, path: &Path) -> Result<Extracted, DiscoveryError> {
        let spec = parse_exec_spec(&read(path)?).map_err(spec_err(path))?;
        let meta = BTreeMap::from([
            (META_HANDLER.to_string(), "exec".to_string()),
            (META_COMMAND.to_string(), spec.command),
            (META_PARAMETERS.to_string(), serde_json::to_string(&spec.parameters).expect("serializes")),
        ]);
        Ok(Extracted { name: spec.name, metamodel: Some("process".into()), meta })
    }
}

pub struct BuiltinLoader;

impl Loader for BuiltinLoader {
    fn name(&self) -> &str {
        "builtin"
    }

    fn extensions(&self) -> &[&'static str] {
        &[".builtin.json"]
    }

    fn kind(&self) -> ResourceKind {
        ResourceKind::Transformation
    }

    fn extract(&self, path: &Path) -> Result<Extracted, DiscoveryError> {
        let spec = parse_builtin_spec(&read(path)?).map_err(spec_err(path))?;
        let meta = BTreeMap::from([
            (META_HANDLER.to_string(), "builtin".to_string()),
            (META_OP.to_string(), spec.op.to_string()),
            (META_PARAMETERS.to_string(), serde_json::to_string(&spec.parameters).expect("serializes")),
        ]);
        Ok(Extracted { name: spec.name, metamodel: Some("process".into()), meta })
    }
}

/// Weave and chain stores; the name is the file stem.
pub struct StoreLoader {
    name: &'static str,
    ext: [&'static str; 1],
    kind: ResourceKind,
}

impl Loader for StoreLoader {
    fn name(&self) -> &str {
        self.name
    }

    fn extensions(&self) -> &[&'static str] {
        &self.ext
    }

    fn kind(&self) -> ResourceKind {
        self.kind
    }

    fn extract(&self, path: &Path) -> Result<Extracted, DiscoveryError> {
        serde_json::from_str::<serde_json::Value>(&read(path)?).map_err(|e| DiscoveryError::Spec {
            path: path.to_path_buf(),
            source: SpecError::Syntax { line: e.line(), column: e.column(), message: e.to_string() },
        })?;
        Ok(Extracted {
            name: stem(path, self.ext[0]),
            metamodel: Some(self.name.to_string()),
            meta: BTreeMap::new(),
        })
    }
}
