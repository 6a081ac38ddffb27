//! The model registry.
//!
//! Every artifact the enactment engine touches is a [`Resource`]: metamodel
//! descriptors, model instances, transformations, executable specs, process
//! models, weave models and chains. Resources are linked by typed
//! [`Relation`]s. The registry keeps referential integrity at all times and
//! is persisted as a single JSON document (see [`store`]).

mod dot;
mod shared;
pub mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{relative_location, resolve_location};

pub use dot::to_dot;
pub use shared::SharedMegamodel;

/// Location recorded for synthesized resources that have no backing file.
pub const VIRTUAL_LOCATION: &str = "virtual";
/// Meta key marking a synthesized resource.
pub const META_VIRTUAL: &str = "virtual";
/// Meta key naming the chain step that produced a model instance.
pub const META_PRODUCER: &str = "producer";

/// Names of the metamodel descriptors present in every megamodel. `core`
/// plays the meta-metamodel role; the rest are the metamodels of the
/// built-in loaders.
pub const BUILTIN_METAMODELS: [&str; 5] = ["core", "pm", "weave", "chain", "process"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceId(String);

impl ResourceId {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn fresh(n: u64) -> Self {
        Self(format!("r{n:06}"))
    }

    fn serial(&self) -> Option<u64> {
        self.0.strip_prefix('r').and_then(|s| s.parse().ok())
    }
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ResourceId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ResourceKind {
    MetamodelDescriptor,
    ModelInstance,
    Transformation,
    ExecutableSpec,
    ProcessModel,
    WeaveModel,
    Chain,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 7] = [
        ResourceKind::MetamodelDescriptor,
        ResourceKind::ModelInstance,
        ResourceKind::Transformation,
        ResourceKind::ExecutableSpec,
        ResourceKind::ProcessModel,
        ResourceKind::WeaveModel,
        ResourceKind::Chain,
    ];
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resource {
    pub id: ResourceId,
    pub kind: ResourceKind,
    pub name: String,
    /// Workspace-relative path with `/` separators, or [`VIRTUAL_LOCATION`].
    pub location: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metamodel: Option<ResourceId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Resource {
    pub fn is_virtual(&self) -> bool {
        self.meta.get(META_VIRTUAL).map(String::as_str) == Some("true")
    }
}

/// A resource before registration; the registry assigns the id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewResource {
    pub kind: ResourceKind,
    pub name: String,
    pub location: String,
    pub metamodel: Option<ResourceId>,
    pub meta: BTreeMap<String, String>,
}

impl NewResource {
    pub fn new(kind: ResourceKind, name: impl Into<String>, location: impl Into<String>) -> Self {
        Self {
            kind,
            name: name.into(),
            location: location.into(),
            metamodel: None,
            meta: BTreeMap::new(),
        }
    }

    /// A synthesized resource with no file behind it.
    pub fn virtual_(kind: ResourceKind, name: impl Into<String>) -> Self {
        let mut r = Self::new(kind, name, VIRTUAL_LOCATION);
        r.meta.insert(META_VIRTUAL.into(), "true".into());
        r
    }

    pub fn conforming_to(mut self, metamodel: ResourceId) -> Self {
        self.metamodel = Some(metamodel);
        self
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    fn is_virtual(&self) -> bool {
        self.meta.get(META_VIRTUAL).map(String::as_str) == Some("true")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationKind {
    ConformsTo,
    InputOf,
    OutputOf,
    DerivedFrom,
    WeaveOf,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub kind: RelationKind,
    pub source: ResourceId,
    pub target: ResourceId,
}

impl Relation {
    pub fn new(kind: RelationKind, source: ResourceId, target: ResourceId) -> Self {
        Self { kind, source, target }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MegamodelError {
    #[error("unknown metamodel `{0}`")]
    UnknownMetamodel(String),
    #[error("model instance `{0}` does not declare a metamodel")]
    MissingMetamodel(String),
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("relation endpoint `{0}` is not registered")]
    DanglingEndpoint(ResourceId),
    #[error("{kind:?} cannot target `{target}` of kind {found}")]
    BadTargetKind { kind: RelationKind, target: ResourceId, found: ResourceKind },
}

/// Filters for [`Megamodel::find`]. Unset fields match everything.
#[derive(Debug, Clone, Default)]
pub struct Query {
    pub kind: Option<ResourceKind>,
    pub name: Option<String>,
    pub metamodel: Option<ResourceId>,
    /// Matches resources sharing any relation (either direction) with this id.
    pub related_to: Option<ResourceId>,
}

impl Query {
    pub fn kind(kind: ResourceKind) -> Self {
        Self { kind: Some(kind), ..Self::default() }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn conforming_to(mut self, metamodel: ResourceId) -> Self {
        self.metamodel = Some(metamodel);
        self
    }

    pub fn related_to(mut self, id: ResourceId) -> Self {
        self.related_to = Some(id);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum IdentityKey {
    File(ResourceKind, String),
    Virtual(ResourceKind, String),
}

#[derive(Debug, Clone)]
pub struct Megamodel {
    root: PathBuf,
    resources: BTreeMap<ResourceId, Resource>,
    relations: BTreeSet<Relation>,
    identity: BTreeMap<IdentityKey, ResourceId>,
    next_serial: u64,
}

impl PartialEq for Megamodel {
    /// Structural equality: same resources and relations. The workspace root
    /// and internal indexes do not take part.
    fn eq(&self, other: &Self) -> bool {
        self.resources == other.resources && self.relations == other.relations
    }
}

impl Eq for Megamodel {}

impl Megamodel {
    /// The base megamodel: the five built-in metamodel descriptors, each
    /// conforming to `core`.
    pub fn base(workspace_root: impl Into<PathBuf>) -> Self {
        let mut mgm = Self {
            root: workspace_root.into(),
            resources: BTreeMap::new(),
            relations: BTreeSet::new(),
            identity: BTreeMap::new(),
            next_serial: 1,
        };
        let core = ResourceId::new("core");
        for name in BUILTIN_METAMODELS {
            let id = ResourceId::new(name);
            let res = Resource {
                id: id.clone(),
                kind: ResourceKind::MetamodelDescriptor,
                name: name.to_string(),
                location: VIRTUAL_LOCATION.to_string(),
                metamodel: Some(core.clone()),
                meta: BTreeMap::from([
                    (META_VIRTUAL.to_string(), "true".to_string()),
                    ("builtin".to_string(), "true".to_string()),
                ]),
            };
            mgm.insert_resource(res);
        }
        for name in BUILTIN_METAMODELS {
            mgm.relations.insert(Relation::new(
                RelationKind::ConformsTo,
                ResourceId::new(name),
                core.clone(),
            ));
        }
        mgm
    }

    pub fn workspace_root(&self) -> &Path {
        &self.root
    }

    pub fn set_workspace_root(&mut self, root: impl Into<PathBuf>) {
        self.root = root.into();
    }

    pub fn len(&self) -> usize {
        self.resources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }

    pub fn resources(&self) -> impl Iterator<Item = &Resource> {
        self.resources.values()
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.iter()
    }

    pub fn get(&self, id: &ResourceId) -> Option<&Resource> {
        self.resources.get(id)
    }

    pub fn contains(&self, id: &ResourceId) -> bool {
        self.resources.contains_key(id)
    }

    /// Resolves a workspace location to a filesystem path.
    pub fn path_of(&self, resource: &Resource) -> Option<PathBuf> {
        (!resource.is_virtual()).then(|| resolve_location(&self.root, &resource.location))
    }

    /// Looks up a metamodel descriptor by name. Duplicate names resolve to
    /// the smallest id.
    pub fn metamodel_named(&self, name: &str) -> Option<&ResourceId> {
        self.resources
            .values()
            .find(|r| r.kind == ResourceKind::MetamodelDescriptor && r.name == name)
            .map(|r| &r.id)
    }

    /// Name of the metamodel a resource conforms to.
    pub fn metamodel_name_of(&self, id: &ResourceId) -> Option<&str> {
        let mm = self.resources.get(id)?.metamodel.as_ref()?;
        self.resources.get(mm).map(|r| r.name.as_str())
    }

    /// Looks up a file-backed resource by workspace location.
    pub fn by_location(&self, kind: ResourceKind, path: &Path) -> Option<&ResourceId> {
        let loc = relative_location(&self.root, path);
        self.identity.get(&IdentityKey::File(kind, loc))
    }

    /// Looks up a virtual resource by name.
    pub fn virtual_named(&self, kind: ResourceKind, name: &str) -> Option<&ResourceId> {
        self.identity.get(&IdentityKey::Virtual(kind, name.to_string()))
    }

    /// True when some other resource already carries `name`.
    pub fn name_taken(&self, name: &str) -> bool {
        self.resources.values().any(|r| r.name == name)
    }

    /// Registers a resource under a fresh id. Re-registering the same
    /// `(kind, location)` (or `(kind, name)` for virtual resources) returns
    /// the existing id without modifying anything.
    pub fn register(&mut self, resource: NewResource) -> Result<ResourceId, MegamodelError> {
        self.register_tracked(resource).map(|(id, _)| id)
    }

    /// As [`register`](Self::register), also reporting whether a new
    /// resource was created.
    pub fn register_tracked(
        &mut self,
        mut resource: NewResource,
    ) -> Result<(ResourceId, bool), MegamodelError> {
        if let Some(mm) = &resource.metamodel {
            match self.resources.get(mm) {
                Some(r) if r.kind == ResourceKind::MetamodelDescriptor => {}
                Some(r) => {
                    return Err(MegamodelError::BadTargetKind {
                        kind: RelationKind::ConformsTo,
                        target: mm.clone(),
                        found: r.kind,
                    })
                }
                None => return Err(MegamodelError::UnknownMetamodel(mm.to_string())),
            }
        } else if resource.kind == ResourceKind::ModelInstance {
            return Err(MegamodelError::MissingMetamodel(resource.name));
        }

        let key = if resource.is_virtual() {
            resource.location = VIRTUAL_LOCATION.to_string();
            IdentityKey::Virtual(resource.kind, resource.name.clone())
        } else {
            let path = resolve_location(&self.root, &resource.location);
            if !path.exists() {
                return Err(MegamodelError::MissingFile(path));
            }
            resource.location = relative_location(&self.root, &path);
            IdentityKey::File(resource.kind, resource.location.clone())
        };
        if let Some(existing) = self.identity.get(&key) {
            return Ok((existing.clone(), false));
        }

        let id = self.fresh_id();
        let conforms = resource.metamodel.clone();
        self.insert_resource(Resource {
            id: id.clone(),
            kind: resource.kind,
            name: resource.name,
            location: resource.location,
            metamodel: resource.metamodel,
            meta: resource.meta,
        });
        if let Some(mm) = conforms {
            self.relations.insert(Relation::new(RelationKind::ConformsTo, id.clone(), mm));
        }
        Ok((id, true))
    }

    /// Adds a relation. Duplicates are ignored.
    pub fn add_relation(&mut self, rel: Relation) -> Result<(), MegamodelError> {
        let source = self
            .resources
            .get(&rel.source)
            .ok_or_else(|| MegamodelError::DanglingEndpoint(rel.source.clone()))?;
        let target = self
            .resources
            .get(&rel.target)
            .ok_or_else(|| MegamodelError::DanglingEndpoint(rel.target.clone()))?;
        let bad = |found| MegamodelError::BadTargetKind {
            kind: rel.kind,
            target: rel.target.clone(),
            found,
        };
        match rel.kind {
            RelationKind::ConformsTo => {
                if target.kind != ResourceKind::MetamodelDescriptor {
                    return Err(bad(target.kind));
                }
                // One conformance link per resource: the declared metamodel.
                if source.metamodel.as_ref() != Some(&rel.target) {
                    return Err(bad(target.kind));
                }
            }
            RelationKind::WeaveOf => {
                if target.kind != ResourceKind::ProcessModel {
                    return Err(bad(target.kind));
                }
            }
            RelationKind::InputOf | RelationKind::OutputOf | RelationKind::DerivedFrom => {}
        }
        self.relations.insert(rel);
        Ok(())
    }

    /// All resources matching every supplied filter, sorted by name then id.
    pub fn find(&self, query: &Query) -> Vec<ResourceId> {
        let related: Option<BTreeSet<&ResourceId>> = query.related_to.as_ref().map(|other| {
            self.relations
                .iter()
                .filter_map(|r| {
                    if &r.source == other {
                        Some(&r.target)
                    } else if &r.target == other {
                        Some(&r.source)
                    } else {
                        None
                    }
                })
                .collect()
        });
        let mut hits: Vec<&Resource> = self
            .resources
            .values()
            .filter(|r| query.kind.is_none_or(|k| r.kind == k))
            .filter(|r| query.name.as_ref().is_none_or(|n| &r.name == n))
            .filter(|r| query.metamodel.as_ref().is_none_or(|m| r.metamodel.as_ref() == Some(m)))
            .filter(|r| related.as_ref().is_none_or(|set| set.contains(&r.id)))
            .collect();
        hits.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.id.cmp(&b.id)));
        hits.into_iter().map(|r| r.id.clone()).collect()
    }

    /// Registers a model instance produced by `producer_step`.
    pub fn record_artifact(
        &mut self,
        path: &Path,
        metamodel: &ResourceId,
        producer_step: &str,
    ) -> Result<ResourceId, MegamodelError> {
        let abs = resolve_location(&self.root, &path.to_string_lossy());
        if !abs.exists() {
            return Err(MegamodelError::MissingFile(abs));
        }
        let name = abs
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| producer_step.to_string());
        let res = NewResource::new(ResourceKind::ModelInstance, name, abs.to_string_lossy())
            .conforming_to(metamodel.clone())
            .with_meta(META_PRODUCER, producer_step);
        self.register(res)
    }

    /// Checks every structural invariant. Returns the first violation.
    pub fn check_integrity(&self) -> Result<(), String> {
        for name in BUILTIN_METAMODELS {
            match self.resources.get(&ResourceId::new(name)) {
                Some(r) if r.kind == ResourceKind::MetamodelDescriptor => {}
                _ => return Err(format!("built-in metamodel `{name}` missing")),
            }
        }
        let mut conformance: BTreeMap<&ResourceId, usize> = BTreeMap::new();
        for rel in &self.relations {
            for end in [&rel.source, &rel.target] {
                if !self.resources.contains_key(end) {
                    return Err(format!("relation endpoint `{end}` unresolved"));
                }
            }
            if rel.kind == RelationKind::ConformsTo {
                let target = &self.resources[&rel.target];
                if target.kind != ResourceKind::MetamodelDescriptor {
                    return Err(format!("`{}` conforms to non-metamodel `{}`", rel.source, rel.target));
                }
                *conformance.entry(&rel.source).or_default() += 1;
            }
        }
        for res in self.resources.values() {
            if let Some(mm) = &res.metamodel {
                match self.resources.get(mm) {
                    Some(m) if m.kind == ResourceKind::MetamodelDescriptor => {}
                    _ => return Err(format!("`{}` declares unresolved metamodel `{mm}`", res.id)),
                }
            }
            if res.kind == ResourceKind::ModelInstance && conformance.get(&res.id) != Some(&1) {
                return Err(format!("model instance `{}` lacks exactly one conformance link", res.id));
            }
        }
        Ok(())
    }

    fn fresh_id(&mut self) -> ResourceId {
        loop {
            let id = ResourceId::fresh(self.next_serial);
            self.next_serial += 1;
            if !self.resources.contains_key(&id) {
                return id;
            }
        }
    }

    fn insert_resource(&mut self, res: Resource) {
        let key = if res.is_virtual() {
            IdentityKey::Virtual(res.kind, res.name.clone())
        } else {
            IdentityKey::File(res.kind, res.location.clone())
        };
        if let Some(n) = res.id.serial() {
            self.next_serial = self.next_serial.max(n + 1);
        }
        // Built-ins are keyed too, so user files can never shadow them.
        self.identity.entry(key).or_insert_with(|| res.id.clone());
        self.resources.insert(res.id.clone(), res);
    }

    /// Rebuilds a megamodel from stored parts, checking integrity.
    pub(crate) fn from_parts(
        root: PathBuf,
        resources: Vec<Resource>,
        relations: Vec<Relation>,
    ) -> Result<Self, String> {
        let mut mgm = Self {
            root,
            resources: BTreeMap::new(),
            relations: BTreeSet::new(),
            identity: BTreeMap::new(),
            next_serial: 1,
        };
        for res in resources {
            if res.id.as_str().is_empty() {
                return Err("empty resource id".into());
            }
            if mgm.resources.contains_key(&res.id) {
                return Err(format!("duplicate resource id `{}`", res.id));
            }
            mgm.insert_resource(res);
        }
        mgm.relations.extend(relations);
        mgm.check_integrity()?;
        Ok(mgm)
    }
}
