use std::path::Path;
use std::sync::{RwLock, RwLockReadGuard, RwLockWriteGuard};

use super::{Megamodel, MegamodelError, NewResource, Relation, ResourceId};

/// A megamodel that can be read and mutated from concurrently running
/// enactment steps. Every mutation takes the write lock for its whole
/// duration, so mutations are linearizable.
#[derive(Debug)]
pub struct SharedMegamodel {
    inner: RwLock<Megamodel>,
}

impl SharedMegamodel {
    pub fn new(mgm: Megamodel) -> Self {
        Self { inner: RwLock::new(mgm) }
    }

    pub fn read(&self) -> RwLockReadGuard<'_, Megamodel> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, Megamodel> {
        self.inner.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn register(&self, resource: NewResource) -> Result<ResourceId, MegamodelError> {
        self.write().register(resource)
    }

    pub fn add_relation(&self, rel: Relation) -> Result<(), MegamodelError> {
        self.write().add_relation(rel)
    }

    pub fn record_artifact(
        &self,
        path: &Path,
        metamodel: &ResourceId,
        producer_step: &str,
    ) -> Result<ResourceId, MegamodelError> {
        self.write().record_artifact(path, metamodel, producer_step)
    }

    pub fn snapshot(&self) -> Megamodel {
        self.read().clone()
    }

    pub fn into_inner(self) -> Megamodel {
        self.inner.into_inner().unwrap_or_else(|e| e.into_inner())
    }
}

impl From<Megamodel> for SharedMegamodel {
    fn from(mgm: Megamodel) -> Self {
        Self::new(mgm)
    }
}
