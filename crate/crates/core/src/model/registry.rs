use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Actor, ProcessModel};

/// `(name, version)` pair identifying one published model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModelRef {
    pub name: String,
    pub version: u32,
}

impl fmt::Display for ModelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} v{}", self.name, self.version)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("model {name:?} version {version} is not newer than published version {latest}")]
pub struct VersionConflict {
    pub name: String,
    pub version: u32,
    pub latest: u32,
}

/// Published model versions. Published models are immutable and shared.
#[derive(Debug, Clone, Default)]
pub struct ModelRegistry {
    models: BTreeMap<String, BTreeMap<u32, Arc<ProcessModel>>>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a model; versions of one model must strictly increase.
    pub fn insert(&mut self, model: ProcessModel) -> Result<ModelRef, VersionConflict> {
        let reference = model.reference();
        let versions = self.models.entry(model.name.clone()).or_default();
        if let Some((&latest, _)) = versions.last_key_value() {
            if model.version <= latest {
                return Err(VersionConflict { name: model.name, version: model.version, latest });
            }
        }
        versions.insert(model.version, Arc::new(model));
        Ok(reference)
    }

    pub fn get(&self, name: &str, version: u32) -> Option<&Arc<ProcessModel>> {
        self.models.get(name)?.get(&version)
    }

    pub fn resolve(&self, reference: &ModelRef) -> Option<&Arc<ProcessModel>> {
        self.get(&reference.name, reference.version)
    }

    pub fn latest(&self, name: &str) -> Option<&Arc<ProcessModel>> {
        self.models.get(name)?.values().next_back()
    }

    pub fn versions(&self, name: &str) -> impl Iterator<Item = &Arc<ProcessModel>> + '_ {
        self.models.get(name).into_iter().flat_map(|v| v.values())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.models.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<ProcessModel>> + '_ {
        self.models.values().flat_map(|v| v.values())
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Actor directory built from the latest version of every model.
    pub fn actors(&self) -> BTreeMap<String, Actor> {
        let mut merged: BTreeMap<String, Actor> = BTreeMap::new();
        for name in self.names() {
            let Some(model) = self.latest(name) else { continue };
            for (id, actor) in model.actors() {
                let entry = merged.entry(id).or_insert_with(|| Actor { roles: BTreeMap::new(), ..actor.clone() });
                for (role, rank) in actor.roles {
                    let current = entry.roles.entry(role).or_insert(rank);
                    *current = (*current).max(rank);
                }
            }
        }
        merged
    }

    pub fn actor(&self, id: &str) -> Option<Actor> {
        self.actors().remove(id)
    }
}
