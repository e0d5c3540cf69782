//! Event schema: types, their definitions and ordered argument roles.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("invalid event type id {0:?}: expected a non-empty dot-qualified name like \"Top.Sub\"")]
    InvalidTypeId(String),
    #[error("duplicate event type id {0}")]
    DuplicateType(String),
    #[error("event type {0} has an empty definition")]
    EmptyTypeDefinition(String),
    #[error("event type {0} declares no roles")]
    NoRoles(String),
    #[error("event type {ty} has a role with an empty name")]
    EmptyRoleName { ty: String },
    #[error("event type {ty} declares role {role} more than once")]
    DuplicateRole { ty: String, role: String },
    #[error("role {role} of event type {ty} has an empty definition")]
    EmptyRoleDefinition { ty: String, role: String },
    #[error("schema declares no event types")]
    Empty,
    #[error("unknown event type {0}")]
    UnknownType(String),
    #[error("mapping entry ({source_tag}, {label}) targets unknown event type {target}")]
    UnknownMappingTarget {
        source_tag: String,
        label: String,
        target: String,
    },
    #[error("mapping entry ({source_tag}, {label}) is declared twice with different targets")]
    ConflictingMapping { source_tag: String, label: String },
    #[error("role mapping for {ty} targets unknown role {role}")]
    UnknownMappingRole { ty: String, role: String },
}

/// Qualified event type name such as `Conflict.Attack`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EventTypeId(String);

impl EventTypeId {
    pub fn new(name: impl Into<String>) -> Result<Self, SchemaError> {
        let name = name.into();
        let valid = match name.split_once('.') {
            Some((top, sub)) => {
                !top.trim().is_empty() && !sub.trim().is_empty() && !sub.contains('.') && name.trim() == name
            }
            None => false,
        };
        if valid {
            Ok(Self(name))
        } else {
            Err(SchemaError::InvalidTypeId(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The part after the dot (`Attack` for `Conflict.Attack`).
    pub fn short_name(&self) -> &str {
        self.0.split_once('.').map_or(&self.0, |(_, sub)| sub)
    }
}

impl TryFrom<String> for EventTypeId {
    type Error = SchemaError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<EventTypeId> for String {
    fn from(id: EventTypeId) -> Self {
        id.0
    }
}

impl fmt::Display for EventTypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentRoleDef {
    pub name: String,
    pub definition: String,
}

impl ArgumentRoleDef {
    pub fn new(name: impl Into<String>, definition: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            definition: definition.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTypeDef {
    pub id: EventTypeId,
    pub definition: String,
    /// Declared order drives the order of argument-extraction steps.
    pub roles: Vec<ArgumentRoleDef>,
}

impl EventTypeDef {
    pub fn role(&self, name: &str) -> Option<&ArgumentRoleDef> {
        self.roles.iter().find(|r| r.name == name)
    }

    /// Case-insensitive role lookup, used for model output and external role tables.
    pub fn resolve_role(&self, name: &str) -> Option<&ArgumentRoleDef> {
        let name = name.trim();
        self.role(name)
            .or_else(|| self.roles.iter().find(|r| eq_ignore_case(&r.name, name)))
    }

    fn validate(&self) -> Result<(), SchemaError> {
        let ty = || self.id.to_string();
        if self.definition.trim().is_empty() {
            return Err(SchemaError::EmptyTypeDefinition(ty()));
        }
        if self.roles.is_empty() {
            return Err(SchemaError::NoRoles(ty()));
        }
        let mut seen = BTreeSet::new();
        for role in &self.roles {
            if role.name.trim().is_empty() {
                return Err(SchemaError::EmptyRoleName { ty: ty() });
            }
            if role.definition.trim().is_empty() {
                return Err(SchemaError::EmptyRoleDefinition {
                    ty: ty(),
                    role: role.name.clone(),
                });
            }
            if !seen.insert(role.name.as_str()) {
                return Err(SchemaError::DuplicateRole {
                    ty: ty(),
                    role: role.name.clone(),
                });
            }
        }
        Ok(())
    }
}

/// The full event schema. Types keep their declared order.
///
/// Serializes as `{ "types": [ ... ] }`; deserialization validates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaFile")]
pub struct EventSchema {
    types: Vec<EventTypeDef>,
    #[serde(skip)]
    index: BTreeMap<EventTypeId, usize>,
}

#[derive(Deserialize)]
struct SchemaFile {
    types: Vec<EventTypeDef>,
}

impl TryFrom<SchemaFile> for EventSchema {
    type Error = SchemaError;

    fn try_from(file: SchemaFile) -> Result<Self, Self::Error> {
        Self::new(file.types)
    }
}

impl EventSchema {
    pub fn new(types: Vec<EventTypeDef>) -> Result<Self, SchemaError> {
        if types.is_empty() {
            return Err(SchemaError::Empty);
        }
        let mut index = BTreeMap::new();
        for (i, def) in types.iter().enumerate() {
            def.validate()?;
            if index.insert(def.id.clone(), i).is_some() {
                return Err(SchemaError::DuplicateType(def.id.to_string()));
            }
        }
        Ok(Self { types, index })
    }

    pub fn types(&self) -> &[EventTypeDef] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn get(&self, id: &EventTypeId) -> Option<&EventTypeDef> {
        self.index.get(id).map(|&i| &self.types[i])
    }

    pub fn contains(&self, id: &EventTypeId) -> bool {
        self.index.contains_key(id)
    }

    /// Roles of `id` in declared order.
    pub fn roles_of(&self, id: &EventTypeId) -> Result<&[ArgumentRoleDef], SchemaError> {
        self.get(id)
            .map(|def| def.roles.as_slice())
            .ok_or_else(|| SchemaError::UnknownType(id.to_string()))
    }

    /// Resolves a surface type name as a model might write it.
    ///
    /// Accepts the qualified id or the part after the dot, case-insensitively.
    /// A short name only resolves when exactly one type carries it.
    pub fn resolve(&self, surface: &str) -> Option<&EventTypeId> {
        let name = surface.trim().trim_end_matches('.').trim();
        if name.is_empty() {
            return None;
        }
        if let Some(def) = self.types.iter().find(|d| eq_ignore_case(d.id.as_str(), name)) {
            return Some(&def.id);
        }
        let mut hits = self.types.iter().filter(|d| eq_ignore_case(d.id.short_name(), name));
        match (hits.next(), hits.next()) {
            (Some(def), None) => Some(&def.id),
            _ => None,
        }
    }
}

pub(crate) fn eq_ignore_case(a: &str, b: &str) -> bool {
    a.chars()
        .flat_map(char::to_lowercase)
        .eq(b.chars().flat_map(char::to_lowercase))
}

/// One row of a mapping file: `{ "source", "label", "target" }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub source: String,
    pub label: String,
    pub target: EventTypeId,
}

/// Maps labels of external corpora (`("swig", "shooting")`) onto schema types.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemaMapping {
    entries: BTreeMap<(String, String), EventTypeId>,
}

impl SchemaMapping {
    /// Builds a mapping, rejecting targets absent from `schema`.
    pub fn new(entries: Vec<MappingEntry>, schema: &EventSchema) -> Result<Self, SchemaError> {
        let mut map = BTreeMap::new();
        for entry in entries {
            if !schema.contains(&entry.target) {
                return Err(SchemaError::UnknownMappingTarget {
                    source_tag: entry.source,
                    label: entry.label,
                    target: entry.target.to_string(),
                });
            }
            let key = (entry.source, entry.label);
            match map.get(&key) {
                Some(existing) if *existing != entry.target => {
                    return Err(SchemaError::ConflictingMapping {
                        source_tag: key.0,
                        label: key.1,
                    })
                }
                _ => {
                    map.insert(key, entry.target);
                }
            }
        }
        Ok(Self { entries: map })
    }

    pub fn map_external_type(&self, source: &str, label: &str) -> Option<&EventTypeId> {
        // BTreeMap<(String, String)> cannot be queried by (&str, &str) without allocating.
        self.entries
            .iter()
            .find(|((s, l), _)| s == source && l == label)
            .map(|(_, id)| id)
    }

    pub fn entries(&self) -> impl Iterator<Item = MappingEntry> + '_ {
        self.entries.iter().map(|((source, label), target)| MappingEntry {
            source: source.clone(),
            label: label.clone(),
            target: target.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One row of a role-mapping file: `{ "source", "event_type", "role", "target" }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleMappingEntry {
    pub source: String,
    pub event_type: EventTypeId,
    pub role: String,
    pub target: String,
}

/// Reconciles role names of external corpora with schema role names.
///
/// Explicit entries win. Without an entry a source role resolves only if it
/// names a role of the type (case-insensitively); anything else is dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoleMapping {
    entries: BTreeMap<(String, EventTypeId, String), String>,
}

impl RoleMapping {
    pub fn new(entries: Vec<RoleMappingEntry>, schema: &EventSchema) -> Result<Self, SchemaError> {
        let mut map = BTreeMap::new();
        for e in entries {
            let def = schema
                .get(&e.event_type)
                .ok_or_else(|| SchemaError::UnknownType(e.event_type.to_string()))?;
            let target = def
                .resolve_role(&e.target)
                .ok_or_else(|| SchemaError::UnknownMappingRole {
                    ty: e.event_type.to_string(),
                    role: e.target.clone(),
                })?;
            map.insert((e.source, e.event_type, e.role), target.name.clone());
        }
        Ok(Self { entries: map })
    }

    pub fn resolve<'s>(
        &self,
        schema: &'s EventSchema,
        source: &str,
        event_type: &EventTypeId,
        role: &str,
    ) -> Option<&'s str> {
        let def = schema.get(event_type)?;
        let explicit = self
            .entries
            .iter()
            .find(|((s, t, r), _)| s == source && t == event_type && r == role)
            .map(|(_, target)| target.as_str());
        match explicit {
            Some(target) => def.role(target).map(|r| r.name.as_str()),
            None => def.resolve_role(role).map(|r| r.name.as_str()),
        }
    }
}
