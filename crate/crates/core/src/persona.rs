//! Assistant personas: system prompt, human-turn template and welcome text.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_PERSONA_ID: &str = "mindguide";

const MINDGUIDE_JSON: &str = include_str!("../personas/mindguide.json");

/// A persona document, as stored in `<persona_dir>/<anything>.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Persona {
    pub id: String,
    pub system_template: String,
    pub human_template: String,
    pub welcome: String,
}

impl Persona {
    /// The built-in mental-health assistant persona.
    pub fn mindguide() -> Self {
        serde_json::from_str(MINDGUIDE_JSON).expect("bundled persona is valid JSON")
    }
}

#[derive(Debug, Error)]
pub enum PersonaError {
    #[error("unknown persona {0:?}")]
    Unknown(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("persona id {id:?} defined twice ({path})")]
    Duplicate { id: String, path: PathBuf },
}

/// Personas keyed by id. Always contains the built-in `mindguide` unless a
/// file in the persona directory overrides it.
#[derive(Debug, Clone)]
pub struct PersonaRegistry {
    personas: BTreeMap<String, Persona>,
}

impl Default for PersonaRegistry {
    fn default() -> Self {
        let builtin = Persona::mindguide();
        Self {
            personas: BTreeMap::from([(builtin.id.clone(), builtin)]),
        }
    }
}

impl PersonaRegistry {
    /// Built-ins plus every `*.json` file directly under `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, PersonaError> {
        let mut registry = Self::default();
        let io_err = |source| PersonaError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io_err)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        paths.sort();

        let mut from_files = BTreeMap::new();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|source| PersonaError::Io {
                path: path.clone(),
                source,
            })?;
            let persona: Persona = serde_json::from_str(&text).map_err(|source| PersonaError::Parse {
                path: path.clone(),
                source,
            })?;
            if from_files.insert(persona.id.clone(), ()).is_some() {
                return Err(PersonaError::Duplicate { id: persona.id, path });
            }
            registry.personas.insert(persona.id.clone(), persona);
        }
        Ok(registry)
    }

    pub fn insert(&mut self, persona: Persona) {
        self.personas.insert(persona.id.clone(), persona);
    }

    pub fn get(&self, id: &str) -> Result<&Persona, PersonaError> {
        self.personas.get(id).ok_or_else(|| PersonaError::Unknown(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.personas.keys().map(String::as_str)
    }
}
