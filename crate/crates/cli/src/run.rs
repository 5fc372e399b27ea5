//! Per-invocation state: output directory, manifest, shared loaders.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use emocov_core::aggregation::{builtin_names, builtin_spec, ModelSpec};
use emocov_core::embedding::{load_concepts, load_vec_file, ConceptList, EmbeddingSet};
use emocov_core::{EmotionModel, Error, RunManifest};
use serde::Serialize;

use crate::Command;

/// Bad flags or config; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn required<T>(value: Option<T>, flag: &str) -> Result<T, UsageError> {
    value.ok_or_else(|| UsageError(format!("missing --{flag} (pass the flag or set it in the config file)")))
}

pub struct Run {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    manifest_name: String,
}

impl Run {
    pub fn new(name: &str, args: Vec<String>, seed: u64, out_dir: PathBuf, command: &Command) -> anyhow::Result<Self> {
        std::fs::create_dir_all(&out_dir).map_err(|e| Error::Io { path: out_dir.clone(), source: e })?;
        let mut manifest = RunManifest::new(name, args, seed);
        manifest.set_param("invocation", command);
        Ok(Run { out_dir, manifest, manifest_name: format!("{name}.manifest.json") })
    }

    /// Uses `<name>.manifest.json` instead of the command name, for commands
    /// that are commonly run several times into one directory.
    pub fn rename_manifest(&mut self, name: &str) {
        self.manifest_name = format!("{name}.manifest.json");
    }

    pub fn input(&mut self, path: impl AsRef<Path>) -> anyhow::Result<()> {
        self.manifest.record_input(path)?;
        Ok(())
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.manifest.set_param(key, value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.manifest.assumptions.push(text.into());
    }

    pub fn stage_seed(&mut self, stage: &str) -> u64 {
        self.manifest.stage_seed(stage)
    }

    /// Writes `name` inside the output directory.
    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<PathBuf> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        self.manifest.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> anyhow::Result<PathBuf> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write(name, text)
    }

    pub fn finish(self) -> anyhow::Result<()> {
        self.manifest.write(self.out_dir.join(&self.manifest_name))?;
        Ok(())
    }

    pub fn concepts(&mut self, path: &Path, lang: &str) -> anyhow::Result<ConceptList> {
        self.input(path)?;
        Ok(load_concepts(path, lang)?)
    }

    /// Loads only the listed tokens; missing ones are noted and dropped.
    pub fn lexicon_for(&mut self, vectors: &Path, wanted: &ConceptList) -> anyhow::Result<EmbeddingSet> {
        self.input(vectors)?;
        let load = load_vec_file(vectors, Some(wanted))?;
        if !load.missing.is_empty() {
            let preview: Vec<&str> = load.missing.iter().take(5).map(String::as_str).collect();
            let msg = format!(
                "{}: {} requested tokens not found (e.g. {})",
                vectors.display(),
                load.missing.len(),
                preview.join(", ")
            );
            eprintln!("warning: {msg}");
            self.note(msg);
        }
        Ok(load.set)
    }

    pub fn lexicon(&mut self, vectors: &Path) -> anyhow::Result<EmbeddingSet> {
        self.input(vectors)?;
        let load = load_vec_file(vectors, None)?;
        if !load.dropped_zero.is_empty() {
            self.note(format!("{}: dropped {} zero vectors", vectors.display(), load.dropped_zero.len()));
        }
        Ok(load.set)
    }

    /// A bundled model name or a path to a model JSON file.
    pub fn model_spec(&mut self, name_or_path: &str) -> anyhow::Result<ModelSpec> {
        if builtin_names().contains(&name_or_path) {
            return Ok(builtin_spec(name_or_path)?);
        }
        let path = Path::new(name_or_path);
        if path.exists() {
            self.input(path)?;
            return Ok(ModelSpec::load(path)?);
        }
        Err(Error::UnknownModel(format!("{name_or_path} (bundled: {})", builtin_names().join(", "))).into())
    }
}

/// Concepts plus model components, for a filtered vector load.
pub fn wanted_tokens(concepts: &ConceptList, specs: &[ModelSpec]) -> ConceptList {
    let mut all: Vec<String> = concepts.entries().to_vec();
    let seen: BTreeSet<&String> = concepts.entries().iter().collect();
    let extra: BTreeSet<&String> = specs.iter().flat_map(|s| s.components.iter()).filter(|c| !seen.contains(c)).collect();
    all.extend(extra.into_iter().cloned());
    ConceptList::new(all, concepts.language_tag())
}

/// `concepts` restricted to tokens present in `lexicon`.
pub fn present(concepts: &ConceptList, lexicon: &EmbeddingSet) -> ConceptList {
    ConceptList::new(
        concepts.entries().iter().filter(|t| lexicon.contains(t)).cloned(),
        concepts.language_tag(),
    )
}

pub fn resolve_model(spec: &ModelSpec, lexicon: &EmbeddingSet, provenance: &str) -> anyhow::Result<EmotionModel> {
    Ok(spec.resolve(lexicon, provenance)?)
}

/// File-name-safe version of a model name.
pub fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Parses `KEY=VALUE`.
pub fn key_value(s: &str) -> Result<(String, String), UsageError> {
    s.split_once('=')
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| UsageError(format!("expected LANG=PATH, got {s:?}")))
}

/// Parses a value by its serde name, for enum flags.
pub fn serde_name<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}
