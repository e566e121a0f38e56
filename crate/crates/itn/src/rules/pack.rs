use super::compile::{
    close_tag, compile_itn, compile_tn, compile_untagged, max_written_tokens, open_tag,
    register_symbols,
};
use super::{parse_rules, RuleSet};
use crate::fst::{Fst, Label, SharedTable, SymbolTable};
use crate::{Error, Result};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// One compiled ITN category.
#[derive(Debug, Clone)]
pub struct Category {
    pub name: String,
    /// Tag-consuming ITN transducer: `<cat>` lexical `</cat>` → written.
    pub itn: Fst,
    /// Tag-outputting TN transducer: written → `<cat>` lexical `</cat>`.
    pub tn: Fst,
    /// Baseline direction: lexical → `<cat>` written `</cat>`.
    pub untagged: Fst,
    /// Upper bound on display tokens a span of this category can produce.
    pub max_written_tokens: usize,
    /// Present when loaded from rule sources (not from a compiled pack).
    pub rules: Option<RuleSet>,
}

/// A full set of category grammars over one shared symbol table.
///
/// Immutable once loaded; hot-swapping a pack means replacing the shared
/// handle so in-flight conversions finish with the pack they started with.
#[derive(Debug, Clone)]
pub struct GrammarPack {
    categories: IndexMap<String, Category>,
    syms: SharedTable,
}

impl GrammarPack {
    pub fn symbols(&self) -> &SharedTable {
        &self.syms
    }

    pub fn categories(&self) -> impl Iterator<Item = &Category> {
        self.categories.values()
    }

    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Category> {
        self.categories.get(name)
    }

    pub fn tag_labels(&self, category: &str) -> Option<(Label, Label)> {
        Some((
            self.syms.label(&open_tag(category))?,
            self.syms.label(&close_tag(category))?,
        ))
    }

    /// Persist as one FST file per category per direction plus a manifest.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = Manifest { categories: Vec::new() };
        for cat in self.categories.values() {
            for (suffix, fst) in [("itn", &cat.itn), ("tn", &cat.tn), ("base", &cat.untagged)] {
                let path = dir.join(format!("{}.{suffix}.fst", cat.name));
                let mut buf = Vec::new();
                fst.write_to(&mut buf).map_err(|e| Error::io(&path, e))?;
                fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
            }
            manifest.categories.push(ManifestEntry {
                name: cat.name.clone(),
                open_tag: open_tag(&cat.name),
                close_tag: close_tag(&cat.name),
                max_written_tokens: cat.max_written_tokens,
            });
        }
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Format(e.to_string()))?;
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    /// Load a pack previously written by [`GrammarPack::save`].
    pub fn load_compiled(dir: &Path) -> Result<GrammarPack> {
        let path = dir.join("manifest.json");
        let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&raw).map_err(|e| Error::Format(e.to_string()))?;
        let mut categories = IndexMap::new();
        let mut shared: Option<SharedTable> = None;
        for entry in &manifest.categories {
            let mut load = |suffix: &str| -> Result<Fst> {
                let path = dir.join(format!("{}.{suffix}.fst", entry.name));
                let raw = fs::read(&path).map_err(|e| Error::io(&path, e))?;
                let fst = Fst::read_from(&mut raw.as_slice())?;
                match &shared {
                    None => shared = Some(fst.isyms().clone()),
                    Some(t) => {
                        if **t != **fst.isyms() {
                            return Err(Error::Format(format!(
                                "{}: symbol table differs from rest of pack",
                                path.display()
                            )));
                        }
                    }
                }
                Ok(fst)
            };
            let cat = Category {
                name: entry.name.clone(),
                itn: load("itn")?,
                tn: load("tn")?,
                untagged: load("base")?,
                max_written_tokens: entry.max_written_tokens,
                rules: None,
            };
            categories.insert(entry.name.clone(), cat);
        }
        let syms = shared.ok_or_else(|| Error::Format("empty pack manifest".into()))?;
        Ok(GrammarPack { categories, syms })
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    categories: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    open_tag: String,
    close_tag: String,
    max_written_tokens: usize,
}

/// Parses and compiles every `<category>.rules` file in `directory`.
///
/// Parse failures are aggregated across files and reported together.
pub fn load_pack(directory: &Path) -> Result<GrammarPack> {
    let mut sources: Vec<(String, String)> = Vec::new();
    let entries = fs::read_dir(directory).map_err(|e| Error::io(directory, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(directory, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("rules") {
            continue;
        }
        let category = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Format(format!("bad rule file name {}", path.display())))?
            .to_string();
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        sources.push((category, text));
    }
    if sources.is_empty() {
        return Err(Error::Config(format!(
            "no categories found in {}",
            directory.display()
        )));
    }
    sources.sort_by(|a, b| a.0.cmp(&b.0));
    load_pack_from_sources(sources)
}

/// Builds a pack from in-memory (category, source) pairs.
pub fn load_pack_from_sources(sources: Vec<(String, String)>) -> Result<GrammarPack> {
    let mut parsed: Vec<RuleSet> = Vec::new();
    let mut errors: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (category, text) in &sources {
        if !seen.insert(category.clone()) {
            errors.push(format!("duplicate category `{category}`"));
            continue;
        }
        match parse_rules(text) {
            Ok(mut rs) => {
                rs.category = category.clone();
                parsed.push(rs);
            }
            Err(Error::Parse { line, col, msg, .. }) => {
                errors.push(format!("{category}.rules:{line}:{col}: {msg}"))
            }
            Err(e) => errors.push(format!("{category}.rules: {e}")),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Config(errors.join("; ")));
    }

    // Two passes: register the full alphabet, then compile against the
    // frozen shared table.
    let mut syms = SymbolTable::core();
    for rs in &parsed {
        register_symbols(rs, &rs.category, &mut syms);
    }
    let syms: SharedTable = std::sync::Arc::new(syms);

    let mut categories = IndexMap::new();
    for rs in parsed {
        let cat = Category {
            name: rs.category.clone(),
            itn: compile_itn(&rs, &syms),
            tn: compile_tn(&rs, &syms),
            untagged: compile_untagged(&rs, &syms),
            max_written_tokens: max_written_tokens(&rs),
            rules: Some(rs.clone()),
        };
        categories.insert(rs.category.clone(), cat);
    }
    Ok(GrammarPack { categories, syms })
}
