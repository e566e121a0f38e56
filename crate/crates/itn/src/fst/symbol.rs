use super::Label;
use std::collections::HashMap;

pub const EPS_SYM: &str = "<eps>";
pub const UNK_SYM: &str = "<unk>";
/// Display-token boundary inside a transduced span.
pub const SEP_SYM: &str = "<sp>";
/// Marker emitted by TN paths that are interchangeable alternates.
pub const ALT_SYM: &str = "<alt>";

/// Bidirectional symbol ↔ label mapping. Label 0 is always epsilon.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    symbols: Vec<String>,
    index: HashMap<String, Label>,
}

impl SymbolTable {
    /// Empty table holding only epsilon.
    pub fn new() -> Self {
        let mut t = SymbolTable {
            symbols: Vec::new(),
            index: HashMap::new(),
        };
        t.add(EPS_SYM);
        t
    }

    /// Table with the reserved symbols this crate relies on.
    pub fn core() -> Self {
        let mut t = Self::new();
        t.add(UNK_SYM);
        t.add(SEP_SYM);
        t.add(ALT_SYM);
        t
    }

    /// Registers `sym`, returning its label (existing or fresh).
    pub fn add(&mut self, sym: &str) -> Label {
        if let Some(&l) = self.index.get(sym) {
            return l;
        }
        let l = self.symbols.len() as Label;
        self.symbols.push(sym.to_string());
        self.index.insert(sym.to_string(), l);
        l
    }

    pub fn label(&self, sym: &str) -> Option<Label> {
        self.index.get(sym).copied()
    }

    pub fn symbol(&self, label: Label) -> Option<&str> {
        self.symbols.get(label as usize).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.symbols.iter().map(|s| s.as_str())
    }
}

impl PartialEq for SymbolTable {
    fn eq(&self, other: &Self) -> bool {
        self.symbols == other.symbols
    }
}
impl Eq for SymbolTable {}
