//! Label assignments. Each point carries a composite label: the exact set of
//! symbols assigned to it. Single-label data is the special case where every
//! set has one member. Two points share a cluster iff their sets are equal.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// A composite label: a non-empty, ordered set of symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(BTreeSet<String>);

impl Label {
    pub fn single(symbol: impl Into<String>) -> Result<Self> {
        Self::new([symbol.into()])
    }

    pub fn new<I, S>(symbols: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = BTreeSet::new();
        for s in symbols {
            let s = s.into();
            validate_symbol(&s)?;
            set.insert(s);
        }
        if set.is_empty() {
            return Err(Error::InvalidLabels("a label needs at least one symbol".into()));
        }
        Ok(Self(set))
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.0.contains(symbol)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_single(&self) -> bool {
        self.0.len() == 1
    }
}

impl fmt::Display for Label {
    /// Sorted symbols joined by commas, the dataset-file form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(s)?;
        }
        Ok(())
    }
}

fn validate_symbol(s: &str) -> Result<()> {
    if s.is_empty() {
        return Err(Error::InvalidLabels("empty label symbol".into()));
    }
    if s.chars().any(|c| c == ',' || c.is_whitespace()) || s.starts_with('#') {
        return Err(Error::InvalidLabels(format!(
            "symbol `{s}` must not contain commas or whitespace or start with `#`"
        )));
    }
    Ok(())
}

/// `-1` when both labels are equal, `+1` otherwise. Composite labels compare
/// as whole sets.
pub fn sign(a: &Label, b: &Label) -> f64 {
    if a == b {
        -1.0
    } else {
        1.0
    }
}

/// Dense cluster numbering of composite labels, ordered by label.
#[derive(Debug, Clone, PartialEq)]
pub struct Clusters {
    pub ids: Vec<usize>,
    pub sizes: Vec<usize>,
    pub keys: Vec<Label>,
}

impl Clusters {
    pub fn count(&self) -> usize {
        self.keys.len()
    }
}

/// One label per point plus the symbol universe Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelAssignment {
    labels: Vec<Label>,
    universe: Vec<String>,
}

impl LabelAssignment {
    /// Validates that every used symbol belongs to `universe`. The universe
    /// may hold symbols no point uses.
    pub fn new(labels: Vec<Label>, universe: impl IntoIterator<Item = String>) -> Result<Self> {
        let universe: BTreeSet<String> = universe.into_iter().collect();
        for u in &universe {
            validate_symbol(u)?;
        }
        for (i, l) in labels.iter().enumerate() {
            if let Some(s) = l.symbols().find(|s| !universe.contains(*s)) {
                return Err(Error::InvalidLabels(format!(
                    "point {i} uses symbol `{s}` outside the universe"
                )));
            }
        }
        if labels.is_empty() {
            return Err(Error::InvalidLabels("no labels".into()));
        }
        Ok(Self {
            labels,
            universe: universe.into_iter().collect(),
        })
    }

    /// Universe inferred as the union of used symbols.
    pub fn from_labels(labels: Vec<Label>) -> Result<Self> {
        let universe: BTreeSet<String> = labels
            .iter()
            .flat_map(|l| l.symbols().map(str::to_owned))
            .collect();
        Self::new(labels, universe)
    }

    pub fn from_symbols<S: AsRef<str>>(symbols: &[S]) -> Result<Self> {
        let labels = symbols
            .iter()
            .map(|s| Label::single(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_labels(labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &Label {
        &self.labels[i]
    }

    /// Sorted symbol universe; also the column order of classifier heads.
    pub fn universe(&self) -> &[String] {
        &self.universe
    }

    pub fn is_single_label(&self) -> bool {
        self.labels.iter().all(Label::is_single)
    }

    pub fn symbol_index(&self, symbol: &str) -> Option<usize> {
        self.universe.binary_search_by(|u| u.as_str().cmp(symbol)).ok()
    }

    /// Universe index of each point's label. Fails on multi-label data.
    pub fn class_indices(&self, context: &'static str) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .map(|l| {
                if !l.is_single() {
                    return Err(Error::MultiLabelUnsupported(context));
                }
                let symbol = l.symbols().next().expect("non-empty label");
                Ok(self.symbol_index(symbol).expect("validated symbol"))
            })
            .collect()
    }

    /// Row-major `n x |Ω|` 0/1 target matrix.
    pub fn target_matrix(&self) -> Vec<f64> {
        let k = self.universe.len();
        let mut out = vec![0.0; self.labels.len() * k];
        for (i, l) in self.labels.iter().enumerate() {
            for s in l.symbols() {
                out[i * k + self.symbol_index(s).expect("validated symbol")] = 1.0;
            }
        }
        out
    }

    pub fn clusters(&self) -> Clusters {
        let mut index: BTreeMap<&Label, usize> = BTreeMap::new();
        for l in &self.labels {
            index.entry(l).or_insert(0);
        }
        for (i, v) in index.values_mut().enumerate() {
            *v = i;
        }
        let keys: Vec<Label> = index.keys().map(|l| (*l).clone()).collect();
        let mut sizes = vec![0; keys.len()];
        let ids = self
            .labels
            .iter()
            .map(|l| {
                let id = index[l];
                sizes[id] += 1;
                id
            })
            .collect();
        Clusters { ids, sizes, keys }
    }

    /// Number of points per composite label.
    pub fn counts(&self) -> BTreeMap<Label, usize> {
        let mut counts = BTreeMap::new();
        for l in &self.labels {
            *counts.entry(l.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let labels = indices
            .iter()
            .map(|&i| {
                self.labels.get(i).cloned().ok_or_else(|| {
                    Error::InvalidLabels(format!("index {i} out of range"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels, self.universe.iter().cloned())
    }
}
