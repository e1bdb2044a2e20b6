//! Seeded Gaussian-mixture generators and the tab-separated dataset format:
//! `id<TAB>label[,label...]<TAB>v1 v2 ... vd`, `#` starting a comment line.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::labels::{Label, LabelAssignment};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassSizes {
    Uniform(usize),
    PerClass(Vec<usize>),
}

impl ClassSizes {
    fn size(&self, class: usize) -> usize {
        match self {
            ClassSizes::Uniform(n) => *n,
            ClassSizes::PerClass(v) => v[class],
        }
    }
}

/// Extra symbols for multi-label data. Symbol `k` is the class symbol of
/// class `k`; every point also receives each other symbol independently
/// with probability `symbol_prob`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultilabelSpec {
    pub num_symbols: usize,
    pub symbol_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub points_per_class: ClassSizes,
    /// Standard deviation of the class-center distribution.
    pub center_spread: f64,
    pub within_std: f64,
    pub multilabel: Option<MultilabelSpec>,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn single_label(num_classes: usize, dim: usize, per_class: usize, seed: u64) -> Self {
        Self {
            num_classes,
            dim,
            points_per_class: ClassSizes::Uniform(per_class),
            center_spread: 1.0,
            within_std: 1.0,
            multilabel: None,
            seed,
        }
    }

    pub fn total_points(&self) -> usize {
        (0..self.num_classes).map(|k| self.points_per_class.size(k)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.num_classes == 0 {
            return bad("need at least one class");
        }
        if self.dim == 0 {
            return bad("dimension must be >= 1");
        }
        match &self.points_per_class {
            ClassSizes::Uniform(0) => return bad("points per class must be >= 1"),
            ClassSizes::PerClass(v) if v.len() != self.num_classes => {
                return Err(Error::InvalidConfig(format!(
                    "{} class sizes for {} classes",
                    v.len(),
                    self.num_classes
                )))
            }
            ClassSizes::PerClass(v) if v.contains(&0) => return bad("every class needs >= 1 point"),
            _ => {}
        }
        if !(self.within_std > 0.0 && self.within_std.is_finite()) {
            return bad("within-class std must be > 0");
        }
        if !(self.center_spread >= 0.0 && self.center_spread.is_finite()) {
            return bad("center spread must be >= 0");
        }
        if let Some(m) = self.multilabel {
            if m.num_symbols < self.num_classes {
                return bad("multi-label data needs at least one symbol per class");
            }
            if !(0.0..=1.0).contains(&m.symbol_prob) {
                return bad("symbol probability must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

/// Symbol names `c0, c1, ...`, zero-padded so lexical and numeric order agree.
pub fn symbol_names(count: usize) -> Vec<String> {
    let width = count.saturating_sub(1).to_string().len();
    (0..count).map(|k| format!("c{k:0width$}")).collect()
}

/// Points are emitted class by class. Centers and points use one seeded
/// stream, drawn in a fixed order.
pub fn generate_mixture(spec: &MixtureSpec) -> Result<(PointCloud, LabelAssignment)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim;
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    let centers: Vec<Vec<f64>> = (0..spec.num_classes)
        .map(|_| (0..d).map(|_| spec.center_spread * gauss(&mut rng)).collect())
        .collect();

    let symbols = symbol_names(spec.multilabel.map_or(spec.num_classes, |m| m.num_symbols));
    let n = spec.total_points();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (k, center) in centers.iter().enumerate() {
        for _ in 0..spec.points_per_class.size(k) {
            data.extend(center.iter().map(|c| c + spec.within_std * gauss(&mut rng)));
            let label = match spec.multilabel {
                None => Label::single(symbols[k].clone())?,
                Some(m) => {
                    let mut set = vec![symbols[k].clone()];
                    for (j, s) in symbols.iter().enumerate() {
                        if j != k && rng.random_bool(m.symbol_prob) {
                            set.push(s.clone());
                        }
                    }
                    Label::new(set)?
                }
            };
            labels.push(label);
        }
    }
    Ok((PointCloud::new(data, d)?, LabelAssignment::new(labels, symbols)?))
}

/// A dataset read from disk, with the record ids from its first column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub cloud: PointCloud,
    pub labels: LabelAssignment,
}

pub fn parse_dataset<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut ids = Vec::new();
    let mut seen = HashSet::new();
    let mut labels = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, label, values] = fields[..] else {
            return Err(parse_err(format!("expected 3 tab-separated fields, found {}", fields.len())));
        };
        if id.is_empty() {
            return Err(parse_err("empty record id".into()));
        }
        if !seen.insert(id.to_owned()) {
            return Err(parse_err(format!("duplicate record id `{id}`")));
        }
        let label = Label::new(label.split(',')).map_err(|e| parse_err(e.to_string()))?;
        let row = values
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(format!("`{v}` is not a finite real")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.is_empty() {
            return Err(parse_err(format!("record `{id}` has no coordinates")));
        }
        match dim {
            None => dim = Some(row.len()),
            Some(expected) if expected != row.len() => {
                return Err(Error::RecordDimension {
                    line: line_no,
                    id: id.to_owned(),
                    expected,
                    found: row.len(),
                })
            }
            _ => {}
        }
        ids.push(id.to_owned());
        labels.push(label);
        data.extend(row);
    }
    let Some(dim) = dim else {
        return Err(Error::EmptyDataset);
    };
    Ok(Dataset {
        ids,
        cloud: PointCloud::new(data, dim)?,
        labels: LabelAssignment::from_labels(labels)?,
    })
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(BufReader::new(file))
}

/// Ids are row indices; reals use the shortest round-trip decimal form and
/// label symbols are written sorted.
pub fn write_dataset<W: Write>(cloud: &PointCloud, labels: &LabelAssignment, mut writer: W) -> std::io::Result<()> {
    for (i, row) in cloud.rows().enumerate() {
        write!(writer, "{i}\t{}\t", labels.label(i))?;
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                writer.write_all(b" ")?;
            }
            write!(writer, "{v}")?;
        }
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_dataset(cloud: &PointCloud, labels: &LabelAssignment, path: &Path) -> Result<()> {
    if labels.len() != cloud.len() {
        return Err(Error::InvalidLabels(format!(
            "{} labels for {} points",
            labels.len(),
            cloud.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(cloud, labels, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
