use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::types::{
    BigFourProperty, Covariates, Flag, SponsorCategory, SponsorLocation, SponsorshipType,
};
use super::{Dataset, PanelError};

/// Columns per block under [`BlockSpec::default`]: type, economics, location,
/// category, characteristics.
pub const DEFAULT_BLOCK_SIZES: [usize; 5] = [9, 2, 5, 23, 6];

/// How a named design column is computed from a row's covariates.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnSpec {
    Type(SponsorshipType),
    Property(BigFourProperty),
    GdpGrowth,
    CpiInflation,
    Clutter,
    Location(SponsorLocation),
    Category(SponsorCategory),
    Flag(Flag),
    /// Elementwise product of two columns, e.g. `league*nfl`.
    Product(Box<ColumnSpec>, Box<ColumnSpec>),
}

impl ColumnSpec {
    pub fn parse(name: &str) -> Result<Self, PanelError> {
        let name = name.trim();
        if let Some((left, right)) = name.split_once('*') {
            return Ok(ColumnSpec::Product(
                Box::new(Self::parse(left)?),
                Box::new(Self::parse(right)?),
            ));
        }
        let spec = match name.to_ascii_lowercase().as_str() {
            "gdp_growth" => ColumnSpec::GdpGrowth,
            "cpi_inflation" => ColumnSpec::CpiInflation,
            "clutter" => ColumnSpec::Clutter,
            _ => {
                if let Ok(t) = name.parse() {
                    ColumnSpec::Type(t)
                } else if let Ok(p) = name.parse() {
                    ColumnSpec::Property(p)
                } else if let Ok(l) = name.parse() {
                    ColumnSpec::Location(l)
                } else if let Ok(c) = name.parse() {
                    ColumnSpec::Category(c)
                } else if let Ok(f) = name.parse() {
                    ColumnSpec::Flag(f)
                } else {
                    return Err(PanelError::UnknownBlockColumn(name.to_string()));
                }
            }
        };
        Ok(spec)
    }

    pub fn name(&self) -> String {
        match self {
            ColumnSpec::Type(t) => t.token().into(),
            ColumnSpec::Property(p) => p.token().into(),
            ColumnSpec::GdpGrowth => "gdp_growth".into(),
            ColumnSpec::CpiInflation => "cpi_inflation".into(),
            ColumnSpec::Clutter => "clutter".into(),
            ColumnSpec::Location(l) => l.token().into(),
            ColumnSpec::Category(c) => c.token().into(),
            ColumnSpec::Flag(f) => f.token().into(),
            ColumnSpec::Product(a, b) => format!("{}*{}", a.name(), b.name()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ColumnSpec::Type(t) => t.label().into(),
            ColumnSpec::Property(p) => p.label().into(),
            ColumnSpec::GdpGrowth => "Economic Growth (GDP)".into(),
            ColumnSpec::CpiInflation => "Inflation (CPI)".into(),
            ColumnSpec::Clutter => "Clutter".into(),
            ColumnSpec::Location(l) => l.label().into(),
            ColumnSpec::Category(c) => c.label().into(),
            ColumnSpec::Flag(f) => f.label().into(),
            ColumnSpec::Product(a, b) => format!("{} x {}", a.label(), b.label()),
        }
    }

    pub fn evaluate(&self, c: &Covariates) -> f64 {
        let indicator = |b: bool| if b { 1.0 } else { 0.0 };
        match self {
            ColumnSpec::Type(t) => indicator(c.sponsorship_type == *t),
            ColumnSpec::Property(p) => indicator(c.big_four_property == Some(*p)),
            ColumnSpec::GdpGrowth => c.gdp_growth,
            ColumnSpec::CpiInflation => c.cpi_inflation,
            ColumnSpec::Clutter => c.clutter as f64,
            ColumnSpec::Location(l) => indicator(c.sponsor_location == *l),
            ColumnSpec::Category(k) => indicator(c.sponsor_category == *k),
            ColumnSpec::Flag(f) => indicator(c.flag(*f)),
            ColumnSpec::Product(a, b) => a.evaluate(c) * b.evaluate(c),
        }
    }
}

impl fmt::Display for ColumnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub columns: Vec<String>,
}

/// Ordered blocks of covariates, entered cumulatively by the hierarchical fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub blocks: Vec<Block>,
}

impl Default for BlockSpec {
    /// Five blocks: sponsorship type (with the four league property flags),
    /// economic conditions, location, category and sponsor characteristics.
    ///
    /// Reference levels are team and jersey/shirt sponsorships without a
    /// big-four property, North America, and the "other" category.
    fn default() -> Self {
        use SponsorshipType as T;
        let types = [
            T::NamingRights,
            T::EventTitle,
            T::League,
            T::Olympic,
            T::WorldCup,
        ]
        .iter()
        .map(|t| t.token().to_string())
        .chain(BigFourProperty::ALL.iter().map(|p| p.token().to_string()));
        let locations = SponsorLocation::ALL
            .iter()
            .filter(|l| **l != SponsorLocation::NorthAmerica)
            .map(|l| l.token().to_string());
        let categories = SponsorCategory::ALL
            .iter()
            .filter(|c| **c != SponsorCategory::Other)
            .map(|c| c.token().to_string());
        let characteristics = Flag::ALL
            .iter()
            .map(|f| f.token().to_string())
            .chain(["clutter".to_string()]);
        let block = |name: &str, columns: Vec<String>| Block {
            name: name.into(),
            columns,
        };
        BlockSpec {
            blocks: vec![
                block("sponsorship_type", types.collect()),
                block(
                    "economic_conditions",
                    vec!["gdp_growth".into(), "cpi_inflation".into()],
                ),
                block("sponsor_location", locations.collect()),
                block("sponsor_category", categories.collect()),
                block("sponsor_characteristics", characteristics.collect()),
            ],
        }
    }
}

impl BlockSpec {
    pub fn from_json(text: &str) -> Result<Self, PanelError> {
        let spec: BlockSpec =
            serde_json::from_str(text).map_err(|e| PanelError::BadBlockSpec(e.to_string()))?;
        spec.resolve()?;
        Ok(spec)
    }

    pub fn only(&self, names: &[&str]) -> Self {
        BlockSpec {
            blocks: self
                .blocks
                .iter()
                .filter(|b| names.contains(&b.name.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Parses every column and checks blocks are non-empty and columns unique.
    pub fn resolve(&self) -> Result<Vec<(String, ColumnSpec)>, PanelError> {
        let mut seen = HashSet::new();
        let mut block_names = HashSet::new();
        let mut out = Vec::new();
        for block in &self.blocks {
            if block.columns.is_empty() {
                return Err(PanelError::BadBlockSpec(format!(
                    "block `{}` has no columns",
                    block.name
                )));
            }
            if !block_names.insert(block.name.as_str()) {
                return Err(PanelError::BadBlockSpec(format!(
                    "block `{}` appears twice",
                    block.name
                )));
            }
            for column in &block.columns {
                let spec = ColumnSpec::parse(column)?;
                if !seen.insert(spec.name()) {
                    return Err(PanelError::BadBlockSpec(format!(
                        "column `{}` listed more than once",
                        spec.name()
                    )));
                }
                out.push((block.name.clone(), spec));
            }
        }
        Ok(out)
    }
}

/// Numeric covariates for counting-process Cox fitting.
///
/// Each row covers the interval `(entry, exit]` and carries an event flag and
/// a cluster index. Values are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    names: Vec<String>,
    labels: Vec<String>,
    blocks: Vec<String>,
    values: Vec<f64>,
    entry: Vec<u32>,
    exit: Vec<u32>,
    event: Vec<bool>,
    cluster: Vec<usize>,
    cluster_labels: Vec<String>,
    degenerate: Vec<String>,
}

/// Builds the design for `dataset` under `spec`; one row per observation with
/// interval `(period - 1, period]`.
pub fn design_matrix(dataset: &Dataset, spec: &BlockSpec) -> Result<DesignMatrix, PanelError> {
    let columns = spec.resolve()?;
    let n = dataset.n_observations();
    let p = columns.len();
    let mut values = Vec::with_capacity(n * p);
    let mut entry = Vec::with_capacity(n);
    let mut exit = Vec::with_capacity(n);
    let mut event = Vec::with_capacity(n);
    let mut clusters = Vec::with_capacity(n);
    for obs in dataset.observations() {
        values.extend(columns.iter().map(|(_, c)| c.evaluate(&obs.covariates)));
        entry.push(obs.period - 1);
        exit.push(obs.period);
        event.push(obs.event);
        clusters.push(obs.cluster_id.clone());
    }
    let (cluster, cluster_labels) = index_clusters(clusters);
    let mut design = DesignMatrix {
        names: columns.iter().map(|(_, c)| c.name()).collect(),
        labels: columns.iter().map(|(_, c)| c.label()).collect(),
        blocks: columns.iter().map(|(b, _)| b.clone()).collect(),
        values,
        entry,
        exit,
        event,
        cluster,
        cluster_labels,
        degenerate: Vec::new(),
    };
    design.degenerate = design.find_degenerate();
    Ok(design)
}

fn index_clusters(labels: Vec<String>) -> (Vec<usize>, Vec<String>) {
    let mut lookup: BTreeMap<String, usize> = BTreeMap::new();
    let mut order = Vec::new();
    let index = labels
        .into_iter()
        .map(|l| {
            *lookup.entry(l.clone()).or_insert_with(|| {
                order.push(l);
                order.len() - 1
            })
        })
        .collect();
    (index, order)
}

impl DesignMatrix {
    /// Assembles a design from raw parts; `rows[i]` holds row `i`'s covariates.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        names: Vec<String>,
        blocks: Vec<String>,
        rows: &[Vec<f64>],
        entry: Vec<u32>,
        exit: Vec<u32>,
        event: Vec<bool>,
        clusters: Vec<String>,
    ) -> Result<Self, PanelError> {
        let n = rows.len();
        let p = names.len();
        if blocks.len() != p {
            return Err(PanelError::BadDesign("one block label per column".into()));
        }
        if [entry.len(), exit.len(), event.len(), clusters.len()]
            .iter()
            .any(|&len| len != n)
        {
            return Err(PanelError::BadDesign(
                "row metadata length differs from row count".into(),
            ));
        }
        if rows.iter().any(|r| r.len() != p) {
            return Err(PanelError::BadDesign(
                "row width differs from column count".into(),
            ));
        }
        if entry.iter().zip(&exit).any(|(a, b)| a >= b) {
            return Err(PanelError::BadDesign("every row needs entry < exit".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(PanelError::BadDesign("non-finite covariate value".into()));
        }
        let unique: HashSet<&String> = names.iter().collect();
        if unique.len() != p {
            return Err(PanelError::BadDesign("column names must be unique".into()));
        }
        let (cluster, cluster_labels) = index_clusters(clusters);
        let mut design = DesignMatrix {
            labels: names.clone(),
            names,
            blocks,
            values: rows.iter().flatten().copied().collect(),
            entry,
            exit,
            event,
            cluster,
            cluster_labels,
            degenerate: Vec::new(),
        };
        design.degenerate = design.find_degenerate();
        Ok(design)
    }

    /// One row per subject observed on `(0, time]`, each subject its own cluster.
    pub fn from_survival_times(
        names: Vec<String>,
        rows: &[Vec<f64>],
        times: &[u32],
        events: &[bool],
    ) -> Result<Self, PanelError> {
        let blocks = vec!["covariates".to_string(); names.len()];
        let clusters = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::from_parts(
            names,
            blocks,
            rows,
            vec![0; rows.len()],
            times.to_vec(),
            events.to_vec(),
            clusters,
        )
    }

    fn find_degenerate(&self) -> Vec<String> {
        if self.n_rows() == 0 {
            return self.names.clone();
        }
        (0..self.n_cols())
            .filter(|&j| {
                let first = self.value(0, j);
                (1..self.n_rows()).all(|i| self.value(i, j) == first)
            })
            .map(|j| self.names[j].clone())
            .collect()
    }

    pub fn n_rows(&self) -> usize {
        self.event.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Report labels, parallel to `names`.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Block label of every column.
    pub fn column_blocks(&self) -> &[String] {
        &self.blocks
    }

    /// Distinct block labels in order of first appearance.
    pub fn block_order(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for b in &self.blocks {
            if !out.contains(b) {
                out.push(b.clone());
            }
        }
        out
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.value(i, j)).collect()
    }

    pub fn entry(&self) -> &[u32] {
        &self.entry
    }

    pub fn exit(&self) -> &[u32] {
        &self.exit
    }

    pub fn events(&self) -> &[bool] {
        &self.event
    }

    pub fn n_events(&self) -> usize {
        self.event.iter().filter(|e| **e).count()
    }

    /// Cluster index of each row into [`Self::cluster_labels`].
    pub fn clusters(&self) -> &[usize] {
        &self.cluster
    }

    pub fn cluster_labels(&self) -> &[String] {
        &self.cluster_labels
    }

    /// Columns with zero variance. Reported, not rejected, at build time.
    pub fn degenerate_columns(&self) -> &[String] {
        &self.degenerate
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> DesignMatrix {
        let p = self.n_cols();
        let mut values = Vec::with_capacity(self.n_rows() * columns.len());
        for i in 0..self.n_rows() {
            values.extend(columns.iter().map(|&j| self.values[i * p + j]));
        }
        let pick = |v: &Vec<String>| columns.iter().map(|&j| v[j].clone()).collect::<Vec<_>>();
        let mut out = DesignMatrix {
            names: pick(&self.names),
            labels: pick(&self.labels),
            blocks: pick(&self.blocks),
            values,
            entry: self.entry.clone(),
            exit: self.exit.clone(),
            event: self.event.clone(),
            cluster: self.cluster.clone(),
            cluster_labels: self.cluster_labels.clone(),
            degenerate: Vec::new(),
        };
        out.degenerate = out.find_degenerate();
        out
    }

    /// Columns belonging to the first `k` blocks in entry order.
    pub fn leading_blocks(&self, k: usize) -> DesignMatrix {
        let keep: Vec<String> = self.block_order().into_iter().take(k).collect();
        let columns: Vec<usize> = (0..self.n_cols())
            .filter(|&j| keep.contains(&self.blocks[j]))
            .collect();
        self.select_columns(&columns)
    }

    /// Returns a copy with column `j` replaced by `f(value)`.
    pub fn map_column(&self, j: usize, f: impl Fn(f64) -> f64) -> DesignMatrix {
        let mut out = self.clone();
        let p = self.n_cols();
        for i in 0..self.n_rows() {
            out.values[i * p + j] = f(out.values[i * p + j]);
        }
        out.degenerate = out.find_degenerate();
        out
    }

    /// Returns a copy with new cluster labels, one per row.
    pub fn with_clusters(&self, labels: Vec<String>) -> Result<DesignMatrix, PanelError> {
        if labels.len() != self.n_rows() {
            return Err(PanelError::BadDesign("one cluster label per row".into()));
        }
        let (cluster, cluster_labels) = index_clusters(labels);
        Ok(DesignMatrix {
            cluster,
            cluster_labels,
            ..self.clone()
        })
    }
}
