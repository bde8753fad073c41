//! The benchmark score tensor: per-item, per-artifact scores for every
//! (system, budget) cell, plus its long-CSV and JSON file formats.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Address of one (system, budget) cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellRef {
    pub system: String,
    pub budget: String,
}

impl CellRef {
    pub fn new(system: impl Into<String>, budget: impl Into<String>) -> Self {
        Self {
            system: system.into(),
            budget: budget.into(),
        }
    }
}

impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.system, self.budget)
    }
}

/// Dense `n_items x n_artifacts` matrix stored column-major, so that the
/// scores of one artifact are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n_items: usize,
    n_artifacts: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn from_columns(n_items: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        let n_artifacts = columns.len();
        let mut data = Vec::with_capacity(n_items * n_artifacts);
        for (k, col) in columns.into_iter().enumerate() {
            if col.len() != n_items {
                return Err(Error::invalid(format!(
                    "column {k} has {} entries, expected {n_items}",
                    col.len()
                )));
            }
            data.extend(col);
        }
        Ok(Self {
            n_items,
            n_artifacts,
            data,
        })
    }

    /// Builds from item-major rows (`rows[i][k]`).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_items = rows.len();
        let n_artifacts = rows.first().map_or(0, Vec::len);
        let mut data = vec![0.0; n_items * n_artifacts];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_artifacts {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {n_artifacts}",
                    row.len()
                )));
            }
            for (k, v) in row.iter().enumerate() {
                data[k * n_items + i] = *v;
            }
        }
        Ok(Self {
            n_items,
            n_artifacts,
            data,
        })
    }

    pub fn constant(n_items: usize, n_artifacts: usize, value: f64) -> Self {
        Self {
            n_items,
            n_artifacts,
            data: vec![value; n_items * n_artifacts],
        }
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_artifacts(&self) -> usize {
        self.n_artifacts
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_items..(k + 1) * self.n_items]
    }

    pub fn column_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.n_items..(k + 1) * self.n_items]
    }

    pub fn get(&self, item: usize, artifact: usize) -> f64 {
        self.data[artifact * self.n_items + item]
    }

    pub fn row(&self, item: usize) -> Vec<f64> {
        (0..self.n_artifacts).map(|k| self.get(item, k)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Rows `rows[0], rows[1], ...` of `self`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.n_artifacts);
        for k in 0..self.n_artifacts {
            let col = self.column(k);
            data.extend(rows.iter().map(|&i| col[i]));
        }
        Self {
            n_items: rows.len(),
            n_artifacts: self.n_artifacts,
            data,
        }
    }
}

/// One (system, budget) cell: a frozen shortlist and its scores.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCell {
    pub system: String,
    pub budget: String,
    pub artifacts: Vec<String>,
    /// Item identifiers, row order of the matrices. Normally shared by all cells.
    pub items: Arc<[String]>,
    /// Scores used in the scoring (selection) role, and in the held-out role
    /// too unless `eval_scores` is present.
    pub scores: ScoreMatrix,
    pub eval_scores: Option<ScoreMatrix>,
}

impl TensorCell {
    pub fn cell_ref(&self) -> CellRef {
        CellRef::new(&self.system, &self.budget)
    }

    pub fn n_artifacts(&self) -> usize {
        self.artifacts.len()
    }

    pub fn score_role(&self) -> &ScoreMatrix {
        &self.scores
    }

    pub fn eval_role(&self) -> &ScoreMatrix {
        self.eval_scores.as_ref().unwrap_or(&self.scores)
    }
}

/// A violated tensor invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Violation {
    NoCells,
    EmptyShortlist { cell: String },
    InconsistentItems { cell: String },
    ShapeMismatch { cell: String, detail: String },
    OutOfRangeScore {
        cell: String,
        item: String,
        artifact: String,
        value: f64,
    },
    DuplicateBudget { budget: String },
    UnknownBudget { cell: String },
    DuplicateCell { cell: String },
    DuplicateArtifact { cell: String, artifact: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoCells => write!(f, "tensor has no cells"),
            Violation::EmptyShortlist { cell } => write!(f, "EmptyShortlist({cell})"),
            Violation::InconsistentItems { cell } => write!(f, "InconsistentItems({cell})"),
            Violation::ShapeMismatch { cell, detail } => {
                write!(f, "ShapeMismatch({cell}): {detail}")
            }
            Violation::OutOfRangeScore {
                cell,
                item,
                artifact,
                value,
            } => write!(f, "OutOfRangeScore({cell}, item {item}, artifact {artifact}): {value}"),
            Violation::DuplicateBudget { budget } => write!(f, "DuplicateBudget({budget})"),
            Violation::UnknownBudget { cell } => write!(f, "UnknownBudget({cell})"),
            Violation::DuplicateCell { cell } => write!(f, "DuplicateCell({cell})"),
            Violation::DuplicateArtifact { cell, artifact } => {
                write!(f, "DuplicateArtifact({cell}, {artifact})")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorFormat {
    Csv,
    Json,
}

impl TensorFormat {
    /// Guesses from the file extension; anything but `.json` is read as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => TensorFormat::Json,
            _ => TensorFormat::Csv,
        }
    }
}

/// Validated, immutable score tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTensor {
    pub budget_grid: Vec<String>,
    pub cells: Vec<TensorCell>,
}

impl ScoreTensor {
    /// Wraps parts without checking invariants; use [`ScoreTensor::new`] unless
    /// the point is to inspect [`ScoreTensor::validate`].
    pub fn from_parts_unchecked(budget_grid: Vec<String>, cells: Vec<TensorCell>) -> Self {
        Self { budget_grid, cells }
    }

    pub fn new(budget_grid: Vec<String>, cells: Vec<TensorCell>) -> Result<Self> {
        let t = Self { budget_grid, cells };
        t.check()?;
        Ok(t)
    }

    /// Single-cell convenience constructor with items `0..M` and artifacts `a0..`.
    pub fn single_cell(system: &str, budget: &str, scores: ScoreMatrix) -> Result<Self> {
        let items: Arc<[String]> = (0..scores.n_items()).map(|i| i.to_string()).collect();
        let artifacts = (0..scores.n_artifacts()).map(|k| format!("a{k}")).collect();
        Self::new(
            vec![budget.to_string()],
            vec![TensorCell {
                system: system.to_string(),
                budget: budget.to_string(),
                artifacts,
                items,
                scores,
                eval_scores: None,
            }],
        )
    }

    fn check(&self) -> Result<()> {
        let violations = self.validate();
        match violations.first() {
            None => Ok(()),
            Some(Violation::OutOfRangeScore {
                cell,
                item,
                artifact,
                value,
            }) => Err(Error::OutOfRangeScore {
                cell: cell.clone(),
                item: item.clone(),
                artifact: artifact.clone(),
                value: *value,
            }),
            Some(Violation::InconsistentItems { cell }) => {
                Err(Error::InconsistentItems { cell: cell.clone() })
            }
            Some(_) => Err(Error::InvalidTensor(violations)),
        }
    }

    pub fn items(&self) -> &[String] {
        self.cells.first().map_or(&[], |c| &c.items)
    }

    pub fn n_items(&self) -> usize {
        self.items().len()
    }

    pub fn cell_refs(&self) -> Vec<CellRef> {
        self.cells.iter().map(TensorCell::cell_ref).collect()
    }

    pub fn cell_index(&self, cell: &CellRef) -> Result<usize> {
        self.cells
            .iter()
            .position(|c| c.system == cell.system && c.budget == cell.budget)
            .ok_or_else(|| Error::UnknownCell(cell.to_string()))
    }

    pub fn cell(&self, cell: &CellRef) -> Result<&TensorCell> {
        self.cell_index(cell).map(|i| &self.cells[i])
    }

    /// Lists every violated invariant. Never fails.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.cells.is_empty() {
            out.push(Violation::NoCells);
        }
        let mut seen_budgets = BTreeSet::new();
        for b in &self.budget_grid {
            if !seen_budgets.insert(b) {
                out.push(Violation::DuplicateBudget { budget: b.clone() });
            }
        }
        let reference = self.cells.first().map(|c| c.items.clone());
        let mut seen_cells = BTreeSet::new();
        for cell in &self.cells {
            let name = cell.cell_ref().to_string();
            if !seen_cells.insert(cell.cell_ref()) {
                out.push(Violation::DuplicateCell { cell: name.clone() });
            }
            if !self.budget_grid.contains(&cell.budget) {
                out.push(Violation::UnknownBudget { cell: name.clone() });
            }
            if cell.artifacts.is_empty() {
                out.push(Violation::EmptyShortlist { cell: name.clone() });
            }
            let mut seen_art = BTreeSet::new();
            for a in &cell.artifacts {
                if !seen_art.insert(a) {
                    out.push(Violation::DuplicateArtifact {
                        cell: name.clone(),
                        artifact: a.clone(),
                    });
                }
            }
            if let Some(reference) = &reference {
                if cell.items[..] != reference[..] {
                    out.push(Violation::InconsistentItems { cell: name.clone() });
                }
            }
            let mut matrices = vec![("scores", &cell.scores)];
            if let Some(e) = &cell.eval_scores {
                matrices.push(("eval_scores", e));
            }
            for (label, m) in matrices {
                if m.n_items() != cell.items.len() || m.n_artifacts() != cell.artifacts.len() {
                    out.push(Violation::ShapeMismatch {
                        cell: name.clone(),
                        detail: format!(
                            "{label} is {}x{}, expected {}x{}",
                            m.n_items(),
                            m.n_artifacts(),
                            cell.items.len(),
                            cell.artifacts.len()
                        ),
                    });
                    continue;
                }
                for k in 0..m.n_artifacts() {
                    for (i, &v) in m.column(k).iter().enumerate() {
                        if !(0.0..=1.0).contains(&v) {
                            out.push(Violation::OutOfRangeScore {
                                cell: name.clone(),
                                item: cell.items[i].clone(),
                                artifact: cell.artifacts[k].clone(),
                                value: v,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Tensor whose item `i` is item `rows[i]` of `self` (rows may repeat).
    pub fn resample_rows(&self, rows: &[usize]) -> Self {
        let items: Arc<[String]> = rows.iter().map(|&i| self.items()[i].clone()).collect();
        let cells = self
            .cells
            .iter()
            .map(|c| TensorCell {
                system: c.system.clone(),
                budget: c.budget.clone(),
                artifacts: c.artifacts.clone(),
                items: items.clone(),
                scores: c.scores.select_rows(rows),
                eval_scores: c.eval_scores.as_ref().map(|e| e.select_rows(rows)),
            })
            .collect();
        Self {
            budget_grid: self.budget_grid.clone(),
            cells,
        }
    }

    pub fn load(path: &Path, format: TensorFormat) -> Result<Self> {
        let mut text = String::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
        let parsed = match format {
            TensorFormat::Csv => Self::from_csv_str(&text),
            TensorFormat::Json => Self::from_json_str(&text),
        };
        parsed.map_err(|e| match e {
            Error::Csv(err) => Error::Parse {
                path: path.to_path_buf(),
                message: err.to_string(),
            },
            Error::Json(err) => Error::Parse {
                path: path.to_path_buf(),
                message: err.to_string(),
            },
            other => other,
        })
    }

    /// Parses the long CSV format. Items, artifacts, systems and budgets are
    /// put in natural order, so the row order of the file is irrelevant.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            item_id: String,
            system: String,
            budget: String,
            artifact: String,
            #[serde(default)]
            role: Option<String>,
            score: f64,
        }

        #[derive(Default)]
        struct Pair {
            score: Option<f64>,
            eval: Option<f64>,
        }

        #[derive(Default)]
        struct CellAcc {
            items: BTreeSet<LabelKey>,
            artifacts: BTreeSet<LabelKey>,
            entries: HashMap<(String, String), Pair>,
        }

        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut cells: HashMap<(String, String), CellAcc> = HashMap::new();
        let mut all_items = BTreeSet::new();
        for row in reader.deserialize::<Row>() {
            let row = row?;
            let name = format!("{}:{}", row.system, row.budget);
            if !(0.0..=1.0).contains(&row.score) {
                return Err(Error::OutOfRangeScore {
                    cell: name,
                    item: row.item_id,
                    artifact: row.artifact,
                    value: row.score,
                });
            }
            let acc = cells
                .entry((row.system.clone(), row.budget.clone()))
                .or_default();
            acc.items.insert(LabelKey(row.item_id.clone()));
            acc.artifacts.insert(LabelKey(row.artifact.clone()));
            all_items.insert(LabelKey(row.item_id.clone()));
            let pair = acc
                .entries
                .entry((row.item_id.clone(), row.artifact.clone()))
                .or_default();
            let role = row.role.as_deref().map(str::trim).unwrap_or("");
            let (want_score, want_eval) = match role.to_ascii_lowercase().as_str() {
                "" | "both" => (true, true),
                "score" => (true, false),
                "eval" => (false, true),
                other => {
                    return Err(Error::invalid(format!(
                        "unknown role `{other}` (expected score, eval or empty)"
                    )))
                }
            };
            let dup = |role: &'static str| Error::DuplicateEntry {
                cell: name.clone(),
                item: row.item_id.clone(),
                artifact: row.artifact.clone(),
                role,
            };
            if want_score {
                if pair.score.is_some() {
                    return Err(dup("scoring-role"));
                }
                pair.score = Some(row.score);
            }
            if want_eval {
                if pair.eval.is_some() {
                    return Err(dup("held-out-role"));
                }
                pair.eval = Some(row.score);
            }
        }

        let items: Vec<String> = all_items.into_iter().map(|k| k.0).collect();
        let items_arc: Arc<[String]> = items.iter().cloned().collect();
        let budget_grid: Vec<String> = {
            let set: BTreeSet<LabelKey> = cells.keys().map(|(_, b)| LabelKey(b.clone())).collect();
            set.into_iter().map(|k| k.0).collect()
        };
        let mut keys: Vec<(String, String)> = cells.keys().cloned().collect();
        keys.sort_by(|a, b| {
            natural_cmp(&a.0, &b.0).then_with(|| {
                let pa = budget_grid.iter().position(|x| *x == a.1);
                let pb = budget_grid.iter().position(|x| *x == b.1);
                pa.cmp(&pb)
            })
        });

        let mut out = Vec::with_capacity(keys.len());
        for key in keys {
            let acc = cells.remove(&key).expect("key from map");
            let name = format!("{}:{}", key.0, key.1);
            if acc.items.len() != items.len() {
                return Err(Error::InconsistentItems { cell: name });
            }
            let artifacts: Vec<String> = acc.artifacts.into_iter().map(|k| k.0).collect();
            let mut score_cols = vec![vec![0.0; items.len()]; artifacts.len()];
            let mut eval_cols = score_cols.clone();
            let mut dual = false;
            for (k, art) in artifacts.iter().enumerate() {
                for (i, item) in items.iter().enumerate() {
                    let missing = || Error::MissingCellEntry {
                        cell: name.clone(),
                        item: item.clone(),
                        artifact: art.clone(),
                    };
                    let pair = acc
                        .entries
                        .get(&(item.clone(), art.clone()))
                        .ok_or_else(missing)?;
                    let (s, e) = match (pair.score, pair.eval) {
                        (Some(s), Some(e)) => (s, e),
                        _ => return Err(missing()),
                    };
                    score_cols[k][i] = s;
                    eval_cols[k][i] = e;
                    dual |= s.to_bits() != e.to_bits();
                }
            }
            out.push(TensorCell {
                system: key.0,
                budget: key.1,
                artifacts,
                items: items_arc.clone(),
                scores: ScoreMatrix::from_columns(items.len(), score_cols)?,
                eval_scores: if dual {
                    Some(ScoreMatrix::from_columns(items.len(), eval_cols)?)
                } else {
                    None
                },
            });
        }
        Self::new(budget_grid, out)
    }

    /// Writes the long CSV format. Cells without separate held-out scores get
    /// one row per entry with an empty role.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["item_id", "system", "budget", "artifact", "role", "score"])?;
        for cell in &self.cells {
            for (k, art) in cell.artifacts.iter().enumerate() {
                for (i, item) in cell.items.iter().enumerate() {
                    match &cell.eval_scores {
                        None => {
                            let v = cell.scores.get(i, k).to_string();
                            w.write_record([item, &cell.system, &cell.budget, art, "", &v])?;
                        }
                        Some(eval) => {
                            let s = cell.scores.get(i, k).to_string();
                            let e = eval.get(i, k).to_string();
                            w.write_record([item, &cell.system, &cell.budget, art, "score", &s])?;
                            w.write_record([item, &cell.system, &cell.budget, art, "eval", &e])?;
                        }
                    }
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Parses the nested JSON format. Order is taken as given.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: JsonTensor = serde_json::from_str(text)?;
        let items: Arc<[String]> = doc.items.into_iter().collect();
        let mut cells = Vec::with_capacity(doc.cells.len());
        for c in doc.cells {
            let budget = label_from_json(&c.budget)?;
            let to_matrix = |rows: &[Vec<f64>]| -> Result<ScoreMatrix> {
                if rows.is_empty() {
                    Ok(ScoreMatrix::constant(0, c.artifacts.len(), 0.0))
                } else {
                    ScoreMatrix::from_rows(rows)
                }
            };
            cells.push(TensorCell {
                system: c.system,
                budget,
                items: items.clone(),
                scores: to_matrix(&c.scores)?,
                eval_scores: c.eval_scores.as_deref().map(to_matrix).transpose()?,
                artifacts: c.artifacts,
            });
        }
        let budget_grid = match doc.budget_grid {
            Some(grid) => grid.iter().map(label_from_json).collect::<Result<Vec<_>>>()?,
            None => {
                let set: BTreeSet<LabelKey> =
                    cells.iter().map(|c| LabelKey(c.budget.clone())).collect();
                set.into_iter().map(|k| k.0).collect()
            }
        };
        Self::new(budget_grid, cells)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let doc = JsonTensor {
            items: self.items().to_vec(),
            budget_grid: Some(
                self.budget_grid
                    .iter()
                    .map(|b| serde_json::Value::String(b.clone()))
                    .collect(),
            ),
            cells: self
                .cells
                .iter()
                .map(|c| JsonCell {
                    system: c.system.clone(),
                    budget: serde_json::Value::String(c.budget.clone()),
                    artifacts: c.artifacts.clone(),
                    scores: (0..c.scores.n_items()).map(|i| c.scores.row(i)).collect(),
                    eval_scores: c
                        .eval_scores
                        .as_ref()
                        .map(|e| (0..e.n_items()).map(|i| e.row(i)).collect()),
                })
                .collect(),
        };
        serde_json::to_value(doc).expect("tensor serializes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("tensor serializes")
    }

    /// SHA-256 over a canonical binary encoding: items in order, the budget
    /// grid, then cells sorted by (system, grid position) with artifact names
    /// and raw score bits. Equal content hashes equal whatever file it came from.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |bytes: &[u8]| {
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        };
        put(b"siren-score-tensor/1");
        put(&(self.n_items() as u64).to_le_bytes());
        for item in self.items() {
            put(item.as_bytes());
        }
        for b in &self.budget_grid {
            put(b.as_bytes());
        }
        let mut order: Vec<&TensorCell> = self.cells.iter().collect();
        order.sort_by(|a, b| {
            a.system.cmp(&b.system).then_with(|| {
                let pa = self.budget_grid.iter().position(|x| *x == a.budget);
                let pb = self.budget_grid.iter().position(|x| *x == b.budget);
                pa.cmp(&pb)
            })
        });
        for c in order {
            put(c.system.as_bytes());
            put(c.budget.as_bytes());
            for a in &c.artifacts {
                put(a.as_bytes());
            }
            for m in std::iter::once(&c.scores).chain(c.eval_scores.as_ref()) {
                let bits: Vec<u8> = m.values().iter().flat_map(|v| v.to_bits().to_le_bytes()).collect();
                put(&bits);
            }
            put(&[u8::from(c.eval_scores.is_some())]);
        }
        hex::encode(h.finalize())
    }
}

#[derive(Serialize, Deserialize)]
struct JsonTensor {
    items: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    budget_grid: Option<Vec<serde_json::Value>>,
    cells: Vec<JsonCell>,
}

#[derive(Serialize, Deserialize)]
struct JsonCell {
    system: String,
    budget: serde_json::Value,
    artifacts: Vec<String>,
    scores: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eval_scores: Option<Vec<Vec<f64>>>,
}

fn label_from_json(v: &serde_json::Value) -> Result<String> {
    match v {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::invalid(format!("budget must be a string or number, got {other}"))),
    }
}

/// String label ordered by [`natural_cmp`].
#[derive(Debug, Clone, PartialEq, Eq)]
struct LabelKey(String);

impl Ord for LabelKey {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_cmp(&self.0, &other.0)
    }
}

impl PartialOrd for LabelKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Parses labels such as `500`, `1.5M`, `500K` as magnitudes.
fn magnitude(label: &str) -> Option<f64> {
    let s = label.trim();
    let (num, scale) = match s.chars().last()? {
        'k' | 'K' => (&s[..s.len() - 1], 1e3),
        'm' | 'M' => (&s[..s.len() - 1], 1e6),
        'b' | 'B' | 'g' | 'G' => (&s[..s.len() - 1], 1e9),
        't' | 'T' => (&s[..s.len() - 1], 1e12),
        _ => (s, 1.0),
    };
    let v: f64 = num.parse().ok()?;
    v.is_finite().then_some(v * scale)
}

/// Label order: labels that read as magnitudes (`500K < 1.5M`) come first in
/// numeric order; everything else compares with digit runs taken as numbers
/// (`item_2 < item_10`). Ties fall back to byte order, so this is total.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    match (magnitude(a), magnitude(b)) {
        (Some(x), Some(y)) => return x.total_cmp(&y).then_with(|| a.cmp(b)),
        (Some(_), None) => return Ordering::Less,
        (None, Some(_)) => return Ordering::Greater,
        (None, None) => {}
    }
    let (mut x, mut y) = (a.as_bytes(), b.as_bytes());
    loop {
        match (x.first(), y.first()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(cx), Some(cy)) if cx.is_ascii_digit() && cy.is_ascii_digit() => {
                let nx = x.iter().take_while(|c| c.is_ascii_digit()).count();
                let ny = y.iter().take_while(|c| c.is_ascii_digit()).count();
                let dx = trim_zeros(&x[..nx]);
                let dy = trim_zeros(&y[..ny]);
                let ord = dx.len().cmp(&dy.len()).then_with(|| dx.cmp(dy));
                if ord != Ordering::Equal {
                    return ord;
                }
                x = &x[nx..];
                y = &y[ny..];
            }
            (Some(cx), Some(cy)) => {
                if cx != cy {
                    return cx.cmp(cy);
                }
                x = &x[1..];
                y = &y[1..];
            }
        }
    }
}

fn trim_zeros(d: &[u8]) -> &[u8] {
    let n = d.iter().take_while(|c| **c == b'0').count();
    &d[n..]
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "item_id,system,budget,artifact,role,score\n\
        q1,sysA,100,p0,score,0\n\
        q1,sysA,100,p0,eval,1\n\
        q2,sysA,100,p0,score,1\n\
        q2,sysA,100,p0,eval,0\n";

    #[test]
    fn minimal_csv_merges_roles() {
        let t = ScoreTensor::from_csv_str(MINIMAL).unwrap();
        assert_eq!(t.n_items(), 2);
        assert_eq!(t.cells.len(), 1);
        let c = &t.cells[0];
        assert_eq!(c.n_artifacts(), 1);
        assert_eq!(c.score_role().column(0), &[0.0, 1.0]);
        assert_eq!(c.eval_role().column(0), &[1.0, 0.0]);
    }

    #[test]
    fn out_of_range_score_is_rejected() {
        let text = MINIMAL.replace("q2,sysA,100,p0,score,1", "q2,sysA,100,p0,score,1.5");
        match ScoreTensor::from_csv_str(&text) {
            Err(Error::OutOfRangeScore { value, .. }) => assert_eq!(value, 1.5),
            other => panic!("expected OutOfRangeScore, got {other:?}"),
        }
    }

    #[test]
    fn missing_entry_is_rejected() {
        let text = "item_id,system,budget,artifact,score\n\
            1,s,b,a,0.5\n2,s,b,a,0.5\n1,s,b,c,0.5\n";
        assert!(matches!(
            ScoreTensor::from_csv_str(text),
            Err(Error::MissingCellEntry { .. })
        ));
    }

    #[test]
    fn inconsistent_items_across_cells() {
        let text = "item_id,system,budget,artifact,score\n\
            1,s,b1,a,0.5\n2,s,b1,a,0.5\n1,s,b2,a,0.5\n";
        assert!(matches!(
            ScoreTensor::from_csv_str(text),
            Err(Error::InconsistentItems { .. })
        ));
    }

    #[test]
    fn duplicate_rows_are_rejected() {
        let text = "item_id,system,budget,artifact,score\n1,s,b,a,0.5\n1,s,b,a,0.5\n";
        assert!(matches!(
            ScoreTensor::from_csv_str(text),
            Err(Error::DuplicateEntry { .. })
        ));
    }

    #[test]
    fn role_column_is_optional() {
        let text = "item_id,system,budget,artifact,score\n1,s,b,a,0.25\n2,s,b,a,0.75\n";
        let t = ScoreTensor::from_csv_str(text).unwrap();
        assert!(t.cells[0].eval_scores.is_none());
        assert_eq!(t.cells[0].eval_role().column(0), &[0.25, 0.75]);
    }

    #[test]
    fn validate_reports_empty_shortlist_and_inconsistent_items() {
        let t = ScoreTensor::single_cell("s", "b", ScoreMatrix::constant(3, 2, 0.5)).unwrap();
        assert!(t.validate().is_empty());

        let mut empty = t.clone();
        empty.cells[0].artifacts.clear();
        empty.cells[0].scores = ScoreMatrix::constant(3, 0, 0.0);
        assert_eq!(
            empty.validate(),
            vec![Violation::EmptyShortlist {
                cell: "s:b".into()
            }]
        );

        let mut two = t.clone();
        let mut other = two.cells[0].clone();
        other.budget = "b2".into();
        other.items = vec!["x".to_string(), "y".into(), "z".into()].into();
        two.budget_grid.push("b2".into());
        two.cells.push(other);
        assert_eq!(
            two.validate(),
            vec![Violation::InconsistentItems {
                cell: "s:b2".into()
            }]
        );
    }

    #[test]
    fn natural_order_for_budgets_and_items() {
        let mut budgets = vec!["6.5M", "500K", "3M", "1.5M"];
        budgets.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(budgets, ["500K", "1.5M", "3M", "6.5M"]);
        let mut items = vec!["item_10", "item_2", "item_1"];
        items.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(items, ["item_1", "item_2", "item_10"]);
    }

    #[test]
    fn json_accepts_integer_budgets() {
        let text = r#"{"items": ["a", "b"], "cells": [
            {"system": "s", "budget": 500, "artifacts": ["p"], "scores": [[0.1], [0.9]]}
        ]}"#;
        let t = ScoreTensor::from_json_str(text).unwrap();
        assert_eq!(t.budget_grid, ["500"]);
        assert_eq!(t.cells[0].scores.column(0), &[0.1, 0.9]);
    }

    #[test]
    fn fingerprint_ignores_file_cosmetics() {
        let a = ScoreTensor::from_csv_str("item_id,system,budget,artifact,score\n1,s,b,a,1\n2,s,b,a,0\n").unwrap();
        let b = ScoreTensor::from_csv_str("item_id,system,budget,artifact,role,score\n2,s,b,a,,0.0\n1,s,b,a,,1.000\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = ScoreTensor::from_json_str(&a.to_json_string()).unwrap();
        assert_eq!(a.fingerprint(), c.fingerprint());
    }
}
