//! Multi-table relational dataset: schema descriptor + one CSV per table.
//!
//! A dataset directory holds a `schema.json` descriptor and one UTF-8 CSV
//! (header row required) per table. The descriptor fixes each column's kind;
//! nothing is inferred from the data. Datasets are immutable after load.

use std::collections::HashMap;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column kind, fixed by the descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numerical,
    Categorical,
    Text,
    PrimaryKey,
    ForeignKey,
}

impl ColumnKind {
    pub fn is_key(self) -> bool {
        matches!(self, ColumnKind::PrimaryKey | ColumnKind::ForeignKey)
    }
}

/// Reference to another table's primary-key column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FkTarget {
    pub table: String,
    pub column: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fk_target: Option<FkTarget>,
}

/// One cell. Empty CSV cells become `Null`; numerical cells are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Null,
    Number(f64),
    Str(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tuple {
    /// Primary-key value, always non-null.
    pub key: String,
    /// One slot per column, in column order. The PK slot mirrors `key`.
    pub values: Vec<Value>,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<ColumnSpec>,
    pub tuples: Vec<Tuple>,
    pub is_base: bool,
    pk_idx: usize,
    by_pk: HashMap<String, usize>,
    /// Per FK column index: fk value -> rows holding that value.
    fk_index: HashMap<usize, HashMap<String, Vec<usize>>>,
}

impl Table {
    /// Assemble a table from typed tuples, building the PK and FK indexes.
    /// `columns` must contain exactly one primary key; tuple keys must be
    /// unique and mirror the PK slot.
    pub fn from_parts(
        name: String,
        columns: Vec<ColumnSpec>,
        tuples: Vec<Tuple>,
        is_base: bool,
    ) -> Result<Table> {
        let pk_idx = match columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == ColumnKind::PrimaryKey)
            .map(|(i, _)| i)
            .collect::<Vec<_>>()[..]
        {
            [i] => i,
            _ => {
                return Err(Error::Schema(format!(
                    "table {name} must have exactly one primary key"
                )))
            }
        };
        let mut by_pk = HashMap::with_capacity(tuples.len());
        for (row, tp) in tuples.iter().enumerate() {
            if by_pk.insert(tp.key.clone(), row).is_some() {
                return Err(Error::DuplicatePrimaryKey {
                    table: name,
                    key: tp.key.clone(),
                });
            }
        }
        let mut fk_index: HashMap<usize, HashMap<String, Vec<usize>>> = HashMap::new();
        for (i, c) in columns.iter().enumerate() {
            if c.kind == ColumnKind::ForeignKey {
                let mut map: HashMap<String, Vec<usize>> = HashMap::new();
                for (row, tp) in tuples.iter().enumerate() {
                    if let Value::Str(v) = &tp.values[i] {
                        map.entry(v.clone()).or_default().push(row);
                    }
                }
                fk_index.insert(i, map);
            }
        }
        Ok(Table {
            name,
            columns,
            tuples,
            is_base,
            pk_idx,
            by_pk,
            fk_index,
        })
    }

    pub fn pk_index(&self) -> usize {
        self.pk_idx
    }

    pub fn pk_column(&self) -> &ColumnSpec {
        &self.columns[self.pk_idx]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<(usize, &ColumnSpec)> {
        self.column_index(name)
            .map(|i| (i, &self.columns[i]))
            .ok_or_else(|| Error::ColumnNotFound {
                table: self.name.clone(),
                column: name.to_string(),
            })
    }

    /// Row index for a primary-key value.
    pub fn row_by_pk(&self, key: &str) -> Option<usize> {
        self.by_pk.get(key).copied()
    }

    /// Rows whose FK column (by index) holds `value`.
    pub fn rows_by_fk(&self, fk_col: usize, value: &str) -> &[usize] {
        self.fk_index
            .get(&fk_col)
            .and_then(|m| m.get(value))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Indices of foreign-key columns with their targets.
    pub fn fk_columns(&self) -> impl Iterator<Item = (usize, &ColumnSpec, &FkTarget)> {
        self.columns.iter().enumerate().filter_map(|(i, c)| {
            c.fk_target
                .as_ref()
                .filter(|_| c.kind == ColumnKind::ForeignKey)
                .map(|t| (i, c, t))
        })
    }

    /// Indices of non-key columns (everything except the PK and all FKs).
    pub fn non_key_columns(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.kind.is_key())
            .map(|(i, _)| i)
            .collect()
    }
}

/// Prediction task kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSpec {
    pub base_table: String,
    pub target_column: String,
    pub task: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_count: Option<usize>,
}

/// A supervision label: class index or real target value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Label {
    Class(usize),
    Value(f64),
}

impl Label {
    pub fn class(self) -> Option<usize> {
        match self {
            Label::Class(c) => Some(c),
            _ => None,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Label::Value(v) => Some(v),
            _ => None,
        }
    }
}

/// Schema descriptor file contents (`schema.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaDescriptor {
    pub tables: Vec<TableDescriptor>,
    pub base_table: String,
    pub target_column: String,
    pub task: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_count: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableDescriptor {
    pub name: String,
    pub file: String,
    pub columns: Vec<ColumnSpec>,
}

/// Per-table load summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableLoadReport {
    pub table: String,
    pub tuples: usize,
    /// FK column name -> count of non-null values with no matching PK.
    pub dangling_fks: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadReport {
    pub table_count: usize,
    pub tables: Vec<TableLoadReport>,
}

impl LoadReport {
    pub fn total_dangling(&self) -> usize {
        self.tables
            .iter()
            .map(|t| t.dangling_fks.values().sum::<usize>())
            .sum()
    }
}

impl fmt::Display for LoadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tables: {}", self.table_count)?;
        for t in &self.tables {
            write!(f, "  {}: {} tuples", t.table, t.tuples)?;
            if t.dangling_fks.is_empty() {
                writeln!(f)?;
            } else {
                let parts: Vec<String> = t
                    .dangling_fks
                    .iter()
                    .map(|(c, n)| format!("{c}={n}"))
                    .collect();
                writeln!(f, " (dangling: {})", parts.join(", "))?;
            }
        }
        writeln!(f, "dangling FK values total: {}", self.total_dangling())
    }
}

#[derive(Debug, Clone)]
pub struct RelationalDataset {
    pub tables: Vec<Table>,
    pub task: TaskSpec,
    /// Classification only: sorted distinct target token -> class index.
    pub class_map: BTreeMap<String, usize>,
    pub load_report: LoadReport,
    by_name: HashMap<String, usize>,
}

impl RelationalDataset {
    pub fn table(&self, name: &str) -> Result<&Table> {
        self.by_name
            .get(name)
            .map(|&i| &self.tables[i])
            .ok_or_else(|| Error::TableNotFound(name.to_string()))
    }

    pub fn base_table(&self) -> &Table {
        self.table(&self.task.base_table).expect("base table exists")
    }

    pub fn auxiliary_tables(&self) -> impl Iterator<Item = &Table> {
        self.tables.iter().filter(|t| !t.is_base)
    }

    /// Number of classes the prediction head must cover (classification).
    pub fn class_count(&self) -> usize {
        match self.task.task {
            TaskKind::Classification => self
                .task
                .class_count
                .unwrap_or(self.class_map.len())
                .max(self.class_map.len()),
            TaskKind::Regression => 1,
        }
    }

    /// Non-key columns usable as features: excludes the PK, all FKs, and
    /// (on the base table) the prediction target.
    pub fn feature_columns(&self, table_name: &str) -> Result<Vec<String>> {
        let table = self.table(table_name)?;
        Ok(table
            .columns
            .iter()
            .filter(|c| !c.kind.is_key())
            .filter(|c| !(table.is_base && c.name == self.task.target_column))
            .map(|c| c.name.clone())
            .collect())
    }

    /// Label of a base-table row, or None when the target cell is null.
    pub fn base_label(&self, row: usize) -> Option<Label> {
        let base = self.base_table();
        let (target_idx, _) = base.column(&self.task.target_column).ok()?;
        match (&base.tuples[row].values[target_idx], self.task.task) {
            (Value::Null, _) => None,
            (Value::Number(x), TaskKind::Regression) => Some(Label::Value(*x)),
            (Value::Str(s), TaskKind::Classification) => {
                self.class_map.get(s).map(|&c| Label::Class(c))
            }
            _ => None,
        }
    }
}

fn parse_cell(
    raw: &str,
    kind: ColumnKind,
    table: &str,
    column: &str,
    row: usize,
) -> Result<Value> {
    if raw.is_empty() {
        return Ok(Value::Null);
    }
    match kind {
        ColumnKind::Numerical => {
            let x: f64 = raw.parse().map_err(|_| Error::BadNumericCell {
                table: table.to_string(),
                column: column.to_string(),
                row,
                value: raw.to_string(),
            })?;
            if !x.is_finite() {
                return Err(Error::BadNumericCell {
                    table: table.to_string(),
                    column: column.to_string(),
                    row,
                    value: raw.to_string(),
                });
            }
            Ok(Value::Number(x))
        }
        _ => Ok(Value::Str(raw.to_string())),
    }
}

fn validate_descriptor(desc: &SchemaDescriptor) -> Result<()> {
    if desc.tables.is_empty() {
        return Err(Error::Schema("descriptor lists no tables".into()));
    }
    let mut names = BTreeSet::new();
    for t in &desc.tables {
        if !names.insert(t.name.clone()) {
            return Err(Error::Schema(format!("duplicate table name {:?}", t.name)));
        }
    }
    let pk_of: BTreeMap<&str, &str> = desc
        .tables
        .iter()
        .filter_map(|t| {
            t.columns
                .iter()
                .find(|c| c.kind == ColumnKind::PrimaryKey)
                .map(|c| (t.name.as_str(), c.name.as_str()))
        })
        .collect();
    for t in &desc.tables {
        let pk_count = t
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::PrimaryKey)
            .count();
        if pk_count != 1 {
            return Err(Error::Schema(format!(
                "table {} must have exactly one primary_key column, found {pk_count}",
                t.name
            )));
        }
        let mut col_names = BTreeSet::new();
        for c in &t.columns {
            if !col_names.insert(c.name.clone()) {
                return Err(Error::Schema(format!(
                    "table {}: duplicate column {:?}",
                    t.name, c.name
                )));
            }
            match (c.kind, &c.fk_target) {
                (ColumnKind::ForeignKey, None) => {
                    return Err(Error::Schema(format!(
                        "table {}: foreign key {} lacks fk_target",
                        t.name, c.name
                    )))
                }
                (ColumnKind::ForeignKey, Some(target)) => {
                    let pk = pk_of.get(target.table.as_str()).ok_or_else(|| {
                        Error::Schema(format!(
                            "table {}: fk {} targets unknown table {:?}",
                            t.name, c.name, target.table
                        ))
                    })?;
                    if *pk != target.column {
                        return Err(Error::Schema(format!(
                            "table {}: fk {} must target {}'s primary key {:?}, not {:?}",
                            t.name, c.name, target.table, pk, target.column
                        )));
                    }
                }
                (kind, Some(_)) => {
                    return Err(Error::Schema(format!(
                        "table {}: column {} has fk_target but kind {:?}",
                        t.name, c.name, kind
                    )))
                }
                _ => {}
            }
        }
    }
    let base = desc
        .tables
        .iter()
        .find(|t| t.name == desc.base_table)
        .ok_or_else(|| Error::Schema(format!("base_table {:?} not listed", desc.base_table)))?;
    let target = base
        .columns
        .iter()
        .find(|c| c.name == desc.target_column)
        .ok_or_else(|| {
            Error::Schema(format!(
                "target_column {:?} not in base table {}",
                desc.target_column, desc.base_table
            ))
        })?;
    match desc.task {
        TaskKind::Classification => {
            let n = desc.class_count.ok_or_else(|| {
                Error::Schema("classification requires class_count".into())
            })?;
            if n < 2 {
                return Err(Error::Schema(format!(
                    "classification requires class_count >= 2, got {n}"
                )));
            }
            if !matches!(target.kind, ColumnKind::Categorical | ColumnKind::Text) {
                return Err(Error::Schema(format!(
                    "classification target {:?} must be categorical or text",
                    desc.target_column
                )));
            }
        }
        TaskKind::Regression => {
            if target.kind != ColumnKind::Numerical {
                return Err(Error::Schema(format!(
                    "regression target {:?} must be numerical",
                    desc.target_column
                )));
            }
        }
    }
    Ok(())
}

/// Read the descriptor file in `root` and load every table CSV.
///
/// Dangling FK values (non-null, no matching PK) are retained and counted in
/// the load report; they simply never produce join links.
pub fn load_dataset(root: &Path, descriptor: &str) -> Result<RelationalDataset> {
    let desc_path = root.join(descriptor);
    let raw = fs::read_to_string(&desc_path).map_err(|e| Error::io(&desc_path, e))?;
    let desc: SchemaDescriptor = serde_json::from_str(&raw)
        .map_err(|e| Error::json(desc_path.display().to_string(), e))?;
    load_from_descriptor(root, &desc)
}

pub fn load_from_descriptor(root: &Path, desc: &SchemaDescriptor) -> Result<RelationalDataset> {
    validate_descriptor(desc)?;

    let mut tables = Vec::with_capacity(desc.tables.len());
    for td in &desc.tables {
        tables.push(load_table(root, td, td.name == desc.base_table)?);
    }

    // Dangling FK scan: non-null FK values without a matching target PK.
    let mut reports = Vec::new();
    let pk_sets: HashMap<&str, &HashMap<String, usize>> =
        tables.iter().map(|t| (t.name.as_str(), &t.by_pk)).collect();
    for t in &tables {
        let mut dangling = BTreeMap::new();
        for (fk_col, spec, target) in t.fk_columns() {
            let target_pks = pk_sets[target.table.as_str()];
            let n = t
                .tuples
                .iter()
                .filter(|tp| match &tp.values[fk_col] {
                    Value::Str(v) => !target_pks.contains_key(v),
                    Value::Null => false,
                    Value::Number(_) => true,
                })
                .count();
            if n > 0 {
                log::warn!("table {}: {} dangling values in fk {}", t.name, n, spec.name);
            }
            dangling.insert(spec.name.clone(), n);
        }
        reports.push(TableLoadReport {
            table: t.name.clone(),
            tuples: t.tuples.len(),
            dangling_fks: dangling,
        });
    }

    let task = TaskSpec {
        base_table: desc.base_table.clone(),
        target_column: desc.target_column.clone(),
        task: desc.task,
        class_count: desc.class_count,
    };

    // Class map: sorted distinct non-null target tokens.
    let mut class_map = BTreeMap::new();
    if task.task == TaskKind::Classification {
        let base = tables.iter().find(|t| t.is_base).expect("validated");
        let target_idx = base
            .column_index(&task.target_column)
            .expect("validated");
        let distinct: BTreeSet<String> = base
            .tuples
            .iter()
            .filter_map(|tp| tp.values[target_idx].as_str().map(str::to_string))
            .collect();
        if let Some(n) = task.class_count {
            if distinct.len() > n {
                return Err(Error::Schema(format!(
                    "target column has {} distinct values but class_count = {n}",
                    distinct.len()
                )));
            }
        }
        for (i, tok) in distinct.into_iter().enumerate() {
            class_map.insert(tok, i);
        }
    }

    let by_name = tables
        .iter()
        .enumerate()
        .map(|(i, t)| (t.name.clone(), i))
        .collect();

    Ok(RelationalDataset {
        load_report: LoadReport {
            table_count: tables.len(),
            tables: reports,
        },
        tables,
        task,
        class_map,
        by_name,
    })
}

fn load_table(root: &Path, td: &TableDescriptor, is_base: bool) -> Result<Table> {
    let path = root.join(&td.file);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
            },
            _ => Error::Csv {
                path: path.clone(),
                source: e,
            },
        })?;

    // Headers are matched by name; CSV column order may differ from the
    // descriptor.
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.clone(),
            source: e,
        })?
        .clone();
    let mut header_pos = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        header_pos.insert(h.to_string(), i);
    }
    if header_pos.len() != headers.len() {
        return Err(Error::ColumnMismatch {
            table: td.name.clone(),
            detail: "duplicate CSV header".into(),
        });
    }
    let mut csv_pos = Vec::with_capacity(td.columns.len());
    for c in &td.columns {
        match header_pos.get(&c.name) {
            Some(&i) => csv_pos.push(i),
            None => {
                return Err(Error::ColumnMismatch {
                    table: td.name.clone(),
                    detail: format!("descriptor column {:?} missing from CSV header", c.name),
                })
            }
        }
    }
    if headers.len() != td.columns.len() {
        let declared: BTreeSet<&str> = td.columns.iter().map(|c| c.name.as_str()).collect();
        let extra: Vec<&str> = headers.iter().filter(|h| !declared.contains(h)).collect();
        return Err(Error::ColumnMismatch {
            table: td.name.clone(),
            detail: format!("CSV has undeclared columns: {extra:?}"),
        });
    }

    let pk_idx = td
        .columns
        .iter()
        .position(|c| c.kind == ColumnKind::PrimaryKey)
        .expect("validated: one pk");

    let mut tuples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path.clone(),
            source: e,
        })?;
        if record.len() != headers.len() {
            return Err(Error::ColumnMismatch {
                table: td.name.clone(),
                detail: format!(
                    "row {row} has {} fields, expected {}",
                    record.len(),
                    headers.len()
                ),
            });
        }
        let mut values = Vec::with_capacity(td.columns.len());
        for (ci, c) in td.columns.iter().enumerate() {
            let raw = record.get(csv_pos[ci]).unwrap_or("");
            values.push(parse_cell(raw, c.kind, &td.name, &c.name, row)?);
        }
        let key = match &values[pk_idx] {
            Value::Str(s) => s.clone(),
            Value::Null => {
                return Err(Error::NullPrimaryKey {
                    table: td.name.clone(),
                    row,
                })
            }
            Value::Number(x) => x.to_string(),
        };
        tuples.push(Tuple { key, values });
    }

    Table::from_parts(td.name.clone(), td.columns.clone(), tuples, is_base)
}

/// Write the dataset back out as `schema.json` + one CSV per table.
/// Reloading the result yields identical typed values.
pub fn save_dataset(ds: &RelationalDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let desc = SchemaDescriptor {
        tables: ds
            .tables
            .iter()
            .map(|t| TableDescriptor {
                name: t.name.clone(),
                file: format!("{}.csv", t.name),
                columns: t.columns.clone(),
            })
            .collect(),
        base_table: ds.task.base_table.clone(),
        target_column: ds.task.target_column.clone(),
        task: ds.task.task,
        class_count: ds.task.class_count,
    };
    let desc_path = dir.join("schema.json");
    let json = serde_json::to_string_pretty(&desc).map_err(|e| Error::json("schema.json", e))?;
    fs::write(&desc_path, json).map_err(|e| Error::io(&desc_path, e))?;

    for t in &ds.tables {
        let path = dir.join(format!("{}.csv", t.name));
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Csv {
            path: path.clone(),
            source: e,
        })?;
        w.write_record(t.columns.iter().map(|c| c.name.as_str()))
            .map_err(|e| Error::Csv {
                path: path.clone(),
                source: e,
            })?;
        for tp in &t.tuples {
            let rec: Vec<String> = tp
                .values
                .iter()
                .map(|v| match v {
                    Value::Null => String::new(),
                    Value::Number(x) => x.to_string(),
                    Value::Str(s) => s.clone(),
                })
                .collect();
            w.write_record(&rec).map_err(|e| Error::Csv {
                path: path.clone(),
                source: e,
            })?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Summary statistics for one column, nulls ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnStats {
    Numerical {
        min: f64,
        max: f64,
        mean: f64,
        stddev: f64,
        count: usize,
        nulls: usize,
    },
    Discrete {
        distinct: usize,
        count: usize,
        nulls: usize,
    },
}

impl ColumnStats {
    pub fn mean_std(&self) -> (f64, f64) {
        match self {
            ColumnStats::Numerical { mean, stddev, .. } => (*mean, *stddev),
            ColumnStats::Discrete { .. } => (0.0, 0.0),
        }
    }
}

/// Statistics over a column's non-null cells. A constant column reports
/// stddev 0; an all-null numerical column reports zeros throughout.
pub fn column_statistics(table: &Table, column: &str) -> Result<ColumnStats> {
    let (idx, spec) = table.column(column)?;
    match spec.kind {
        ColumnKind::Numerical => {
            let values: Vec<f64> = table
                .tuples
                .iter()
                .filter_map(|t| t.values[idx].as_number())
                .collect();
            let nulls = table.tuples.len() - values.len();
            if values.is_empty() {
                return Ok(ColumnStats::Numerical {
                    min: 0.0,
                    max: 0.0,
                    mean: 0.0,
                    stddev: 0.0,
                    count: 0,
                    nulls,
                });
            }
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            Ok(ColumnStats::Numerical {
                min: values.iter().cloned().fold(f64::INFINITY, f64::min),
                max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                mean,
                stddev: var.sqrt(),
                count: values.len(),
                nulls,
            })
        }
        _ => {
            let mut distinct = BTreeSet::new();
            let mut count = 0usize;
            for t in &table.tuples {
                match &t.values[idx] {
                    Value::Str(s) => {
                        distinct.insert(s.clone());
                        count += 1;
                    }
                    Value::Number(x) => {
                        distinct.insert(x.to_string());
                        count += 1;
                    }
                    Value::Null => {}
                }
            }
            Ok(ColumnStats::Discrete {
                distinct: distinct.len(),
                count,
                nulls: table.tuples.len() - count,
            })
        }
    }
}
