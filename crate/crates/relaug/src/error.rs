use std::path::PathBuf;

/// Errors produced by dataset loading, pipeline stages, and training.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("table {table}: duplicate primary key {key:?}")]
    DuplicatePrimaryKey { table: String, key: String },

    #[error("table {table}: primary key is null at row {row}")]
    NullPrimaryKey { table: String, row: usize },

    #[error("table {table}, column {column}, row {row}: cannot parse {value:?} as a finite number")]
    BadNumericCell {
        table: String,
        column: String,
        row: usize,
        value: String,
    },

    #[error("table {table}: descriptor/CSV column mismatch: {detail}")]
    ColumnMismatch { table: String, detail: String },

    #[error("unknown column kind {kind:?} for {table}.{column}")]
    UnknownColumnKind {
        table: String,
        column: String,
        kind: String,
    },

    #[error("column {column} not found in table {table}")]
    ColumnNotFound { table: String, column: String },

    #[error("table {table} has only {count} usable attribute(s); at least 2 required")]
    TooFewAttributes { table: String, count: usize },

    #[error("table {0} not found")]
    TableNotFound(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("attention records for table {table} disagree on node sets: expected {expected:?}, found {found:?}")]
    MismatchedNodeSets {
        table: String,
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("unknown attribute {attribute} in sub-table group for table {table}")]
    UnknownAttribute { table: String, attribute: String },

    #[error("{stage}: non-finite loss at epoch {epoch} (loss = {loss}); training aborted")]
    NonFiniteLoss {
        stage: String,
        epoch: usize,
        loss: f64,
    },

    #[error("node {0} is not a base node")]
    NotABaseNode(usize),

    #[error("base table has no tuples")]
    EmptyBaseTable,

    #[error("missing upstream artifact {artifact:?}; run `{produced_by}` first")]
    MissingArtifact { artifact: String, produced_by: String },

    #[error("invalid config: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
