//! Typed cell encoders and the shared projection into d_out space.
//!
//! Numerical cells standardize against frozen column statistics and pass
//! through a learnable per-column affine map. Categorical cells look up a
//! per-column embedding table with hashed overflow rows for unseen tokens.
//! Text cells use frozen signed character-3-gram feature hashing (no
//! gradient). Nulls map to a learnable per-column vector. Each modality
//! shares one projection matrix into the unified output dimension.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{column_statistics, ColumnKind, ColumnStats, RelationalDataset, Value};
use crate::error::{Error, Result};
use crate::nn::{axpy, matvec, outer_acc, vecmat, Param, ParamSet};
use crate::rng::{fnv1a64, seeded_rng};

/// Overflow rows per categorical column for unseen tokens.
pub const CAT_OVERFLOW_ROWS: usize = 64;

const STD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderDims {
    pub d_num: usize,
    pub d_cat: usize,
    pub d_text: usize,
    pub d_out: usize,
}

impl Default for EncoderDims {
    fn default() -> Self {
        EncoderDims {
            d_num: 8,
            d_cat: 16,
            d_text: 32,
            d_out: 32,
        }
    }
}

impl EncoderDims {
    pub fn validate(&self) -> Result<()> {
        if self.d_num == 0 || self.d_cat == 0 || self.d_text == 0 || self.d_out == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        Ok(())
    }

    fn input_dim(&self, modality: Modality) -> usize {
        match modality {
            Modality::Numerical => self.d_num,
            Modality::Categorical => self.d_cat,
            Modality::Text => self.d_text,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Numerical,
    Categorical,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericColumnEncoder {
    /// Frozen standardization statistics from the training data.
    pub mean: f64,
    pub stddev: f64,
    /// Elementwise affine: e = w * z + b.
    pub w: Param,
    pub b: Param,
    pub null: Param,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalColumnEncoder {
    /// Token -> embedding row. Unseen tokens hash into overflow rows
    /// appended after the vocabulary.
    pub vocab: BTreeMap<String, usize>,
    /// (vocab + CAT_OVERFLOW_ROWS) x d_cat, row-major.
    pub table: Param,
    pub null: Param,
}

impl CategoricalColumnEncoder {
    fn row_of(&self, token: &str) -> usize {
        match self.vocab.get(token) {
            Some(&r) => r,
            None => self.vocab.len() + (fnv1a64(token.as_bytes()) as usize) % CAT_OVERFLOW_ROWS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextColumnEncoder {
    /// Only the null sentinel is learnable; the 3-gram hashing is frozen.
    pub null: Param,
}

/// All encoder state for a set of tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub dims: EncoderDims,
    /// table -> column -> encoder, per modality.
    pub numeric: BTreeMap<String, BTreeMap<String, NumericColumnEncoder>>,
    pub categorical: BTreeMap<String, BTreeMap<String, CategoricalColumnEncoder>>,
    pub text: BTreeMap<String, BTreeMap<String, TextColumnEncoder>>,
    /// Shared projections, row-major d_in x d_out.
    pub w_num: Param,
    pub w_cat: Param,
    pub w_text: Param,
}

impl ParamSet for EncoderParams {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.w_num);
        f(&mut self.w_cat);
        f(&mut self.w_text);
        for cols in self.numeric.values_mut() {
            for enc in cols.values_mut() {
                f(&mut enc.w);
                f(&mut enc.b);
                f(&mut enc.null);
            }
        }
        for cols in self.categorical.values_mut() {
            for enc in cols.values_mut() {
                f(&mut enc.table);
                f(&mut enc.null);
            }
        }
        for cols in self.text.values_mut() {
            for enc in cols.values_mut() {
                f(&mut enc.null);
            }
        }
    }
}

impl EncoderParams {
    /// Initialize encoders for every non-key column of the given tables,
    /// excluding the prediction target. Vocabularies and standardization
    /// statistics come from the current data; weights are seeded uniform.
    pub fn init(
        ds: &RelationalDataset,
        tables: &[&str],
        dims: EncoderDims,
        seed: u64,
    ) -> Result<EncoderParams> {
        dims.validate()?;
        let mut rng = seeded_rng(seed, "encoders");
        let mut numeric = BTreeMap::new();
        let mut categorical = BTreeMap::new();
        let mut text = BTreeMap::new();

        // Sorted table order keeps initialization independent of caller order.
        let mut sorted: Vec<&str> = tables.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        for name in sorted {
            let table = ds.table(name)?;
            let feature_cols = ds.feature_columns(name)?;
            let mut num_cols = BTreeMap::new();
            let mut cat_cols = BTreeMap::new();
            let mut text_cols = BTreeMap::new();
            for spec in &table.columns {
                if !feature_cols.contains(&spec.name) {
                    continue;
                }
                match spec.kind {
                    ColumnKind::Numerical => {
                        let stats = column_statistics(table, &spec.name)?;
                        let (mean, stddev) = match stats {
                            ColumnStats::Numerical { mean, stddev, .. } => (mean, stddev),
                            ColumnStats::Discrete { .. } => unreachable!("kind checked"),
                        };
                        num_cols.insert(
                            spec.name.clone(),
                            NumericColumnEncoder {
                                mean,
                                stddev,
                                w: Param::uniform(dims.d_num, 1, &mut rng),
                                b: Param::uniform(dims.d_num, 1, &mut rng),
                                null: Param::uniform(dims.d_num, 1, &mut rng),
                            },
                        );
                    }
                    ColumnKind::Categorical => {
                        let tokens: BTreeSet<String> = table
                            .tuples
                            .iter()
                            .filter_map(|t| {
                                t.values[table.column_index(&spec.name).unwrap()]
                                    .as_str()
                                    .map(str::to_string)
                            })
                            .collect();
                        let vocab: BTreeMap<String, usize> = tokens
                            .into_iter()
                            .enumerate()
                            .map(|(i, t)| (t, i))
                            .collect();
                        let rows = vocab.len() + CAT_OVERFLOW_ROWS;
                        cat_cols.insert(
                            spec.name.clone(),
                            CategoricalColumnEncoder {
                                vocab,
                                table: Param::uniform(rows * dims.d_cat, dims.d_cat, &mut rng),
                                null: Param::uniform(dims.d_cat, dims.d_cat, &mut rng),
                            },
                        );
                    }
                    ColumnKind::Text => {
                        text_cols.insert(
                            spec.name.clone(),
                            TextColumnEncoder {
                                null: Param::uniform(dims.d_text, dims.d_text, &mut rng),
                            },
                        );
                    }
                    ColumnKind::PrimaryKey | ColumnKind::ForeignKey => unreachable!(),
                }
            }
            if !num_cols.is_empty() {
                numeric.insert(name.to_string(), num_cols);
            }
            if !cat_cols.is_empty() {
                categorical.insert(name.to_string(), cat_cols);
            }
            if !text_cols.is_empty() {
                text.insert(name.to_string(), text_cols);
            }
        }

        Ok(EncoderParams {
            dims,
            numeric,
            categorical,
            text,
            w_num: Param::uniform(dims.d_num * dims.d_out, dims.d_num, &mut rng),
            w_cat: Param::uniform(dims.d_cat * dims.d_out, dims.d_cat, &mut rng),
            w_text: Param::uniform(dims.d_text * dims.d_out, dims.d_text, &mut rng),
        })
    }

    pub fn modality_of(&self, table: &str, column: &str) -> Result<Modality> {
        if self.numeric.get(table).is_some_and(|c| c.contains_key(column)) {
            Ok(Modality::Numerical)
        } else if self
            .categorical
            .get(table)
            .is_some_and(|c| c.contains_key(column))
        {
            Ok(Modality::Categorical)
        } else if self.text.get(table).is_some_and(|c| c.contains_key(column)) {
            Ok(Modality::Text)
        } else {
            Err(Error::ColumnNotFound {
                table: table.to_string(),
                column: column.to_string(),
            })
        }
    }

    /// Encode one cell to its modality-space embedding, keeping the
    /// information backward() needs to route gradients.
    pub fn encode(&self, table: &str, column: &str, value: &Value) -> Result<EncodedCell> {
        let modality = self.modality_of(table, column)?;
        let (e, source) = match modality {
            Modality::Numerical => {
                let enc = &self.numeric[table][column];
                match value {
                    Value::Number(x) if x.is_finite() => {
                        let z = (x - enc.mean) / enc.stddev.max(STD_EPS);
                        let e: Vec<f64> = enc
                            .w
                            .data
                            .iter()
                            .zip(&enc.b.data)
                            .map(|(&w, &b)| w * z + b)
                            .collect();
                        (e, CellSource::NumValue { z })
                    }
                    Value::Number(x) => {
                        log::warn!("non-finite value {x} in {table}.{column}; treated as null");
                        (enc.null.data.clone(), CellSource::Null)
                    }
                    _ => (enc.null.data.clone(), CellSource::Null),
                }
            }
            Modality::Categorical => {
                let enc = &self.categorical[table][column];
                match value {
                    Value::Str(tok) => {
                        let row = enc.row_of(tok);
                        let d = self.dims.d_cat;
                        let e = enc.table.data[row * d..(row + 1) * d].to_vec();
                        (e, CellSource::CatRow { row })
                    }
                    Value::Number(x) => {
                        let tok = x.to_string();
                        let row = enc.row_of(&tok);
                        let d = self.dims.d_cat;
                        let e = enc.table.data[row * d..(row + 1) * d].to_vec();
                        (e, CellSource::CatRow { row })
                    }
                    Value::Null => (enc.null.data.clone(), CellSource::Null),
                }
            }
            Modality::Text => {
                let enc = &self.text[table][column];
                match value {
                    Value::Str(s) => (text_features(s, self.dims.d_text), CellSource::Frozen),
                    Value::Number(x) => {
                        (text_features(&x.to_string(), self.dims.d_text), CellSource::Frozen)
                    }
                    Value::Null => (enc.null.data.clone(), CellSource::Null),
                }
            }
        };
        Ok(EncodedCell {
            table: table.to_string(),
            column: column.to_string(),
            modality,
            e,
            source,
        })
    }

    fn projection(&self, modality: Modality) -> &Param {
        match modality {
            Modality::Numerical => &self.w_num,
            Modality::Categorical => &self.w_cat,
            Modality::Text => &self.w_text,
        }
    }

    /// Project a modality-space embedding into d_out space: x = e W.
    pub fn project(&self, modality: Modality, e: &[f64]) -> Result<Vec<f64>> {
        let d_in = self.dims.input_dim(modality);
        if e.len() != d_in {
            return Err(Error::DimensionMismatch {
                context: "projection input".into(),
                expected: d_in,
                got: e.len(),
            });
        }
        Ok(vecmat(e, &self.projection(modality).data, d_in, self.dims.d_out))
    }

    /// Encode + project one cell in one call.
    pub fn feature(&self, table: &str, column: &str, value: &Value) -> Result<Vec<f64>> {
        let cell = self.encode(table, column, value)?;
        self.project(cell.modality, &cell.e)
    }

    /// Accumulate gradients for one projected cell: given dL/dx (d_out),
    /// update the projection matrix and the column encoder the cell used.
    pub fn backward(&mut self, cell: &EncodedCell, d_x: &[f64]) {
        let d_in = self.dims.input_dim(cell.modality);
        debug_assert_eq!(d_x.len(), self.dims.d_out);
        let w = match cell.modality {
            Modality::Numerical => &mut self.w_num,
            Modality::Categorical => &mut self.w_cat,
            Modality::Text => &mut self.w_text,
        };
        outer_acc(&mut w.grad, &cell.e, d_x);
        let d_e = matvec(&w.data, d_x, d_in, self.dims.d_out);

        match (&cell.source, cell.modality) {
            (CellSource::NumValue { z }, Modality::Numerical) => {
                let enc = self
                    .numeric
                    .get_mut(&cell.table)
                    .and_then(|c| c.get_mut(&cell.column))
                    .expect("cell came from this encoder");
                axpy(&mut enc.w.grad, *z, &d_e);
                axpy(&mut enc.b.grad, 1.0, &d_e);
            }
            (CellSource::Null, Modality::Numerical) => {
                let enc = self.numeric.get_mut(&cell.table).unwrap().get_mut(&cell.column).unwrap();
                axpy(&mut enc.null.grad, 1.0, &d_e);
            }
            (CellSource::CatRow { row }, Modality::Categorical) => {
                let enc = self
                    .categorical
                    .get_mut(&cell.table)
                    .unwrap()
                    .get_mut(&cell.column)
                    .unwrap();
                let off = row * d_in;
                axpy(&mut enc.table.grad[off..off + d_in], 1.0, &d_e);
            }
            (CellSource::Null, Modality::Categorical) => {
                let enc = self
                    .categorical
                    .get_mut(&cell.table)
                    .unwrap()
                    .get_mut(&cell.column)
                    .unwrap();
                axpy(&mut enc.null.grad, 1.0, &d_e);
            }
            (CellSource::Frozen, Modality::Text) => {} // hashing carries no gradient
            (CellSource::Null, Modality::Text) => {
                let enc = self.text.get_mut(&cell.table).unwrap().get_mut(&cell.column).unwrap();
                axpy(&mut enc.null.grad, 1.0, &d_e);
            }
            (source, modality) => {
                unreachable!("inconsistent cell trace: {source:?} for {modality:?}")
            }
        }
    }

    /// Restore gradient buffers after deserialization.
    pub fn ensure_grads(&mut self) {
        self.visit_params(&mut Param::ensure_grad);
    }
}

/// What encode() saw, so backward() can route the gradient.
#[derive(Debug, Clone)]
pub struct EncodedCell {
    pub table: String,
    pub column: String,
    pub modality: Modality,
    /// Modality-space embedding (input of the projection).
    pub e: Vec<f64>,
    pub source: CellSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellSource {
    /// Numerical value; z is the standardized input.
    NumValue { z: f64 },
    /// Categorical token resolved to this embedding row.
    CatRow { row: usize },
    /// Frozen featurization (text hashing); no gradient.
    Frozen,
    /// The column's learned null vector.
    Null,
}

/// Frozen signed character-3-gram feature hashing, L2-normalized.
/// Empty input gives the zero vector; inputs shorter than 3 characters
/// hash as a single gram.
pub fn text_features(s: &str, d_text: usize) -> Vec<f64> {
    let chars: Vec<char> = s.chars().collect();
    let mut v = vec![0.0; d_text];
    if chars.is_empty() {
        return v;
    }
    let mut add_gram = |gram: &[char]| {
        let bytes: Vec<u8> = gram.iter().collect::<String>().into_bytes();
        let h = fnv1a64(&bytes);
        let bucket = (h % d_text as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[bucket] += sign;
    };
    if chars.len() < 3 {
        add_gram(&chars);
    } else {
        for window in chars.windows(3) {
            add_gram(window);
        }
    }
    let norm = crate::nn::l2_norm(&v);
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}
