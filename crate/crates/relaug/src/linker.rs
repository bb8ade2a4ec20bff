//! Task-relevant tuple identification and coreset construction.
//!
//! Each auxiliary tuple inherits the labels of the base tuples its meta-path
//! join instances reach. A tuple reaching many base tuples keeps a capped
//! uniform sample of labels; a tuple reaching none (dangling FK, unreferenced
//! key, or null target) is omitted. The coreset then restricts supervision
//! to a label-stratified sample of base tuples.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample as index_sample;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, RelationalDataset, TaskKind, Value};
use crate::error::{Error, Result};
use crate::joinplan::{JoinEdge, MetaPath};
use crate::rng::seeded_rng;

/// An auxiliary tuple paired with one base tuple's label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTuple {
    pub table: String,
    /// Auxiliary tuple's primary key.
    pub key: String,
    /// Base tuple that the join instance reached.
    pub base_key: String,
    pub label: Label,
}

/// Requested coreset size: absolute count or fraction of labeled base rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleSize {
    Count(usize),
    Fraction(f64),
}

impl SampleSize {
    fn resolve(self, available: usize) -> Result<usize> {
        match self {
            SampleSize::Count(0) => Err(Error::Config("base_sample_size must be >= 1".into())),
            SampleSize::Count(n) => Ok(n),
            SampleSize::Fraction(f) if f > 0.0 && f <= 1.0 => {
                Ok(((f * available as f64).round() as usize).max(1))
            }
            SampleSize::Fraction(f) => Err(Error::Config(format!(
                "base_sample_size fraction must be in (0, 1], got {f}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoresetConfig {
    #[serde(default = "default_sample_size")]
    pub base_sample_size: SampleSize,
    #[serde(default = "default_label_cap")]
    pub per_tuple_label_cap: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_sample_size() -> SampleSize {
    SampleSize::Count(2000)
}

fn default_label_cap() -> usize {
    5
}

impl Default for CoresetConfig {
    fn default() -> Self {
        CoresetConfig {
            base_sample_size: default_sample_size(),
            per_tuple_label_cap: default_label_cap(),
            seed: 0,
        }
    }
}

impl CoresetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_tuple_label_cap < 1 {
            return Err(Error::Config("per_tuple_label_cap must be >= 1".into()));
        }
        match self.base_sample_size {
            SampleSize::Count(0) => Err(Error::Config("base_sample_size must be >= 1".into())),
            SampleSize::Fraction(f) if !(f > 0.0 && f <= 1.0) => Err(Error::Config(format!(
                "base_sample_size fraction must be in (0, 1], got {f}"
            ))),
            _ => Ok(()),
        }
    }
}

/// One backward step along a forward-oriented hop: given rows of
/// `hop.dst_table`, return the rows of `hop.src_table` joined to them.
fn step_back(
    ds: &RelationalDataset,
    hop: &JoinEdge,
    dst_rows: &BTreeSet<usize>,
) -> Result<BTreeSet<usize>> {
    let src = ds.table(&hop.src_table)?;
    let dst = ds.table(&hop.dst_table)?;
    let mut out = BTreeSet::new();
    if hop.fk_on_src {
        // src.fk == dst.pk: look up src rows by each dst key.
        let (fk_idx, _) = src.column(&hop.fk_column)?;
        for &r in dst_rows {
            for &s in src.rows_by_fk(fk_idx, &dst.tuples[r].key) {
                out.insert(s);
            }
        }
    } else {
        // src.pk == dst.fk: follow each dst row's FK value.
        let (fk_idx, _) = dst.column(&hop.fk_column)?;
        for &r in dst_rows {
            if let Value::Str(v) = &dst.tuples[r].values[fk_idx] {
                if let Some(s) = src.row_by_pk(v) {
                    out.insert(s);
                }
            }
        }
    }
    Ok(out)
}

/// Link every auxiliary tuple of the meta-path's target table to the base
/// tuples its join instances reach, attaching their labels.
///
/// Distinct (aux tuple, base tuple) pairs each produce one LabeledTuple.
/// When a tuple reaches more labeled base rows than `per_tuple_label_cap`,
/// a uniform sample of that size is kept, reproducible under the seed.
pub fn link_tuples(
    ds: &RelationalDataset,
    meta_path: &MetaPath,
    config: &CoresetConfig,
) -> Result<Vec<LabeledTuple>> {
    config.validate()?;
    let aux = ds.table(&meta_path.target_table)?;
    let base = ds.base_table();
    let mut rng = seeded_rng(config.seed, &format!("link/{}", meta_path.target_table));

    let mut out = Vec::new();
    for (aux_row, tuple) in aux.tuples.iter().enumerate() {
        let mut rows: BTreeSet<usize> = BTreeSet::new();
        rows.insert(aux_row);
        for hop in meta_path.hops.iter().rev() {
            rows = step_back(ds, hop, &rows)?;
            if rows.is_empty() {
                break;
            }
        }
        let mut labeled: Vec<(usize, Label)> = rows
            .iter()
            .filter_map(|&r| ds.base_label(r).map(|l| (r, l)))
            .collect();
        if labeled.len() > config.per_tuple_label_cap {
            let picks = index_sample(&mut rng, labeled.len(), config.per_tuple_label_cap);
            let mut kept: Vec<(usize, Label)> = picks.iter().map(|i| labeled[i]).collect();
            kept.sort_by_key(|(r, _)| *r);
            labeled = kept;
        }
        for (r, label) in labeled {
            out.push(LabeledTuple {
                table: meta_path.target_table.clone(),
                key: tuple.key.clone(),
                base_key: base.tuples[r].key.clone(),
                label,
            });
        }
    }
    Ok(out)
}

/// Link every auxiliary table with a meta-path, merged in table-name order.
pub fn link_all(
    ds: &RelationalDataset,
    meta_paths: &BTreeMap<String, MetaPath>,
    config: &CoresetConfig,
) -> Result<BTreeMap<String, Vec<LabeledTuple>>> {
    let mut out = BTreeMap::new();
    for (table, mp) in meta_paths {
        out.insert(table.clone(), link_tuples(ds, mp, config)?);
    }
    Ok(out)
}

/// Label-stratified subset of base tuples plus the labeled tuples it keeps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coreset {
    /// Sampled base keys, in base-table row order.
    pub base_keys: Vec<String>,
    /// Per auxiliary table: links whose base_key was sampled.
    pub links: BTreeMap<String, Vec<LabeledTuple>>,
}

impl Coreset {
    pub fn link_counts(&self) -> BTreeMap<String, usize> {
        self.links
            .iter()
            .map(|(t, v)| (t.clone(), v.len()))
            .collect()
    }
}

/// Largest-remainder quotas proportional to stratum sizes, with at least one
/// row kept from every non-empty stratum.
fn proportional_quotas(sizes: &[usize], total_sample: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return vec![0; sizes.len()];
    }
    let mut quotas: Vec<usize> = Vec::with_capacity(sizes.len());
    let mut remainders: Vec<(f64, usize)> = Vec::new();
    for (i, &s) in sizes.iter().enumerate() {
        let share = s as f64 * total_sample as f64 / n as f64;
        quotas.push(share.floor() as usize);
        remainders.push((share - share.floor(), i));
    }
    let assigned: usize = quotas.iter().sum();
    let mut leftover = total_sample.saturating_sub(assigned);
    // ties broken toward the smaller stratum index
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, i) in &remainders {
        if leftover == 0 {
            break;
        }
        if sizes[i] > 0 {
            quotas[i] += 1;
            leftover -= 1;
        }
    }
    for (q, &s) in quotas.iter_mut().zip(sizes) {
        if s > 0 {
            *q = (*q).max(1).min(s);
        } else {
            *q = 0;
        }
    }
    quotas
}

/// Sample base tuples stratified by label and keep only the links whose base
/// tuple was sampled.
///
/// Classification strata are the classes (proportional quotas, every
/// non-empty class keeps at least one row). Regression strata are ten
/// equal-count quantile bins of the target. Requesting more rows than exist
/// clamps with a warning.
pub fn build_coreset(
    ds: &RelationalDataset,
    links: &BTreeMap<String, Vec<LabeledTuple>>,
    config: &CoresetConfig,
) -> Result<Coreset> {
    config.validate()?;
    let base = ds.base_table();
    let labeled: Vec<(usize, Label)> = (0..base.tuples.len())
        .filter_map(|r| ds.base_label(r).map(|l| (r, l)))
        .collect();

    let mut requested = config.base_sample_size.resolve(labeled.len())?;
    if requested > labeled.len() {
        log::warn!(
            "coreset sample size {requested} exceeds {} labeled base tuples; clamping",
            labeled.len()
        );
        requested = labeled.len();
    }

    let mut rng = seeded_rng(config.seed, "coreset");
    let sampled_rows: BTreeSet<usize> = if requested == labeled.len() {
        labeled.iter().map(|(r, _)| *r).collect()
    } else {
        let strata = assign_strata(ds.task.task, &labeled);
        let n_strata = strata.iter().copied().max().map_or(0, |m| m + 1);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_strata];
        for ((row, _), &s) in labeled.iter().zip(&strata) {
            members[s].push(*row);
        }
        let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
        let quotas = proportional_quotas(&sizes, requested);
        let mut rows = BTreeSet::new();
        for (stratum, quota) in members.iter().zip(quotas) {
            if quota == stratum.len() {
                rows.extend(stratum.iter().copied());
            } else {
                for i in index_sample(&mut rng, stratum.len(), quota) {
                    rows.insert(stratum[i]);
                }
            }
        }
        rows
    };

    let base_keys: Vec<String> = sampled_rows
        .iter()
        .map(|&r| base.tuples[r].key.clone())
        .collect();
    let key_set: BTreeSet<&str> = base_keys.iter().map(String::as_str).collect();
    let kept = links
        .iter()
        .map(|(t, v)| {
            let filtered: Vec<LabeledTuple> = v
                .iter()
                .filter(|lt| key_set.contains(lt.base_key.as_str()))
                .cloned()
                .collect();
            (t.clone(), filtered)
        })
        .collect();

    Ok(Coreset {
        base_keys,
        links: kept,
    })
}

/// Stratum index per labeled row: class index for classification, rank
/// decile of the target for regression.
pub(crate) fn assign_strata(task: TaskKind, labeled: &[(usize, Label)]) -> Vec<usize> {
    match task {
        TaskKind::Classification => labeled
            .iter()
            .map(|(_, l)| l.class().unwrap_or(0))
            .collect(),
        TaskKind::Regression => {
            let mut order: Vec<usize> = (0..labeled.len()).collect();
            order.sort_by(|&a, &b| {
                let va = labeled[a].1.value().unwrap_or(0.0);
                let vb = labeled[b].1.value().unwrap_or(0.0);
                va.total_cmp(&vb).then(labeled[a].0.cmp(&labeled[b].0))
            });
            let n = labeled.len();
            let mut strata = vec![0usize; n];
            for (rank, &i) in order.iter().enumerate() {
                strata[i] = (rank * 10 / n).min(9);
            }
            strata
        }
    }
}
