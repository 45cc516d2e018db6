//! Per-device TVD prediction with regression forests.
//!
//! A forest maps the two-number encoding of a routed circuit to its expected
//! TVD (percent) on one device. The spread of the individual tree outputs is
//! used as a confidence signal by [`confidence_filter`].

mod training;
pub mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{encode_two_number, CircuitError};
use crate::mapgen::CircuitMap;
use crate::seed;
use tree::{Columns, Tree, TreeParams};

pub use training::{
    evaluate, gen_training_set, random_training_circuit, Evaluation, TrainingConfig, TrainingSet,
};

const FORMAT: &str = "anchor-tvd-forest";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("feature vector has length {got}, model expects {expected}")]
    FeatureLength { got: usize, expected: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("no predictions to filter")]
    NoPredictions,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_split: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `floor(sqrt(n_features))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub random_state: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 10,
            min_split: 2,
            min_leaf: 1,
            max_features: None,
            bootstrap: true,
            random_state: 42,
        }
    }
}

impl ForestParams {
    fn tree_params(&self, n_features: usize) -> TreeParams {
        let sqrt = ((n_features as f64).sqrt() as usize).max(1);
        TreeParams {
            max_depth: self.max_depth,
            min_split: self.min_split,
            min_leaf: self.min_leaf.max(1),
            max_features: self.max_features.unwrap_or(sqrt).clamp(1, n_features.max(1)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvdForest {
    pub device: String,
    pub params: ForestParams,
    pub max_len: usize,
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
    trees: Vec<Tree>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsemblePrediction {
    pub mean: f64,
    pub per_tree: Vec<f64>,
    /// Sample variance (n - 1) of `per_tree`; zero for a single tree.
    pub variance: f64,
}

impl EnsemblePrediction {
    fn from_outputs(per_tree: Vec<f64>) -> Self {
        let n = per_tree.len() as f64;
        let mean = per_tree.iter().sum::<f64>() / n;
        let variance = if per_tree.len() > 1 {
            per_tree.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            per_tree,
            variance,
        }
    }
}

/// Trains one forest. Rows are put in a canonical order first, so the result
/// depends only on the multiset of samples and `params.random_state`.
pub fn fit_forest(ts: &TrainingSet, params: &ForestParams) -> Result<TvdForest, PredictorError> {
    if ts.is_empty() {
        return Err(PredictorError::EmptyTrainingSet);
    }
    let d = ts.max_len * 2;
    let mut rows: Vec<usize> = (0..ts.len()).collect();
    rows.sort_by(|&a, &b| {
        ts.inputs[a]
            .iter()
            .zip(&ts.inputs[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(ts.labels[a].total_cmp(&ts.labels[b]))
    });
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|f| {
            rows.iter()
                .map(|&r| (ts.inputs[r][f] - ts.norm_mean[f]) / ts.norm_std[f])
                .collect()
        })
        .collect();
    let y: Vec<f64> = rows.iter().map(|&r| ts.labels[r]).collect();
    let data = Columns { cols: &cols, y: &y };
    let tp = params.tree_params(d);
    let n = y.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let tree_seed = seed::mix(params.random_state, i as u64);
            let sample: Vec<usize> = if params.bootstrap {
                use rand::Rng as _;
                let mut rng = seed::rng(seed::mix(tree_seed, 0));
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            Tree::fit(&data, sample, &tp, seed::mix(tree_seed, 1))
        })
        .collect();
    Ok(TvdForest {
        device: ts.device.clone(),
        params: *params,
        max_len: ts.max_len,
        norm_mean: ts.norm_mean.clone(),
        norm_std: ts.norm_std.clone(),
        trees,
    })
}

impl TvdForest {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Prediction for a raw (unnormalized) flat encoding.
    pub fn predict_flat(&self, raw: &[f64]) -> Result<EnsemblePrediction, PredictorError> {
        if raw.len() != self.norm_mean.len() {
            return Err(PredictorError::FeatureLength {
                got: raw.len(),
                expected: self.norm_mean.len(),
            });
        }
        let x: Vec<f64> = raw
            .iter()
            .zip(self.norm_mean.iter().zip(&self.norm_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        Ok(EnsemblePrediction::from_outputs(
            self.trees.iter().map(|t| t.predict(&x)).collect(),
        ))
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("forest serializes");
        v["format"] = FORMAT.into();
        v["version"] = FORMAT_VERSION.into();
        serde_json::to_string(&v).expect("value serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, PredictorError> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        if v["format"] != FORMAT {
            return Err(PredictorError::Format("not a TVD forest".into()));
        }
        if v["version"] != FORMAT_VERSION {
            return Err(PredictorError::Format(format!(
                "unsupported version {}",
                v["version"]
            )));
        }
        let f: TvdForest = serde_json::from_value(v)?;
        let d = 2 * f.max_len;
        if f.norm_mean.len() != d || f.norm_std.len() != d || f.trees.is_empty() {
            return Err(PredictorError::Format("inconsistent dimensions".into()));
        }
        Ok(f)
    }
}

/// Ensemble prediction for a routed map.
pub fn predict_ensemble(f: &TvdForest, map: &CircuitMap) -> Result<EnsemblePrediction, PredictorError> {
    let enc = encode_two_number(&map.routed, f.max_len)?;
    f.predict_flat(&enc.flat())
}

/// Indices of the `ceil(keep_fraction * n)` lowest-variance predictions, in
/// ascending index order. Ties go to the lower index.
pub fn confidence_filter(variances: &[f64], keep_fraction: f64) -> Result<Vec<usize>, PredictorError> {
    let n = variances.len();
    if n == 0 {
        return Err(PredictorError::NoPredictions);
    }
    let keep = ((keep_fraction * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| variances[a].total_cmp(&variances[b]).then(a.cmp(&b)));
    let mut kept = order[..keep].to_vec();
    kept.sort_unstable();
    Ok(kept)
}

pub const KEEP_FRACTION: f64 = 2.0 / 3.0;
