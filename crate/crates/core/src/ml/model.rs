use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::cart::{DecisionTree, TreeParams};
use super::dataset::{stratified_folds, stratified_holdout, Dataset};
use super::forest::{ForestParams, RandomForest};
use super::metrics::Metrics;
use super::mlp::{train_mlp, MlpModel, MlpParams};
use super::scaling::Standardizer;
use super::svm::{default_max_iter, gram, smo, SvmModel};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Cart,
    Rf,
    Svm,
    Mlp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Cart, Algorithm::Rf, Algorithm::Svm, Algorithm::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cart => "cart",
            Algorithm::Rf => "rf",
            Algorithm::Svm => "svm",
            Algorithm::Mlp => "mlp",
        }
    }

    fn tag(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidInput(format!("unknown algorithm '{s}' (cart, rf, svm, mlp)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartHyper {
    pub depth_grid: Vec<usize>,
    pub min_leaf: usize,
}

impl Default for CartHyper {
    fn default() -> Self {
        CartHyper {
            depth_grid: (3..=8).collect(),
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmHyper {
    pub c_grid: Vec<f64>,
    /// Kernel width candidates as multiples of `1/d`.
    pub gamma_factors: Vec<f64>,
    pub tolerance: f64,
    /// `None` uses `max(1e7, 100 n)`.
    pub max_iterations: Option<usize>,
}

impl Default for SvmHyper {
    fn default() -> Self {
        SvmHyper {
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            gamma_factors: vec![0.5, 1.0, 2.0],
            tolerance: 1e-3,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Hyperparameters {
    pub cart: CartHyper,
    pub rf: ForestParams,
    pub svm: SvmHyper,
    pub mlp: MlpParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelParameters {
    Cart(DecisionTree),
    Rf(RandomForest),
    Svm(SvmModel),
    Mlp(MlpModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub algorithm: Algorithm,
    /// Hyperparameters the model was trained with (chosen grid point).
    pub hyperparameters: Value,
    pub parameters: ModelParameters,
    pub feature_names: Vec<String>,
    pub training_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: u8,
    /// Secure-class score in [0, 1]; absent for the SVM.
    pub score: Option<f64>,
}

impl ClassifierModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn predict(&self, row: &[f64]) -> Result<Prediction> {
        if row.len() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        Ok(match &self.parameters {
            ModelParameters::Cart(t) => {
                let leaf = t.leaf(row);
                Prediction {
                    label: leaf.label(),
                    score: Some(leaf.secure_fraction()),
                }
            }
            ModelParameters::Rf(f) => Prediction {
                label: f.predict(row),
                score: Some(f.score(row)),
            },
            ModelParameters::Svm(s) => Prediction {
                label: s.predict(row),
                score: None,
            },
            ModelParameters::Mlp(m) => {
                let p = m.score(row);
                Prediction {
                    label: u8::from(p > 0.5),
                    score: Some(p),
                }
            }
        })
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Result<Vec<u8>> {
        rows.iter().map(|r| self.predict(r).map(|p| p.label)).collect()
    }

    /// `false` only for an SVM whose solver hit its iteration cap.
    pub fn converged(&self) -> bool {
        !matches!(&self.parameters, ModelParameters::Svm(s) if !s.converged)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn from_json(text: &str, location: &str) -> Result<Self> {
        let m: ClassifierModel = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("{location}:{}:{}", e.line(), e.column()), e))?;
        let tag = match m.parameters {
            ModelParameters::Cart(_) => Algorithm::Cart,
            ModelParameters::Rf(_) => Algorithm::Rf,
            ModelParameters::Svm(_) => Algorithm::Svm,
            ModelParameters::Mlp(_) => Algorithm::Mlp,
        };
        if tag != m.algorithm {
            return Err(Error::parse(
                location,
                format!("algorithm '{}' does not match {} parameters", m.algorithm, tag),
            ));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }
}

fn accuracy_of(pred: impl Fn(&[f64]) -> u8, rows: &[Vec<f64>], labels: &[u8]) -> f64 {
    let hits = rows.iter().zip(labels).filter(|(r, &l)| pred(r) == l).count();
    hits as f64 / rows.len().max(1) as f64
}

/// Index of the best score; ties keep the earliest candidate.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Trains one algorithm. Grid searches (CART depth, SVM `(C, gamma)`) pick
/// the best validation accuracy, ties to the earlier grid point.
pub fn train_classifier(
    algorithm: Algorithm,
    train: &Dataset,
    validation: &Dataset,
    hyper: &Hyperparameters,
    seed_value: u64,
) -> Result<ClassifierModel> {
    train.validate()?;
    validation.validate()?;
    train.require_both_classes()?;
    if validation.n_features() != train.n_features() && !validation.is_empty() {
        return Err(Error::Dimension {
            expected: train.n_features(),
            got: validation.n_features(),
        });
    }
    let x = &train.features;
    let y = &train.labels;
    let d = train.n_features();
    let alg_seed = seed::derive(seed_value, &[seed::stream::TRAINING, algorithm.tag()]);
    let grid_needs_validation = |len: usize| {
        if len > 1 && validation.is_empty() {
            Err(Error::InvalidInput(format!(
                "{algorithm}: a hyperparameter grid needs a validation set"
            )))
        } else {
            Ok(())
        }
    };

    let (parameters, chosen) = match algorithm {
        Algorithm::Cart => {
            let h = &hyper.cart;
            if h.depth_grid.is_empty() {
                return Err(Error::InvalidInput("cart: empty depth grid".into()));
            }
            grid_needs_validation(h.depth_grid.len())?;
            let deepest = *h.depth_grid.iter().max().unwrap();
            let full = DecisionTree::fit(
                x,
                y,
                &TreeParams {
                    max_depth: Some(deepest),
                    min_leaf: h.min_leaf,
                    max_features: None,
                },
            );
            let trees: Vec<DecisionTree> = h.depth_grid.iter().map(|&m| full.truncated(m)).collect();
            let pick = if trees.len() == 1 {
                0
            } else {
                let scores: Vec<f64> = trees
                    .iter()
                    .map(|t| accuracy_of(|r| t.predict(r), &validation.features, &validation.labels))
                    .collect();
                argmax(&scores)
            };
            let tree = trees[pick].clone();
            log::debug!(
                "cart: depth bound {} (realized depth {}, {} leaves)",
                h.depth_grid[pick],
                tree.depth(),
                tree.n_leaves()
            );
            let chosen = json!({
                "max_depth": h.depth_grid[pick],
                "min_leaf": h.min_leaf,
                "realized_depth": tree.depth(),
                "n_leaves": tree.n_leaves(),
            });
            (ModelParameters::Cart(tree), chosen)
        }
        Algorithm::Rf => {
            let f = RandomForest::fit(x, y, &hyper.rf, alg_seed);
            let tp = hyper.rf.tree_params(d);
            let chosen = json!({
                "n_trees": hyper.rf.n_trees,
                "max_features": tp.max_features,
                "min_leaf": hyper.rf.min_leaf,
                "max_depth": hyper.rf.max_depth,
            });
            (ModelParameters::Rf(f), chosen)
        }
        Algorithm::Svm => {
            let h = &hyper.svm;
            let grid: Vec<(usize, usize)> = (0..h.c_grid.len())
                .flat_map(|ci| (0..h.gamma_factors.len()).map(move |gi| (ci, gi)))
                .collect();
            if grid.is_empty() {
                return Err(Error::InvalidInput("svm: empty (C, gamma) grid".into()));
            }
            grid_needs_validation(grid.len())?;
            let st = Standardizer::fit(x);
            let z = st.apply_all(x);
            let max_iter = h.max_iterations.unwrap_or_else(|| default_max_iter(y.len()));
            let mut models: Vec<Option<SvmModel>> = vec![None; grid.len()];
            for (gi, &gf) in h.gamma_factors.iter().enumerate() {
                let gamma = gf / d.max(1) as f64;
                let k = gram(&z, gamma);
                let solved: Vec<(usize, SvmModel)> = h
                    .c_grid
                    .par_iter()
                    .enumerate()
                    .map(|(ci, &c)| {
                        let sol = smo(&k, y, c, h.tolerance, max_iter);
                        (ci, SvmModel::from_solution(st.clone(), &z, y, &sol, c, gamma))
                    })
                    .collect();
                for (ci, m) in solved {
                    let slot = grid.iter().position(|&p| p == (ci, gi)).unwrap();
                    models[slot] = Some(m);
                }
            }
            let models: Vec<SvmModel> = models.into_iter().map(Option::unwrap).collect();
            let pick = if models.len() == 1 {
                0
            } else {
                let scores: Vec<f64> = models
                    .par_iter()
                    .map(|m| accuracy_of(|r| m.predict(r), &validation.features, &validation.labels))
                    .collect();
                argmax(&scores)
            };
            let m = models[pick].clone();
            if !m.converged {
                log::warn!("svm: SMO stopped at the iteration cap ({} iterations)", m.iterations);
            }
            let chosen = json!({
                "c": m.c,
                "gamma": m.gamma,
                "tolerance": h.tolerance,
                "converged": m.converged,
                "n_support_vectors": m.support_vectors.len(),
            });
            (ModelParameters::Svm(m), chosen)
        }
        Algorithm::Mlp => {
            let m = train_mlp(x, y, &validation.features, &validation.labels, &hyper.mlp, alg_seed);
            let mut chosen = serde_json::to_value(&hyper.mlp).map_err(|e| Error::InvalidInput(e.to_string()))?;
            chosen["best_epoch"] = json!(m.best_epoch);
            (ModelParameters::Mlp(m), chosen)
        }
    };
    Ok(ClassifierModel {
        algorithm,
        hyperparameters: chosen,
        parameters,
        feature_names: train.feature_names.clone(),
        training_seed: seed_value,
    })
}

pub fn evaluate(model: &ClassifierModel, test: &Dataset) -> Result<Metrics> {
    let predicted = model.predict_all(&test.features)?;
    Metrics::from_predictions(&test.labels, &predicted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub algorithm: Algorithm,
    pub folds: Vec<Metrics>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

/// Stratified k-fold cross-validation. Each fold's model is trained on the
/// other folds, with 10% of those rows (stratified) held out for model
/// selection.
pub fn cross_validate(
    algorithm: Algorithm,
    ds: &Dataset,
    folds: usize,
    hyper: &Hyperparameters,
    seed_value: u64,
) -> Result<CvReport> {
    ds.validate()?;
    let parts = stratified_folds(&ds.labels, folds, seed_value)?;
    let metrics: Result<Vec<Metrics>> = (0..folds)
        .into_par_iter()
        .map(|k| {
            let rest: Vec<usize> = (0..folds).filter(|&j| j != k).flat_map(|j| parts[j].iter().copied()).collect();
            let pool = ds.subset(&rest);
            let fold_seed = seed::derive(seed_value, &[seed::stream::FOLDS, k as u64]);
            let (train, validation) = carve_validation(&pool, fold_seed)?;
            let model = train_classifier(algorithm, &train, &validation, hyper, fold_seed)?;
            evaluate(&model, &ds.subset(&parts[k]))
        })
        .collect();
    let metrics = metrics?;
    let acc: Vec<f64> = metrics.iter().map(|m| m.accuracy).collect();
    let mean = acc.iter().sum::<f64>() / acc.len() as f64;
    let std = (acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (acc.len() - 1) as f64).sqrt();
    Ok(CvReport {
        algorithm,
        folds: metrics,
        mean_accuracy: mean,
        std_accuracy: std,
    })
}

/// Splits a training pool into (train, validation) with 10% validation.
pub fn carve_validation(pool: &Dataset, seed_value: u64) -> Result<(Dataset, Dataset)> {
    let (keep, held) = stratified_holdout(&pool.labels, 0.10, seed_value)?;
    Ok((pool.subset(&keep), pool.subset(&held)))
}
