//! Affine motion models of the controller: feature construction, ridge
//! least-squares fitting, prediction and error statistics.
//!
//! Three regressors share one feature layout:
//! * FDM predicts the swing-foot displacement (base frame),
//! * CDM predicts the CoM displacement (base frame),
//! * CVM predicts the CoM velocity at the next full stance.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FootId, RobotState, Vec2};
use crate::sim::{TransitionLog, TransitionRecord};

pub const FULL_DIM: usize = 17;
pub const MAX_DIM: usize = 2 * FULL_DIM;

/// Fraction of valid samples used for fitting; the rest is held out.
pub const TRAIN_FRACTION: f64 = 0.8;
pub const DEFAULT_RIDGE: f64 = 1e-8;
/// Minimum valid samples per feature dimension.
pub const SAMPLES_PER_DIM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureVariant {
    /// `(v_com, v_com_prev, v_ref, v_ref_prev, feet LF..RH, swing flag)`
    Full,
    /// Full without `v_com_prev` and `v_ref_prev`.
    NoHistory,
    /// Full without the feet.
    NoFeet,
    /// Full followed by the elementwise squares of Full.
    Quadratic,
}

impl FeatureVariant {
    pub const ALL: [FeatureVariant; 4] = [
        FeatureVariant::Full,
        FeatureVariant::NoHistory,
        FeatureVariant::NoFeet,
        FeatureVariant::Quadratic,
    ];

    pub fn dim(self) -> usize {
        match self {
            FeatureVariant::Full => FULL_DIM,
            FeatureVariant::NoHistory => FULL_DIM - 4,
            FeatureVariant::NoFeet => FULL_DIM - 8,
            FeatureVariant::Quadratic => 2 * FULL_DIM,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureVariant::Full => "Full",
            FeatureVariant::NoHistory => "NoHistory",
            FeatureVariant::NoFeet => "NoFeet",
            FeatureVariant::Quadratic => "Quadratic",
        }
    }
}

impl fmt::Display for FeatureVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FeatureVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::parse(format!("unknown feature variant `{s}`")))
    }
}

/// Stack-allocated feature vector.
#[derive(Clone, Copy)]
pub struct Features {
    buf: [f64; MAX_DIM],
    len: usize,
}

impl Features {
    fn push(&mut self, v: f64) {
        self.buf[self.len] = v;
        self.len += 1;
    }

    fn push2(&mut self, v: Vec2) {
        self.push(v.x);
        self.push(v.y);
    }
}

impl Deref for Features {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.buf[..self.len]
    }
}

impl fmt::Debug for Features {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

/// Feature vector of a decision state (one whose `v_ref` is the command
/// being applied).
pub fn build_features(state: &RobotState, variant: FeatureVariant) -> Features {
    let mut x = Features {
        buf: [0.0; MAX_DIM],
        len: 0,
    };
    let history = variant != FeatureVariant::NoHistory;
    let feet = variant != FeatureVariant::NoFeet;
    x.push2(state.v_com);
    if history {
        x.push2(state.v_com_prev);
    }
    x.push2(state.v_ref);
    if history {
        x.push2(state.v_ref_prev);
    }
    if feet {
        for f in FootId::ALL {
            x.push2(state.p_foot_rel[f]);
        }
    }
    x.push(state.swing_pair_next.flag());
    if variant == FeatureVariant::Quadratic {
        for i in 0..FULL_DIM {
            let v = x.buf[i];
            x.push(v * v);
        }
    }
    debug_assert_eq!(x.len, variant.dim());
    x
}

/// `y = W·x + b` with a two-dimensional output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineModel {
    pub variant: FeatureVariant,
    /// Two rows of `variant.dim()` entries.
    pub weights: Vec<Vec<f64>>,
    pub bias: [f64; 2],
}

impl AffineModel {
    pub fn zeros(variant: FeatureVariant) -> Self {
        Self {
            variant,
            weights: vec![vec![0.0; variant.dim()]; 2],
            bias: [0.0; 2],
        }
    }

    pub fn feat_dim(&self) -> usize {
        self.variant.dim()
    }

    fn check(&self) -> Result<()> {
        let d = self.feat_dim();
        if self.weights.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: self.weights.len(),
            });
        }
        for row in &self.weights {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
        }
        let finite = self.weights.iter().flatten().all(|w| w.is_finite())
            && self.bias.iter().all(|b| b.is_finite());
        if finite {
            Ok(())
        } else {
            Err(Error::NonFinite("model coefficients"))
        }
    }
}

pub fn predict(model: &AffineModel, features: &[f64]) -> Result<Vec2> {
    if features.len() != model.feat_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.feat_dim(),
            got: features.len(),
        });
    }
    let dot = |row: &[f64]| row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>();
    Ok(Vec2::new(
        dot(&model.weights[0]) + model.bias[0],
        dot(&model.weights[1]) + model.bias[1],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorStats {
    pub rmse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelErrors {
    pub fdm: ErrorStats,
    pub cdm: ErrorStats,
    pub cvm: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub n_samples: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub split_seed: u64,
    pub lambda: f64,
    pub train: ModelErrors,
    pub test: ModelErrors,
}

/// The three regressors, fitted on one feature layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    pub variant: FeatureVariant,
    pub fdm: AffineModel,
    pub cdm: AffineModel,
    pub cvm: AffineModel,
    pub meta: TrainingMeta,
}

/// Predicted (foot displacement, CoM displacement, next CoM velocity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub delta_foot_b: Vec2,
    pub delta_com_b: Vec2,
    pub v_com_next: Vec2,
}

impl ModelSet {
    /// Runs all three models on a decision state.
    pub fn predict_state(&self, decision: &RobotState) -> Prediction {
        let x = build_features(decision, self.variant);
        // dimensions agree by construction
        Prediction {
            delta_foot_b: predict(&self.fdm, &x).expect("feature layout"),
            delta_com_b: predict(&self.cdm, &x).expect("feature layout"),
            v_com_next: predict(&self.cvm, &x).expect("feature layout"),
        }
    }
}

/// Deterministic 80/20 permutation split of `n` samples.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_train = (n as f64 * TRAIN_FRACTION).round() as usize;
    let test = idx.split_off(n_train);
    (idx, test)
}

fn targets(r: &TransitionRecord) -> [Vec2; 3] {
    [
        r.transition.delta_foot_b,
        r.transition.delta_com_b,
        r.transition.v_com_next,
    ]
}

/// Ridge least squares on the three targets.
///
/// The bias is left unpenalized: features and targets are centered, the
/// normal equations `(XᵀX + λI)·W = XᵀY` are solved by Cholesky, and the
/// bias is recovered from the means.
pub fn fit(
    dataset: &TransitionLog,
    variant: FeatureVariant,
    ridge_lambda: f64,
    split_seed: u64,
) -> Result<ModelSet> {
    if !(ridge_lambda >= 0.0 && ridge_lambda.is_finite()) {
        return Err(Error::InvalidParams("ridge lambda must be >= 0".into()));
    }
    let valid: Vec<&TransitionRecord> = dataset.valid_records().collect();
    let d = variant.dim();
    let need = SAMPLES_PER_DIM * d;
    if valid.len() < need {
        return Err(Error::InsufficientData {
            have: valid.len(),
            need,
        });
    }
    let (train_idx, test_idx) = split_indices(valid.len(), split_seed);
    let train: Vec<&TransitionRecord> = train_idx.iter().map(|&i| valid[i]).collect();
    let test: Vec<&TransitionRecord> = test_idx.iter().map(|&i| valid[i]).collect();

    let models = solve_ridge(&train, variant, ridge_lambda)?;
    let mut set = ModelSet {
        variant,
        fdm: models[0].clone(),
        cdm: models[1].clone(),
        cvm: models[2].clone(),
        meta: TrainingMeta::default(),
    };
    set.meta = TrainingMeta {
        n_samples: valid.len(),
        n_train: train.len(),
        n_test: test.len(),
        split_seed,
        lambda: ridge_lambda,
        train: evaluate_records(&set, train.iter().copied())?,
        test: evaluate_records(&set, test.iter().copied())?,
    };
    Ok(set)
}

fn solve_ridge(
    train: &[&TransitionRecord],
    variant: FeatureVariant,
    lambda: f64,
) -> Result<[AffineModel; 3]> {
    let d = variant.dim();
    let n = train.len() as f64;
    let rows: Vec<Features> = train
        .iter()
        .map(|r| build_features(&r.state, variant))
        .collect();
    let ys: Vec<[f64; 6]> = train
        .iter()
        .map(|r| {
            let t = targets(r);
            [t[0].x, t[0].y, t[1].x, t[1].y, t[2].x, t[2].y]
        })
        .collect();

    let mut x_mean = vec![0.0; d];
    let mut y_mean = [0.0; 6];
    for (x, y) in rows.iter().zip(&ys) {
        for j in 0..d {
            x_mean[j] += x[j];
        }
        for k in 0..6 {
            y_mean[k] += y[k];
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= n);
    y_mean.iter_mut().for_each(|m| *m /= n);

    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DMatrix::<f64>::zeros(d, 6);
    let mut xc = vec![0.0; d];
    for (x, y) in rows.iter().zip(&ys) {
        for j in 0..d {
            xc[j] = x[j] - x_mean[j];
        }
        for a in 0..d {
            for b in a..d {
                gram[(a, b)] += xc[a] * xc[b];
            }
            for k in 0..6 {
                rhs[(a, k)] += xc[a] * (y[k] - y_mean[k]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }

    if lambda == 0.0 {
        let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
        let max = eig.iter().cloned().fold(0.0f64, f64::max);
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if max <= 0.0 || min <= max * 1e-12 {
            return Err(Error::RankDeficient);
        }
    }
    for a in 0..d {
        gram[(a, a)] += lambda;
    }
    let chol = gram.cholesky().ok_or(Error::RankDeficient)?;
    let w = chol.solve(&rhs);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient);
    }

    let make = |k0: usize| {
        let mut m = AffineModel::zeros(variant);
        for out in 0..2 {
            let k = k0 + out;
            let mut b = y_mean[k];
            for j in 0..d {
                m.weights[out][j] = w[(j, k)];
                b -= w[(j, k)] * x_mean[j];
            }
            m.bias[out] = b;
        }
        m
    };
    Ok([make(0), make(2), make(4)])
}

#[derive(Default)]
struct Accum {
    sq: f64,
    abs: f64,
}

impl Accum {
    fn add(&mut self, e: Vec2) {
        self.sq += e.dot(e);
        self.abs += e.x.abs() + e.y.abs();
    }

    fn stats(&self, n: usize) -> ErrorStats {
        let n = n as f64;
        ErrorStats {
            rmse: (self.sq / (2.0 * n)).sqrt(),
            mae: self.abs / (2.0 * n),
        }
    }
}

/// RMSE (per output dimension) and componentwise MAE of each model.
pub fn evaluate(model_set: &ModelSet, dataset: &TransitionLog) -> Result<ModelErrors> {
    evaluate_records(model_set, dataset.valid_records())
}

pub fn evaluate_records<'a>(
    model_set: &ModelSet,
    records: impl IntoIterator<Item = &'a TransitionRecord>,
) -> Result<ModelErrors> {
    let mut acc = [Accum::default(), Accum::default(), Accum::default()];
    let mut n = 0usize;
    for r in records {
        let p = model_set.predict_state(&r.state);
        let t = targets(r);
        acc[0].add(p.delta_foot_b - t[0]);
        acc[1].add(p.delta_com_b - t[1]);
        acc[2].add(p.v_com_next - t[2]);
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(ModelErrors {
        fdm: acc[0].stats(n),
        cdm: acc[1].stats(n),
        cvm: acc[2].stats(n),
    })
}

/// Held-out RMSE of every (variant, model) pair on one shared split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub split_seed: u64,
    pub lambda: f64,
    pub rows: Vec<AblationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: FeatureVariant,
    pub test: ModelErrors,
}

impl AblationReport {
    pub fn get(&self, variant: FeatureVariant) -> Option<&ModelErrors> {
        self.rows
            .iter()
            .find(|r| r.variant == variant)
            .map(|r| &r.test)
    }
}

pub fn ablation_suite(
    dataset: &TransitionLog,
    ridge_lambda: f64,
    split_seed: u64,
) -> Result<AblationReport> {
    let rows = FeatureVariant::ALL
        .iter()
        .map(|&variant| {
            let set = fit(dataset, variant, ridge_lambda, split_seed)?;
            Ok(AblationRow {
                variant,
                test: set.meta.test,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport {
        split_seed,
        lambda: ridge_lambda,
        rows,
    })
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    variant: FeatureVariant,
    lambda: f64,
    models: ModelFileModels,
    training_meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
struct ModelFileModels {
    fdm: ModelCoefficients,
    cdm: ModelCoefficients,
    cvm: ModelCoefficients,
}

#[derive(Serialize, Deserialize)]
struct ModelCoefficients {
    weights: Vec<Vec<f64>>,
    bias: [f64; 2],
}

impl ModelSet {
    pub fn to_json(&self) -> String {
        let coeffs = |m: &AffineModel| ModelCoefficients {
            weights: m.weights.clone(),
            bias: m.bias,
        };
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            variant: self.variant,
            lambda: self.meta.lambda,
            models: ModelFileModels {
                fdm: coeffs(&self.fdm),
                cdm: coeffs(&self.cdm),
                cvm: coeffs(&self.cvm),
            },
            training_meta: self.meta.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<ModelSet> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::parse(format!("model file: {e}")))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::parse(format!(
                "unsupported model format_version {}",
                file.format_version
            )));
        }
        let variant = file.variant;
        let build = |c: ModelCoefficients| -> Result<AffineModel> {
            let m = AffineModel {
                variant,
                weights: c.weights,
                bias: c.bias,
            };
            m.check()?;
            Ok(m)
        };
        Ok(ModelSet {
            variant,
            fdm: build(file.models.fdm)?,
            cdm: build(file.models.cdm)?,
            cvm: build(file.models.cvm)?,
            meta: file.training_meta,
        })
    }
}
