//! One-vs-rest linear SVM subject classifiers.
//!
//! Training is deterministic full-batch subgradient descent on the primal
//! L2-regularized hinge objective with a Pegasos-style step schedule and
//! zero initialization, so identical inputs always give bit-identical
//! weights. The bias is carried as an unregularized-looking constant
//! feature appended after z-score standardization (and is therefore
//! regularized like the weights, which keeps the update rule uniform).

use std::collections::BTreeMap;

use crate::aesi::PartSet;
use crate::error::{Error, Result};
use crate::features::FusedFeature;

/// SVM training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Hinge-loss weight.
    pub c: f64,
    pub max_iterations: usize,
    /// Stop once the largest weight update falls below this.
    pub convergence_tol: f64,
    /// Carried for config plumbing; training itself draws no randomness.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            max_iterations: 1000,
            convergence_tol: 1e-6,
            seed: 0,
        }
    }
}

/// Per-dimension z-score parameters fit on the gallery.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at 1e-9.
    pub std: Vec<f64>,
}

const STD_FLOOR: f64 = 1e-9;

/// Fit per-dimension mean and population standard deviation.
pub fn fit_standardization(features: &[FusedFeature]) -> Result<StandardizationStats> {
    let first = features
        .first()
        .ok_or_else(|| Error::Parameter("standardization needs at least one feature".into()))?;
    let dim = first.values.len();
    if features.iter().any(|f| f.values.len() != dim) {
        return Err(Error::Parameter(
            "standardization features must share a dimension".into(),
        ));
    }
    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for f in features {
        for (m, v) in mean.iter_mut().zip(&f.values) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut std = vec![0.0; dim];
    for f in features {
        for ((s, v), m) in std.iter_mut().zip(&f.values).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt().max(STD_FLOOR);
    }
    Ok(StandardizationStats { mean, std })
}

impl StandardizationStats {
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Trained one-vs-rest model for one part combination.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub combination: PartSet,
    /// Subject labels in ascending order; ranking ties resolve in this
    /// order.
    pub classes: Vec<String>,
    /// One weight vector per class.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub stats: StandardizationStats,
    pub feature_dim: usize,
}

fn train_binary(
    samples: &[Vec<f64>],
    targets: &[f64],
    config: &TrainConfig,
) -> (Vec<f64>, f64) {
    let n = samples.len();
    let dim = samples[0].len();
    let lambda = 1.0 / (config.c * n as f64);
    // Last slot is the constant-feature bias.
    let mut w = vec![0.0f64; dim + 1];
    for t in 0..config.max_iterations {
        let mut grad = vec![0.0f64; dim + 1];
        let mut violations = 0usize;
        for (x, &y) in samples.iter().zip(targets) {
            let mut score = w[dim];
            for (wi, xi) in w[..dim].iter().zip(x) {
                score += wi * xi;
            }
            if y * score < 1.0 {
                violations += 1;
                for (g, xi) in grad[..dim].iter_mut().zip(x) {
                    *g -= y * xi;
                }
                grad[dim] -= y;
            }
        }
        let inv_n = 1.0 / n as f64;
        let eta = 1.0 / (lambda * (t + 1) as f64);
        let mut max_step = 0.0f64;
        for (wi, g) in w.iter_mut().zip(&grad) {
            let step = eta * (lambda * *wi + g * inv_n);
            *wi -= step;
            max_step = max_step.max(step.abs());
        }
        // A violation-free pass leaves only regularization shrinkage, which
        // cannot change the decision ordering; stop there.
        if violations == 0 || max_step < config.convergence_tol {
            break;
        }
    }
    let bias = w[dim];
    w.truncate(dim);
    (w, bias)
}

/// Train one binary classifier per distinct label (one-vs-rest).
pub fn train_ovr_svm(
    features: &[FusedFeature],
    labels: &[String],
    config: &TrainConfig,
) -> Result<SvmModel> {
    if features.len() != labels.len() {
        return Err(Error::Parameter(format!(
            "{} features but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let stats = fit_standardization(features)?;
    let combination = features[0].combination;
    if features.iter().any(|f| f.combination != combination) {
        return Err(Error::Parameter(
            "features for one model must share a part combination".into(),
        ));
    }
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InsufficientClasses(format!(
            "one-vs-rest needs at least 2 distinct labels, got {}",
            classes.len()
        )));
    }
    let samples: Vec<Vec<f64>> = features.iter().map(|f| stats.apply(&f.values)).collect();
    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    for class in &classes {
        let targets: Vec<f64> = labels
            .iter()
            .map(|l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let (w, b) = train_binary(&samples, &targets, config);
        weights.push(w);
        biases.push(b);
    }
    Ok(SvmModel {
        combination,
        classes,
        weights,
        biases,
        stats,
        feature_dim: features[0].values.len(),
    })
}

/// Per-class decision scores `w . standardize(x) + b`, ordered like
/// `model.classes`.
pub fn decision_scores(model: &SvmModel, feature: &FusedFeature) -> Result<Vec<f64>> {
    if feature.values.len() != model.feature_dim {
        return Err(Error::DimensionMismatch(format!(
            "feature dimension {} does not match model dimension {}",
            feature.values.len(),
            model.feature_dim
        )));
    }
    if feature.combination != model.combination {
        return Err(Error::Parameter(format!(
            "feature combination {} does not match model combination {}",
            feature.combination, model.combination
        )));
    }
    let x = model.stats.apply(&feature.values);
    Ok(model
        .weights
        .iter()
        .zip(&model.biases)
        .map(|(w, b)| w.iter().zip(&x).map(|(wi, xi)| wi * xi).sum::<f64>() + b)
        .collect())
}

/// Classes ordered by descending score; ties keep class order. The first
/// entry is the predicted identity.
pub fn rank_list(classes: &[String], scores: &[f64]) -> Vec<String> {
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.into_iter().map(|i| classes[i].clone()).collect()
}

/// All 15 per-combination models plus the configuration fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBank {
    config_hash: String,
    models: BTreeMap<u8, SvmModel>,
}

impl ModelBank {
    pub fn new(config_hash: &str) -> Self {
        ModelBank {
            config_hash: config_hash.to_string(),
            models: BTreeMap::new(),
        }
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn insert(&mut self, model: SvmModel) -> Result<()> {
        let bits = model.combination.bits();
        if self.models.insert(bits, model).is_some() {
            return Err(Error::DuplicateId(format!(
                "model bank already holds combination {bits}"
            )));
        }
        Ok(())
    }

    pub fn get(&self, set: PartSet) -> Option<&SvmModel> {
        self.models.get(&set.bits())
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SvmModel> {
        self.models.values()
    }
}

// ---------------------------------------------------------------------------
// Model bank text format
// ---------------------------------------------------------------------------

const MODELBANK_MAGIC: &str = "GAITLAB-MODELS v1";
const RESERVED_WORDS: [&str; 6] = ["MODEL", "CLASSES", "DIM", "MEAN", "STD", "CONFIG"];

fn validate_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains(',') || label.contains('\n') {
        return Err(Error::Format(format!(
            "label `{label}` may not be empty or contain commas or newlines"
        )));
    }
    if RESERVED_WORDS.contains(&label) {
        return Err(Error::Format(format!("label `{label}` is a reserved word")));
    }
    Ok(())
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Serialize the bank to its versioned text form; floats use shortest
/// round-trip formatting so write -> read -> write is bit-exact.
pub fn modelbank_to_string(bank: &ModelBank) -> Result<String> {
    let mut out = String::new();
    out.push_str(MODELBANK_MAGIC);
    out.push('\n');
    out.push_str(&format!("CONFIG,{}\n", bank.config_hash));
    for model in bank.models.values() {
        for label in &model.classes {
            validate_label(label)?;
        }
        out.push_str(&format!("MODEL,{}\n", model.combination.bits()));
        out.push_str(&format!("CLASSES,{}\n", model.classes.join(",")));
        out.push_str(&format!("DIM,{}\n", model.feature_dim));
        out.push_str(&format!("MEAN,{}\n", join_floats(&model.stats.mean)));
        out.push_str(&format!("STD,{}\n", join_floats(&model.stats.std)));
        for ((label, w), b) in model.classes.iter().zip(&model.weights).zip(&model.biases) {
            out.push_str(&format!("{label},{b},{}\n", join_floats(w)));
        }
    }
    Ok(out)
}

fn parse_float_list(fields: &[&str], context: &str) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad float `{f}` in {context}")))
        })
        .collect()
}

struct PartialModel {
    bits: u8,
    classes: Option<Vec<String>>,
    dim: Option<usize>,
    mean: Option<Vec<f64>>,
    std: Option<Vec<f64>>,
    rows: Vec<(String, f64, Vec<f64>)>,
}

impl PartialModel {
    fn finish(self) -> Result<SvmModel> {
        let classes = self
            .classes
            .ok_or_else(|| Error::Format("model missing CLASSES".into()))?;
        let dim = self.dim.ok_or_else(|| Error::Format("model missing DIM".into()))?;
        let mean = self.mean.ok_or_else(|| Error::Format("model missing MEAN".into()))?;
        let std = self.std.ok_or_else(|| Error::Format("model missing STD".into()))?;
        if mean.len() != dim || std.len() != dim {
            return Err(Error::Format("standardization length mismatch".into()));
        }
        if self.rows.len() != classes.len() {
            return Err(Error::Format(format!(
                "model declares {} classes but has {} weight rows",
                classes.len(),
                self.rows.len()
            )));
        }
        let mut weights = Vec::with_capacity(classes.len());
        let mut biases = Vec::with_capacity(classes.len());
        for (expect, (label, bias, w)) in classes.iter().zip(self.rows) {
            if *expect != label {
                return Err(Error::Format(format!(
                    "weight row `{label}` out of order, expected `{expect}`"
                )));
            }
            if w.len() != dim {
                return Err(Error::Format(format!(
                    "weight row `{label}` has {} values, expected {dim}",
                    w.len()
                )));
            }
            weights.push(w);
            biases.push(bias);
        }
        Ok(SvmModel {
            combination: PartSet::from_bits(self.bits)?,
            classes,
            weights,
            biases,
            stats: StandardizationStats { mean, std },
            feature_dim: dim,
        })
    }
}

/// Parse the versioned text form produced by [`modelbank_to_string`].
pub fn modelbank_from_str(text: &str) -> Result<ModelBank> {
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l == MODELBANK_MAGIC => {}
        other => {
            return Err(Error::Format(format!(
                "expected `{MODELBANK_MAGIC}` header, got {other:?}"
            )))
        }
    }
    let mut config_hash: Option<String> = None;
    let mut bank_models: BTreeMap<u8, SvmModel> = BTreeMap::new();
    let mut current: Option<PartialModel> = None;

    for (lineno, line) in lines.enumerate() {
        let ctx = format!("model bank line {}", lineno + 2);
        let fields: Vec<&str> = line.split(',').collect();
        match fields[0] {
            "CONFIG" => {
                if fields.len() != 2 || current.is_some() {
                    return Err(Error::Format(format!("misplaced CONFIG in {ctx}")));
                }
                config_hash = Some(fields[1].to_string());
            }
            "MODEL" => {
                if fields.len() != 2 {
                    return Err(Error::Format(format!("MODEL arity in {ctx}")));
                }
                if let Some(done) = current.take() {
                    let model = done.finish()?;
                    if bank_models.insert(model.combination.bits(), model).is_some() {
                        return Err(Error::Format(format!("duplicate model in {ctx}")));
                    }
                }
                let bits = fields[1]
                    .parse::<u8>()
                    .map_err(|_| Error::Format(format!("bad combination in {ctx}")))?;
                if bits == 0 || bits > 15 {
                    return Err(Error::Format(format!("combination out of range in {ctx}")));
                }
                current = Some(PartialModel {
                    bits,
                    classes: None,
                    dim: None,
                    mean: None,
                    std: None,
                    rows: Vec::new(),
                });
            }
            "CLASSES" => {
                let model = current
                    .as_mut()
                    .ok_or_else(|| Error::Format(format!("CLASSES outside model in {ctx}")))?;
                let classes: Vec<String> = fields[1..].iter().map(|s| s.to_string()).collect();
                if classes.is_empty() || classes.iter().any(|c| c.is_empty()) {
                    return Err(Error::Format(format!("empty class list in {ctx}")));
                }
                for c in &classes {
                    validate_label(c)?;
                }
                model.classes = Some(classes);
            }
            "DIM" => {
                let model = current
                    .as_mut()
                    .ok_or_else(|| Error::Format(format!("DIM outside model in {ctx}")))?;
                if fields.len() != 2 {
                    return Err(Error::Format(format!("DIM arity in {ctx}")));
                }
                model.dim = Some(
                    fields[1]
                        .parse::<usize>()
                        .map_err(|_| Error::Format(format!("bad dimension in {ctx}")))?,
                );
            }
            "MEAN" => {
                let model = current
                    .as_mut()
                    .ok_or_else(|| Error::Format(format!("MEAN outside model in {ctx}")))?;
                model.mean = Some(parse_float_list(&fields[1..], &ctx)?);
            }
            "STD" => {
                let model = current
                    .as_mut()
                    .ok_or_else(|| Error::Format(format!("STD outside model in {ctx}")))?;
                model.std = Some(parse_float_list(&fields[1..], &ctx)?);
            }
            label => {
                let model = current
                    .as_mut()
                    .ok_or_else(|| Error::Format(format!("weight row outside model in {ctx}")))?;
                if fields.len() < 2 {
                    return Err(Error::Format(format!("weight row arity in {ctx}")));
                }
                let bias = fields[1]
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad bias in {ctx}")))?;
                let w = parse_float_list(&fields[2..], &ctx)?;
                model.rows.push((label.to_string(), bias, w));
            }
        }
    }
    if let Some(done) = current.take() {
        let model = done.finish()?;
        if bank_models.insert(model.combination.bits(), model).is_some() {
            return Err(Error::Format("duplicate trailing model".into()));
        }
    }
    Ok(ModelBank {
        config_hash: config_hash.ok_or_else(|| Error::Format("missing CONFIG line".into()))?,
        models: bank_models,
    })
}

pub fn write_modelbank(bank: &ModelBank, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, modelbank_to_string(bank)?).map_err(|e| Error::io(path, e))
}

pub fn read_modelbank(path: &std::path::Path) -> Result<ModelBank> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    modelbank_from_str(&text)
}
