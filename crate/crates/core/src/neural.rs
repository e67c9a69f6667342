//! The inner-loop classifier.
//!
//! Points are lifted to a 15-term polynomial/trigonometric feature vector and
//! fed to a tanh MLP trained full-batch with Adam on softmax cross-entropy.
//! The network is meant to overfit: training stops at the first epoch where
//! every training point is classified correctly.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cell_center, LabelGrid, NetId};

pub const EXPANDED_WIDTH: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// The 15-term expansion.
    Expanded,
    /// Raw `(x, y)` only.
    Raw,
}

impl FeatureMode {
    pub fn width(self) -> usize {
        match self {
            FeatureMode::Expanded => EXPANDED_WIDTH,
            FeatureMode::Raw => 2,
        }
    }

    fn write(self, x: f64, y: f64, out: &mut [f64]) {
        match self {
            FeatureMode::Expanded => out.copy_from_slice(&expand_features(x, y)),
            FeatureMode::Raw => {
                out[0] = x;
                out[1] = y;
            }
        }
    }
}

/// `x, y, xy, sin 2πx, cos 2πx, x², sin 2πy, cos 2πy, y², sin 3πx, cos 3πx, x³, sin 3πy, cos 3πy, y³`
pub fn expand_features(x: f64, y: f64) -> [f64; EXPANDED_WIDTH] {
    let (s2x, c2x) = (2.0 * PI * x).sin_cos();
    let (s2y, c2y) = (2.0 * PI * y).sin_cos();
    let (s3x, c3x) = (3.0 * PI * x).sin_cos();
    let (s3y, c3y) = (3.0 * PI * y).sin_cos();
    [
        x,
        y,
        x * y,
        s2x,
        c2x,
        x * x,
        s2y,
        c2y,
        y * y,
        s3x,
        c3x,
        x * x * x,
        s3y,
        c3y,
        y * y * y,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub early_stop_on_full_accuracy: bool,
    /// With anchored training, early stopping is not considered before this
    /// many epochs. Plain training ignores it.
    pub min_epochs: usize,
    pub hidden_layers: Vec<usize>,
    pub features: FeatureMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.002,
            max_epochs: 300,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            early_stop_on_full_accuracy: true,
            min_epochs: 30,
            hidden_layers: vec![50, 50, 50],
            features: FeatureMode::Expanded,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be positive".into()));
        }
        if self.min_epochs > self.max_epochs {
            return Err(Error::InvalidConfig(format!(
                "min_epochs ({}) exceeds max_epochs ({})",
                self.min_epochs, self.max_epochs
            )));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::InvalidConfig("hidden layers must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: f64,
    pub y: f64,
    pub net: NetId,
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    /// `fan_in x fan_out`
    weights: Array2<f64>,
    bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifier {
    layers: Vec<Dense>,
    features: FeatureMode,
    classes: usize,
    epochs_run: usize,
    training_accuracy: f64,
}

struct Gradients {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

struct AdamState {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    step: i32,
}

impl MlpClassifier {
    /// A freshly initialized network: uniform `[-a, a]` weights with
    /// `a = sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new(features: FeatureMode, hidden: &[usize], classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![features.width()];
        widths.extend_from_slice(hidden);
        widths.push(classes);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-a..=a)),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Self {
            layers,
            features,
            classes,
            epochs_run: 0,
            training_accuracy: 0.0,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn feature_mode(&self) -> FeatureMode {
        self.features
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    /// Layer widths from input to output.
    pub fn layer_widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_width()];
        w.extend(self.layers.iter().map(|l| l.weights.ncols()));
        w
    }

    pub fn epochs_run(&self) -> usize {
        self.epochs_run
    }

    pub fn training_accuracy(&self) -> f64 {
        self.training_accuracy
    }

    fn feature_matrix(&self, points: impl ExactSizeIterator<Item = (f64, f64)>) -> Array2<f64> {
        let width = self.features.width();
        let mut x = Array2::zeros((points.len(), width));
        for (mut row, (px, py)) in x.axis_iter_mut(Axis(0)).zip(points) {
            self.features.write(px, py, row.as_slice_mut().expect("standard layout"));
        }
        x
    }

    /// Hidden activations (input first) and the final class scores.
    fn forward(&self, input: ArrayView2<f64>) -> (Vec<Array2<f64>>, Array2<f64>) {
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut current = input.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = current.dot(&layer.weights);
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(tanh);
            }
            acts.push(std::mem::replace(&mut current, z));
        }
        (acts, current)
    }

    fn scores_matrix(&self, input: ArrayView2<f64>) -> Array2<f64> {
        let mut current = input.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = current.dot(&layer.weights);
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(tanh);
            }
            current = z;
        }
        current
    }

    /// Raw class scores at a point.
    pub fn scores(&self, x: f64, y: f64) -> Vec<f64> {
        self.scores_matrix(self.feature_matrix(std::iter::once((x, y))).view()).row(0).to_vec()
    }

    /// Softmax class probabilities at a point.
    pub fn probabilities(&self, x: f64, y: f64) -> Vec<f64> {
        let s = self.scores(x, y);
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect()
    }

    pub fn predict(&self, x: f64, y: f64) -> NetId {
        argmax(self.scores(x, y).iter().copied())
    }

    pub fn predict_points(&self, points: &[(f64, f64)]) -> Vec<NetId> {
        let scores = self.scores_matrix(self.feature_matrix(points.iter().copied()).view());
        scores.axis_iter(Axis(0)).map(|row| argmax(row.iter().copied())).collect()
    }

    /// Labels every cell center of a `resolution x resolution` grid with its argmax class.
    pub fn predict_grid(&self, resolution: usize) -> LabelGrid {
        let centers = (0..resolution * resolution).map(|i| {
            let (r, c) = (i / resolution, i % resolution);
            (cell_center(c, resolution), cell_center(r, resolution))
        });
        let scores = self.scores_matrix(self.feature_matrix(centers).view());
        LabelGrid {
            resolution,
            labels: scores.axis_iter(Axis(0)).map(|row| argmax(row.iter().copied())).collect(),
        }
    }

    /// Mean cross-entropy and its gradient with respect to every parameter,
    /// flattened in the order of [`Self::params`].
    pub fn loss_and_gradient(&self, points: &[LabeledPoint]) -> (f64, Vec<f64>) {
        let (x, y) = self.training_tensors(points);
        let (acts, scores) = self.forward(x.view());
        let (loss, _, dscores) = softmax_cross_entropy(&scores, &y);
        let grads = self.backward(&acts, dscores);
        let mut flat = Vec::new();
        for (w, b) in grads.weights.iter().zip(&grads.biases) {
            flat.extend(w.iter());
            flat.extend(b.iter());
        }
        (loss, flat)
    }

    pub fn loss(&self, points: &[LabeledPoint]) -> f64 {
        let (x, y) = self.training_tensors(points);
        softmax_cross_entropy(&self.scores_matrix(x.view()), &y).0
    }

    /// All weights and biases, layer by layer, weights row-major then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for l in &self.layers {
            flat.extend(l.weights.iter());
            flat.extend(l.bias.iter());
        }
        flat
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().expect("parameter vector too short"));
            l.bias.iter_mut().for_each(|b| *b = it.next().expect("parameter vector too short"));
        }
        assert!(it.next().is_none(), "parameter vector too long");
    }

    /// Dumps every parameter as plain text, one layer block at a time.
    pub fn write_params<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# mlp features={:?} widths={:?}", self.features, self.layer_widths())?;
        for (i, l) in self.layers.iter().enumerate() {
            writeln!(out, "layer {i} weights {} {}", l.weights.nrows(), l.weights.ncols())?;
            for row in l.weights.rows() {
                let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                writeln!(out, "{}", line.join(" "))?;
            }
            writeln!(out, "layer {i} bias {}", l.bias.len())?;
            let line: Vec<String> = l.bias.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    fn training_tensors(&self, points: &[LabeledPoint]) -> (Array2<f64>, Vec<usize>) {
        let x = self.feature_matrix(points.iter().map(|p| (p.x, p.y)));
        let y = points.iter().map(|p| p.net as usize - 1).collect();
        (x, y)
    }

    fn backward(&self, acts: &[Array2<f64>], mut delta: Array2<f64>) -> Gradients {
        let n_layers = self.layers.len();
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for l in (0..n_layers).rev() {
            let input = &acts[l];
            weights.push(input.t().dot(&delta));
            biases.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                let mut upstream = delta.dot(&self.layers[l].weights.t());
                // input here is the tanh output of layer l - 1
                Zip::from(&mut upstream).and(input).for_each(|d, &a| *d *= 1.0 - a * a);
                delta = upstream;
            }
        }
        weights.reverse();
        biases.reverse();
        Gradients { weights, biases }
    }

    fn adam_step(&mut self, grads: &Gradients, state: &mut AdamState, cfg: &TrainConfig) {
        state.step += 1;
        let (b1, b2, eps) = (cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
        let c1 = 1.0 - b1.powi(state.step);
        let c2 = 1.0 - b2.powi(state.step);
        let lr = cfg.learning_rate;
        for (i, layer) in self.layers.iter_mut().enumerate() {
            Zip::from(&mut layer.weights)
                .and(&mut state.m_w[i])
                .and(&mut state.v_w[i])
                .and(&grads.weights[i])
                .for_each(|w, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
            Zip::from(&mut layer.bias)
                .and(&mut state.m_b[i])
                .and(&mut state.v_b[i])
                .and(&grads.biases[i])
                .for_each(|w, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
        }
    }
}

/// `exp(x)` for `0 <= x <= 40`: Cody-Waite reduction by `ln 2` and a
/// degree-13 Taylor polynomial, accurate to a few ulp. Branch-free so the
/// activation loops vectorize; the libm call dominated training time.
#[inline(always)]
fn exp_bounded(x: f64) -> f64 {
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    // Adding 1.5 * 2^52 rounds to an integer held in the low mantissa bits.
    const SHIFT: f64 = 6_755_399_441_055_744.0;
    let k = x * std::f64::consts::LOG2_E + SHIFT;
    let n = k - SHIFT;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    let mut p = 1.0 / 479_001_600.0;
    for c in [
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    let n_bits = k.to_bits().wrapping_sub(SHIFT.to_bits());
    p * f64::from_bits(n_bits.wrapping_add(1023) << 52)
}

/// Hyperbolic tangent via `1 - 2 / (exp(2|x|) + 1)`, within a few 1e-16 of
/// the libm value. Saturates to exactly `±1` beyond `|x| = 20`, where the
/// true value rounds to 1 anyway; NaN propagates.
#[inline(always)]
fn tanh(x: f64) -> f64 {
    let a = x.abs();
    let a = if a > 20.0 { 20.0 } else { a };
    let t = 1.0 - 2.0 / (exp_bounded(2.0 * a) + 1.0);
    t.copysign(x)
}

/// Index of the largest value as a 1-based net id; ties keep the lowest id.
fn argmax(values: impl Iterator<Item = f64>) -> NetId {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    (best.0 + 1) as NetId
}

/// Mean loss, per-row correctness, and `d loss / d scores`.
fn softmax_cross_entropy(scores: &Array2<f64>, targets: &[usize]) -> (f64, bool, Array2<f64>) {
    let n = scores.nrows() as f64;
    let mut grad = scores.clone();
    let mut loss = 0.0;
    let mut all_correct = true;
    for (mut row, &t) in grad.axis_iter_mut(Axis(0)).zip(targets) {
        let predicted = argmax(row.iter().copied()) as usize - 1;
        all_correct &= predicted == t;
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let z: f64 = row.sum();
        loss += z.ln() - (row[t].ln());
        row.mapv_inplace(|v| v / z / n);
        row[t] -= 1.0 / n;
    }
    (loss / n, all_correct, grad)
}

/// Trains a classifier on labeled points with full-batch Adam.
///
/// Labels must lie in `1..=classes`. Deterministic for a given seed.
pub fn train(points: &[LabeledPoint], classes: usize, config: &TrainConfig, seed: u64) -> Result<MlpClassifier> {
    train_anchored(points, points.len(), classes, config, seed)
}

/// Like [`train`], but early stopping only requires the first `anchored`
/// points to be classified correctly; the rest still shape the loss. When
/// some points are unanchored, early stopping also waits for
/// `config.min_epochs` so those points get a chance to bend the boundaries.
pub fn train_anchored(
    points: &[LabeledPoint],
    anchored: usize,
    classes: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<MlpClassifier> {
    config.validate()?;
    let anchored = anchored.min(points.len());
    if points.is_empty() {
        return Err(Error::InvalidTrainingData("no training points".into()));
    }
    if classes == 0 {
        return Err(Error::InvalidTrainingData("zero classes".into()));
    }
    if let Some(p) = points.iter().find(|p| p.net == 0 || p.net as usize > classes) {
        return Err(Error::InvalidTrainingData(format!("label {} outside 1..={classes}", p.net)));
    }

    let mut mlp = MlpClassifier::new(config.features, &config.hidden_layers, classes, seed);
    let (x, y) = mlp.training_tensors(points);
    let mut state = AdamState {
        m_w: mlp.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
        v_w: mlp.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
        m_b: mlp.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
        v_b: mlp.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
        step: 0,
    };

    let mut epoch = 0;
    loop {
        let (acts, scores) = mlp.forward(x.view());
        let (loss, all_correct, dscores) = softmax_cross_entropy(&scores, &y);
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch, loss });
        }
        let anchors_correct = all_correct
            || (anchored < points.len() && (0..anchored).all(|i| argmax(scores.row(i).iter().copied()) == points[i].net));
        let warmed_up = anchored == points.len() || epoch >= config.min_epochs;
        if (config.early_stop_on_full_accuracy && anchors_correct && warmed_up) || epoch == config.max_epochs {
            break;
        }
        let grads = mlp.backward(&acts, dscores);
        mlp.adam_step(&grads, &mut state, config);
        epoch += 1;
    }

    mlp.epochs_run = epoch;
    let predicted = mlp.predict_points(&points.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>());
    let correct = predicted.iter().zip(points).filter(|(&l, p)| l == p.net).count();
    mlp.training_accuracy = correct as f64 / points.len() as f64;
    Ok(mlp)
}
