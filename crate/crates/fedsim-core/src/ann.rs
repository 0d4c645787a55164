//! Purely functional 2-3-2 feedforward network trained by backpropagation.
//!
//! Each non-input layer is a matrix with one row per destination neuron. The
//! last column of every row is the bias weight, fed by a virtual input that is
//! always `1.0`. The learning rate is fixed at 1: a weight update subtracts
//! `delta * input` directly.
//!
//! The arithmetic in this module is written to be reproducible bit for bit by
//! independent implementations: dot products accumulate left to right starting
//! from `0.0`, and the bias product is the last term.

use alloc::vec::Vec;

/// Number of input neurons.
pub const INPUTS: usize = 2;
/// Number of hidden neurons.
pub const HIDDEN: usize = 3;
/// Number of output neurons.
pub const OUTPUTS: usize = 2;
/// Total number of trainable weights, bias weights included.
pub const WEIGHT_COUNT: usize = HIDDEN * (INPUTS + 1) + OUTPUTS * (HIDDEN + 1);

/// Input to hidden layer: one row per hidden neuron, `[in0, in1, bias]`.
pub type InputLayer = [[f64; INPUTS + 1]; HIDDEN];
/// Hidden to output layer: one row per output neuron, `[h0, h1, h2, bias]`.
pub type HiddenLayer = [[f64; HIDDEN + 1]; OUTPUTS];

/// The full parameter vector of the network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelWeights {
    pub w_input: InputLayer,
    pub w_hidden: HiddenLayer,
}

impl ModelWeights {
    pub const fn zeros() -> Self {
        ModelWeights {
            w_input: [[0.0; INPUTS + 1]; HIDDEN],
            w_hidden: [[0.0; HIDDEN + 1]; OUTPUTS],
        }
    }

    /// Builds weights from the canonical flat order: `w_input` rows 0..2,
    /// then `w_hidden` rows 0..1, each row ending with its bias.
    pub fn from_flat(flat: &[f64; WEIGHT_COUNT]) -> Self {
        let mut w = Self::zeros();
        let mut values = flat.iter().copied();
        for slot in w.iter_mut() {
            *slot = values.next().unwrap_or_default();
        }
        w
    }

    pub fn to_flat(&self) -> [f64; WEIGHT_COUNT] {
        let mut flat = [0.0; WEIGHT_COUNT];
        for (dst, src) in flat.iter_mut().zip(self.iter()) {
            *dst = src;
        }
        flat
    }

    /// Iterates all weights in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.w_input
            .iter()
            .flat_map(|row| row.iter())
            .chain(self.w_hidden.iter().flat_map(|row| row.iter()))
            .copied()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.w_input
            .iter_mut()
            .flat_map(|row| row.iter_mut())
            .chain(self.w_hidden.iter_mut().flat_map(|row| row.iter_mut()))
    }

    /// Applies `f` to every pair of corresponding entries.
    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut out = *self;
        for (dst, theirs) in out.iter_mut().zip(other.iter()) {
            *dst = f(*dst, theirs);
        }
        out
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let mut out = *self;
        for w in out.iter_mut() {
            *w = f(*w);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    /// Bitwise equality; unlike `==` this distinguishes `0.0` from `-0.0`.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.iter()
            .zip(other.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Default for ModelWeights {
    fn default() -> Self {
        Self::zeros()
    }
}

/// Partial derivatives of the per-sample loss `E = ½ Σ_k (o_k − t_k)²`,
/// laid out exactly like [`ModelWeights`].
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Gradient(pub ModelWeights);

impl Gradient {
    pub fn as_weights(&self) -> &ModelWeights {
        &self.0
    }
}

/// One training example.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub input: [f64; INPUTS],
    pub target: [f64; OUTPUTS],
}

impl Sample {
    pub const fn new(input: [f64; INPUTS], target: [f64; OUTPUTS]) -> Self {
        Sample { input, target }
    }
}

/// Which output-layer weights feed the hidden-layer deltas.
///
/// `PaperFaithful` propagates the output deltas through the output layer
/// *after* it has been updated for the current sample. `Classic` uses the
/// weights from before the update, which makes one training epoch exactly a
/// step of `-1 ×` [`gradient`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum GradientMode {
    Classic,
    #[default]
    PaperFaithful,
}

/// The logistic function `1 / (1 + e^(−x))`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + exp(-x))
}

#[cfg(feature = "std")]
#[inline]
fn exp(x: f64) -> f64 {
    x.exp()
}

#[cfg(not(feature = "std"))]
#[inline]
fn exp(x: f64) -> f64 {
    libm::exp(x)
}

/// Pre-activations of one layer.
///
/// # Panics
/// If `activations.len() + 1 != C`.
pub fn forward_layer<const C: usize, const R: usize>(
    activations: &[f64],
    layer: &[[f64; C]; R],
) -> [f64; R] {
    assert_eq!(
        activations.len() + 1,
        C,
        "layer expects {} inputs plus bias",
        C - 1
    );
    let mut out = [0.0; R];
    for (net, row) in out.iter_mut().zip(layer) {
        let mut acc = 0.0;
        for (a, w) in activations.iter().zip(row) {
            acc += a * w;
        }
        acc += 1.0 * row[C - 1];
        *net = acc;
    }
    out
}

/// Output deltas `o(1−o)(o−t)`, i.e. `∂E/∂net` for a sigmoid output.
pub fn output_error<const K: usize>(outputs: &[f64; K], targets: &[f64; K]) -> [f64; K] {
    let mut out = [0.0; K];
    for ((d, &o), &t) in out.iter_mut().zip(outputs).zip(targets) {
        *d = o * (1.0 - o) * (o - t);
    }
    out
}

/// Returns the layer with every row moved by `-delta_i * [inputs, 1.0]`.
///
/// # Panics
/// If `inputs.len() + 1 != C`.
pub fn backprop_layer<const C: usize, const R: usize>(
    inputs: &[f64],
    deltas: &[f64; R],
    layer: &[[f64; C]; R],
) -> [[f64; C]; R] {
    assert_eq!(
        inputs.len() + 1,
        C,
        "layer expects {} inputs plus bias",
        C - 1
    );
    let mut out = *layer;
    for (row, &delta) in out.iter_mut().zip(deltas) {
        for (w, &i) in row.iter_mut().zip(inputs) {
            *w -= delta * i;
        }
        row[C - 1] -= delta * 1.0;
    }
    out
}

/// Hidden deltas `(Σ_k w_{h→k} δ_k) · h(1−h)`. The bias column of
/// `w_hidden_used` has no source hidden neuron and is ignored.
///
/// # Panics
/// If `C != H + 1`.
pub fn hidden_error<const H: usize, const C: usize, const R: usize>(
    hidden_outs: &[f64; H],
    output_deltas: &[f64; R],
    w_hidden_used: &[[f64; C]; R],
) -> [f64; H] {
    assert_eq!(
        C,
        H + 1,
        "output layer must have one column per hidden neuron plus bias"
    );
    let mut out = [0.0; H];
    for (idx, (d, &h)) in out.iter_mut().zip(hidden_outs).enumerate() {
        let mut acc = 0.0;
        for (row, &delta) in w_hidden_used.iter().zip(output_deltas) {
            acc += delta * row[idx];
        }
        *d = acc * h * (1.0 - h);
    }
    out
}

/// Activations of a forward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Activations {
    pub hidden: [f64; HIDDEN],
    pub output: [f64; OUTPUTS],
}

pub fn forward(weights: &ModelWeights, input: &[f64; INPUTS]) -> Activations {
    let hidden = forward_layer(input, &weights.w_input).map(sigmoid);
    let output = forward_layer(&hidden, &weights.w_hidden).map(sigmoid);
    Activations { hidden, output }
}

/// One epoch on one sample: forward pass, then backpropagation with η = 1.
/// Returns the output deltas and the updated weights.
pub fn train_epoch(
    sample: &Sample,
    weights: &ModelWeights,
    mode: GradientMode,
) -> ([f64; OUTPUTS], ModelWeights) {
    let act = forward(weights, &sample.input);
    let out_deltas = output_error(&act.output, &sample.target);
    let w_hidden = backprop_layer(&act.hidden, &out_deltas, &weights.w_hidden);
    let propagate_through = match mode {
        GradientMode::Classic => &weights.w_hidden,
        GradientMode::PaperFaithful => &w_hidden,
    };
    let hidden_deltas = hidden_error(&act.hidden, &out_deltas, propagate_through);
    let w_input = backprop_layer(&sample.input, &hidden_deltas, &weights.w_input);
    (out_deltas, ModelWeights { w_input, w_hidden })
}

/// Exact backpropagation gradient of `½ Σ_k (o_k − t_k)²`.
pub fn gradient(weights: &ModelWeights, sample: &Sample) -> Gradient {
    let act = forward(weights, &sample.input);
    let out_deltas = output_error(&act.output, &sample.target);
    let hidden_deltas = hidden_error(&act.hidden, &out_deltas, &weights.w_hidden);

    let mut g = ModelWeights::zeros();
    outer_with_bias(&mut g.w_hidden, &out_deltas, &act.hidden);
    outer_with_bias(&mut g.w_input, &hidden_deltas, &sample.input);
    Gradient(g)
}

fn outer_with_bias<const C: usize, const R: usize>(
    dst: &mut [[f64; C]; R],
    deltas: &[f64; R],
    inputs: &[f64],
) {
    for (row, &delta) in dst.iter_mut().zip(deltas) {
        for (g, &i) in row.iter_mut().zip(inputs) {
            *g = delta * i;
        }
        row[C - 1] = delta * 1.0;
    }
}

/// Sequential per-sample training, threading the weights through every
/// sample. Output deltas are returned in input order.
pub fn train_batch(
    samples: &[Sample],
    weights: &ModelWeights,
    mode: GradientMode,
) -> (Vec<[f64; OUTPUTS]>, ModelWeights) {
    let mut errors = Vec::with_capacity(samples.len());
    let mut w = *weights;
    for s in samples {
        let (err, next) = train_epoch(s, &w, mode);
        errors.push(err);
        w = next;
    }
    (errors, w)
}

/// [`train_batch`] without collecting the per-sample deltas.
pub fn train_pass(samples: &[Sample], weights: &ModelWeights, mode: GradientMode) -> ModelWeights {
    samples
        .iter()
        .fold(*weights, |w, s| train_epoch(s, &w, mode).1)
}

/// Per-sample training loss `½ Σ_k (o_k − t_k)²`.
pub fn sample_loss(weights: &ModelWeights, sample: &Sample) -> f64 {
    let act = forward(weights, &sample.input);
    let mut acc = 0.0;
    for (o, t) in act.output.iter().zip(&sample.target) {
        acc += (o - t) * (o - t);
    }
    0.5 * acc
}

/// Mean squared error over all samples and output neurons.
///
/// # Panics
/// If `samples` is empty.
pub fn mse(weights: &ModelWeights, samples: &[Sample]) -> f64 {
    assert!(!samples.is_empty(), "mse of an empty sample set");
    let mut acc = 0.0;
    for s in samples {
        let act = forward(weights, &s.input);
        for (o, t) in act.output.iter().zip(&s.target) {
            acc += (o - t) * (o - t);
        }
    }
    acc / (samples.len() * OUTPUTS) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logit(p: f64) -> f64 {
        (p / (1.0 - p)).ln()
    }

    fn weights_from(seed: u64) -> ModelWeights {
        // small LCG, enough to spread values over (-1, 1)
        let mut state = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let mut flat = [0.0; WEIGHT_COUNT];
        for w in flat.iter_mut() {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            *w = ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0;
        }
        ModelWeights::from_flat(&flat)
    }

    /// Weights whose forward output is exactly reproducible as a target.
    fn fixed_point_sample(w: &ModelWeights, input: [f64; 2]) -> Sample {
        let act = forward(w, &input);
        Sample::new(input, act.output)
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        assert!((sigmoid(-(3f64.ln())) - 0.25).abs() < 1e-15);
        for x in [-20.0, -3.2, -0.1, 0.7, 5.5] {
            assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-15);
            assert!(sigmoid(x) > 0.0 && sigmoid(x) < 1.0);
        }
        assert!((logit(sigmoid(0.3)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn forward_layer_examples() {
        assert_eq!(forward_layer(&[0.25, 0.70], &[[0.05, 0.09, 0.0]]), [0.0755]);
        assert_eq!(forward_layer(&[0.0, 0.0], &[[0.3, -0.8, 0.42]]), [0.42]);
        let v = forward_layer(&[1.0, 1.0], &[[0.2, 0.3, 0.1]])[0];
        assert!((v - 0.6).abs() < 1e-15);
    }

    #[test]
    #[should_panic]
    fn forward_layer_rejects_dimension_mismatch() {
        let _ = forward_layer(&[1.0, 2.0, 3.0], &[[0.2, 0.3, 0.1]]);
    }

    #[test]
    fn output_error_examples() {
        assert_eq!(output_error(&[0.3, 0.8], &[0.3, 0.8]), [0.0, 0.0]);
        assert!((output_error(&[0.6], &[0.0])[0] - 0.144).abs() < 1e-15);
        assert_eq!(output_error(&[0.5], &[1.0]), [-0.125]);
    }

    #[test]
    fn backprop_layer_examples() {
        let layer = [[0.2, 0.3, 0.4], [-0.1, 0.6, 0.0]];
        assert_eq!(backprop_layer(&[0.3, 0.9], &[0.0, 0.0], &layer), layer);

        let out = backprop_layer(&[1.0, 0.0], &[0.5], &[[0.2, 0.3, 0.4]]);
        let expected = [-0.3, 0.3, -0.1];
        for (a, b) in out[0].iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }

        let out = backprop_layer(&[0.0], &[0.25], &[[0.7, 0.1]]);
        assert_eq!(out, [[0.7, 0.1 - 0.25]]);
    }

    #[test]
    fn hidden_error_examples() {
        let w = [[0.4, 0.2, 0.9, 0.5], [0.6, -0.3, 0.1, -0.5]];
        assert_eq!(hidden_error(&[0.5, 0.2, 0.7], &[0.0, 0.0], &w), [0.0; 3]);

        let d = hidden_error(&[0.5, 1.0, 0.0], &[0.1, -0.1], &w);
        assert!((d[0] - (-0.005)).abs() < 1e-15);
        assert_eq!(d[1], 0.0);
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn bias_column_does_not_propagate() {
        let mut w = [[0.4, 0.2, 0.9, 0.5], [0.6, -0.3, 0.1, -0.5]];
        let before = hidden_error(&[0.5, 0.2, 0.7], &[0.1, 0.3], &w);
        w[0][3] = 100.0;
        w[1][3] = -7.0;
        assert_eq!(hidden_error(&[0.5, 0.2, 0.7], &[0.1, 0.3], &w), before);
    }

    #[test]
    fn zero_error_is_a_fixed_point() {
        for seed in 0..20 {
            let w = weights_from(seed);
            let s = fixed_point_sample(&w, [0.31, 0.77]);
            for mode in [GradientMode::Classic, GradientMode::PaperFaithful] {
                let (deltas, next) = train_epoch(&s, &w, mode);
                assert_eq!(deltas, [0.0, 0.0]);
                assert!(next.bit_eq(&w));
            }
            assert!(gradient(&w, &s).0.iter().all(|g| g == 0.0));
        }
    }

    #[test]
    fn classic_epoch_is_negative_gradient_step() {
        for seed in 0..50 {
            let w = weights_from(seed);
            let s = Sample::new(
                [0.1 + 0.01 * seed as f64, 0.9 - 0.015 * seed as f64],
                [0.3, 0.6],
            );
            let (_, next) = train_epoch(&s, &w, GradientMode::Classic);
            let g = gradient(&w, &s);
            let stepped = w.zip_map(&g.0, |w, g| w - g);
            assert!(next.bit_eq(&stepped));
        }
    }

    #[test]
    fn modes_agree_on_output_layer() {
        for seed in 0..50 {
            let w = weights_from(seed);
            let s = Sample::new([0.42, 0.13], [0.9, 0.05]);
            let (dc, classic) = train_epoch(&s, &w, GradientMode::Classic);
            let (dp, faithful) = train_epoch(&s, &w, GradientMode::PaperFaithful);
            assert_eq!(dc, dp);
            assert_eq!(classic.w_hidden, faithful.w_hidden);
        }
    }

    #[test]
    fn train_batch_threads_weights() {
        let w = weights_from(7);
        let samples = [
            Sample::new([0.1, 0.2], [0.14, 0.37]),
            Sample::new([0.5, 0.9], [0.67, 0.82]),
            Sample::new([0.3, 0.3], [0.3, 0.55]),
        ];
        let (errors, out) = train_batch(&[], &w, GradientMode::PaperFaithful);
        assert!(errors.is_empty());
        assert!(out.bit_eq(&w));

        let (errors, out) = train_batch(&samples[..1], &w, GradientMode::PaperFaithful);
        let (e1, w1) = train_epoch(&samples[0], &w, GradientMode::PaperFaithful);
        assert_eq!(errors, [e1]);
        assert!(out.bit_eq(&w1));

        let (errors, out) = train_batch(&samples, &w, GradientMode::PaperFaithful);
        let mut manual = w;
        let mut manual_errors = Vec::new();
        for s in &samples {
            let (e, next) = train_epoch(s, &manual, GradientMode::PaperFaithful);
            manual_errors.push(e);
            manual = next;
        }
        assert_eq!(errors, manual_errors);
        assert!(out.bit_eq(&manual));
        assert!(train_pass(&samples, &w, GradientMode::PaperFaithful).bit_eq(&manual));
    }

    #[test]
    fn mse_examples() {
        let w = weights_from(3);
        let samples = [
            fixed_point_sample(&w, [0.2, 0.4]),
            fixed_point_sample(&w, [0.9, 0.1]),
        ];
        assert_eq!(mse(&w, &samples), 0.0);

        // saturate the output layer so both outputs round to exactly 1.0
        let mut saturated = ModelWeights::zeros();
        saturated.w_hidden = [[0.0, 0.0, 0.0, 1000.0], [0.0, 0.0, 0.0, 1000.0]];
        assert_eq!(mse(&saturated, &[Sample::new([0.3, 0.3], [0.0, 0.0])]), 1.0);

        let mixed = [
            Sample::new([0.1, 0.2], [0.14, 0.37]),
            Sample::new([0.5, 0.9], [0.67, 0.82]),
            Sample::new([0.3, 0.3], [0.3, 0.55]),
        ];
        let reversed = [mixed[2], mixed[1], mixed[0]];
        assert!((mse(&w, &mixed) - mse(&w, &reversed)).abs() < 1e-15);
    }

    #[test]
    #[should_panic]
    fn mse_rejects_empty_set() {
        let _ = mse(&ModelWeights::zeros(), &[]);
    }

    #[test]
    fn flat_layout_is_canonical() {
        let flat: [f64; WEIGHT_COUNT] = core::array::from_fn(|i| i as f64);
        let w = ModelWeights::from_flat(&flat);
        assert_eq!(w.w_input[0], [0.0, 1.0, 2.0]);
        assert_eq!(w.w_input[2], [6.0, 7.0, 8.0]);
        assert_eq!(w.w_hidden[0], [9.0, 10.0, 11.0, 12.0]);
        assert_eq!(w.w_hidden[1], [13.0, 14.0, 15.0, 16.0]);
        assert_eq!(w.to_flat(), flat);
    }
}
