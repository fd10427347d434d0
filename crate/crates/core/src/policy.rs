//! Fixed-architecture MLP policy with hand-written backpropagation.
//!
//! `obs -> 64 -> 64 -> actions`, tanh hidden units, softmax head restricted to
//! the legal actions. Illegal logits are dropped from the normalization set,
//! so their probabilities and gradients are exactly zero.
//!
//! Parameters live in one flat buffer: for each layer the `rows x cols`
//! weight matrix (row-major, rows = inputs) followed by the bias vector.

use rand::Rng as _;

use crate::error::{L2eError, Result};
use crate::games::{ActionSet, GameId, GameSpec};
use crate::rng::Rng;

pub const HIDDEN: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    game: GameId,
    sizes: [usize; 4],
    data: Vec<f64>,
}

/// Gradient of a scalar objective, laid out like [`PolicyParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector {
    sizes: [usize; 4],
    data: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Ascend,
    Descend,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionDistribution {
    pub probs: Vec<f64>,
    pub legal: ActionSet,
}

impl ActionDistribution {
    pub fn sample(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for a in self.legal.iter() {
            acc += self.probs[a];
            last = a;
            if u < acc {
                return a;
            }
        }
        last
    }
}

fn param_count(sizes: &[usize; 4]) -> usize {
    (0..3).map(|l| sizes[l] * sizes[l + 1] + sizes[l + 1]).sum()
}

fn layer_offset(sizes: &[usize; 4], layer: usize) -> usize {
    (0..layer).map(|l| sizes[l] * sizes[l + 1] + sizes[l + 1]).sum()
}

impl PolicyParams {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
    pub fn init(spec: &GameSpec, rng: &mut Rng) -> Self {
        Self::init_scaled(spec, rng, 1.0)
    }

    pub fn init_scaled(spec: &GameSpec, rng: &mut Rng, scale: f64) -> Self {
        let mut p = Self::zeros(spec);
        p.randomize(rng, scale);
        p
    }

    pub fn zeros(spec: &GameSpec) -> Self {
        Self::with_shape(spec.game_id, [spec.obs_dim, HIDDEN, HIDDEN, spec.action_count])
    }

    /// Zero parameters of an arbitrary `[input, hidden1, hidden2, output]` shape.
    pub fn with_shape(game: GameId, sizes: [usize; 4]) -> Self {
        PolicyParams {
            game,
            sizes,
            data: vec![0.0; param_count(&sizes)],
        }
    }

    pub fn from_parts(game: GameId, sizes: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if data.len() != param_count(&sizes) {
            return Err(L2eError::Shape(format!(
                "{} values for shape {:?}",
                data.len(),
                sizes
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(L2eError::NonFinite("policy parameters"));
        }
        Ok(PolicyParams { game, sizes, data })
    }

    pub fn randomize(&mut self, rng: &mut Rng, scale: f64) {
        let sizes = self.sizes;
        for l in 0..3 {
            let bound = scale / (sizes[l] as f64).sqrt();
            let (w, b) = self.layer_mut(l);
            for x in w.iter_mut() {
                *x = if bound > 0.0 {
                    rng.gen_range(-bound..bound)
                } else {
                    0.0
                };
            }
            b.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn game(&self) -> GameId {
        self.game
    }

    pub fn sizes(&self) -> [usize; 4] {
        self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn action_count(&self) -> usize {
        self.sizes[3]
    }

    /// `(rows, cols)` of each weight matrix.
    pub fn layer_shapes(&self) -> [(usize, usize); 3] {
        [
            (self.sizes[0], self.sizes[1]),
            (self.sizes[1], self.sizes[2]),
            (self.sizes[2], self.sizes[3]),
        ]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let off = layer_offset(&self.sizes, l);
        let nw = self.sizes[l] * self.sizes[l + 1];
        let nb = self.sizes[l + 1];
        (&self.data[off..off + nw], &self.data[off + nw..off + nw + nb])
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let off = layer_offset(&self.sizes, l);
        let nw = self.sizes[l] * self.sizes[l + 1];
        let nb = self.sizes[l + 1];
        let (w, rest) = self.data[off..off + nw + nb].split_at_mut(nw);
        (w, rest)
    }

    pub fn check_spec(&self, spec: &GameSpec) -> Result<()> {
        if self.game != spec.game_id {
            return Err(L2eError::GameMismatch {
                expected: spec.game_id,
                found: self.game,
            });
        }
        if self.sizes[0] != spec.obs_dim || self.sizes[3] != spec.action_count {
            return Err(L2eError::Shape(format!(
                "policy {:?} does not fit obs_dim {} / actions {}",
                self.sizes, spec.obs_dim, spec.action_count
            )));
        }
        Ok(())
    }

    fn check_inputs(&self, obs: &[f64], mask: ActionSet) -> Result<()> {
        if obs.len() != self.sizes[0] {
            return Err(L2eError::Shape(format!(
                "observation of length {} for input {}",
                obs.len(),
                self.sizes[0]
            )));
        }
        if mask.is_empty() {
            return Err(L2eError::EmptyMask);
        }
        if mask.iter().any(|a| a >= self.sizes[3]) {
            return Err(L2eError::Shape("mask names an action beyond the head".into()));
        }
        Ok(())
    }

    fn activations(&self, obs: &[f64]) -> Activations {
        let h1 = dense_tanh(self.layer(0), obs, self.sizes[1]);
        let h2 = dense_tanh(self.layer(1), &h1, self.sizes[2]);
        let logits = dense(self.layer(2), &h2, self.sizes[3]);
        Activations { h1, h2, logits }
    }

    pub fn logits(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(obs, ActionSet::all(self.sizes[3]))?;
        Ok(self.activations(obs).logits)
    }

    pub fn forward(&self, obs: &[f64], mask: ActionSet) -> Result<ActionDistribution> {
        self.check_inputs(obs, mask)?;
        let act = self.activations(obs);
        Ok(ActionDistribution {
            probs: masked_softmax(&act.logits, mask),
            legal: mask,
        })
    }

    /// Samples an action and returns it with its log-probability.
    pub fn sample_action(&self, obs: &[f64], mask: ActionSet, rng: &mut Rng) -> Result<(usize, f64)> {
        let dist = self.forward(obs, mask)?;
        let a = dist.sample(rng);
        Ok((a, dist.probs[a].ln()))
    }

    pub fn log_prob(&self, obs: &[f64], action: usize, mask: ActionSet) -> Result<f64> {
        if !mask.contains(action) {
            return Err(L2eError::InvalidArgument(format!("action {action} is masked out")));
        }
        Ok(self.forward(obs, mask)?.probs[action].ln())
    }

    pub fn logprob_grad(&self, obs: &[f64], action: usize, mask: ActionSet) -> Result<GradientVector> {
        let mut g = GradientVector::zeros_like(self);
        self.accumulate_logprob_grad(obs, action, mask, 1.0, &mut g)?;
        Ok(g)
    }

    /// Adds `weight * d log pi(action | obs) / d params` into `grad` and
    /// returns the log-probability.
    pub fn accumulate_logprob_grad(
        &self,
        obs: &[f64],
        action: usize,
        mask: ActionSet,
        weight: f64,
        grad: &mut GradientVector,
    ) -> Result<f64> {
        self.check_inputs(obs, mask)?;
        if !mask.contains(action) {
            return Err(L2eError::InvalidArgument(format!("action {action} is masked out")));
        }
        if grad.sizes != self.sizes {
            return Err(L2eError::Shape("gradient buffer does not match policy".into()));
        }
        let act = self.activations(obs);
        let probs = masked_softmax(&act.logits, mask);
        let logp = probs[action].ln();
        if weight == 0.0 {
            return Ok(logp);
        }
        let [n0, n1, n2, n3] = self.sizes;

        // d logp / d logits = onehot - p on the legal set
        let mut d3 = vec![0.0; n3];
        for a in mask.iter() {
            d3[a] = weight * ((a == action) as u8 as f64 - probs[a]);
        }
        let d2 = backprop_layer(self.layer(2), grad.layer_mut(2), &act.h2, &d3, n2, n3, true);
        let d1 = backprop_layer(self.layer(1), grad.layer_mut(1), &act.h1, &d2, n1, n2, true);
        backprop_layer(self.layer(0), grad.layer_mut(0), obs, &d1, n0, n1, false);
        Ok(logp)
    }

    /// `params -/+ step_size * grad` depending on `direction`.
    pub fn apply_step(&self, grad: &GradientVector, step_size: f64, direction: Direction) -> Result<PolicyParams> {
        if grad.sizes != self.sizes {
            return Err(L2eError::Shape("gradient does not match policy".into()));
        }
        if !grad.is_finite() {
            return Err(L2eError::NonFinite("gradient"));
        }
        let sign = match direction {
            Direction::Ascend => step_size,
            Direction::Descend => -step_size,
        };
        let mut out = self.clone();
        if sign != 0.0 {
            for (p, g) in out.data.iter_mut().zip(&grad.data) {
                *p += sign * g;
            }
        }
        Ok(out)
    }
}

struct Activations {
    h1: Vec<f64>,
    h2: Vec<f64>,
    logits: Vec<f64>,
}

fn dense(layer: (&[f64], &[f64]), x: &[f64], cols: usize) -> Vec<f64> {
    let (w, b) = layer;
    let mut out = b.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        // one-hot soccer inputs are mostly zero
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * cols..(i + 1) * cols];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
    out
}

/// `tanh` through a single `exp`, about twice as fast as the libm routine
/// and within a few ulps of it in absolute terms.
#[inline]
fn tanh(x: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

fn dense_tanh(layer: (&[f64], &[f64]), x: &[f64], cols: usize) -> Vec<f64> {
    let mut z = dense(layer, x, cols);
    z.iter_mut().for_each(|v| *v = tanh(*v));
    z
}

/// Accumulates the weight/bias gradients of one layer given the upstream
/// gradient `delta` w.r.t. its pre-activation outputs, and returns the
/// gradient w.r.t. the layer's pre-activation inputs (through tanh) when
/// `propagate` is set.
fn backprop_layer(
    layer: (&[f64], &[f64]),
    grad: (&mut [f64], &mut [f64]),
    input: &[f64],
    delta: &[f64],
    rows: usize,
    cols: usize,
    propagate: bool,
) -> Vec<f64> {
    let (w, _) = layer;
    let (gw, gb) = grad;
    for (g, d) in gb.iter_mut().zip(delta) {
        *g += d;
    }
    let mut below = if propagate { vec![0.0; rows] } else { Vec::new() };
    for i in 0..rows {
        let xi = input[i];
        let grow = &mut gw[i * cols..(i + 1) * cols];
        if xi != 0.0 {
            for (g, d) in grow.iter_mut().zip(delta) {
                *g += xi * d;
            }
        }
        if propagate {
            let wrow = &w[i * cols..(i + 1) * cols];
            let s: f64 = wrow.iter().zip(delta).map(|(a, b)| a * b).sum();
            below[i] = s * (1.0 - xi * xi);
        }
    }
    below
}

pub fn masked_softmax(logits: &[f64], mask: ActionSet) -> Vec<f64> {
    let mut probs = vec![0.0; logits.len()];
    let max = mask
        .iter()
        .map(|a| logits[a])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for a in mask.iter() {
        let e = (logits[a] - max).exp();
        probs[a] = e;
        z += e;
    }
    for a in mask.iter() {
        probs[a] /= z;
    }
    probs
}

impl GradientVector {
    pub fn zeros_like(p: &PolicyParams) -> Self {
        GradientVector {
            sizes: p.sizes,
            data: vec![0.0; p.data.len()],
        }
    }

    pub fn from_vec(like: &PolicyParams, data: Vec<f64>) -> Result<Self> {
        if data.len() != like.data.len() {
            return Err(L2eError::Shape("gradient length".into()));
        }
        Ok(GradientVector {
            sizes: like.sizes,
            data,
        })
    }

    pub fn sizes(&self) -> [usize; 4] {
        self.sizes
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let off = layer_offset(&self.sizes, l);
        let nw = self.sizes[l] * self.sizes[l + 1];
        let nb = self.sizes[l + 1];
        let (w, rest) = self.data[off..off + nw + nb].split_at_mut(nw);
        (w, rest)
    }

    /// Bias gradient of the output layer.
    pub fn head_bias(&self) -> &[f64] {
        let off = layer_offset(&self.sizes, 2) + self.sizes[2] * self.sizes[3];
        &self.data[off..off + self.sizes[3]]
    }

    pub fn add_scaled(&mut self, other: &GradientVector, k: f64) {
        debug_assert_eq!(self.sizes, other.sizes);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += k * b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|x| *x *= k);
    }

    pub fn dot(&self, other: &GradientVector) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    #[test]
    fn init_is_seeded_and_shaped() {
        let spec = GameSpec::leduc();
        let a = PolicyParams::init(&spec, &mut from_seed(3));
        let b = PolicyParams::init(&spec, &mut from_seed(3));
        assert_eq!(a, b);
        assert_eq!(a.layer_shapes(), [(7, 64), (64, 64), (64, 4)]);
        let (w, bias) = a.layer(0);
        assert!(w.iter().all(|x| x.abs() <= 1.0 / 7f64.sqrt()));
        assert!(bias.iter().all(|&x| x == 0.0));
        let soccer = PolicyParams::init(&GameSpec::soccer(), &mut from_seed(3));
        assert_eq!(soccer.layer_shapes()[2], (64, 5));
    }

    #[test]
    fn zero_init_is_uniform_over_legal() {
        let spec = GameSpec::leduc();
        let p = PolicyParams::init_scaled(&spec, &mut from_seed(1), 0.0);
        let mask = ActionSet::from_actions(&[0, 1, 3]);
        let d = p.forward(&[0.3; 7], mask).unwrap();
        for a in mask.iter() {
            assert!((d.probs[a] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(d.probs[2], 0.0);
        let all = p.forward(&[0.3; 7], ActionSet::all(4)).unwrap();
        assert!(all.probs.iter().all(|&q| q == 0.25));
    }

    #[test]
    fn softmax_cases() {
        let p = masked_softmax(&[0.0, 3f64.ln()], ActionSet::all(2));
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let p = masked_softmax(&[5.0, -2.0, 1.0], ActionSet::from_actions(&[1]));
        assert_eq!(p, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn empty_mask_and_illegal_action_are_errors() {
        let spec = GameSpec::rps();
        let p = PolicyParams::init(&spec, &mut from_seed(0));
        assert!(matches!(p.forward(&[1.0], ActionSet::EMPTY), Err(L2eError::EmptyMask)));
        let mask = ActionSet::from_actions(&[0, 2]);
        assert!(p.logprob_grad(&[1.0], 1, mask).is_err());
    }

    #[test]
    fn single_legal_action_has_zero_gradient() {
        let spec = GameSpec::leduc();
        let p = PolicyParams::init(&spec, &mut from_seed(9));
        let g = p
            .logprob_grad(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7], 2, ActionSet::from_actions(&[2]))
            .unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn head_bias_gradient_is_onehot_minus_probs() {
        let spec = GameSpec::leduc();
        let p = PolicyParams::init(&spec, &mut from_seed(4));
        let obs = [1.0, 0.0, 0.0, 0.66, 0.0, 0.5, 0.2];
        let mask = ActionSet::from_actions(&[0, 2, 3]);
        let d = p.forward(&obs, mask).unwrap();
        let g = p.logprob_grad(&obs, 3, mask).unwrap();
        let hb = g.head_bias();
        for a in 0..4 {
            let expected = if mask.contains(a) {
                (a == 3) as u8 as f64 - d.probs[a]
            } else {
                0.0
            };
            assert!((hb[a] - expected).abs() < 1e-15, "action {a}");
        }
    }

    #[test]
    fn apply_step_cases() {
        let spec = GameSpec::rps();
        let p = PolicyParams::init(&spec, &mut from_seed(2));
        let g = p.logprob_grad(&[1.0], 1, ActionSet::all(3)).unwrap();
        assert_eq!(p.apply_step(&g, 0.0, Direction::Descend).unwrap(), p);
        let mut neg = g.clone();
        neg.scale(-1.0);
        let back = p
            .apply_step(&g, 0.3, Direction::Ascend)
            .unwrap()
            .apply_step(&neg, 0.3, Direction::Ascend)
            .unwrap();
        for (a, b) in back.as_slice().iter().zip(p.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut bad = g.clone();
        bad.as_mut_slice()[0] = f64::NAN;
        assert!(p.apply_step(&bad, 0.1, Direction::Ascend).is_err());
        // input untouched
        assert_eq!(p, PolicyParams::init(&spec, &mut from_seed(2)));
    }

    #[test]
    fn descend_on_quadratic_probe() {
        // L(theta) = theta^2 / 2 has gradient theta, so one step gives theta * (1 - step)
        let mut p = PolicyParams::with_shape(GameId::Rps, [1, 1, 1, 1]);
        p.as_mut_slice().iter_mut().enumerate().for_each(|(i, x)| *x = 0.5 + i as f64);
        let g = GradientVector::from_vec(&p, p.as_slice().to_vec()).unwrap();
        let q = p.apply_step(&g, 0.25, Direction::Descend).unwrap();
        for (a, b) in q.as_slice().iter().zip(p.as_slice()) {
            assert!((a - b * 0.75).abs() < 1e-15);
        }
    }
}
