//! Fully connected networks with reverse-mode gradients.
//!
//! Parameters live in one flat `Vec<f64>` laid out layer by layer (row-major
//! weights, then biases), which makes the optimizer, polyak averaging, and
//! serialization straightforward. Hidden units use softplus, a smooth
//! rectifier whose derivative is recoverable from its own output; actor
//! networks add a tanh squash rescaled onto the action box so outputs stay
//! strictly inside bounds.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;
use rand::Rng;

use crate::{Error, Result};

/// What the final affine layer's output passes through.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputTransform {
    Identity,
    /// tanh followed by an affine map onto `[low, high]` per dimension.
    /// Outputs lie strictly inside the box; zero-width dimensions are
    /// constant with zero gradient.
    Bounded { low: Vec<f64>, high: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    output: OutputTransform,
}

/// Post-activation values per layer for one batch, reused across updates to
/// avoid reallocation. `acts[0]` is the input itself.
#[derive(Debug, Default, Clone)]
pub struct ForwardCache {
    batch: usize,
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn new() -> Self {
        ForwardCache::default()
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-libm::fabs(z)))
}

/// softplus'(z) = sigmoid(z), computed from y = softplus(z) as 1 - e^{-y}.
fn softplus_derivative_from_output(y: f64) -> f64 {
    1.0 - libm::exp(-y)
}

impl Mlp {
    /// Builds a network with the given layer sizes and uniform fan-in
    /// initialization: weights and biases drawn from U(-1/sqrt(n_in),
    /// 1/sqrt(n_in)).
    pub fn new<R: Rng>(
        sizes: &[usize],
        output: OutputTransform,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::config("network needs at least input and output sizes"));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::config("layer sizes must be positive"));
        }
        if let OutputTransform::Bounded { low, high } = &output {
            let out = *sizes.last().expect("checked above");
            if low.len() != out || high.len() != out {
                return Err(Error::DimensionMismatch { expected: out, got: low.len().min(high.len()) });
            }
            if low
                .iter()
                .zip(high)
                .any(|(l, h)| !l.is_finite() || !h.is_finite() || l > h)
            {
                return Err(Error::config("output bounds must be finite with low <= high"));
            }
        }
        let n_params: usize =
            sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        let mut params = Vec::with_capacity(n_params);
        for w in sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let bound = 1.0 / libm::sqrt(n_in as f64);
            for _ in 0..n_out * (n_in + 1) {
                params.push(bound * (2.0 * rng.gen::<f64>() - 1.0));
            }
        }
        Ok(Mlp { sizes: sizes.to_vec(), params, output })
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn output_transform(&self) -> &OutputTransform {
        &self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Flat offset of layer `l`'s weight block; biases follow the weights.
    fn layer_offset(&self, layer: usize) -> usize {
        self.sizes
            .windows(2)
            .take(layer)
            .map(|w| w[1] * (w[0] + 1))
            .sum()
    }

    fn apply_output_transform(&self, raw: &mut [f64]) {
        if let OutputTransform::Bounded { low, high } = &self.output {
            for (z, (l, h)) in raw.iter_mut().zip(low.iter().zip(high)) {
                let center = 0.5 * (l + h);
                let scale = 0.5 * (h - l);
                *z = center + scale * libm::tanh(*z);
            }
        }
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.input_size(), "input size mismatch");
        let mut current = input.to_vec();
        for (layer, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let offset = self.layer_offset(layer);
            let weights = &self.params[offset..offset + n_out * n_in];
            let biases = &self.params[offset + n_out * n_in..offset + n_out * (n_in + 1)];
            let mut next = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let row = &weights[o * n_in..(o + 1) * n_in];
                let mut z = biases[o];
                for (wi, xi) in row.iter().zip(&current) {
                    z += wi * xi;
                }
                next.push(if layer + 1 < self.n_layers() { softplus(z) } else { z });
            }
            current = next;
        }
        self.apply_output_transform(&mut current);
        current
    }

    /// Batched forward pass caching every post-activation for [`Self::backward_batch`].
    /// `inputs` is row-major `batch x input_size`; outputs land in the cache's
    /// last activation block (see [`Self::output_of`]).
    pub fn forward_batch(&self, inputs: &[f64], batch: usize, cache: &mut ForwardCache) {
        assert!(batch > 0, "batch must be non-empty");
        assert_eq!(inputs.len(), batch * self.input_size(), "input batch size mismatch");
        cache.batch = batch;
        cache.acts.resize(self.n_layers() + 1, Vec::new());
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(inputs);

        for (layer, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let offset = self.layer_offset(layer);
            let weights = &self.params[offset..offset + n_out * n_in];
            let biases = &self.params[offset + n_out * n_in..offset + n_out * (n_in + 1)];
            let last = layer + 1 == self.n_layers();

            let (done, rest) = cache.acts.split_at_mut(layer + 1);
            let prev = &done[layer];
            let out = &mut rest[0];
            out.clear();
            out.resize(batch * n_out, 0.0);
            for b in 0..batch {
                let x = &prev[b * n_in..(b + 1) * n_in];
                let y = &mut out[b * n_out..(b + 1) * n_out];
                for o in 0..n_out {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    let mut z = biases[o];
                    for (wi, xi) in row.iter().zip(x) {
                        z += wi * xi;
                    }
                    y[o] = if last { z } else { softplus(z) };
                }
                if last {
                    self.apply_output_transform(y);
                }
            }
        }
    }

    /// Network outputs from the most recent [`Self::forward_batch`] call.
    pub fn output_of<'c>(&self, cache: &'c ForwardCache) -> &'c [f64] {
        &cache.acts[self.n_layers()]
    }

    /// Reverse-mode sweep from `d_output` (gradient of a scalar loss w.r.t.
    /// the network output, row-major `batch x output_size`).
    ///
    /// Accumulates parameter gradients into `grads` (same layout as
    /// [`Self::params`]) when given, and writes the loss gradient w.r.t. the
    /// inputs into `d_input` when given. Gradients are sums over the batch;
    /// the caller bakes any 1/batch factor into `d_output`.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        d_output: &[f64],
        mut grads: Option<&mut [f64]>,
        d_input: Option<&mut [f64]>,
    ) {
        let batch = cache.batch;
        assert!(batch > 0, "forward_batch must run before backward_batch");
        assert_eq!(d_output.len(), batch * self.output_size(), "d_output size mismatch");
        if let Some(g) = grads.as_deref() {
            assert_eq!(g.len(), self.params.len(), "gradient buffer size mismatch");
        }

        let mut d_post = d_output.to_vec();
        let mut d_prev: Vec<f64> = Vec::new();
        for layer in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let offset = self.layer_offset(layer);
            let weights = &self.params[offset..offset + n_out * n_in];
            let post = &cache.acts[layer + 1];
            let prev = &cache.acts[layer];

            // d_post currently holds dL/d(activation); fold in the
            // activation derivative to get dL/d(pre-activation) in place.
            if layer + 1 == self.n_layers() {
                if let OutputTransform::Bounded { low, high } = &self.output {
                    for b in 0..batch {
                        for o in 0..n_out {
                            let scale = 0.5 * (high[o] - low[o]);
                            let d = &mut d_post[b * n_out + o];
                            if scale == 0.0 {
                                *d = 0.0;
                            } else {
                                let t = (post[b * n_out + o] - 0.5 * (low[o] + high[o])) / scale;
                                *d *= scale * (1.0 - t * t);
                            }
                        }
                    }
                }
            } else {
                for (d, y) in d_post.iter_mut().zip(post) {
                    *d *= softplus_derivative_from_output(*y);
                }
            }

            if let Some(g) = grads.as_deref_mut() {
                let (dw, db) = g[offset..offset + n_out * (n_in + 1)].split_at_mut(n_out * n_in);
                for b in 0..batch {
                    let x = &prev[b * n_in..(b + 1) * n_in];
                    let dz = &d_post[b * n_out..(b + 1) * n_out];
                    for o in 0..n_out {
                        let row = &mut dw[o * n_in..(o + 1) * n_in];
                        let d = dz[o];
                        for (wi, xi) in row.iter_mut().zip(x) {
                            *wi += d * xi;
                        }
                        db[o] += d;
                    }
                }
            }

            let need_d_prev = layer > 0 || d_input.is_some();
            if need_d_prev {
                d_prev.clear();
                d_prev.resize(batch * n_in, 0.0);
                for b in 0..batch {
                    let dz = &d_post[b * n_out..(b + 1) * n_out];
                    let dx = &mut d_prev[b * n_in..(b + 1) * n_in];
                    for o in 0..n_out {
                        let row = &weights[o * n_in..(o + 1) * n_in];
                        let d = dz[o];
                        for (xi, wi) in dx.iter_mut().zip(row) {
                            *xi += d * wi;
                        }
                    }
                }
                core::mem::swap(&mut d_post, &mut d_prev);
            }
        }
        if let Some(d_in) = d_input {
            assert_eq!(d_in.len(), batch * self.input_size(), "d_input size mismatch");
            d_in.copy_from_slice(&d_post);
        }
    }

    /// Serializes sizes, output transform, and parameters to a line-oriented
    /// text format; floats print with shortest round-trip precision.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("mlp v1\nsizes");
        for size in &self.sizes {
            let _ = write!(s, " {size}");
        }
        s.push_str("\nhidden softplus\n");
        match &self.output {
            OutputTransform::Identity => s.push_str("output identity\n"),
            OutputTransform::Bounded { low, high } => {
                s.push_str("output bounded\nlow");
                for v in low {
                    let _ = write!(s, " {v}");
                }
                s.push_str("\nhigh");
                for v in high {
                    let _ = write!(s, " {v}");
                }
                s.push('\n');
            }
        }
        let _ = writeln!(s, "params {}", self.params.len());
        for p in &self.params {
            let _ = writeln!(s, "{p}");
        }
        s
    }

    /// Parses the [`Self::to_text`] format, validating structure and values.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next_line = |expect: &str| -> Result<(usize, &str)> {
            lines.next().map(|(i, l)| (i + 1, l.trim())).ok_or_else(|| {
                Error::SnapshotFormat {
                    line: 0,
                    detail: alloc::format!("unexpected end of input, expected {expect}"),
                }
            })
        };
        let fail = |line: usize, detail: alloc::string::String| Error::SnapshotFormat { line, detail };

        let (n, header) = next_line("header")?;
        if header != "mlp v1" {
            return Err(fail(n, alloc::format!("expected 'mlp v1', got '{header}'")));
        }
        let (n, sizes_line) = next_line("sizes")?;
        let mut tokens = sizes_line.split_whitespace();
        if tokens.next() != Some("sizes") {
            return Err(fail(n, "expected 'sizes ...'".into()));
        }
        let sizes = tokens
            .map(|t| t.parse::<usize>())
            .collect::<core::result::Result<Vec<_>, _>>()
            .map_err(|e| fail(n, alloc::format!("bad size: {e}")))?;
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(fail(n, "need at least two positive sizes".into()));
        }
        let (n, hidden) = next_line("hidden")?;
        if hidden != "hidden softplus" {
            return Err(fail(n, alloc::format!("unsupported hidden activation '{hidden}'")));
        }
        let (n, output_line) = next_line("output")?;
        let parse_bounds = |line: usize, text: &str, tag: &str| -> Result<Vec<f64>> {
            let mut tokens = text.split_whitespace();
            if tokens.next() != Some(tag) {
                return Err(fail(line, alloc::format!("expected '{tag} ...'")));
            }
            tokens
                .map(|t| t.parse::<f64>())
                .collect::<core::result::Result<Vec<_>, _>>()
                .map_err(|e| fail(line, alloc::format!("bad bound: {e}")))
        };
        let output = match output_line {
            "output identity" => OutputTransform::Identity,
            "output bounded" => {
                let (n_low, low_line) = next_line("low bounds")?;
                let low = parse_bounds(n_low, low_line, "low")?;
                let (n_high, high_line) = next_line("high bounds")?;
                let high = parse_bounds(n_high, high_line, "high")?;
                let out = sizes[sizes.len() - 1];
                if low.len() != out || high.len() != out {
                    return Err(fail(n_high, "bound lengths disagree with output size".into()));
                }
                if low.iter().zip(&high).any(|(l, h)| !l.is_finite() || !h.is_finite() || l > h) {
                    return Err(fail(n_high, "bounds must be finite with low <= high".into()));
                }
                OutputTransform::Bounded { low, high }
            }
            other => return Err(fail(n, alloc::format!("unsupported output transform '{other}'"))),
        };
        let (n, count_line) = next_line("params count")?;
        let count = count_line
            .strip_prefix("params ")
            .and_then(|c| c.parse::<usize>().ok())
            .ok_or_else(|| fail(n, "expected 'params <count>'".into()))?;
        let expected: usize = sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        if count != expected {
            return Err(fail(n, alloc::format!("expected {expected} params, header says {count}")));
        }
        let mut params = Vec::with_capacity(count);
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|e| fail(i + 1, alloc::format!("bad parameter: {e}")))?;
            if !v.is_finite() {
                return Err(fail(i + 1, alloc::format!("non-finite parameter {v}")));
            }
            params.push(v);
        }
        if params.len() != count {
            return Err(Error::SnapshotFormat {
                line: 0,
                detail: alloc::format!("expected {count} params, found {}", params.len()),
            });
        }
        Ok(Mlp { sizes, params, output })
    }
}

/// A network is a deterministic observation-to-action map, so a trained actor
/// can be used directly wherever a policy is expected. Its bounded output
/// transform keeps actions inside their box.
impl crate::decision::Policy for Mlp {
    fn action(&self, observation: &[f64]) -> Vec<f64> {
        self.forward(observation)
    }
}

/// Moves `target` toward `online`: `target = (1 - tau) * target + tau * online`.
/// Written in the convex-combination form so `tau = 1` copies bit-exactly.
pub fn polyak_average(target: &mut Mlp, online: &Mlp, tau: f64) {
    assert_eq!(target.sizes, online.sizes, "polyak requires identical architectures");
    assert!((0.0..=1.0).contains(&tau), "tau must lie in [0, 1]");
    for (t, o) in target.params.iter_mut().zip(&online.params) {
        *t = (1.0 - tau) * *t + tau * *o;
    }
}

/// Maximum relative error between reverse-mode and central finite-difference
/// gradients of the mean squared error on one batch. A verification utility:
/// values above ~1e-4 indicate a broken gradient path.
pub fn mse_gradient_check(
    mlp: &mut Mlp,
    inputs: &[f64],
    targets: &[f64],
    batch: usize,
) -> f64 {
    let out_size = mlp.output_size();
    assert_eq!(targets.len(), batch * out_size, "target batch size mismatch");

    let loss = |mlp: &Mlp, cache: &mut ForwardCache| -> f64 {
        mlp.forward_batch(inputs, batch, cache);
        let out = mlp.output_of(cache);
        out.iter().zip(targets).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / batch as f64
    };

    let mut cache = ForwardCache::new();
    loss(mlp, &mut cache);
    let d_output: Vec<f64> = mlp
        .output_of(&cache)
        .iter()
        .zip(targets)
        .map(|(o, t)| 2.0 * (o - t) / batch as f64)
        .collect();
    let mut analytic = alloc::vec![0.0; mlp.params().len()];
    mlp.backward_batch(&cache, &d_output, Some(&mut analytic), None);

    let step = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..mlp.params().len() {
        let saved = mlp.params()[i];
        mlp.params_mut()[i] = saved + step;
        let up = loss(mlp, &mut cache);
        mlp.params_mut()[i] = saved - step;
        let down = loss(mlp, &mut cache);
        mlp.params_mut()[i] = saved;
        let numeric = (up - down) / (2.0 * step);
        let denom = libm::fabs(analytic[i]).max(libm::fabs(numeric));
        if denom < 1e-10 {
            continue;
        }
        worst = worst.max(libm::fabs(analytic[i] - numeric) / denom);
    }
    worst
}
