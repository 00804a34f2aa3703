//! Stacked LSTM with a linear head, flat parameter storage and analytic BPTT.
//!
//! Gate order within each layer block is (input, forget, cell, output).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct LayerOffsets {
    n_in: usize,
    hidden: usize,
    w: usize,
    u: usize,
    b: usize,
}

/// Shapes and flat-vector offsets of every parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayout {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    /// Whether a state-independent log-std block follows the head.
    pub log_std: bool,
    #[serde(skip)]
    layers: Vec<LayerOffsets>,
    #[serde(skip)]
    head_w: usize,
    #[serde(skip)]
    head_b: usize,
    #[serde(skip)]
    log_std_off: usize,
    #[serde(skip)]
    total: usize,
}

impl LstmLayout {
    pub fn new(input: usize, hidden: &[usize], output: usize, log_std: bool) -> Result<Self> {
        if input == 0 || output == 0 || hidden.is_empty() || hidden.contains(&0) {
            return Err(invalid(
                "LSTM dimensions must be positive with at least one layer",
            ));
        }
        let mut layers = Vec::with_capacity(hidden.len());
        let mut off = 0;
        let mut n_in = input;
        for &h in hidden {
            let w = off;
            let u = w + 4 * h * n_in;
            let b = u + 4 * h * h;
            off = b + 4 * h;
            layers.push(LayerOffsets {
                n_in,
                hidden: h,
                w,
                u,
                b,
            });
            n_in = h;
        }
        let head_w = off;
        let head_b = head_w + output * n_in;
        let log_std_off = head_b + output;
        let total = log_std_off + if log_std { output } else { 0 };
        Ok(Self {
            input,
            hidden: hidden.to_vec(),
            output,
            log_std,
            layers,
            head_w,
            head_b,
            log_std_off,
            total,
        })
    }

    /// Rebuild offsets after deserialization.
    pub fn rebuilt(&self) -> Result<Self> {
        Self::new(self.input, &self.hidden, self.output, self.log_std)
    }

    pub fn num_params(&self) -> usize {
        self.total
    }

    pub fn log_std_range(&self) -> Option<std::ops::Range<usize>> {
        self.log_std
            .then(|| self.log_std_off..self.log_std_off + self.output)
    }

    pub fn head_bias_range(&self) -> std::ops::Range<usize> {
        self.head_b..self.head_b + self.output
    }

    fn last_hidden(&self) -> usize {
        *self.hidden.last().expect("at least one layer")
    }
}

/// Recurrent state `(h, c)` for every layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl HiddenState {
    pub fn zeros(layout: &LstmLayout) -> Self {
        Self {
            h: layout.hidden.iter().map(|&n| vec![0.0; n]).collect(),
            c: layout.hidden.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.h
            .iter()
            .chain(&self.c)
            .all(|v| v.iter().all(|&x| x == 0.0))
    }

    pub fn zero(&mut self) {
        for v in self.h.iter_mut().chain(self.c.iter_mut()) {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    fn matches(&self, layout: &LstmLayout) -> bool {
        self.h.len() == layout.hidden.len()
            && self.c.len() == layout.hidden.len()
            && layout
                .hidden
                .iter()
                .zip(&self.h)
                .zip(&self.c)
                .all(|((&n, h), c)| h.len() == n && c.len() == n)
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations cached for one layer at one time step.
#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gates, `4 * hidden`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Forward activations of a whole sequence, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    /// `steps[t][layer]`
    steps: Vec<Vec<StepCache>>,
    pub outputs: Vec<Vec<f64>>,
    pub final_state: HiddenState,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

fn layer_step(
    p: &[f64],
    lo: &LayerOffsets,
    x: &[f64],
    h: &mut [f64],
    c: &mut [f64],
    cache: Option<&mut Vec<StepCache>>,
) {
    let n = lo.hidden;
    let mut a = p[lo.b..lo.b + 4 * n].to_vec();
    for (r, ar) in a.iter_mut().enumerate() {
        let wrow = &p[lo.w + r * lo.n_in..lo.w + (r + 1) * lo.n_in];
        let urow = &p[lo.u + r * n..lo.u + (r + 1) * n];
        let mut s = 0.0;
        for (w, xv) in wrow.iter().zip(x) {
            s += w * xv;
        }
        for (u, hv) in urow.iter().zip(h.iter()) {
            s += u * hv;
        }
        *ar += s;
    }
    let (h_prev, c_prev) = match cache {
        Some(_) => (h.to_vec(), c.to_vec()),
        None => (Vec::new(), Vec::new()),
    };
    let mut tanh_c = vec![0.0; n];
    for k in 0..n {
        let i = sigmoid(a[k]);
        let f = sigmoid(a[n + k]);
        let g = a[2 * n + k].tanh();
        let o = sigmoid(a[3 * n + k]);
        a[k] = i;
        a[n + k] = f;
        a[2 * n + k] = g;
        a[3 * n + k] = o;
        c[k] = f * c[k] + i * g;
        tanh_c[k] = c[k].tanh();
        h[k] = o * tanh_c[k];
    }
    if let Some(cache) = cache {
        cache.push(StepCache {
            x: x.to_vec(),
            h_prev,
            c_prev,
            gates: a,
            tanh_c,
        });
    }
}

fn head(p: &[f64], layout: &LstmLayout, h: &[f64]) -> Vec<f64> {
    let nh = layout.last_hidden();
    (0..layout.output)
        .map(|o| {
            let row = &p[layout.head_w + o * nh..layout.head_w + (o + 1) * nh];
            p[layout.head_b + o] + row.iter().zip(h).map(|(w, x)| w * x).sum::<f64>()
        })
        .collect()
}

fn check_params(layout: &LstmLayout, params: &[f64]) -> Result<()> {
    if params.len() != layout.num_params() {
        return Err(invalid(format!(
            "parameter vector has {} entries, layout needs {}",
            params.len(),
            layout.num_params()
        )));
    }
    Ok(())
}

/// One step: advances `state` and returns the head output.
pub fn step(
    layout: &LstmLayout,
    params: &[f64],
    state: &mut HiddenState,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_params(layout, params)?;
    if x.len() != layout.input {
        return Err(invalid(format!(
            "input has {} entries, expected {}",
            x.len(),
            layout.input
        )));
    }
    if !state.matches(layout) {
        return Err(invalid("hidden state does not match the layer sizes"));
    }
    let mut input = x.to_vec();
    for (l, lo) in layout.layers.iter().enumerate() {
        layer_step(params, lo, &input, &mut state.h[l], &mut state.c[l], None);
        input.clone_from(&state.h[l]);
    }
    Ok(head(params, layout, &input))
}

/// Run a sequence from `init`, caching every activation for [`backward`].
pub fn forward(
    layout: &LstmLayout,
    params: &[f64],
    init: &HiddenState,
    xs: &[Vec<f64>],
) -> Result<Trace> {
    check_params(layout, params)?;
    if !init.matches(layout) {
        return Err(invalid("hidden state does not match the layer sizes"));
    }
    let mut state = init.clone();
    let mut steps = Vec::with_capacity(xs.len());
    let mut outputs = Vec::with_capacity(xs.len());
    for x in xs {
        if x.len() != layout.input {
            return Err(invalid(format!(
                "input has {} entries, expected {}",
                x.len(),
                layout.input
            )));
        }
        let mut caches = Vec::with_capacity(layout.layers.len());
        let mut input = x.clone();
        for (l, lo) in layout.layers.iter().enumerate() {
            layer_step(
                params,
                lo,
                &input,
                &mut state.h[l],
                &mut state.c[l],
                Some(&mut caches),
            );
            input.clone_from(&state.h[l]);
        }
        outputs.push(head(params, layout, &input));
        steps.push(caches);
    }
    Ok(Trace {
        steps,
        outputs,
        final_state: state,
    })
}

/// Accumulate into `grad` the gradient of a scalar loss whose derivative with
/// respect to `trace.outputs[t]` is `d_out[t]`. The initial hidden state is
/// treated as a constant.
pub fn backward(
    layout: &LstmLayout,
    params: &[f64],
    trace: &Trace,
    d_out: &[Vec<f64>],
    grad: &mut [f64],
) -> Result<()> {
    check_params(layout, params)?;
    if grad.len() != params.len() {
        return Err(invalid(
            "gradient buffer does not match the parameter vector",
        ));
    }
    if d_out.len() != trace.len() {
        return Err(invalid(format!(
            "{} upstream gradients for a {}-step trace",
            d_out.len(),
            trace.len()
        )));
    }
    let nl = layout.layers.len();
    let nh = layout.last_hidden();
    let mut dh_next: Vec<Vec<f64>> = layout.hidden.iter().map(|&n| vec![0.0; n]).collect();
    let mut dc_next: Vec<Vec<f64>> = layout.hidden.iter().map(|&n| vec![0.0; n]).collect();
    let mut da = Vec::new();
    for t in (0..trace.len()).rev() {
        let dy = &d_out[t];
        if dy.len() != layout.output {
            return Err(invalid("upstream gradient has the wrong width"));
        }
        let caches = &trace.steps[t];
        // head
        let h_top = if t + 1 < trace.len() {
            &trace.steps[t + 1][nl - 1].h_prev
        } else {
            &trace.final_state.h[nl - 1]
        };
        let mut dh = dh_next[nl - 1].clone();
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad[layout.head_b + o] += g;
            let row = layout.head_w + o * nh;
            for k in 0..nh {
                grad[row + k] += g * h_top[k];
                dh[k] += g * params[row + k];
            }
        }
        for l in (0..nl).rev() {
            let lo = &layout.layers[l];
            let n = lo.hidden;
            let sc = &caches[l];
            da.clear();
            da.resize(4 * n, 0.0);
            let dc_prev = &mut dc_next[l];
            for k in 0..n {
                let (i, f, g, o) = (
                    sc.gates[k],
                    sc.gates[n + k],
                    sc.gates[2 * n + k],
                    sc.gates[3 * n + k],
                );
                let tc = sc.tanh_c[k];
                let d_o = dh[k] * tc;
                let dc = dc_prev[k] + dh[k] * o * (1.0 - tc * tc);
                da[k] = dc * g * i * (1.0 - i);
                da[n + k] = dc * sc.c_prev[k] * f * (1.0 - f);
                da[2 * n + k] = dc * i * (1.0 - g * g);
                da[3 * n + k] = d_o * o * (1.0 - o);
                dc_prev[k] = dc * f;
            }
            let mut dx = vec![0.0; lo.n_in];
            let dhp = &mut dh_next[l];
            dhp.iter_mut().for_each(|v| *v = 0.0);
            for (r, &d) in da.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad[lo.b + r] += d;
                let w = lo.w + r * lo.n_in;
                for j in 0..lo.n_in {
                    grad[w + j] += d * sc.x[j];
                    dx[j] += d * params[w + j];
                }
                let u = lo.u + r * n;
                for j in 0..n {
                    grad[u + j] += d * sc.h_prev[j];
                    dhp[j] += d * params[u + j];
                }
            }
            if l > 0 {
                dh = dx;
                for (a, b) in dh.iter_mut().zip(&dh_next[l - 1]) {
                    *a += b;
                }
            }
        }
    }
    Ok(())
}

/// Parameter initialisation: orthogonal recurrent blocks, scaled Gaussian input
/// weights, forget-gate bias 1, small head weights.
pub fn init_params<R: Rng + ?Sized>(layout: &LstmLayout, rng: &mut R, head_gain: f64) -> Vec<f64> {
    let mut p = vec![0.0; layout.num_params()];
    for lo in &layout.layers {
        let n = lo.hidden;
        let sd = 1.0 / (lo.n_in as f64).sqrt();
        for v in &mut p[lo.w..lo.w + 4 * n * lo.n_in] {
            let z: f64 = StandardNormal.sample(rng);
            *v = sd * z;
        }
        for gate in 0..4 {
            let q = orthogonal(n, rng);
            p[lo.u + gate * n * n..lo.u + (gate + 1) * n * n].copy_from_slice(&q);
        }
        for v in &mut p[lo.b + n..lo.b + 2 * n] {
            *v = 1.0;
        }
    }
    let nh = layout.last_hidden();
    let sd = head_gain / (nh as f64).sqrt();
    for v in &mut p[layout.head_w..layout.head_w + layout.output * nh] {
        let z: f64 = StandardNormal.sample(rng);
        *v = sd * z;
    }
    p
}

/// Random `n x n` orthogonal matrix (row-major) by Gram-Schmidt.
fn orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut m: Vec<Vec<f64>> = Vec::with_capacity(n);
    while m.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for u in &m {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(u) {
                *a -= d * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            m.push(v);
        }
    }
    m.concat()
}
