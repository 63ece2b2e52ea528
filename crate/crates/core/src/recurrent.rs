//! LSTM cell, bidirectional composition and backpropagation through time.
//!
//! Gate equations, for k ∈ {f, i, c, o}:
//!
//! ```text
//! f_t = σ(W_f x_t + U_f h_{t-1} + b_f)
//! i_t = σ(W_i x_t + U_i h_{t-1} + b_i)
//! c̃_t = tanh(W_c x_t + U_c h_{t-1} + b_c)
//! c_t = i_t ⊙ c̃_t + f_t ⊙ c_{t-1}
//! o_t = σ(W_o x_t + U_o h_{t-1} + b_o)
//! h_t = o_t ⊙ tanh(c_t)
//! ```
//!
//! Masked (padding) steps copy the previous state unchanged. The backward
//! direction reads only the valid positions, in reverse order, so its hidden
//! state at padding positions is zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::{sigmoid_scalar, Matrix, Rng};

pub const FORGET: usize = 0;
pub const INPUT: usize = 1;
pub const CANDIDATE: usize = 2;
pub const OUTPUT: usize = 3;
pub const GATE_NAMES: [&str; 4] = ["f", "i", "c", "o"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecurrentError {
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    Shape {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("cache does not match this backward call: {0}")]
    StaleCache(String),
}

fn shape_err(context: &'static str, expected: (usize, usize), found: (usize, usize)) -> RecurrentError {
    RecurrentError::Shape {
        context,
        expected,
        found,
    }
}

/// Weights of one gate: `W` (l×d), `U` (l×l), `b` (l).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
}

/// Parameters of one LSTM direction, gates ordered f, i, c, o.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    input_size: usize,
    hidden_size: usize,
    pub gates: [GateParams; 4],
}

impl LstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let gate = || GateParams {
            w: Matrix::zeros(hidden_size, input_size),
            u: Matrix::zeros(hidden_size, hidden_size),
            b: vec![0.0; hidden_size],
        };
        Self {
            input_size,
            hidden_size,
            gates: [gate(), gate(), gate(), gate()],
        }
    }

    /// W, U uniform in [−1/√l, 1/√l]; biases zero except the forget bias, which starts at 1.
    pub fn init(input_size: usize, hidden_size: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(input_size, hidden_size);
        let bound = 1.0 / (hidden_size as f64).sqrt();
        for g in &mut p.gates {
            rng.fill_uniform(g.w.as_mut_slice(), -bound, bound);
            rng.fill_uniform(g.u.as_mut_slice(), -bound, bound);
        }
        p.gates[FORGET].b.iter_mut().for_each(|b| *b = 1.0);
        p
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn validate(&self) -> Result<(), RecurrentError> {
        let (l, d) = (self.hidden_size, self.input_size);
        for g in &self.gates {
            if g.w.shape() != (l, d) {
                return Err(shape_err("W", (l, d), g.w.shape()));
            }
            if g.u.shape() != (l, l) {
                return Err(shape_err("U", (l, l), g.u.shape()));
            }
            if g.b.len() != l {
                return Err(shape_err("b", (l, 1), (g.b.len(), 1)));
            }
        }
        Ok(())
    }

    /// Flat views of every tensor in a fixed order: per gate W, U, b.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.gates
            .iter()
            .flat_map(|g| [g.w.as_slice(), g.u.as_slice(), g.b.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.gates
            .iter_mut()
            .flat_map(|g| [g.w.as_mut_slice(), g.u.as_mut_slice(), g.b.as_mut_slice()])
            .collect()
    }

    pub fn tensor_names(prefix: &str) -> Vec<String> {
        GATE_NAMES
            .iter()
            .flat_map(|g| ["W", "U", "b"].map(|k| format!("{prefix}.{k}_{g}")))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        Self {
            h: vec![0.0; hidden_size],
            c: vec![0.0; hidden_size],
        }
    }
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

pub fn lstm_cell_step(
    params: &LstmParams,
    x: &[f64],
    prev: &LstmState,
) -> Result<(LstmState, CellCache), RecurrentError> {
    let (l, d) = (params.hidden_size, params.input_size);
    if x.len() != d {
        return Err(shape_err("x_t", (d, 1), (x.len(), 1)));
    }
    if prev.h.len() != l || prev.c.len() != l {
        return Err(shape_err("previous state", (l, 1), (prev.h.len(), 1)));
    }
    Ok(cell_step(params, x, prev))
}

fn gate_preactivation(gate: &GateParams, x: &[f64], h_prev: &[f64]) -> Vec<f64> {
    let mut z = gate.b.clone();
    gate.w.matvec_acc(x, &mut z);
    gate.u.matvec_acc(h_prev, &mut z);
    z
}

fn cell_step(params: &LstmParams, x: &[f64], prev: &LstmState) -> (LstmState, CellCache) {
    let act = |k: usize, f: fn(f64) -> f64| -> Vec<f64> {
        gate_preactivation(&params.gates[k], x, &prev.h)
            .into_iter()
            .map(f)
            .collect()
    };
    let f = act(FORGET, sigmoid_scalar);
    let i = act(INPUT, sigmoid_scalar);
    let g = act(CANDIDATE, f64::tanh);
    let o = act(OUTPUT, sigmoid_scalar);
    let c: Vec<f64> = (0..params.hidden_size)
        .map(|j| i[j] * g[j] + f[j] * prev.c[j])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
    let cache = CellCache {
        x: x.to_vec(),
        h_prev: prev.h.clone(),
        c_prev: prev.c.clone(),
        f,
        i,
        g,
        o,
        tanh_c,
    };
    (LstmState { h, c }, cache)
}

/// Per-step states and caches of one direction. `caches[t]` is `None` for masked steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmTrace {
    pub states: Vec<LstmState>,
    pub caches: Vec<Option<CellCache>>,
    input_size: usize,
    hidden_size: usize,
}

impl LstmTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

fn run_direction<'a>(
    params: &LstmParams,
    inputs: impl Iterator<Item = (&'a [f64], bool)>,
) -> LstmTrace {
    let mut prev = LstmState::zeros(params.hidden_size);
    let mut states = Vec::new();
    let mut caches = Vec::new();
    for (x, valid) in inputs {
        if valid {
            let (next, cache) = cell_step(params, x, &prev);
            prev = next;
            caches.push(Some(cache));
        } else {
            caches.push(None);
        }
        states.push(prev.clone());
    }
    LstmTrace {
        states,
        caches,
        input_size: params.input_size,
        hidden_size: params.hidden_size,
    }
}

/// Runs the cell over the columns of `x` (d×T) from a zero state.
pub fn lstm_forward(
    params: &LstmParams,
    x: &Matrix,
    mask: &[bool],
) -> Result<LstmTrace, RecurrentError> {
    params.validate()?;
    if x.rows() != params.input_size || x.cols() != mask.len() {
        return Err(shape_err("X", (params.input_size, mask.len()), x.shape()));
    }
    let columns: Vec<Vec<f64>> = (0..x.cols()).map(|t| x.column(t)).collect();
    Ok(run_direction(
        params,
        columns.iter().map(Vec::as_slice).zip(mask.iter().copied()),
    ))
}

/// Reverse-mode pass over one direction. `dh[t]` is ∂L/∂h_t coming from above.
/// Returns parameter gradients and ∂L/∂x_t for every step (zero on masked steps).
pub fn lstm_backward(
    params: &LstmParams,
    trace: &LstmTrace,
    dh: &[Vec<f64>],
) -> Result<(LstmParams, Vec<Vec<f64>>), RecurrentError> {
    let (l, d) = (params.hidden_size, params.input_size);
    if trace.hidden_size != l || trace.input_size != d {
        return Err(RecurrentError::StaleCache(format!(
            "trace built for (l={}, d={}), parameters are (l={l}, d={d})",
            trace.hidden_size, trace.input_size
        )));
    }
    if dh.len() != trace.len() {
        return Err(RecurrentError::StaleCache(format!(
            "trace has {} steps, upstream gradient has {}",
            trace.len(),
            dh.len()
        )));
    }
    let mut grads = LstmParams::zeros(d, l);
    let mut dx = vec![vec![0.0; d]; trace.len()];
    let mut dh_carry = vec![0.0; l];
    let mut dc_carry = vec![0.0; l];
    let mut dz = [vec![0.0; l], vec![0.0; l], vec![0.0; l], vec![0.0; l]];
    for t in (0..trace.len()).rev() {
        if dh[t].len() != l {
            return Err(shape_err("dH column", (l, 1), (dh[t].len(), 1)));
        }
        for (c, g) in dh_carry.iter_mut().zip(&dh[t]) {
            *c += g;
        }
        let Some(cache) = &trace.caches[t] else {
            continue;
        };
        for j in 0..l {
            let dhj = dh_carry[j];
            let dc = dc_carry[j] + dhj * cache.o[j] * (1.0 - cache.tanh_c[j] * cache.tanh_c[j]);
            dz[OUTPUT][j] = dhj * cache.tanh_c[j] * cache.o[j] * (1.0 - cache.o[j]);
            dz[FORGET][j] = dc * cache.c_prev[j] * cache.f[j] * (1.0 - cache.f[j]);
            dz[INPUT][j] = dc * cache.g[j] * cache.i[j] * (1.0 - cache.i[j]);
            dz[CANDIDATE][j] = dc * cache.i[j] * (1.0 - cache.g[j] * cache.g[j]);
            dc_carry[j] = dc * cache.f[j];
        }
        dh_carry.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..4 {
            let gate = &params.gates[k];
            let grad = &mut grads.gates[k];
            grad.w.outer_acc(&dz[k], &cache.x);
            grad.u.outer_acc(&dz[k], &cache.h_prev);
            for (b, z) in grad.b.iter_mut().zip(&dz[k]) {
                *b += z;
            }
            gate.w.matvec_t_acc(&dz[k], &mut dx[t]);
            gate.u.matvec_t_acc(&dz[k], &mut dh_carry);
        }
    }
    Ok((grads, dx))
}

/// Forward and backward traces of a bidirectional pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BlstmCache {
    forward: LstmTrace,
    backward: LstmTrace,
    /// Sequence position of each backward-direction step.
    backward_positions: Vec<usize>,
    steps: usize,
}

/// Hidden states `H` (2l×T): column t is `[→h_t ; ←h_t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlstmOutput {
    pub h: Matrix,
    pub cache: BlstmCache,
}

pub fn blstm_forward(
    fwd: &LstmParams,
    bwd: &LstmParams,
    x: &Matrix,
    mask: &[bool],
) -> Result<BlstmOutput, RecurrentError> {
    let columns: Vec<Vec<f64>> = (0..x.cols()).map(|t| x.column(t)).collect();
    blstm_forward_columns(fwd, bwd, &columns, mask, x.rows())
}

/// Same as [`blstm_forward`] with the input given as columns.
pub fn blstm_forward_columns(
    fwd: &LstmParams,
    bwd: &LstmParams,
    columns: &[Vec<f64>],
    mask: &[bool],
    input_rows: usize,
) -> Result<BlstmOutput, RecurrentError> {
    fwd.validate()?;
    bwd.validate()?;
    let l = fwd.hidden_size;
    if bwd.hidden_size != l || bwd.input_size != fwd.input_size {
        return Err(shape_err(
            "backward parameters",
            (l, fwd.input_size),
            (bwd.hidden_size, bwd.input_size),
        ));
    }
    if input_rows != fwd.input_size
        || columns.len() != mask.len()
        || columns.iter().any(|c| c.len() != input_rows)
    {
        return Err(shape_err("X", (fwd.input_size, mask.len()), (input_rows, columns.len())));
    }
    let steps = columns.len();
    let forward = run_direction(fwd, columns.iter().map(Vec::as_slice).zip(mask.iter().copied()));
    let backward_positions: Vec<usize> = (0..steps).rev().filter(|&t| mask[t]).collect();
    let backward = run_direction(
        bwd,
        backward_positions
            .iter()
            .map(|&t| (columns[t].as_slice(), true)),
    );
    let mut h = Matrix::zeros(2 * l, steps);
    for t in 0..steps {
        for j in 0..l {
            h.set(j, t, forward.states[t].h[j]);
        }
    }
    for (step, &t) in backward_positions.iter().enumerate() {
        for j in 0..l {
            h.set(l + j, t, backward.states[step].h[j]);
        }
    }
    Ok(BlstmOutput {
        h,
        cache: BlstmCache {
            forward,
            backward,
            backward_positions,
            steps,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlstmGrads {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

/// Gradients of both directions and of the input columns given ∂L/∂H.
pub fn blstm_backward(
    fwd: &LstmParams,
    bwd: &LstmParams,
    cache: &BlstmCache,
    dh: &Matrix,
) -> Result<(BlstmGrads, Matrix), RecurrentError> {
    let l = fwd.hidden_size;
    if dh.shape() != (2 * l, cache.steps) {
        return Err(RecurrentError::StaleCache(format!(
            "dH is {:?}, forward pass produced {:?}",
            dh.shape(),
            (2 * l, cache.steps)
        )));
    }
    let dh_fwd: Vec<Vec<f64>> = (0..cache.steps)
        .map(|t| (0..l).map(|j| dh.get(j, t)).collect())
        .collect();
    let dh_bwd: Vec<Vec<f64>> = cache
        .backward_positions
        .iter()
        .map(|&t| (0..l).map(|j| dh.get(l + j, t)).collect())
        .collect();
    let (g_fwd, dx_fwd) = lstm_backward(fwd, &cache.forward, &dh_fwd)?;
    let (g_bwd, dx_bwd) = lstm_backward(bwd, &cache.backward, &dh_bwd)?;
    let d = fwd.input_size;
    let mut dx = Matrix::zeros(d, cache.steps);
    for (t, col) in dx_fwd.iter().enumerate() {
        dx.set_column(t, col);
    }
    for (step, &t) in cache.backward_positions.iter().enumerate() {
        for (r, v) in dx_bwd[step].iter().enumerate() {
            dx.set(r, t, dx.get(r, t) + v);
        }
    }
    Ok((
        BlstmGrads {
            fwd: g_fwd,
            bwd: g_bwd,
        },
        dx,
    ))
}
