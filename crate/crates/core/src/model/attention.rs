//! Attention over BLSTM outputs, the sigmoid classifier head and the loss.

use serde::{Deserialize, Serialize};

use crate::numkit::{dot, softmax_masked, Matrix, NumError, Rng};

/// `w` scores each hidden column; `b` holds one bias per sequence position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl AttentionParams {
    pub fn zeros(width: usize, max_len: usize) -> Self {
        Self {
            w: vec![0.0; width],
            b: vec![0.0; max_len],
        }
    }

    /// `w` uniform in [−0.1, 0.1], `b` zero.
    pub fn init(width: usize, max_len: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(width, max_len);
        rng.fill_uniform(&mut p.w, -0.1, 0.1);
        p
    }
}

/// α_t = softmax_masked(w·H[:,t] + b[t]); context r = Σ_t α_t H[:,t].
pub fn attention_forward(
    params: &AttentionParams,
    h: &Matrix,
    mask: &[bool],
) -> Result<(Vec<f64>, Vec<f64>), NumError> {
    if h.rows() != params.w.len() || h.cols() != mask.len() {
        return Err(NumError::Shape {
            left: (params.w.len(), mask.len()),
            right: h.shape(),
        });
    }
    if let Some(t) = mask.iter().rposition(|m| *m) {
        if t >= params.b.len() {
            return Err(NumError::Shape {
                left: (params.b.len(), 1),
                right: (t + 1, 1),
            });
        }
    }
    let columns: Vec<Vec<f64>> = (0..h.cols()).map(|t| h.column(t)).collect();
    let logits: Vec<f64> = columns
        .iter()
        .enumerate()
        .map(|(t, col)| {
            if mask[t] {
                dot(&params.w, col) + params.b[t]
            } else {
                0.0
            }
        })
        .collect();
    let alpha = softmax_masked(&logits, mask)?;
    let mut context = vec![0.0; h.rows()];
    for (a, col) in alpha.iter().zip(&columns) {
        if *a != 0.0 {
            for (r, v) in context.iter_mut().zip(col) {
                *r += a * v;
            }
        }
    }
    Ok((alpha, context))
}

/// Given ∂L/∂r, returns (∂L/∂w, ∂L/∂b, ∂L/∂H).
pub fn attention_backward(
    params: &AttentionParams,
    h: &Matrix,
    alpha: &[f64],
    d_context: &[f64],
) -> (Vec<f64>, Vec<f64>, Matrix) {
    let steps = h.cols();
    let columns: Vec<Vec<f64>> = (0..steps).map(|t| h.column(t)).collect();
    let d_alpha: Vec<f64> = columns.iter().map(|c| dot(c, d_context)).collect();
    let mean: f64 = alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
    let mut dw = vec![0.0; params.w.len()];
    let mut db = vec![0.0; params.b.len()];
    let mut dh = Matrix::zeros(h.rows(), steps);
    for t in 0..steps {
        let a = alpha[t];
        if a == 0.0 {
            continue;
        }
        let dlogit = a * (d_alpha[t] - mean);
        db[t] = dlogit;
        for (k, v) in columns[t].iter().enumerate() {
            dw[k] += dlogit * v;
            dh.set(k, t, a * d_context[k] + dlogit * params.w[k]);
        }
    }
    (dw, db, dh)
}

/// One fully connected unit with a sigmoid output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub w: Vec<f64>,
    pub b: f64,
}

impl ClassifierParams {
    pub fn zeros(width: usize) -> Self {
        Self {
            w: vec![0.0; width],
            b: 0.0,
        }
    }

    /// `w` uniform in [−1/√width, 1/√width], `b` zero.
    pub fn init(width: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (width as f64).sqrt();
        let mut p = Self::zeros(width);
        rng.fill_uniform(&mut p.w, -bound, bound);
        p
    }
}

const PROB_CLAMP: f64 = 1e-12;

/// Binary cross-entropy with the probability clamped to [1e−12, 1 − 1e−12].
pub fn bce_loss(p: f64, label: u8) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_attention_is_mean() {
        let h = Matrix::from_vec(2, 4, vec![1.0, 2.0, 3.0, 9.0, -1.0, 0.0, 4.0, 9.0]).unwrap();
        let p = AttentionParams::zeros(2, 4);
        let (alpha, r) = attention_forward(&p, &h, &[true, true, true, false]).unwrap();
        assert_eq!(alpha[3], 0.0);
        for a in &alpha[..3] {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((r[0] - 2.0).abs() < 1e-14);
        assert!((r[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_valid_position_is_one_hot() {
        let h = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut rng = Rng::new(1);
        let p = AttentionParams::init(2, 3, &mut rng);
        let (alpha, r) = attention_forward(&p, &h, &[false, true, false]).unwrap();
        assert_eq!(alpha, vec![0.0, 1.0, 0.0]);
        assert_eq!(r, vec![2.0, 5.0]);
    }

    #[test]
    fn constructed_logits_give_softmax() {
        // w = [1, 0], H row 0 = [1, 2, 3] → logits [1, 2, 3].
        let h = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 0.3, -0.2, 7.0]).unwrap();
        let p = AttentionParams {
            w: vec![1.0, 0.0],
            b: vec![0.0; 3],
        };
        let (alpha, _) = attention_forward(&p, &h, &[true; 3]).unwrap();
        for (a, want) in alpha.iter().zip([0.0900, 0.2447, 0.6652]) {
            assert!((a - want).abs() < 1e-4);
        }
    }

    #[test]
    fn all_masked_is_error() {
        let h = Matrix::zeros(2, 3);
        let p = AttentionParams::zeros(2, 3);
        assert_eq!(
            attention_forward(&p, &h, &[false; 3]),
            Err(NumError::EmptySequence)
        );
    }

    #[test]
    fn bce_values() {
        assert!(bce_loss(1.0 - 1e-12, 1) < 1e-11);
        assert!((bce_loss(0.5, 1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_loss(0.9, 0) - 2.302_585_092_994_045_7).abs() < 1e-12);
        assert!(bce_loss(0.0, 1).is_finite());
        assert!(bce_loss(1.0, 0).is_finite());
    }
}
