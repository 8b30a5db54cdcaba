//! Activation, initialization and the Adam optimizer with step decay.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;

use crate::autodiff::tape::Matrix;
use crate::rng::Stream;

/// Exact GeLU, `z Φ(z)` with `Φ` the standard normal CDF.
#[inline]
pub fn gelu(z: f64) -> f64 {
    0.5 * z * (1.0 + libm::erf(z * FRAC_1_SQRT_2))
}

/// `Φ(z) + z φ(z)`.
#[inline]
pub fn gelu_derivative(z: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(z * FRAC_1_SQRT_2));
    let pdf = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    cdf + z * pdf
}

/// `rows × cols` weight matrix with entries uniform in `±sqrt(6 / (rows + cols))`.
pub fn xavier_init(rows: usize, cols: usize, rng: &mut Stream) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Piecewise-constant decay: `base · rate^⌊step / period⌋`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    pub decay_rate: f64,
    pub decay_period: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            base: 1e-3,
            decay_rate: 0.95,
            decay_period: 20_000,
        }
    }
}

impl LrSchedule {
    pub fn rate(&self, step: u64) -> f64 {
        let periods = (step / self.decay_period.max(1)) as i32;
        self.base * self.decay_rate.powi(periods)
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of updates applied so far.
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(shapes: &[usize]) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One bias-corrected Adam update at the scheduled rate for the current
/// step count.
pub fn adam_step(
    params: &mut [&mut Matrix],
    grads: &[Matrix],
    state: &mut AdamState,
    schedule: &LrSchedule,
) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.first.len());
    let lr = schedule.rate(state.step);
    state.step += 1;
    let c1 = 1.0 - state.beta1.powi(state.step as i32);
    let c2 = 1.0 - state.beta2.powi(state.step as i32);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        assert_eq!(p.data.len(), g.data.len());
        for (((w, &gi), mi), vi) in p.data.iter_mut().zip(&g.data).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            *w -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn gelu_identities() {
        assert_eq!(gelu(0.0), 0.0);
        assert_eq!(gelu_derivative(0.0), 0.5);
        for &z in &[0.1, 0.7, 1.3, 3.0, 8.0] {
            let odd = gelu(z) - gelu(-z);
            assert!((odd - z).abs() <= 1e-15 * z, "z={z}: {odd}");
        }
    }

    #[test]
    fn gelu_derivative_matches_central_differences() {
        for &z in &[-2.5, -0.3, 0.0, 0.4, 1.9] {
            let h = 1e-6;
            let fd = (gelu(z + h) - gelu(z - h)) / (2.0 * h);
            assert!((fd - gelu_derivative(z)).abs() < 1e-9);
        }
    }

    #[test]
    fn xavier_single_entry_bound() {
        let w = xavier_init(1, 1, &mut stream(1, Purpose::Init, 0, 0));
        assert!(w.data[0].abs() <= 3f64.sqrt());
    }

    #[test]
    fn xavier_is_deterministic() {
        let a = xavier_init(7, 5, &mut stream(9, Purpose::Init, 0, 3));
        let b = xavier_init(7, 5, &mut stream(9, Purpose::Init, 0, 3));
        assert_eq!(a, b);
    }

    /// Uniform on `±a` has variance `a²/3 = 2 / (fan_in + fan_out)`.
    #[test]
    fn xavier_variance() {
        let mut rng = stream(11, Purpose::Init, 0, 0);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let n = 100;
        for _ in 0..n {
            let w = xavier_init(100, 100, &mut rng);
            sum += w.data.iter().sum::<f64>();
            sum2 += w.data.iter().map(|x| x * x).sum::<f64>();
        }
        let count = (n * 100 * 100) as f64;
        let mean = sum / count;
        let var = sum2 / count - mean * mean;
        assert!((var - 0.01).abs() < 0.05 * 0.01, "variance {var}");
    }

    #[test]
    fn schedule_steps_down() {
        let s = LrSchedule::default();
        assert_eq!(s.rate(0), 1e-3);
        assert_eq!(s.rate(19_999), 1e-3);
        assert!((s.rate(20_000) - 9.5e-4).abs() < 1e-18);
        assert!((s.rate(40_000) - 1e-3 * 0.95 * 0.95).abs() < 1e-18);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = Matrix::from_vec(1, 3, vec![1.0, -2.0, 0.5]);
        let before = p.clone();
        let mut st = AdamState::new(&[3]);
        adam_step(&mut [&mut p], &[Matrix::zeros(1, 3)], &mut st, &LrSchedule::default());
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    /// From a zero state, `m̂ = g` and `v̂ = g²`, so the first update is
    /// `-lr · g / (|g| + ε)`.
    #[test]
    fn first_step_is_signed_learning_rate() {
        let g = [0.3, -4.0, 1e-3];
        let mut p = Matrix::zeros(1, 3);
        let mut st = AdamState::new(&[3]);
        let sched = LrSchedule::default();
        adam_step(&mut [&mut p], &[Matrix::from_vec(1, 3, g.to_vec())], &mut st, &sched);
        for (w, gi) in p.data.iter().zip(g) {
            let expected = -1e-3 * gi / (gi.abs() + 1e-8);
            assert!((w - expected).abs() < 1e-15, "{w} vs {expected}");
            assert!((w + 1e-3 * gi.signum()).abs() < 1e-7);
        }
    }
}
