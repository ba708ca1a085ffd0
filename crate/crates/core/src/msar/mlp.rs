// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Single-hidden-layer perceptron with tanh units and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: usize,
    /// `w_in[h][k]`: weight from input `k` to hidden unit `h`.
    pub w_in: Vec<Vec<f64>>,
    pub b_in: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl Mlp {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        Self {
            inputs,
            hidden,
            w_in: vec![vec![0.0; inputs]; hidden],
            b_in: vec![0.0; hidden],
            w_out: vec![0.0; hidden],
            b_out: 0.0,
        }
    }

    /// Gaussian weights with standard deviation `scale / sqrt(fan_in)`.
    pub fn random<R: Rng + ?Sized>(inputs: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let s_in = scale / (inputs as f64).sqrt();
        let s_out = scale / (hidden as f64).sqrt();
        Self {
            inputs,
            hidden,
            w_in: (0..hidden)
                .map(|_| (0..inputs).map(|_| s_in * normal.sample(rng)).collect())
                .collect(),
            b_in: (0..hidden).map(|_| s_in * normal.sample(rng)).collect(),
            w_out: (0..hidden).map(|_| s_out * normal.sample(rng)).collect(),
            b_out: 0.0,
        }
    }

    pub fn n_params(&self) -> usize {
        self.hidden * (self.inputs + 2) + 1
    }

    /// Parameters in the order `w_in` (row-major), `b_in`, `w_out`, `b_out`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.w_in.iter().for_each(|row| out.extend_from_slice(row));
        out.extend_from_slice(&self.b_in);
        out.extend_from_slice(&self.w_out);
        out.push(self.b_out);
        out
    }

    pub fn set_flat(&mut self, theta: &[f64]) {
        assert_eq!(theta.len(), self.n_params());
        let mut it = theta.iter().copied();
        for row in &mut self.w_in {
            row.iter_mut().for_each(|w| *w = it.next().unwrap());
        }
        self.b_in.iter_mut().for_each(|b| *b = it.next().unwrap());
        self.w_out.iter_mut().for_each(|w| *w = it.next().unwrap());
        self.b_out = it.next().unwrap();
    }

    fn hidden_activations(&self, x: &[f64], out: &mut [f64]) {
        for ((a, row), b) in out.iter_mut().zip(&self.w_in).zip(&self.b_in) {
            *a = (b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()).tanh();
        }
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut act = vec![0.0; self.hidden];
        self.hidden_activations(x, &mut act);
        self.b_out + act.iter().zip(&self.w_out).map(|(a, w)| a * w).sum::<f64>()
    }

    /// `0.5 * sum_t w_t (y_t - f(x_t))^2 / sum_t w_t`.
    pub fn weighted_loss(&self, x: &[Vec<f64>], y: &[f64], w: &[f64]) -> f64 {
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        let sse: f64 = x
            .iter()
            .zip(y)
            .zip(w)
            .map(|((xt, yt), wt)| {
                let r = yt - self.forward(xt);
                wt * r * r
            })
            .sum();
        0.5 * sse / total
    }

    /// Loss and its gradient with respect to [`Mlp::to_flat`].
    pub fn weighted_loss_grad(&self, x: &[Vec<f64>], y: &[f64], w: &[f64]) -> (f64, Vec<f64>) {
        let total: f64 = w.iter().sum();
        let mut grad = vec![0.0; self.n_params()];
        if total <= 0.0 {
            return (0.0, grad);
        }
        let p = self.n_params();
        let mut act = vec![0.0; self.hidden];
        let mut jac = vec![0.0; p];
        let mut loss = 0.0;
        for ((xt, yt), wt) in x.iter().zip(y).zip(w) {
            let r = self.output_and_jacobian(xt, &mut act, &mut jac) - yt;
            loss += wt * r * r;
            let g = wt * r / total;
            grad.iter_mut().zip(&jac).for_each(|(acc, j)| *acc += g * j);
        }
        (0.5 * loss / total, grad)
    }

    /// Output and its gradient with respect to [`Mlp::to_flat`] at one input.
    fn output_and_jacobian(&self, x: &[f64], act: &mut [f64], jac: &mut [f64]) -> f64 {
        let (h, k) = (self.hidden, self.inputs);
        self.hidden_activations(x, act);
        let f = self.b_out + act.iter().zip(&self.w_out).map(|(a, v)| a * v).sum::<f64>();
        for j in 0..h {
            let back = self.w_out[j] * (1.0 - act[j] * act[j]);
            for (m, xm) in x.iter().enumerate() {
                jac[j * k + m] = back * xm;
            }
            jac[h * k + j] = back;
            jac[h * k + h + j] = act[j];
        }
        jac[h * (k + 2)] = 1.0;
        f
    }

    /// Weighted Levenberg-Marquardt on [`Mlp::weighted_loss`].
    ///
    /// Each of at most `steps` iterations solves the damped Gauss-Newton
    /// system and keeps the step only if the loss falls; otherwise the
    /// damping grows and the step is retried. Stops early once an accepted
    /// step improves the loss by less than a relative 1e-10. Returns the
    /// final loss, which is never above the starting loss.
    pub fn fit_weighted(&mut self, x: &[Vec<f64>], y: &[f64], w: &[f64], steps: usize) -> f64 {
        let total: f64 = w.iter().sum();
        let mut loss = self.weighted_loss(x, y, w);
        if total <= 0.0 || steps == 0 {
            return loss;
        }
        let p = self.n_params();
        let mut theta = self.to_flat();
        let mut trial = self.clone();
        let mut act = vec![0.0; self.hidden];
        let mut jac = vec![0.0; p];
        let mut lambda = 1e-3;
        for _ in 0..steps {
            // Normal equations of the weighted least-squares linearization.
            let mut jtj = DMatrix::<f64>::zeros(p, p);
            let mut grad = DVector::<f64>::zeros(p);
            for ((xt, yt), wt) in x.iter().zip(y).zip(w) {
                if *wt == 0.0 {
                    continue;
                }
                let f = self.output_and_jacobian(xt, &mut act, &mut jac);
                let c = wt / total;
                let r = f - yt;
                for a in 0..p {
                    grad[a] += c * r * jac[a];
                    let ca = c * jac[a];
                    for b in 0..=a {
                        jtj[(a, b)] += ca * jac[b];
                    }
                }
            }
            jtj.fill_upper_triangle_with_lower_triangle();

            let mut improved = None;
            while lambda < 1e12 {
                let mut damped = jtj.clone();
                for a in 0..p {
                    damped[(a, a)] += lambda * (jtj[(a, a)] + 1e-12);
                }
                let step = damped.cholesky().map(|c| c.solve(&grad));
                if let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
                    let candidate: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, d)| t - d).collect();
                    trial.set_flat(&candidate);
                    let new_loss = trial.weighted_loss(x, y, w);
                    if new_loss < loss {
                        improved = Some((candidate, new_loss));
                        lambda = (lambda * 0.3).max(1e-12);
                        break;
                    }
                }
                lambda *= 10.0;
            }
            let Some((candidate, new_loss)) = improved else {
                break;
            };
            let gain = loss - new_loss;
            theta = candidate;
            loss = new_loss;
            self.set_flat(&theta);
            if gain <= 1e-10 * loss.abs() {
                break;
            }
        }
        self.set_flat(&theta);
        loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(seed: u64, n: usize, inputs: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..inputs).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y = x.iter().map(|v| v[0].sin() + 0.1 * rng.random_range(-1.0..1.0)).collect();
        let w = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        (x, y, w)
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::random(2, 3, 1.0, &mut rng);
        let mut other = Mlp::zeros(2, 3);
        other.set_flat(&net.to_flat());
        assert_eq!(net, other);
        assert_eq!(net.n_params(), 13);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (x, y, w) = sample(3, 25, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::random(2, 4, 1.0, &mut rng);
        let (_, grad) = net.weighted_loss_grad(&x, &y, &w);
        let theta = net.to_flat();
        let h = 1e-6;
        let mut probe = net.clone();
        for i in 0..theta.len() {
            let mut t = theta.clone();
            t[i] += h;
            probe.set_flat(&t);
            let up = probe.weighted_loss(&x, &y, &w);
            t[i] -= 2.0 * h;
            probe.set_flat(&t);
            let down = probe.weighted_loss(&x, &y, &w);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-7, "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn fit_never_increases_loss() {
        let (x, y, w) = sample(5, 60, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut net = Mlp::random(1, 3, 1.0, &mut rng);
        let before = net.weighted_loss(&x, &y, &w);
        let after = net.fit_weighted(&x, &y, &w, 50);
        assert!(after <= before);
        assert!((after - net.weighted_loss(&x, &y, &w)).abs() < 1e-12);
        // A sine is learnable by three tanh units.
        assert!(after < 0.5 * before);
    }

    #[test]
    fn zero_weights_leave_net_unchanged() {
        let (x, y, _) = sample(7, 10, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut net = Mlp::random(1, 2, 1.0, &mut rng);
        let copy = net.clone();
        net.fit_weighted(&x, &y, &[0.0; 10], 50);
        assert_eq!(net, copy);
    }
}
