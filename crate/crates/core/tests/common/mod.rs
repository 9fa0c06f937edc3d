//! Independent oracles shared by the integration tests. Nothing here calls
//! the Cholesky-based routes under test.
#![allow(dead_code)]

use mgm::model::{MixedModel, ModelParams, Observation};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Random model with `Δ = AᵀA + n·I` and entries of `A`, `Θ`, `μ`, `Φ` uniform in [−1, 1].
pub fn random_model<R: Rng>(rng: &mut R, n_cat: usize, n_quant: usize) -> MixedModel {
    let mut u = || rng.random_range(-1.0..1.0);
    let mut theta = vec![vec![0.0; n_cat]; n_cat];
    for i in 0..n_cat {
        for j in i..n_cat {
            let v = u();
            theta[i][j] = v;
            theta[j][i] = v;
        }
    }
    let a = DMatrix::from_fn(n_quant, n_quant, |_, _| u());
    let spd = a.transpose() * &a + DMatrix::identity(n_quant, n_quant) * n_quant as f64;
    let delta = (0..n_quant)
        .map(|i| (0..n_quant).map(|j| spd[(i, j)]).collect())
        .collect();
    let mu = (0..n_quant).map(|_| u()).collect();
    let phi = (0..n_cat).map(|_| (0..n_quant).map(|_| u()).collect()).collect();
    ModelParams {
        theta,
        mu,
        delta,
        phi,
        cat_names: None,
        quant_names: None,
    }
    .validate()
    .unwrap()
}

pub fn random_observation<R: Rng>(rng: &mut R, model: &MixedModel) -> Observation {
    let x_cat = (0..model.n_cat()).map(|_| rng.random_range(0..2u8)).collect();
    let x_quant = (0..model.n_quant()).map(|_| rng.random_range(-3.0..3.0)).collect();
    Observation::new(0, x_cat, x_quant).unwrap()
}

/// Covariance `Σ = Δ⁻¹` by LU inversion.
pub fn covariance(model: &MixedModel) -> DMatrix<f64> {
    model.delta().clone().try_inverse().expect("invertible precision")
}

/// `ν = Σ (μ + Φᵀ x_C)` with `Σ` from LU inversion.
pub fn dense_nu(model: &MixedModel, x_cat: &[u8]) -> DVector<f64> {
    let c = DVector::from_iterator(x_cat.len(), x_cat.iter().map(|&v| f64::from(v)));
    covariance(model) * (model.mu() + model.phi().transpose() * c)
}

/// Conditional mean and variance of `x_i` given the rest, from the
/// covariance-block formulas.
pub fn covariance_form_conditional(model: &MixedModel, obs: &Observation, i: usize) -> (f64, f64) {
    let sigma = covariance(model);
    let nu = dense_nu(model, obs.x_cat());
    let others: Vec<usize> = (0..model.n_quant()).filter(|&j| j != i).collect();
    if others.is_empty() {
        return (nu[i], sigma[(i, i)]);
    }
    let m = others.len();
    let s_oo = DMatrix::from_fn(m, m, |a, b| sigma[(others[a], others[b])]);
    let s_io = DVector::from_fn(m, |a, _| sigma[(i, others[a])]);
    let resid = DVector::from_fn(m, |a, _| obs.x_quant()[others[a]] - nu[others[a]]);
    let s_oo_inv = s_oo.try_inverse().unwrap();
    let w = &s_oo_inv * &s_io;
    let mean = nu[i] + w.dot(&resid);
    let var = sigma[(i, i)] - s_io.dot(&w);
    (mean, var)
}

/// Joint log-density exponent evaluated directly from the parameter
/// matrices.
pub fn exponent(model: &MixedModel, x_cat: &[u8], x_quant: &[f64]) -> f64 {
    let c = DVector::from_iterator(x_cat.len(), x_cat.iter().map(|&v| f64::from(v)));
    let x = DVector::from_column_slice(x_quant);
    (c.transpose() * model.theta() * &c)[(0, 0)] + model.mu().dot(&x)
        - 0.5 * (x.transpose() * model.delta() * &x)[(0, 0)]
        + (c.transpose() * model.phi() * &x)[(0, 0)]
}

/// Marginal probabilities of every categorical configuration (index bit `i`
/// = `x_i`) by trapezoidal tensor quadrature of the joint exponent over `x_Q`
/// on `[−half_width, half_width]^|Q|`.
pub fn quadrature_marginal(model: &MixedModel, half_width: f64, step: f64) -> Vec<f64> {
    let n_cat = model.n_cat();
    let n_quant = model.n_quant();
    let points: Vec<f64> = {
        let k = (half_width / step).round() as i64;
        (-k..=k).map(|j| j as f64 * step).collect()
    };
    let mut weights = Vec::with_capacity(1 << n_cat);
    for config in 0..(1usize << n_cat) {
        let x_cat: Vec<u8> = (0..n_cat).map(|i| ((config >> i) & 1) as u8).collect();
        // Integrate in log space around the per-configuration maximum.
        let mut values = Vec::new();
        let mut idx = vec![0usize; n_quant];
        loop {
            let x: Vec<f64> = idx.iter().map(|&k| points[k]).collect();
            values.push(exponent(model, &x_cat, &x));
            let mut d = 0;
            while d < n_quant {
                idx[d] += 1;
                if idx[d] < points.len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == n_quant {
                break;
            }
        }
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
        weights.push(max + sum.ln() + n_quant as f64 * step.ln());
    }
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = weights.iter().map(|w| (w - max).exp()).sum();
    weights.iter().map(|w| (w - max).exp() / total).collect()
}

/// Pearson chi-square statistic and its upper-tail p-value.
pub fn chi_square(counts: &[usize], probs: &[f64]) -> (f64, f64) {
    let n: usize = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    (stat, 1.0 - dist.cdf(stat))
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Relative error with a unit floor on the scale.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
