//! The categorical marginal of the mixed model.
//!
//! Integrating `x_Q` out of the joint density leaves an Ising model on `x_C`
//! with interaction matrix
//!
//! ```text
//! Θ′ = Θ + ½ Φ Δ⁻¹ Φᵀ + Diag(Φ Δ⁻¹ μ)
//! ```
//!
//! For up to [`ENUMERATION_CAP`] binary variables the full probability table
//! is enumerated; configuration `k` has `x_i = (k >> i) & 1`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::MixedModel;

/// Largest number of categorical variables for which the table is built.
pub const ENUMERATION_CAP: usize = 20;

#[derive(Debug, Clone)]
pub struct IsingMarginal {
    theta_prime: DMatrix<f64>,
    log_normalizer: Option<f64>,
    prob_table: Option<Vec<f64>>,
    cdf: Option<Vec<f64>>,
}

impl IsingMarginal {
    /// Builds the marginal for a given interaction matrix, enumerating when
    /// the dimension is at most [`ENUMERATION_CAP`].
    pub fn from_theta(theta_prime: DMatrix<f64>) -> Self {
        Self::with_cap(theta_prime, ENUMERATION_CAP)
    }

    pub fn with_cap(theta_prime: DMatrix<f64>, cap: usize) -> Self {
        assert!(theta_prime.is_square(), "theta_prime must be square");
        let sym = (&theta_prime + theta_prime.transpose()) * 0.5;
        if sym.nrows() > cap {
            return Self {
                theta_prime: sym,
                log_normalizer: None,
                prob_table: None,
                cdf: None,
            };
        }
        let energies = enumerate_energies(&sym);
        let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = energies.iter().map(|e| (e - max).exp()).sum();
        let log_z = max + sum.ln();
        let table: Vec<f64> = energies.iter().map(|e| (e - log_z).exp()).collect();
        let mut cdf = Vec::with_capacity(table.len());
        let mut acc = 0.0;
        for p in &table {
            acc += p;
            cdf.push(acc);
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Self {
            theta_prime: sym,
            log_normalizer: Some(log_z),
            prob_table: Some(table),
            cdf: Some(cdf),
        }
    }

    pub fn n_cat(&self) -> usize {
        self.theta_prime.nrows()
    }

    pub fn theta_prime(&self) -> &DMatrix<f64> {
        &self.theta_prime
    }

    /// Log of the enumeration sum, when the table was built.
    pub fn log_normalizer(&self) -> Option<f64> {
        self.log_normalizer
    }

    pub fn prob_table(&self) -> Result<&[f64]> {
        self.prob_table
            .as_deref()
            .ok_or(Error::EnumerationCapExceeded {
                n_cat: self.n_cat(),
                cap: ENUMERATION_CAP,
            })
    }

    pub(crate) fn cdf(&self) -> Option<&[f64]> {
        self.cdf.as_deref()
    }

    /// `xᵀ Θ′ x`.
    pub fn energy(&self, x: &[u8]) -> f64 {
        let mut e = 0.0;
        for i in 0..x.len() {
            if x[i] == 0 {
                continue;
            }
            e += self.theta_prime[(i, i)];
            for j in (i + 1)..x.len() {
                if x[j] == 1 {
                    e += 2.0 * self.theta_prime[(i, j)];
                }
            }
        }
        e
    }

    /// Full-conditional logit of site `i`: `θ′_ii + 2 Σ_{j≠i} θ′_ij x_j`.
    pub fn site_logit(&self, x: &[u8], i: usize) -> f64 {
        let mut q = self.theta_prime[(i, i)];
        for (j, &xj) in x.iter().enumerate() {
            if j != i && xj == 1 {
                q += 2.0 * self.theta_prime[(i, j)];
            }
        }
        q
    }
}

/// Energies of all `2^n` configurations; each entry extends the one without
/// its highest set bit.
fn enumerate_energies(theta: &DMatrix<f64>) -> Vec<f64> {
    let n = theta.nrows();
    let mut energies = vec![0.0; 1usize << n];
    for k in 1..energies.len() {
        let top = usize::BITS as usize - 1 - k.leading_zeros() as usize;
        let rest = k ^ (1 << top);
        let mut e = energies[rest] + theta[(top, top)];
        let mut bits = rest;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            e += 2.0 * theta[(top, j)];
            bits &= bits - 1;
        }
        energies[k] = e;
    }
    energies
}

pub fn index_to_config(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((index >> i) & 1) as u8).collect()
}

pub fn config_to_index(x: &[u8]) -> usize {
    x.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | ((b as usize & 1) << i))
}

impl MixedModel {
    /// Ising marginal of `x_C`, with `Δ⁻¹` applied through the cached Cholesky factor.
    pub fn ising_marginal(&self) -> IsingMarginal {
        let chol = self.delta_cholesky();
        let phi = self.phi();
        let solved_phi_t = chol.solve(&phi.transpose());
        let solved_mu = chol.solve(self.mu());
        let mut theta_prime = self.theta() + (phi * solved_phi_t) * 0.5;
        let field = phi * solved_mu;
        for i in 0..self.n_cat() {
            theta_prime[(i, i)] += field[i];
        }
        IsingMarginal::from_theta(theta_prime)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    #[test]
    fn decoupled_model_keeps_theta() {
        let m = ModelParams {
            theta: vec![vec![-0.3, 0.2], vec![0.2, 0.1]],
            mu: vec![1.0],
            delta: vec![vec![2.0]],
            phi: vec![vec![0.0], vec![0.0]],
            cat_names: None,
            quant_names: None,
        }
        .validate()
        .unwrap();
        assert_eq!(m.ising_marginal().theta_prime(), m.theta());
    }

    #[test]
    fn one_by_one_marginal() {
        let m = ModelParams {
            theta: vec![vec![-1.0]],
            mu: vec![0.0],
            delta: vec![vec![1.0]],
            phi: vec![vec![0.5]],
            cat_names: None,
            quant_names: None,
        }
        .validate()
        .unwrap();
        let marg = m.ising_marginal();
        assert!((marg.theta_prime()[(0, 0)] + 0.875).abs() < 1e-15);
        let table = marg.prob_table().unwrap();
        // Oracle: ∫ exp(c·θ − x²/2 + φ c x) dx ∝ exp(cθ + c φ²/2), evaluated
        // by trapezoidal quadrature over x.
        let integral = |c: f64| {
            let step = 1e-3;
            (-20_000..=20_000)
                .map(|k| {
                    let x = k as f64 * step;
                    (-c - 0.5 * x * x + 0.5 * c * x).exp() * step
                })
                .sum::<f64>()
        };
        let p1 = integral(1.0) / (integral(0.0) + integral(1.0));
        assert!((table[1] - p1).abs() < 1e-10);
        assert!((table[1] - 0.294_215).abs() < 1e-5);
    }

    #[test]
    fn enumeration_matches_direct_energy() {
        let theta = DMatrix::from_row_slice(3, 3, &[0.1, -0.4, 0.3, -0.4, -0.2, 0.25, 0.3, 0.25, 0.5]);
        let marg = IsingMarginal::from_theta(theta);
        let table = marg.prob_table().unwrap();
        let log_z = marg.log_normalizer().unwrap();
        for k in 0..8 {
            let x = index_to_config(k, 3);
            assert_eq!(config_to_index(&x), k);
            assert!((table[k] - (marg.energy(&x) - log_z).exp()).abs() < 1e-15);
        }
        assert!((table.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(table.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn table_requested_beyond_cap() {
        let marg = IsingMarginal::with_cap(DMatrix::zeros(3, 3), 2);
        assert!(marg.log_normalizer().is_none());
        assert!(matches!(
            marg.prob_table(),
            Err(Error::EnumerationCapExceeded { n_cat: 3, .. })
        ));
    }

    #[test]
    fn site_logit_is_energy_difference() {
        let theta = DMatrix::from_row_slice(3, 3, &[0.1, -0.4, 0.3, -0.4, -0.2, 0.25, 0.3, 0.25, 0.5]);
        let marg = IsingMarginal::from_theta(theta);
        let x = vec![1, 0, 1];
        for i in 0..3 {
            let mut on = x.clone();
            on[i] = 1;
            let mut off = x.clone();
            off[i] = 0;
            let diff = marg.energy(&on) - marg.energy(&off);
            assert!((marg.site_logit(&x, i) - diff).abs() < 1e-15);
        }
    }
}
