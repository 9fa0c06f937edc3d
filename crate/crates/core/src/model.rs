//! The pairwise mixed model over binary and continuous variables.
//!
//! The joint density is proportional to
//!
//! ```text
//! exp( x_Cᵀ Θ x_C + μᵀ x_Q − ½ x_Qᵀ Δ x_Q + x_Cᵀ Φ x_Q )
//! ```
//!
//! with `x_C ∈ {0,1}^|C|` and `x_Q ∈ ℝ^|Q|`. Every quantity computed here is
//! locally normalised, so the global partition function never appears.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest tolerated `|a_ij − a_ji|` before a matrix is rejected as asymmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Probabilities are clamped to `[eps, 1 − eps]` before any logarithm.
pub const DEFAULT_CLAMP_EPS: f64 = 1e-12;

/// Whether a variable is binary (categorical) or continuous (quantitative).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Categorical,
    Quantitative,
}

/// Unvalidated parameter bundle, as read from a model file or built in code.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub theta: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub delta: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub cat_names: Option<Vec<String>>,
    pub quant_names: Option<Vec<String>>,
}

impl ModelParams {
    pub fn n_cat(&self) -> usize {
        self.theta.len()
    }

    pub fn n_quant(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(self) -> Result<MixedModel> {
        MixedModel::new(self)
    }
}

/// A validated mixed model. Immutable once built; the Cholesky factor of Δ is
/// cached so every Δ⁻¹ application is a pair of triangular solves.
#[derive(Debug, Clone)]
pub struct MixedModel {
    theta: DMatrix<f64>,
    mu: DVector<f64>,
    delta: DMatrix<f64>,
    phi: DMatrix<f64>,
    cat_names: Vec<String>,
    quant_names: Vec<String>,
    delta_chol: Cholesky<f64, Dyn>,
}

fn square_matrix(name: &'static str, rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n {
        return Err(Error::DimensionMismatch {
            what: format!("{name} rows"),
            expected: n,
            got: rows.len(),
        });
    }
    dense(name, rows, n, n)
}

fn dense(name: &'static str, rows: &[Vec<f64>], n_rows: usize, n_cols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n_rows {
        return Err(Error::DimensionMismatch {
            what: format!("{name} rows"),
            expected: n_rows,
            got: rows.len(),
        });
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n_cols {
            return Err(Error::DimensionMismatch {
                what: format!("{name} row {r}"),
                expected: n_cols,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{name} row {r}")));
        }
    }
    Ok(DMatrix::from_fn(n_rows, n_cols, |i, j| rows[i][j]))
}

/// Checks symmetry within [`SYMMETRY_TOL`] and then averages with the transpose.
fn symmetrise(name: &'static str, m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut max_asymmetry = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            max_asymmetry = max_asymmetry.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if max_asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric {
            matrix: name,
            max_asymmetry,
        });
    }
    let t = m.transpose();
    Ok((m + t) * 0.5)
}

fn names(given: Option<Vec<String>>, prefix: char, n: usize, what: &str) -> Result<Vec<String>> {
    match given {
        Some(v) if v.len() != n => Err(Error::DimensionMismatch {
            what: what.to_string(),
            expected: n,
            got: v.len(),
        }),
        Some(v) => Ok(v),
        None => Ok((0..n).map(|i| format!("{prefix}{i}")).collect()),
    }
}

impl MixedModel {
    pub fn new(raw: ModelParams) -> Result<Self> {
        let n_cat = raw.n_cat();
        let n_quant = raw.n_quant();
        if raw.mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mu".into()));
        }
        let theta = symmetrise("theta", square_matrix("theta", &raw.theta, n_cat)?)?;
        let delta = symmetrise("delta", square_matrix("delta", &raw.delta, n_quant)?)?;
        let phi = dense("phi", &raw.phi, n_cat, n_quant)?;
        let delta_chol =
            Cholesky::new(delta.clone()).ok_or(Error::NotPositiveDefinite { matrix: "delta" })?;
        Ok(Self {
            theta,
            mu: DVector::from_vec(raw.mu),
            delta,
            phi,
            cat_names: names(raw.cat_names, 'c', n_cat, "categorical names")?,
            quant_names: names(raw.quant_names, 'q', n_quant, "quantitative names")?,
            delta_chol,
        })
    }

    pub fn n_cat(&self) -> usize {
        self.theta.nrows()
    }

    pub fn n_quant(&self) -> usize {
        self.mu.len()
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn delta(&self) -> &DMatrix<f64> {
        &self.delta
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn cat_names(&self) -> &[String] {
        &self.cat_names
    }

    pub fn quant_names(&self) -> &[String] {
        &self.quant_names
    }

    pub fn delta_cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.delta_chol
    }

    pub fn variable_name(&self, kind: VariableKind, index: usize) -> &str {
        match kind {
            VariableKind::Categorical => &self.cat_names[index],
            VariableKind::Quantitative => &self.quant_names[index],
        }
    }

    /// Back to a raw parameter bundle, e.g. to apply a modification and re-validate.
    pub fn to_params(&self) -> ModelParams {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect()
        };
        ModelParams {
            theta: rows(&self.theta),
            mu: self.mu.iter().copied().collect(),
            delta: rows(&self.delta),
            phi: rows(&self.phi),
            cat_names: Some(self.cat_names.clone()),
            quant_names: Some(self.quant_names.clone()),
        }
    }

    pub fn check_observation(&self, obs: &Observation) -> Result<()> {
        if obs.x_cat.len() != self.n_cat() {
            return Err(Error::DimensionMismatch {
                what: "observation categorical part".into(),
                expected: self.n_cat(),
                got: obs.x_cat.len(),
            });
        }
        if obs.x_quant.len() != self.n_quant() {
            return Err(Error::DimensionMismatch {
                what: "observation quantitative part".into(),
                expected: self.n_quant(),
                got: obs.x_quant.len(),
            });
        }
        Ok(())
    }

    /// `μ + Φᵀ x_C`, the linear potential on `x_Q` once `x_C` is fixed.
    fn linear_potential(&self, x_cat: &[u8]) -> DVector<f64> {
        let mut b = self.mu.clone();
        for (i, &c) in x_cat.iter().enumerate() {
            if c == 1 {
                for u in 0..self.n_quant() {
                    b[u] += self.phi[(i, u)];
                }
            }
        }
        b
    }

    /// Conditional mean of `x_Q` given `x_C`: the solution of `Δ ν = μ + Φᵀ x_C`.
    pub fn nu(&self, x_cat: &[u8]) -> Result<DVector<f64>> {
        if x_cat.len() != self.n_cat() {
            return Err(Error::DimensionMismatch {
                what: "x_cat".into(),
                expected: self.n_cat(),
                got: x_cat.len(),
            });
        }
        Ok(self.delta_chol.solve(&self.linear_potential(x_cat)))
    }

    /// Law of quantitative variable `i` given every other variable.
    ///
    /// Uses the precision form: the mean is `(b_i − Σ_{j≠i} Δ_ij x_j) / Δ_ii`
    /// with `b = μ + Φᵀ x_C`, and the variance is `1 / Δ_ii`.
    pub fn conditional_gaussian(&self, obs: &Observation, i: usize) -> Result<ConditionalGaussian> {
        self.check_observation(obs)?;
        if i >= self.n_quant() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.n_quant(),
            });
        }
        let mut b = self.mu[i];
        for (c, &xc) in obs.x_cat.iter().enumerate() {
            if xc == 1 {
                b += self.phi[(c, i)];
            }
        }
        for (j, &xj) in obs.x_quant.iter().enumerate() {
            if j != i {
                b -= self.delta[(i, j)] * xj;
            }
        }
        let d = self.delta[(i, i)];
        Ok(ConditionalGaussian {
            e: b / d,
            sigma: d.sqrt().recip(),
            var_index: i,
        })
    }

    /// Conditional logit of categorical variable `i`:
    /// `θ_ii + 2 Σ_{j≠i} θ_ij x_j + Σ_u φ_iu x_u`.
    pub fn conditional_logit(&self, obs: &Observation, i: usize) -> Result<f64> {
        self.check_observation(obs)?;
        if i >= self.n_cat() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.n_cat(),
            });
        }
        let mut q = self.theta[(i, i)];
        for (j, &xj) in obs.x_cat.iter().enumerate() {
            if j != i && xj == 1 {
                q += 2.0 * self.theta[(i, j)];
            }
        }
        for (u, &xu) in obs.x_quant.iter().enumerate() {
            q += self.phi[(i, u)] * xu;
        }
        Ok(q)
    }

    /// Conditional Bernoulli law of categorical variable `i`, clamped with
    /// [`DEFAULT_CLAMP_EPS`].
    pub fn conditional_bernoulli(&self, obs: &Observation, i: usize) -> Result<ConditionalBernoulli> {
        self.conditional_bernoulli_clamped(obs, i, DEFAULT_CLAMP_EPS)
    }

    pub fn conditional_bernoulli_clamped(
        &self,
        obs: &Observation,
        i: usize,
        eps: f64,
    ) -> Result<ConditionalBernoulli> {
        let q = self.conditional_logit(obs, i)?;
        Ok(ConditionalBernoulli {
            q,
            p: logistic(q).clamp(eps, 1.0 - eps),
            var_index: i,
        })
    }

    /// The exponent of the joint density (the unnormalised log-density).
    pub fn log_unnormalized_density(&self, obs: &Observation) -> Result<f64> {
        self.check_observation(obs)?;
        let c = obs.x_cat_f64();
        let x = DVector::from_column_slice(&obs.x_quant);
        let value = c.dot(&(&self.theta * &c)) + self.mu.dot(&x) - 0.5 * x.dot(&(&self.delta * &x))
            + c.dot(&(&self.phi * &x));
        Ok(value)
    }
}

/// Numerically stable `1 / (1 + e^{−q})`.
pub fn logistic(q: f64) -> f64 {
    if q >= 0.0 {
        1.0 / (1.0 + (-q).exp())
    } else {
        let e = q.exp();
        e / (1.0 + e)
    }
}

/// One time sample: binary categorical part and real quantitative part.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    t: u64,
    x_cat: Vec<u8>,
    x_quant: Vec<f64>,
}

impl Observation {
    pub fn new(t: u64, x_cat: Vec<u8>, x_quant: Vec<f64>) -> Result<Self> {
        if let Some(v) = x_cat.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidObservation(format!(
                "categorical entry {v} is not 0 or 1"
            )));
        }
        if x_quant.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidObservation(
                "quantitative entry is not finite".into(),
            ));
        }
        Ok(Self { t, x_cat, x_quant })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn x_cat(&self) -> &[u8] {
        &self.x_cat
    }

    pub fn x_quant(&self) -> &[f64] {
        &self.x_quant
    }

    pub fn with_t(mut self, t: u64) -> Self {
        self.t = t;
        self
    }

    /// A copy with categorical entry `i` set to `value` (0 or 1).
    pub fn with_cat(&self, i: usize, value: u8) -> Self {
        let mut out = self.clone();
        out.x_cat[i] = value.min(1);
        out
    }

    pub(crate) fn x_cat_f64(&self) -> DVector<f64> {
        DVector::from_iterator(self.x_cat.len(), self.x_cat.iter().map(|&v| f64::from(v)))
    }
}

/// Univariate Gaussian law of one quantitative variable given all the others.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalGaussian {
    pub e: f64,
    pub sigma: f64,
    pub var_index: usize,
}

/// Bernoulli law of one categorical variable given all the others.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalBernoulli {
    pub q: f64,
    pub p: f64,
    pub var_index: usize,
}
