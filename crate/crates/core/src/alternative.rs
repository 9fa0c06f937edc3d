//! Bernoulli alternatives with a prescribed null drift.
//!
//! For a categorical variable with conditional mean `p`, the alternative
//! means `a` are the two roots of
//!
//! ```text
//! f(a) = p ln(a/p) + (1 − p) ln((1 − a)/(1 − p)) + δ²/2
//! ```
//!
//! `f` is strictly concave with maximum `δ²/2` at `a = p` and tends to `−∞`
//! at both ends, so `a < p` and `a > p` each hold exactly one root.
//!
//! Roots are searched in log-odds space, `a = σ(η)`, where `ln a` and
//! `ln(1 − a)` stay finite and accurate even when `a` is far closer to 0 or 1
//! than a probability can represent. Only `p` is clamped.

use crate::model::{logistic, DEFAULT_CLAMP_EPS};

/// Target for `|f|` at the returned roots, a decade inside the 1e-12 the
/// drift identity is held to.
pub const SOLVER_TOL: f64 = 1e-13;

const MAX_BRACKET_DOUBLINGS: usize = 1100;
const MAX_BISECTIONS: usize = 2000;

/// The two alternatives, as probabilities and as log-odds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternativePair {
    pub a_down: f64,
    pub a_up: f64,
    pub logit_down: f64,
    pub logit_up: f64,
}

/// `ln(1 + eˣ)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln σ(x)`.
pub fn ln_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// Logit of `σ(q)` clamped to `[eps, 1 − eps]`; `q` itself when inside.
pub fn clamped_logit(q: f64, eps: f64) -> f64 {
    let bound = -logit(eps);
    q.clamp(-bound, bound)
}

/// Log-likelihood ratio of one binary observation under Bernoulli(`a`)
/// against Bernoulli(`p`).
pub fn cat_llr(x: u8, p: f64, a: f64) -> f64 {
    if x == 1 {
        a.ln() - p.ln()
    } else {
        (-a).ln_1p() - (-p).ln_1p()
    }
}

/// [`cat_llr`] with both means given as log-odds.
pub fn cat_llr_logit(x: u8, q: f64, eta: f64) -> f64 {
    if x == 1 {
        ln_sigmoid(eta) - ln_sigmoid(q)
    } else {
        ln_sigmoid(-eta) - ln_sigmoid(-q)
    }
}

/// Null drift of `cat_llr` plus `δ²/2`; zero exactly at the alternative means.
pub fn drift_residual(p: f64, a: f64, delta: f64) -> f64 {
    p * cat_llr(1, p, a) + (1.0 - p) * cat_llr(0, p, a) + 0.5 * delta * delta
}

/// [`drift_residual`] in log-odds form.
pub fn drift_residual_logit(q: f64, eta: f64, delta: f64) -> f64 {
    let p = logistic(q);
    p * cat_llr_logit(1, q, eta) + (1.0 - p) * cat_llr_logit(0, q, eta) + 0.5 * delta * delta
}

/// Both alternative means for conditional mean `p`, clamped by
/// [`DEFAULT_CLAMP_EPS`].
pub fn solve_alternative_means(p: f64, delta: f64, tol: f64) -> AlternativePair {
    let eps = DEFAULT_CLAMP_EPS;
    solve_alternative_logits(logit(p.clamp(eps, 1.0 - eps)), delta, tol)
}

/// Both alternatives for a conditional mean given by its log-odds `q`.
pub fn solve_alternative_logits(q: f64, delta: f64, tol: f64) -> AlternativePair {
    debug_assert!(delta >= 0.0 && tol > 0.0 && q.is_finite());
    let (logit_down, logit_up) = if 0.5 * delta * delta < tol {
        (q, q)
    } else {
        let f = |eta: f64| drift_residual_logit(q, eta, delta);
        (root_beside(&f, q, -1.0, tol), root_beside(&f, q, 1.0, tol))
    };
    AlternativePair {
        a_down: logistic(logit_down),
        a_up: logistic(logit_up),
        logit_down,
        logit_up,
    }
}

/// Root of `f` on the side `direction` of `q`, where `f(q) > 0`: the step
/// away from `q` doubles until `f` turns negative, then bisection.
fn root_beside(f: &impl Fn(f64) -> f64, q: f64, direction: f64, tol: f64) -> f64 {
    let mut step = 1.0;
    let mut outer = q + direction * step;
    let mut inner = q;
    for _ in 0..MAX_BRACKET_DOUBLINGS {
        if f(outer) <= 0.0 {
            break;
        }
        inner = outer;
        step *= 2.0;
        outer = q + direction * step;
    }
    let f_outer = f(outer);
    if f_outer.abs() <= tol {
        return outer;
    }
    let mut best = (f_outer.abs(), outer);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (inner + outer);
        if mid == inner || mid == outer {
            break;
        }
        let fm = f(mid);
        if fm.abs() < best.0 {
            best = (fm.abs(), mid);
        }
        if fm.abs() <= tol {
            return mid;
        }
        if fm > 0.0 {
            inner = mid;
        } else {
            outer = mid;
        }
    }
    best.1
}
