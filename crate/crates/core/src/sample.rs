//! Two-stage sampling from the mixed model: draw `x_C` from its Ising
//! marginal, then `x_Q | x_C ~ N(Δ⁻¹(μ + Φᵀ x_C), Δ⁻¹)`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{IsingMarginal, ENUMERATION_CAP};
use crate::model::{logistic, MixedModel, Observation};

/// The random stream used throughout the crate. ChaCha keeps sequences
/// stable across platforms and crate versions.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMethod {
    ExactEnumeration,
    Gibbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub method: SamplerMethod,
    pub gibbs_burn_in: usize,
    pub gibbs_thin: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            method: SamplerMethod::ExactEnumeration,
            gibbs_burn_in: 1000,
            gibbs_thin: 10,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    /// Exact enumeration when the model is small enough, Gibbs otherwise.
    pub fn for_model(model: &MixedModel, seed: u64) -> Self {
        let method = if model.n_cat() <= ENUMERATION_CAP {
            SamplerMethod::ExactEnumeration
        } else {
            SamplerMethod::Gibbs
        };
        Self {
            method,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gibbs_burn_in == 0 || self.gibbs_thin == 0 {
            return Err(Error::InvalidConfig(
                "gibbs burn-in and thinning must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn rng(&self) -> SimRng {
        rng_from_seed(self.seed)
    }
}

/// One categorical configuration drawn by inverting the enumerated CDF.
pub fn sample_categorical_exact<R: Rng + ?Sized>(marginal: &IsingMarginal, rng: &mut R) -> Result<Vec<u8>> {
    let cdf = marginal.cdf().ok_or(Error::MissingTable)?;
    let u: f64 = rng.random();
    let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
    Ok(crate::ising::index_to_config(k, marginal.n_cat()))
}

/// Single-site Gibbs chain on the Ising marginal with a fixed site order.
#[derive(Debug, Clone)]
pub struct GibbsChain<'a> {
    marginal: &'a IsingMarginal,
    state: Vec<u8>,
    thin: usize,
}

impl<'a> GibbsChain<'a> {
    /// Starts from all zeros and runs `burn_in` sweeps.
    pub fn new<R: Rng + ?Sized>(marginal: &'a IsingMarginal, config: &SamplerConfig, rng: &mut R) -> Self {
        let mut chain = Self {
            marginal,
            state: vec![0; marginal.n_cat()],
            thin: config.gibbs_thin.max(1),
        };
        for _ in 0..config.gibbs_burn_in.max(1) {
            chain.sweep(rng);
        }
        chain
    }

    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for i in 0..self.state.len() {
            let p = logistic(self.marginal.site_logit(&self.state, i));
            let u: f64 = rng.random();
            self.state[i] = u8::from(u < p);
        }
    }

    pub fn state(&self) -> &[u8] {
        &self.state
    }

    /// Advances `thin` sweeps and returns the new state.
    pub fn next_sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<u8> {
        for _ in 0..self.thin {
            self.sweep(rng);
        }
        self.state.clone()
    }
}

/// One categorical configuration after `burn_in` Gibbs sweeps from all zeros.
pub fn sample_categorical_gibbs<R: Rng + ?Sized>(
    marginal: &IsingMarginal,
    config: &SamplerConfig,
    rng: &mut R,
) -> Vec<u8> {
    GibbsChain::new(marginal, config, rng).state().to_vec()
}

/// Draws `x_Q` given `x_C`: `ν(x_C) + y` with `Lᵀ y = z`, `z ~ N(0, I)` and
/// `Δ = L Lᵀ`, so that `Cov(y) = Δ⁻¹`.
pub fn sample_gaussian_given_categorical<R: Rng + ?Sized>(
    model: &MixedModel,
    x_cat: &[u8],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let nu = model.nu(x_cat)?;
    let z = DVector::from_iterator(
        model.n_quant(),
        (0..model.n_quant()).map(|_| rng.sample::<f64, _>(StandardNormal)),
    );
    let y = model
        .delta_cholesky()
        .l_dirty()
        .tr_solve_lower_triangular(&z)
        .expect("Cholesky factor has a positive diagonal");
    Ok((nu + y).iter().copied().collect())
}

/// Stateful joint sampler; holds the categorical marginal and, for Gibbs,
/// the running chain state so successive draws continue the same chain.
#[derive(Debug, Clone)]
pub struct JointSampler<'m> {
    model: &'m MixedModel,
    marginal: IsingMarginal,
    config: SamplerConfig,
    gibbs_state: Option<Vec<u8>>,
}

impl<'m> JointSampler<'m> {
    pub fn new(model: &'m MixedModel, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let marginal = model.ising_marginal();
        if config.method == SamplerMethod::ExactEnumeration && marginal.cdf().is_none() {
            return Err(Error::MissingTable);
        }
        Ok(Self {
            model,
            marginal,
            config,
            gibbs_state: None,
        })
    }

    pub fn marginal(&self) -> &IsingMarginal {
        &self.marginal
    }

    pub fn draw<R: Rng + ?Sized>(&mut self, t: u64, rng: &mut R) -> Result<Observation> {
        let x_cat = match self.config.method {
            SamplerMethod::ExactEnumeration => sample_categorical_exact(&self.marginal, rng)?,
            SamplerMethod::Gibbs => self.next_gibbs(rng),
        };
        let x_quant = sample_gaussian_given_categorical(self.model, &x_cat, rng)?;
        Observation::new(t, x_cat, x_quant)
    }

    fn next_gibbs<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<u8> {
        let mut chain = match self.gibbs_state.take() {
            None => {
                let chain = GibbsChain::new(&self.marginal, &self.config, rng);
                self.gibbs_state = Some(chain.state().to_vec());
                return chain.state().to_vec();
            }
            Some(state) => GibbsChain {
                marginal: &self.marginal,
                state,
                thin: self.config.gibbs_thin,
            },
        };
        let x = chain.next_sample(rng);
        self.gibbs_state = Some(x.clone());
        x
    }
}

/// `n` draws from the joint law with time indices `1..=n`.
pub fn sample_joint<R: Rng + ?Sized>(
    model: &MixedModel,
    n: usize,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<Vec<Observation>> {
    let mut sampler = JointSampler::new(model, *config)?;
    (1..=n as u64).map(|t| sampler.draw(t, rng)).collect()
}
