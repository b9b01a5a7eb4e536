//! Quenched pinning model: Gaussian disorder streams and exact log-domain
//! renewal recursions for the constrained and free partition functions.
//!
//! Site weights are `w_n = e^{beta (u + V_n)}` with `u = -beta/2 + Delta`,
//! for `n = 0..=N`. The chain starts at 0, so site 0 always carries its weight.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excursion::ExcursionLaw;
use crate::numeric::log_add_exp;

/// `V_0..=V_N`, reproducible from `(seed, stream_id)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderSequence {
    pub values: Vec<f64>,
    pub seed: u64,
    pub stream_id: u64,
}

/// Random stream for `(seed, stream_id)`: ChaCha8 keyed by the seed, with the
/// stream id selecting one of its 2^64 independent streams.
pub fn stream_rng(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Draws `N + 1` i.i.d. standard Gaussians.
pub fn sample_disorder(seed: u64, stream_id: u64, n: usize) -> DisorderSequence {
    let mut rng = stream_rng(seed, stream_id);
    let values = (0..=n).map(|_| rng.sample(StandardNormal)).collect();
    DisorderSequence {
        values,
        seed,
        stream_id,
    }
}

/// Range of excursion lengths kept in the recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CapMode {
    /// All lengths up to `N`.
    Exact,
    /// Complete excursions longer than `K` are dropped. The final incomplete
    /// excursion of a free chain still uses the exact tail.
    Capped(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub delta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "exact")]
    pub mode: CapMode,
}

fn exact() -> CapMode {
    CapMode::Exact
}

impl ModelParams {
    pub fn new(beta: f64, delta: f64, n: usize) -> Self {
        ModelParams {
            beta,
            delta,
            n,
            mode: CapMode::Exact,
        }
    }

    /// `u = -beta/2 + Delta`.
    pub fn u(&self) -> f64 {
        -0.5 * self.beta + self.delta
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() || !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need beta > 0 and finite Delta, got beta = {}, Delta = {}",
                self.beta, self.delta
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        Ok(())
    }

    /// `ln w_n = beta (u + V_n)` for `n = 0..=N`.
    pub fn log_weights(&self, disorder: &DisorderSequence) -> Result<Vec<f64>> {
        self.validate()?;
        if disorder.values.len() < self.n + 1 {
            return Err(Error::InvalidParameter(format!(
                "disorder has {} values, need N + 1 = {}",
                disorder.values.len(),
                self.n + 1
            )));
        }
        let u = self.u();
        Ok(disorder.values[..=self.n]
            .iter()
            .map(|v| self.beta * (u + v))
            .collect())
    }
}

/// Excursion log-probabilities and log-tails laid out for one system size.
#[derive(Debug, Clone)]
pub struct RenewalKernel {
    n: usize,
    reach: usize,
    log_p: Vec<f64>,
    log_tail: Vec<f64>,
    cap_bias: Option<f64>,
}

impl RenewalKernel {
    pub fn new(law: &ExcursionLaw, n: usize, mode: CapMode) -> Result<Self> {
        let reach = match mode {
            CapMode::Exact => n,
            CapMode::Capped(k) => {
                if k == 0 {
                    return Err(Error::InvalidParameter("cap K must be at least 1".into()));
                }
                if k > law.cap() {
                    return Err(Error::CapTooSmall {
                        requested: k,
                        cap: law.cap(),
                    });
                }
                k.min(n)
            }
        };
        let tail_tol = law.config().map_or(1e-12, |c| c.tail_tol);
        let cap_bias = match mode {
            CapMode::Capped(_) if reach < n && law.tail(reach) > tail_tol => Some(law.tail(reach)),
            _ => None,
        };
        Ok(RenewalKernel {
            n,
            reach,
            log_p: law.log_pmf_vec(reach),
            log_tail: law.log_tail_vec(n),
            cap_bias,
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Longest complete excursion kept.
    pub fn reach(&self) -> usize {
        self.reach
    }

    /// `ln p(k)` for `k <= reach`, `-inf` beyond.
    pub fn log_p(&self, k: usize) -> f64 {
        self.log_p.get(k).copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// `ln P(E > m)` for `m <= N`.
    pub fn log_tail(&self, m: usize) -> f64 {
        self.log_tail[m]
    }

    /// Probability mass `P(E > K)` dropped in capped mode, when above tolerance.
    pub fn cap_bias(&self) -> Option<f64> {
        self.cap_bias
    }
}

/// Forward and backward log partition functions for one disorder realization.
#[derive(Debug, Clone)]
pub struct PartitionTables {
    /// `ln Z0[n]`: chains on `[0, n]` pinned at both ends, site weights included.
    pub log_z0: Vec<f64>,
    /// `ln B[n]`: free continuation from a zero at `n`, excluding `w_n`.
    pub log_b: Vec<f64>,
    /// `ln Z_N` of the free chain.
    pub log_zfree: f64,
    pub log_w: Vec<f64>,
    pub kernel: Arc<RenewalKernel>,
}

impl PartitionTables {
    pub fn size(&self) -> usize {
        self.log_z0.len() - 1
    }

    /// Relative mass dropped by capping, if above tolerance.
    pub fn cap_bias(&self) -> Option<f64> {
        self.kernel.cap_bias
    }
}

/// Runs the recursion for `Delta` and `V` given by `params` and `disorder`.
pub fn forward_recursion(
    law: &ExcursionLaw,
    params: &ModelParams,
    disorder: &DisorderSequence,
) -> Result<PartitionTables> {
    let log_w = params.log_weights(disorder)?;
    let kernel = Arc::new(RenewalKernel::new(law, params.n, params.mode)?);
    Ok(recursion_with_kernel(kernel, log_w))
}

/// Recursion for arbitrary site log-weights `log_w[0..=N]`.
pub fn forward_with_potential(
    law: &ExcursionLaw,
    log_w: Vec<f64>,
    mode: CapMode,
) -> Result<PartitionTables> {
    if log_w.len() < 2 {
        return Err(Error::InvalidParameter("need at least two sites".into()));
    }
    let kernel = Arc::new(RenewalKernel::new(law, log_w.len() - 1, mode)?);
    Ok(recursion_with_kernel(kernel, log_w))
}

/// Recursion against a prebuilt kernel, shared across replicas of one size.
pub fn recursion_with_kernel(kernel: Arc<RenewalKernel>, log_w: Vec<f64>) -> PartitionTables {
    let n = kernel.n;
    assert_eq!(log_w.len(), n + 1, "weights must cover sites 0..=N");
    let reach = kernel.reach;
    let log_p = &kernel.log_p;

    let mut log_z0 = vec![f64::NEG_INFINITY; n + 1];
    log_z0[0] = log_w[0];
    let mut terms = Vec::with_capacity(reach);
    for m in 1..=n {
        terms.clear();
        let kmax = m.min(reach);
        terms.extend((1..=kmax).map(|k| log_p[k] + log_z0[m - k]));
        log_z0[m] = log_w[m] + shifted_lse(&terms);
    }

    // c[m] = ln w_m + ln B[m]
    let mut log_b = vec![f64::NEG_INFINITY; n + 1];
    let mut carry = vec![f64::NEG_INFINITY; n + 1];
    log_b[n] = kernel.log_tail[0];
    carry[n] = log_w[n] + log_b[n];
    for m in (0..n).rev() {
        terms.clear();
        let kmax = (n - m).min(reach);
        terms.extend((1..=kmax).map(|k| log_p[k] + carry[m + k]));
        log_b[m] = log_add_exp(kernel.log_tail[n - m], shifted_lse(&terms));
        carry[m] = log_w[m] + log_b[m];
    }
    let log_zfree = carry[0];

    PartitionTables {
        log_z0,
        log_b,
        log_zfree,
        log_w,
        kernel,
    }
}

fn shifted_lse(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + s.ln()
}

/// `ln Z_N` of the free chain assembled from the forward table alone:
/// `ln sum_n Z0[n] P(E > N - n)`.
pub fn free_from_forward(tables: &PartitionTables) -> f64 {
    let n = tables.size();
    let terms: Vec<f64> = (0..=n)
        .map(|m| tables.log_z0[m] + tables.kernel.log_tail[n - m])
        .collect();
    shifted_lse(&terms)
}

/// Constrained free-energy estimator `ln Z0[N] / (beta N)`.
pub fn quenched_free_energy(tables: &PartitionTables, params: &ModelParams) -> f64 {
    let n = tables.size();
    tables.log_z0[n] / (params.beta * n as f64)
}

/// `P(x_n = 0)` under the free measure, for `n = 0..=N`.
pub fn contact_profile(tables: &PartitionTables) -> Vec<f64> {
    tables
        .log_z0
        .iter()
        .zip(&tables.log_b)
        .map(|(z, b)| (z + b - tables.log_zfree).exp().min(1.0))
        .collect()
}

/// Contact fraction `E[L_N] / (N + 1)` of the free measure.
pub fn contact_fraction(tables: &PartitionTables) -> f64 {
    let profile = contact_profile(tables);
    profile.iter().sum::<f64>() / profile.len() as f64
}

/// `ln E^X e^{beta Delta L_N}`, the exact finite-N annealed partition function
/// of the free chain (equal to `ln E^V Z_N`).
pub fn annealed_reference(law: &ExcursionLaw, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let bd = params.beta * params.delta;
    let tables = forward_with_potential(law, vec![bd; params.n + 1], params.mode)?;
    Ok(tables.log_zfree)
}
