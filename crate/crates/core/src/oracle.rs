//! Brute-force references for small systems: enumeration over every return
//! configuration, the tilted-truncated large-deviation identity, and the
//! renewal-density ratio over semi-coarse-graining intervals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excursion::{tilt_for_log_norm, tilt_truncate, ExcursionLaw};
use crate::numeric::log_sum_exp;
use crate::pathkit::SkeletonConfig;
use crate::quenched::{DisorderSequence, ModelParams};

/// Largest system size accepted by the enumerators.
pub const MAX_ENUMERATION: usize = 20;

const CHUNK: u64 = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub constrain_endpoint: bool,
    /// Drop configurations containing an excursion longer than this.
    #[serde(default)]
    pub truncation: Option<usize>,
}

struct Config<'a> {
    n: usize,
    log_p: &'a [f64],
    log_tail: &'a [f64],
    log_w: &'a [f64],
    constrained: bool,
    truncation: usize,
}

impl Config<'_> {
    /// Bit `j` of `mask` marks a return at site `j + 1`. Free chains use bit
    /// `N - 1` for the endpoint.
    fn log_weight(&self, mask: u64, mut visit: impl FnMut(usize)) -> f64 {
        let mut total = self.log_w[0];
        visit(0);
        let mut last = 0;
        let top = if self.constrained { self.n - 1 } else { self.n };
        for site in 1..=top {
            if mask >> (site - 1) & 1 == 1 {
                let gap = site - last;
                if gap > self.truncation {
                    return f64::NEG_INFINITY;
                }
                total += self.log_p[gap] + self.log_w[site];
                visit(site);
                last = site;
            }
        }
        if self.constrained {
            let gap = self.n - last;
            if gap > self.truncation {
                return f64::NEG_INFINITY;
            }
            visit(self.n);
            total + self.log_p[gap] + self.log_w[self.n]
        } else {
            total + self.log_tail[self.n - last]
        }
    }

    fn masks(&self) -> u64 {
        1u64 << if self.constrained { self.n - 1 } else { self.n }
    }
}

fn check_size(n: usize, log_w: &[f64]) -> Result<()> {
    if n > MAX_ENUMERATION {
        return Err(Error::TooLarge(n));
    }
    if n == 0 || log_w.len() < n + 1 {
        return Err(Error::InvalidParameter(format!(
            "need N >= 1 and N + 1 site weights, got N = {n} with {} weights",
            log_w.len()
        )));
    }
    Ok(())
}

/// `ln Z` by summing over all return configurations for the site
/// log-weights `log_w[0..=N]`.
pub fn enumerate_with_potential(
    law: &ExcursionLaw,
    log_w: &[f64],
    spec: &EnumerationSpec,
) -> Result<f64> {
    let n = spec.n;
    check_size(n, log_w)?;
    let log_p = law.log_pmf_vec(n);
    let log_tail = law.log_tail_vec(n);
    let cfg = Config {
        n,
        log_p: &log_p,
        log_tail: &log_tail,
        log_w,
        constrained: spec.constrain_endpoint,
        truncation: spec.truncation.unwrap_or(usize::MAX),
    };
    let total = cfg.masks();
    let chunks: Vec<f64> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(total);
            let terms: Vec<f64> = (lo..hi).map(|mask| cfg.log_weight(mask, |_| {})).collect();
            log_sum_exp(&terms)
        })
        .collect();
    Ok(log_sum_exp(&chunks))
}

/// Enumerated `ln Z` for `Delta` and `V` taken from `params` and `disorder`.
pub fn enumerate_partition(
    law: &ExcursionLaw,
    params: &ModelParams,
    disorder: &DisorderSequence,
    spec: &EnumerationSpec,
) -> Result<f64> {
    if spec.n > MAX_ENUMERATION {
        return Err(Error::TooLarge(spec.n));
    }
    let log_w = params.log_weights(disorder)?;
    enumerate_with_potential(law, &log_w, spec)
}

/// `P(x_n = 0)` for `n = 0..=N` under the free measure, by enumeration.
pub fn enumerate_contacts(law: &ExcursionLaw, log_w: &[f64], n: usize) -> Result<Vec<f64>> {
    check_size(n, log_w)?;
    let log_p = law.log_pmf_vec(n);
    let log_tail = law.log_tail_vec(n);
    let cfg = Config {
        n,
        log_p: &log_p,
        log_tail: &log_tail,
        log_w,
        constrained: false,
        truncation: usize::MAX,
    };
    let total = cfg.masks();
    // Per chunk: (ln Z, ln of the weight carried by each site).
    let chunks: Vec<(f64, Vec<f64>)> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(total);
            let mut per_site: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
            let mut all = Vec::with_capacity((hi - lo) as usize);
            let mut sites = Vec::with_capacity(n + 1);
            for mask in lo..hi {
                sites.clear();
                let w = cfg.log_weight(mask, |s| sites.push(s));
                all.push(w);
                for &s in &sites {
                    per_site[s].push(w);
                }
            }
            (
                log_sum_exp(&all),
                per_site.iter().map(|v| log_sum_exp(v)).collect(),
            )
        })
        .collect();
    let log_z = log_sum_exp(&chunks.iter().map(|c| c.0).collect::<Vec<_>>());
    Ok((0..=n)
        .map(|s| {
            let site: Vec<f64> = chunks.iter().map(|c| c.1[s]).collect();
            (log_sum_exp(&site) - log_z).exp()
        })
        .collect())
}

/// Renewal density `u(t) = sum_k pmf[k] u(t - k)`, `u(0) = 1`, for `t <= n`.
pub fn renewal_density(pmf: &[f64], n: usize) -> Vec<f64> {
    let mut u = vec![0.0; n + 1];
    u[0] = 1.0;
    for t in 1..=n {
        u[t] = (1..pmf.len().min(t + 1)).map(|k| pmf[k] * u[t - k]).sum();
    }
    u
}

/// Both sides of the identity
/// `E[e^{-beta chi L_n} | no excursion > R, x_n = 0]
///   = e^{-beta chi} e^{-alpha n} u_nu(n) / u_q(n)`,
/// where `q` is the law conditioned on `E <= R`, `nu` its `alpha` tilt with
/// `E_q[e^{alpha E}] = e^{beta chi}`, and `L_n` counts the zeros of `[0, n]`
/// including site 0. The left side is enumerated over excursion sequences
/// drawn i.i.d. from `q`; the right side uses renewal convolution.
pub fn verify_ldp_identity(
    law: &ExcursionLaw,
    beta: f64,
    chi: f64,
    n: usize,
    r: usize,
) -> Result<(f64, f64)> {
    if n > 18 {
        return Err(Error::TooLarge(n));
    }
    if n == 0 || r == 0 || r > n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= R <= n, got n = {n}, R = {r}"
        )));
    }
    let beta_chi = beta * chi;
    let q = tilt_truncate(law, 0.0, r)?;
    let alpha = tilt_for_log_norm(law, r, beta_chi)?;
    let nu = tilt_truncate(law, alpha, r)?;

    // Enumerate interior returns in {1..n-1}; n is always a return.
    let qp = q.pmf_table();
    let (mut num, mut den) = (0.0, 0.0);
    for mask in 0u64..(1 << (n - 1)) {
        let mut w = 1.0;
        let mut zeros = 1;
        let mut last = 0;
        for site in 1..=n {
            if site == n || mask >> (site - 1) & 1 == 1 {
                let gap = site - last;
                if gap > r {
                    w = 0.0;
                    break;
                }
                w *= qp[gap];
                zeros += 1;
                last = site;
            }
        }
        if w > 0.0 {
            num += w * (-beta_chi * zeros as f64).exp();
            den += w;
        }
    }
    let lhs = num / den;

    let u_nu = renewal_density(nu.pmf_table(), n);
    let u_q = renewal_density(qp, n);
    let rhs = (-beta_chi - alpha * n as f64).exp() * u_nu[n] / u_q[n];
    Ok((lhs, rhs))
}

/// Ratio of expected renewals in the interval `I_i` of `config`, under the
/// tilted-truncated law `nu_{alpha,R}` and under the truncated law `q`.
pub fn verify_ratio_bound(
    law: &ExcursionLaw,
    alpha: f64,
    config: &SkeletonConfig,
    i: i64,
) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be nonnegative, got {alpha}"
        )));
    }
    let (lo, hi) = config.interval(i).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "interval I_{i} is empty or below l0 = {}",
            config.l0
        ))
    })?;
    if hi > 10_000 {
        return Err(Error::TooLarge(hi));
    }
    let r = config.r;
    let nu = tilt_truncate(law, alpha, r)?;
    let q = tilt_truncate(law, 0.0, r)?;
    let u_nu = renewal_density(nu.pmf_table(), hi);
    let u_q = renewal_density(q.pmf_table(), hi);
    let num: f64 = u_nu[lo..=hi].iter().sum();
    let den: f64 = u_q[lo..=hi].iter().sum();
    Ok(num / den)
}
