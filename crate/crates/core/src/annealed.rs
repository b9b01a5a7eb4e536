//! Annealed quantities of the homogeneous model: the tilt `alpha0` with
//! `E[e^{-alpha0 E}] = e^{-beta Delta}`, the contact fraction, correlation and
//! coarse-graining lengths, the crossover scale `Delta0(beta)`, an
//! independent variational route to the free energy, and numeric conjugates
//! of slowly varying functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excursion::ExcursionLaw;
use crate::numeric;

/// Default ratio `delta2 / delta_star`.
pub const DEFAULT_EPS2: f64 = 0.1;

/// Largest tilt searched by [`solve_alpha0`].
const ALPHA_LIMIT: f64 = 50.0;

/// Annealed solution at one `(beta, Delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealedSolution {
    pub beta: f64,
    pub delta: f64,
    pub alpha0: f64,
    /// Annealed free energy, `beta * f_a = alpha0`.
    pub f_a: f64,
    pub delta_star: f64,
    /// Correlation length `1 / (beta Delta delta_star)`.
    #[serde(rename = "M")]
    pub corr_len_m: f64,
    pub eps2: f64,
    pub delta2: f64,
    /// Coarse scale `1 / (beta Delta delta2)`.
    #[serde(rename = "R")]
    pub scale_r: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta0: Option<f64>,
}

/// Root of `beta delta_star(Delta) / (2 Delta) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverScale {
    pub beta: f64,
    pub delta0: f64,
    pub g_value_at_root: f64,
}

/// The unique `alpha0 >= 0` with `E[e^{-alpha0 E}] = e^{-beta_delta}`.
///
/// Solved on the deficit `1 - E[e^{-alpha E}] = 1 - e^{-beta_delta}` so that
/// small `beta_delta` keeps full relative accuracy.
pub fn solve_alpha0(law: &ExcursionLaw, beta_delta: f64) -> Result<f64> {
    if !(beta_delta >= 0.0) || !beta_delta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "beta * Delta must be finite and nonnegative, got {beta_delta}"
        )));
    }
    if beta_delta == 0.0 {
        return Ok(0.0);
    }
    let target = -(-beta_delta).exp_m1();
    let f = |a: f64| law.laplace_deficit(a) - target;

    let mut hi = 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > ALPHA_LIMIT {
            return Err(Error::BracketFailure {
                what: "alpha0",
                limit: ALPHA_LIMIT,
            });
        }
    }
    let mut lo = hi;
    while f(lo) > 0.0 {
        lo *= 0.5;
        if lo == 0.0 {
            return Err(Error::BracketFailure {
                what: "alpha0",
                limit: 0.0,
            });
        }
    }
    if lo == hi {
        lo = 0.0;
    }
    let ftol = (1e-12 * target).min(1e-13);
    numeric::brent(f, lo, hi, ftol, 1e-15).map_err(|_| Error::NoConvergence("alpha0"))
}

/// Fills an [`AnnealedSolution`]. `delta <= 0` gives the delocalized point
/// `alpha0 = 0` with infinite lengths.
pub fn annealed_solution(
    law: &ExcursionLaw,
    beta: f64,
    delta: f64,
    eps2: f64,
) -> Result<AnnealedSolution> {
    if !(beta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need beta > 0 and finite Delta, got beta = {beta}, Delta = {delta}"
        )));
    }
    if !(eps2 > 0.0 && eps2 < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "eps2 must lie in (0, 1/2), got {eps2}"
        )));
    }
    let beta_delta = beta * delta.max(0.0);
    let alpha0 = solve_alpha0(law, beta_delta)?;
    let delta_star = 1.0 / law.log_mgf_slope(alpha0);
    let corr_len_m = 1.0 / (beta_delta * delta_star);
    let delta2 = eps2 * delta_star;
    Ok(AnnealedSolution {
        beta,
        delta,
        alpha0,
        f_a: alpha0 / beta,
        delta_star,
        corr_len_m,
        eps2,
        delta2,
        scale_r: 1.0 / (beta_delta * delta2),
        delta0: None,
    })
}

/// Rate function of the excursion-length mean,
/// `I(m) = sup_{t >= 0} (-t m - ln E[e^{-tE}])`.
///
/// The supremum is located through its stationarity condition
/// `E[E e^{-tE}] / E[e^{-tE}] = m`.
pub fn rate_function(law: &ExcursionLaw, m: f64) -> f64 {
    if m < 1.0 {
        return f64::INFINITY;
    }
    if m == 1.0 {
        return -law.pmf(1).ln();
    }
    if m >= law.mean() {
        return 0.0;
    }
    let objective = |t: f64| -t * m - (-law.laplace_deficit(t)).ln_1p();
    let slope_gap = |t: f64| law.log_mgf_slope(t) - m;

    let mut hi = 1.0;
    let mut lo = 1.0;
    if slope_gap(1.0) > 0.0 {
        while slope_gap(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 700.0 {
                return objective(hi);
            }
        }
    } else {
        while slope_gap(lo) <= 0.0 {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-300 {
                return objective(lo);
            }
        }
    }
    let gap_lo = |u: f64| slope_gap(u.exp());
    match numeric::brent(gap_lo, lo.ln(), hi.ln(), 0.0, 1e-15) {
        Ok(u) => objective(u.exp()),
        Err(_) => {
            // Fall back to direct maximization of the concave objective.
            numeric::golden_max(|u: f64| objective(u.exp()), lo.ln(), hi.ln(), 1e-10).1
        }
    }
}

/// `beta f_a = sup_{0 < delta <= 1} (beta Delta delta - delta I(1/delta))`,
/// maximized numerically over `ln delta`. Returns `(beta f_a, argmax)`.
pub fn variational_free_energy(law: &ExcursionLaw, beta: f64, delta: f64) -> (f64, f64) {
    let bd = beta * delta;
    if !(bd > 0.0) {
        return (0.0, 0.0);
    }
    let value = |u: f64| {
        let d = u.exp();
        let i = rate_function(law, 1.0 / d);
        if i.is_infinite() {
            return f64::NEG_INFINITY;
        }
        bd * d - d * i
    };
    // Walk down from delta = 1 until the objective turns over.
    let mut prev = value(0.0);
    let mut u = 0.0;
    let mut best_u = 0.0;
    loop {
        let next = value(u - 1.0);
        if next < prev || u < -700.0 {
            break;
        }
        prev = next;
        u -= 1.0;
        best_u = u;
    }
    let (lo, hi) = (best_u - 1.0, (best_u + 1.0).min(0.0));
    let (u_star, v) = numeric::golden_max(value, lo, hi, 1e-9);
    if v < prev {
        return (prev, best_u.exp());
    }
    (v, u_star.exp())
}

/// `Delta0(beta)`: root of `G(Delta) = beta delta_star(Delta) / (2 Delta) = 1`.
///
/// A root requires `G -> inf` as `Delta -> 0`, i.e. an infinite-mean law;
/// finite-mean laws report [`Error::NoRoot`].
pub fn crossover_delta0(law: &ExcursionLaw, beta: f64) -> Result<CrossoverScale> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if law.mean().is_finite() {
        return Err(Error::NoRoot(format!(
            "mean excursion length is finite ({:.6}); delta_star stays bounded below",
            law.mean()
        )));
    }
    let g = |d: f64| -> Result<f64> {
        let a = solve_alpha0(law, beta * d)?;
        Ok(beta / (2.0 * d * law.log_mgf_slope(a)))
    };
    // G(beta / 2) = delta_star <= 1.
    let mut hi = 0.5 * beta;
    while g(hi)? > 1.0 {
        hi *= 2.0;
    }
    let mut lo = hi;
    while g(lo)? < 1.0 {
        lo *= 0.5;
        if beta * lo < 1e-12 {
            return Err(Error::NoRoot(format!(
                "G(Delta) < 1 down to beta Delta = {:e}",
                beta * lo
            )));
        }
    }
    if lo == hi {
        return Ok(CrossoverScale {
            beta,
            delta0: lo,
            g_value_at_root: g(lo)?,
        });
    }
    let mut failure = None;
    let root = numeric::brent(
        |u: f64| match g(u.exp()) {
            Ok(v) => v - 1.0,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo.ln(),
        hi.ln(),
        1e-10,
        1e-15,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let delta0 = root.map_err(|_| Error::NoConvergence("Delta0"))?.exp();
    Ok(CrossoverScale {
        beta,
        delta0,
        g_value_at_root: g(delta0)?,
    })
}

/// Conjugate of a slowly varying function `phibar` tabulated on `[lo, hi]`:
/// solves `x phibar(x) = y` and returns `1 / phibar(x)`.
///
/// `x -> x phibar(x)` must be increasing on the domain.
pub fn conjugate_slow_var<F>(phibar: F, lo: f64, hi: f64, y: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let image = |x: f64| x * phibar(x);
    let (ylo, yhi) = (image(lo), image(hi));
    if !(y >= ylo && y <= yhi) {
        return Err(Error::OutOfRange {
            y,
            lo: ylo,
            hi: yhi,
        });
    }
    if y == ylo {
        return Ok(1.0 / phibar(lo));
    }
    if y == yhi {
        return Ok(1.0 / phibar(hi));
    }
    let u = numeric::brent(
        |u: f64| image(u.exp()) / y - 1.0,
        lo.ln(),
        hi.ln(),
        1e-15,
        1e-15,
    )
    .map_err(|_| Error::NoConvergence("conjugate"))?;
    Ok(1.0 / phibar(u.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excursion::{build_law, SlowVariation};

    fn constant(c: f64) -> ExcursionLaw {
        build_law(c, SlowVariation::Constant { a: 1.0 }, 4096, 1e-12).unwrap()
    }

    #[test]
    fn alpha0_examples() {
        let law = constant(1.8);
        assert_eq!(solve_alpha0(&law, 0.0).unwrap(), 0.0);
        assert!(solve_alpha0(&law, 0.1).unwrap() < solve_alpha0(&law, 0.2).unwrap());

        let two = ExcursionLaw::from_pmf(&[0.5, 0.5]).unwrap();
        let a = solve_alpha0(&two, 2f64.ln()).unwrap();
        let golden = ((1.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((a - golden).abs() < 1e-13);
        assert!((a - 0.481_211_825_059_603_47).abs() < 1e-13);
    }

    #[test]
    fn alpha0_residual_is_tight() {
        for c in [1.3, 1.8, 2.0, 2.5] {
            let law = constant(c);
            for bd in [1e-5, 1e-3, 0.1, 1.0, 5.0] {
                let a = solve_alpha0(&law, bd).unwrap();
                assert!(
                    (law.laplace(a) - (-bd).exp()).abs() <= 1e-13,
                    "c={c} bd={bd}"
                );
            }
        }
    }

    #[test]
    fn alpha0_bracket_failure() {
        let law = constant(2.0);
        // Needs e^{-alpha} p(1) ~ e^{-200}.
        assert!(matches!(
            solve_alpha0(&law, 200.0),
            Err(Error::BracketFailure { .. })
        ));
    }

    #[test]
    fn solution_fields_are_consistent() {
        let law = constant(1.8);
        let s = annealed_solution(&law, 0.5, 0.3, DEFAULT_EPS2).unwrap();
        assert_eq!(s.f_a * s.beta, s.alpha0);
        assert!((s.corr_len_m * s.beta * s.delta * s.delta_star - 1.0).abs() < 1e-14);
        assert!((s.scale_r / s.corr_len_m - 1.0 / s.eps2).abs() < 1e-9);
        assert!(s.delta_star > 0.0 && s.delta_star <= 1.0);

        let zero = annealed_solution(&law, 0.5, 0.0, DEFAULT_EPS2).unwrap();
        assert_eq!(zero.f_a, 0.0);
        assert!(annealed_solution(&law, 0.5, 0.1, 0.5).is_err());
    }

    #[test]
    fn finite_mean_contact_fraction_limit() {
        let law = constant(2.5);
        let s = annealed_solution(&law, 1.0, 1e-4, DEFAULT_EPS2).unwrap();
        // 1 / E[E] = zeta(2.5) / zeta(1.5)
        assert!((s.delta_star / 0.513_512_446_795_187_9 - 1.0).abs() < 0.02);
    }

    #[test]
    fn contact_fraction_is_monotone_in_delta() {
        let law = build_law(1.5, SlowVariation::InverseLog { a: 1.0 }, 4096, 1e-12).unwrap();
        let mut prev = 0.0;
        for k in 0..30 {
            let bd = 1e-6 * 1.7f64.powi(k);
            let s = annealed_solution(&law, 1.0, bd, DEFAULT_EPS2).unwrap();
            assert!(s.delta_star >= prev && s.delta_star <= 1.0);
            assert!(s.f_a > 0.0);
            prev = s.delta_star;
        }
    }

    #[test]
    fn contact_fraction_scaling_ratio_is_bounded() {
        // delta_star / (beta Delta) * (beta Delta)^{(2c-3)/(c-1)} stays within a factor 4.
        let c = 1.8;
        let law = constant(c);
        let ratios: Vec<f64> = (0..=8)
            .map(|k| {
                let bd = 1e-5 * 10f64.powf(k as f64 / 4.0);
                let ds = 1.0 / law.log_mgf_slope(solve_alpha0(&law, bd).unwrap());
                ds / bd * bd.powf((2.0 * c - 3.0) / (c - 1.0))
            })
            .collect();
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 4.0, "{ratios:?}");
    }

    #[test]
    fn rate_function_basics() {
        let law = constant(2.5);
        assert_eq!(rate_function(&law, 0.5), f64::INFINITY);
        assert!((rate_function(&law, 1.0) + law.pmf(1).ln()).abs() < 1e-15);
        assert_eq!(rate_function(&law, 3.0), 0.0);
        let i1 = rate_function(&law, 1.2);
        let i2 = rate_function(&law, 1.6);
        assert!(i1 > i2 && i2 > 0.0);
        assert!(i1 < -law.pmf(1).ln());
    }

    #[test]
    fn variational_route_matches_alpha0() {
        for (c, bd) in [(1.5, 1e-2), (2.5, 0.1), (1.8, 1.0)] {
            let law = constant(c);
            let a0 = solve_alpha0(&law, bd).unwrap();
            let ds = 1.0 / law.log_mgf_slope(a0);
            let (v, arg) = variational_free_energy(&law, 1.0, bd);
            assert!((v / a0 - 1.0).abs() < 1e-6, "c={c} {v} {a0}");
            assert!((arg / ds - 1.0).abs() < 1e-4, "c={c} {arg} {ds}");
        }
        assert_eq!(variational_free_energy(&constant(2.0), 1.0, 0.0).0, 0.0);
    }

    #[test]
    fn crossover_root_and_no_root() {
        let law = constant(1.8);
        let x = crossover_delta0(&law, 0.5).unwrap();
        assert!(x.delta0 > 0.0);
        assert!((x.g_value_at_root - 1.0).abs() <= 1e-8);
        assert!(matches!(
            crossover_delta0(&constant(2.5), 0.5),
            Err(Error::NoRoot(_))
        ));
    }

    #[test]
    fn conjugate_examples() {
        for y in [0.5, 3.0, 1e4] {
            assert!((conjugate_slow_var(|_| 1.0, 1e-3, 1e6, y).unwrap() - 1.0).abs() < 1e-15);
        }
        let phi = |x: f64| (std::f64::consts::E + x).ln();
        for x in [1.0, 37.5, 1e5] {
            let back = conjugate_slow_var(phi, 1.0, 1e8, x * phi(x)).unwrap();
            assert!((back - 1.0 / phi(x)).abs() < 1e-10);
        }
        assert!(matches!(
            conjugate_slow_var(phi, 1.0, 10.0, 1e6),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn c_two_contact_fraction_follows_conjugate_of_truncated_mean() {
        let law = constant(2.0);
        let phibar = |x: f64| 1.0 / law.mbar_interp(x);
        let mut bd: f64 = 1e-5;
        while bd <= 1e-3 {
            let inv_ds = law.log_mgf_slope(solve_alpha0(&law, bd).unwrap());
            let conj = conjugate_slow_var(phibar, 1.0, 1e12, 1.0 / bd).unwrap();
            assert!(0.25 * conj <= inv_ds && inv_ds <= 3.0 * conj, "bd={bd}");
            bd *= 3.0;
        }
    }
}
