//! Small numerical helpers shared by the solvers: log-sum-exp, bracketed
//! root finding, golden-section maximization, adaptive Gauss-Legendre
//! quadrature and least-squares slopes.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use roots::{find_root_brent, Convergency, SearchError};

/// `ln(sum(exp(x_i)))` with a max shift. Returns `-inf` for an empty slice or
/// when every term is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// `ln(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Stopping rule for Brent's method: a residual threshold plus a relative
/// bracket width.
struct Stopping {
    ftol: f64,
    xtol_rel: f64,
    max_iter: usize,
}

impl Convergency<f64> for Stopping {
    fn is_root_found(&mut self, y: f64) -> bool {
        y.abs() <= self.ftol
    }

    fn is_converged(&mut self, x1: f64, x2: f64) -> bool {
        let scale = x1.abs().max(x2.abs());
        (x1 - x2).abs() <= self.xtol_rel * scale || (x1 - x2).abs() <= f64::MIN_POSITIVE
    }

    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter >= self.max_iter
    }
}

/// Brent root of `f` on a bracketing interval `[a, b]`.
///
/// Stops when `|f| <= ftol` or the bracket shrinks below `xtol_rel` relative
/// width.
pub fn brent<F>(f: F, a: f64, b: f64, ftol: f64, xtol_rel: f64) -> Result<f64, SearchError>
where
    F: FnMut(f64) -> f64,
{
    let mut stop = Stopping {
        ftol,
        xtol_rel,
        max_iter: 400,
    };
    find_root_brent(a, b, f, &mut stop)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_max<F>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn rules() -> &'static (GaussLegendre, GaussLegendre) {
    static RULES: OnceLock<(GaussLegendre, GaussLegendre)> = OnceLock::new();
    RULES.get_or_init(|| {
        (
            GaussLegendre::new(NonZeroUsize::new(10).unwrap()),
            GaussLegendre::new(NonZeroUsize::new(20).unwrap()),
        )
    })
}

/// Adaptive Gauss-Legendre quadrature of a smooth integrand on `[a, b]`.
///
/// The interval is cut into panels no wider than `panel`; each panel compares
/// a 10-point and a 20-point rule and is bisected until they agree to
/// `rel_tol` of the running total (or to `abs_tol`).
pub fn integrate<F>(f: F, a: f64, b: f64, panel: f64, rel_tol: f64, abs_tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    if b <= a {
        return 0.0;
    }
    let (lo, hi) = rules();
    let pieces = ((b - a) / panel).ceil().max(1.0) as usize;
    let width = (b - a) / pieces as f64;
    // Rough scale for the relative criterion.
    let mut estimates = Vec::with_capacity(pieces);
    for i in 0..pieces {
        let x0 = a + i as f64 * width;
        let x1 = if i + 1 == pieces { b } else { x0 + width };
        estimates.push((x0, x1, hi.integrate(x0, x1, &f)));
    }
    let scale: f64 = estimates.iter().map(|e| e.2.abs()).sum();
    let tol = (rel_tol * scale).max(abs_tol);
    let per_panel = tol / pieces as f64;
    estimates
        .into_iter()
        .map(|(x0, x1, coarse)| refine(&f, lo, hi, x0, x1, coarse, per_panel, 0))
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn refine<F>(
    f: &F,
    lo: &GaussLegendre,
    hi: &GaussLegendre,
    a: f64,
    b: f64,
    fine: f64,
    tol: f64,
    depth: u32,
) -> f64
where
    F: Fn(f64) -> f64,
{
    let coarse = lo.integrate(a, b, f);
    // Differences at the level of rounding noise cannot be refined away.
    let floor = 8.0 * f64::EPSILON * fine.abs();
    if (fine - coarse).abs() <= tol.max(floor) || depth >= 24 {
        return fine;
    }
    let m = 0.5 * (a + b);
    let left = hi.integrate(a, m, f);
    let right = hi.integrate(m, b, f);
    refine(f, lo, hi, a, m, left, 0.5 * tol, depth + 1)
        + refine(f, lo, hi, m, b, right, 0.5 * tol, depth + 1)
}

/// Ordinary least-squares fit `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Sample mean and standard error of the mean. The standard error is `NaN`
/// for fewer than two samples.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let xs = [0.1, -2.0, 3.5, 1.0];
        let direct: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_add_exp(1000.0, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn brent_finds_sqrt_two() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-15, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, fx) = golden_max(|x| -(x - 0.3).powi(2) + 1.0, -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
        assert!((fx - 1.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_quadrature_on_peaked_integrand() {
        // integral of exp(-x) on [0, 40] and of a narrow Gaussian
        let v = integrate(|x| (-x).exp(), 0.0, 40.0, 1.0, 1e-14, 0.0);
        assert!((v - (1.0 - (-40f64).exp())).abs() < 1e-14);
        let g = integrate(
            |x| (-(x - 5.0).powi(2) * 1e4).exp(),
            0.0,
            10.0,
            0.5,
            1e-12,
            0.0,
        );
        assert!((g - (std::f64::consts::PI / 1e4).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn two_sample_standard_error() {
        let (m, se) = mean_and_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
