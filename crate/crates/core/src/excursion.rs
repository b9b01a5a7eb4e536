//! Excursion-length laws `p(n) = phi(n) / (Z n^c)` with tabulated pmf, tail and
//! truncated-mean tables, their Laplace transforms, and the tilted-truncated
//! family used by the sparse-return estimates.
//!
//! Sums beyond the table cap are evaluated by direct summation up to
//! [`EM_START`] and an Euler-Maclaurin tail (integral plus the two leading
//! boundary corrections) past that point.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, log_sum_exp};

/// Point where direct summation hands over to the Euler-Maclaurin tail.
const EM_START: usize = 4096;

/// Tabulated slowly varying corrections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum SlowVariation {
    /// `phi(n) = a`
    Constant { a: f64 },
    /// `phi(n) = a (ln(e + n))^gamma`
    LogPower { a: f64, gamma: f64 },
    /// `phi(n) = a / ln(e + n)`, which tends to zero.
    InverseLog { a: f64 },
}

impl SlowVariation {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            SlowVariation::Constant { a } => a,
            SlowVariation::LogPower { a, gamma } => a * (E + x).ln().powf(gamma),
            SlowVariation::InverseLog { a } => a / (E + x).ln(),
        }
    }

    pub fn ln_value(&self, x: f64) -> f64 {
        match *self {
            SlowVariation::Constant { a } => a.ln(),
            SlowVariation::LogPower { a, gamma } => a.ln() + gamma * (E + x).ln().ln(),
            SlowVariation::InverseLog { a } => a.ln() - (E + x).ln().ln(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            SlowVariation::Constant { .. } => 0.0,
            SlowVariation::LogPower { a, gamma } => {
                let l = (E + x).ln();
                a * gamma * l.powf(gamma - 1.0) / (E + x)
            }
            SlowVariation::InverseLog { a } => {
                let l = (E + x).ln();
                -a / (l * l * (E + x))
            }
        }
    }

    /// Exponent of the logarithmic growth, used to pad quadrature ranges.
    fn log_growth(&self) -> f64 {
        match *self {
            SlowVariation::LogPower { gamma, .. } => gamma.max(0.0),
            _ => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let (a, gamma) = match *self {
            SlowVariation::Constant { a } | SlowVariation::InverseLog { a } => (a, 0.0),
            SlowVariation::LogPower { a, gamma } => (a, gamma),
        };
        if !(a > 0.0 && a.is_finite() && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "slowly varying function must be positive and finite, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Serializable description of a power-law excursion law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawConfig {
    pub c: f64,
    pub phi: SlowVariation,
    pub cap: usize,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
}

fn default_tail_tol() -> f64 {
    1e-12
}

impl LawConfig {
    pub fn new(c: f64, phi: SlowVariation, cap: usize) -> Self {
        LawConfig {
            c,
            phi,
            cap,
            tail_tol: default_tail_tol(),
        }
    }

    pub fn build(&self) -> Result<ExcursionLaw> {
        build_law(self.c, self.phi, self.cap, self.tail_tol)
    }
}

/// Weight `g(x)` multiplying `phi(x) x^-c` in a tail sum.
#[derive(Debug, Clone, Copy)]
enum Weight {
    One,
    /// `e^{-tx}`
    Exp(f64),
    /// `1 - e^{-tx}`
    OneMinusExp(f64),
    /// `x e^{-tx}`
    LinExp(f64),
}

impl Weight {
    fn value(self, x: f64) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::Exp(t) => (-t * x).exp(),
            Weight::OneMinusExp(t) => -(-t * x).exp_m1(),
            Weight::LinExp(t) => x * (-t * x).exp(),
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Weight::One => 0.0,
            Weight::Exp(t) => -t * (-t * x).exp(),
            Weight::OneMinusExp(t) => t * (-t * x).exp(),
            Weight::LinExp(t) => (1.0 - t * x) * (-t * x).exp(),
        }
    }

    /// Extra power of x carried by the weight.
    fn power(self) -> f64 {
        match self {
            Weight::LinExp(_) => 1.0,
            _ => 0.0,
        }
    }

    /// Exponential cutoff rate, if any.
    fn rate(self) -> f64 {
        match self {
            Weight::Exp(t) | Weight::LinExp(t) => t,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    PowerLaw {
        c: f64,
        phi: SlowVariation,
        norm: f64,
        log_norm: f64,
        tail_tol: f64,
    },
    Finite,
}

/// A normalized excursion-length law with cached tables on `1..=cap`.
///
/// Tables are indexed by length: `pmf(k)` for `k` in `1..=cap`, `tail(n)` and
/// `mbar(n)` for `n` in `0..=cap`. Queries past the cap fall back to the
/// analytic form for power laws and to zero for finitely supported laws.
#[derive(Debug, Clone)]
pub struct ExcursionLaw {
    shape: Shape,
    cap: usize,
    pmf: Vec<f64>,
    log_pmf: Vec<f64>,
    tail: Vec<f64>,
    mbar: Vec<f64>,
    mean: f64,
    /// Start of the Euler-Maclaurin tail.
    start: usize,
    /// Unnormalized weights `phi(k) k^-c` for `cap < k <= start`.
    bridge: Vec<f64>,
}

/// Builds the law `p(n) = phi(n) / (Z n^c)` tabulated up to `cap`.
pub fn build_law(c: f64, phi: SlowVariation, cap: usize, tail_tol: f64) -> Result<ExcursionLaw> {
    if !(c > 1.0) || !c.is_finite() {
        return Err(Error::NonSummable(c));
    }
    phi.validate()?;
    if cap < 64 {
        return Err(Error::InvalidParameter(format!(
            "cap must be at least 64, got {cap}"
        )));
    }
    if !(tail_tol > 0.0 && tail_tol <= 1e-6) {
        return Err(Error::InvalidParameter(format!(
            "tail_tol must lie in (0, 1e-6], got {tail_tol}"
        )));
    }

    let mut law = ExcursionLaw {
        shape: Shape::PowerLaw {
            c,
            phi,
            norm: 1.0,
            log_norm: 0.0,
            tail_tol,
        },
        cap,
        pmf: Vec::new(),
        log_pmf: Vec::new(),
        tail: Vec::new(),
        mbar: Vec::new(),
        mean: f64::NAN,
        start: EM_START,
        bridge: Vec::new(),
    };
    law.start = law.em_start();
    law.bridge = (cap + 1..=law.start.max(cap))
        .map(|k| law.unnormalized(k as f64))
        .collect();

    // Unnormalized remainders T(n) = sum_{k>n} f(k), accumulated once from
    // the top so small tails never come from a difference of partial sums.
    let mut remainder = vec![0.0; cap + 1];
    let mut acc = law.upper_sum(cap, Weight::One);
    let mut comp = 0.0;
    remainder[cap] = acc;
    for n in (0..cap).rev() {
        // Neumaier-compensated accumulation.
        let term = law.unnormalized(n as f64 + 1.0);
        let t = acc + term;
        if acc.abs() >= term.abs() {
            comp += (acc - t) + term;
        } else {
            comp += (term - t) + acc;
        }
        acc = t;
        remainder[n] = acc + comp;
    }
    let norm = remainder[0];
    let log_norm = norm.ln();
    law.shape = Shape::PowerLaw {
        c,
        phi,
        norm,
        log_norm,
        tail_tol,
    };

    law.log_pmf = std::iter::once(f64::NEG_INFINITY)
        .chain((1..=cap).map(|k| law.log_pmf(k)))
        .collect();
    law.pmf = law.log_pmf.iter().map(|l| l.exp()).collect();
    law.tail = remainder.iter().map(|r| r / norm).collect();
    law.mbar = cumulative_mean(&law.pmf);
    law.mean = law.compute_mean();
    Ok(law)
}

fn cumulative_mean(pmf: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    pmf.iter()
        .enumerate()
        .map(|(k, p)| {
            acc += k as f64 * p;
            acc
        })
        .collect()
}

impl ExcursionLaw {
    /// A finitely supported law with `pmf[k - 1] = P(E = k)`. The input is
    /// renormalized to unit mass.
    pub fn from_pmf(pmf: &[f64]) -> Result<ExcursionLaw> {
        if pmf.is_empty() || pmf.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter(
                "pmf must be a nonempty list of nonnegative numbers".into(),
            ));
        }
        let total: f64 = pmf.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("pmf has zero mass".into()));
        }
        let cap = pmf.len();
        let mut table = vec![0.0; cap + 1];
        for (k, p) in pmf.iter().enumerate() {
            table[k + 1] = p / total;
        }
        let mut tail = vec![0.0; cap + 1];
        let mut acc = 0.0;
        for n in (0..cap).rev() {
            acc += table[n + 1];
            tail[n] = acc;
        }
        tail[0] = 1.0;
        let mbar = cumulative_mean(&table);
        let mean = mbar[cap];
        Ok(ExcursionLaw {
            shape: Shape::Finite,
            cap,
            log_pmf: table.iter().map(|p| p.ln()).collect(),
            pmf: table,
            tail,
            mbar,
            mean,
            start: cap,
            bridge: Vec::new(),
        })
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Exponent `c`, or `None` for a finitely supported law.
    pub fn exponent(&self) -> Option<f64> {
        match self.shape {
            Shape::PowerLaw { c, .. } => Some(c),
            Shape::Finite => None,
        }
    }

    pub fn slow_variation(&self) -> Option<SlowVariation> {
        match self.shape {
            Shape::PowerLaw { phi, .. } => Some(phi),
            Shape::Finite => None,
        }
    }

    /// Normalizing constant `Z = sum_k phi(k) / k^c` (1 for finite laws).
    pub fn norm(&self) -> f64 {
        match self.shape {
            Shape::PowerLaw { norm, .. } => norm,
            Shape::Finite => 1.0,
        }
    }

    pub fn config(&self) -> Option<LawConfig> {
        match self.shape {
            Shape::PowerLaw {
                c, phi, tail_tol, ..
            } => Some(LawConfig {
                c,
                phi,
                cap: self.cap,
                tail_tol,
            }),
            Shape::Finite => None,
        }
    }

    /// `P(E = k)`; zero for `k = 0`.
    pub fn pmf(&self, k: usize) -> f64 {
        if k <= self.cap {
            self.pmf[k]
        } else {
            self.log_pmf(k).exp()
        }
    }

    /// `ln P(E = k)`, exact from the closed form for power laws.
    pub fn log_pmf(&self, k: usize) -> f64 {
        if k == 0 {
            return f64::NEG_INFINITY;
        }
        match self.shape {
            Shape::PowerLaw {
                c, phi, log_norm, ..
            } => {
                let x = k as f64;
                phi.ln_value(x) - c * x.ln() - log_norm
            }
            Shape::Finite => {
                if k <= self.cap {
                    self.log_pmf[k]
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// `P(E > n)`.
    pub fn tail(&self, n: usize) -> f64 {
        if n <= self.cap {
            return self.tail[n];
        }
        match self.shape {
            Shape::PowerLaw { norm, .. } => self.upper_sum(n, Weight::One) / norm,
            Shape::Finite => 0.0,
        }
    }

    /// Truncated mean `E[E; E <= n]`.
    pub fn mbar(&self, n: usize) -> f64 {
        if n <= self.cap {
            return self.mbar[n];
        }
        match self.shape {
            Shape::PowerLaw { norm, .. } => {
                self.mbar[self.cap] + self.range_sum(self.cap, n, Weight::LinExp(0.0)) / norm
            }
            Shape::Finite => self.mbar[self.cap],
        }
    }

    /// Piecewise-linear interpolation of [`mbar`](Self::mbar) to real arguments.
    pub fn mbar_interp(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let n = x.floor();
        let frac = x - n;
        let n = n as usize;
        let lower = self.mbar(n);
        lower + frac * (n + 1) as f64 * self.pmf(n + 1)
    }

    /// `E[E]`, or `+inf` when the mean diverges.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn pmf_table(&self) -> &[f64] {
        &self.pmf
    }

    pub fn tail_table(&self) -> &[f64] {
        &self.tail
    }

    pub fn mbar_table(&self) -> &[f64] {
        &self.mbar
    }

    /// `ln P(E = k)` for `k = 0..=n_max` (entry 0 is `-inf`).
    pub fn log_pmf_vec(&self, n_max: usize) -> Vec<f64> {
        (0..=n_max)
            .map(|k| {
                if k <= self.cap {
                    self.log_pmf[k]
                } else {
                    self.log_pmf(k)
                }
            })
            .collect()
    }

    /// `ln P(E > n)` for `n = 0..=n_max`. Entries beyond the cap are obtained
    /// from one tail evaluation at `n_max` plus a backward accumulation.
    pub fn log_tail_vec(&self, n_max: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_max + 1];
        let top = n_max.min(self.cap);
        for (n, slot) in out.iter_mut().enumerate().take(top + 1) {
            *slot = self.tail[n].ln();
        }
        if n_max > self.cap {
            let mut acc = self.tail(n_max);
            out[n_max] = acc.ln();
            for n in (self.cap + 1..n_max).rev() {
                acc += self.pmf(n + 1);
                out[n] = acc.ln();
            }
        }
        out
    }

    /// `M_E(-t) = E[e^{-tE}]` for `t >= 0`.
    ///
    /// The table part is summed exactly; the remainder past the cap lies in
    /// `[0, e^{-t(cap+1)} tail(cap)]` and is evaluated to quadrature accuracy.
    pub fn laplace(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 1.0;
        }
        let head: f64 = (1..=self.cap)
            .map(|k| (-t * k as f64).exp() * self.pmf[k])
            .sum();
        head + self.upper_normalized(Weight::Exp(t))
    }

    /// `1 - M_E(-t)`, computed without cancellation for small `t`.
    pub fn laplace_deficit(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let head: f64 = (1..=self.cap)
            .map(|k| -(-t * k as f64).exp_m1() * self.pmf[k])
            .sum();
        head + self.upper_normalized(Weight::OneMinusExp(t))
    }

    /// `(E[e^{-tE}], E[E e^{-tE}])`.
    pub fn laplace_moments(&self, t: f64) -> (f64, f64) {
        if t == 0.0 {
            return (1.0, self.mean);
        }
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        for k in 1..=self.cap {
            let w = (-t * k as f64).exp() * self.pmf[k];
            m0 += w;
            m1 += k as f64 * w;
        }
        (
            m0 + self.upper_normalized(Weight::Exp(t)),
            m1 + self.upper_normalized(Weight::LinExp(t)),
        )
    }

    /// `-d/dt ln M_E(-t) = E[E e^{-tE}] / E[e^{-tE}]`. At `t = 0` this is the
    /// mean, `+inf` when it diverges.
    pub fn log_mgf_slope(&self, t: f64) -> f64 {
        let (m0, m1) = self.laplace_moments(t);
        m1 / m0
    }

    fn upper_normalized(&self, w: Weight) -> f64 {
        match self.shape {
            Shape::PowerLaw { norm, .. } => self.upper_sum(self.cap, w) / norm,
            Shape::Finite => 0.0,
        }
    }

    /// `phi(x) x^-c`, unnormalized.
    fn unnormalized(&self, x: f64) -> f64 {
        match self.shape {
            Shape::PowerLaw { c, phi, .. } => phi.value(x) * x.powf(-c),
            Shape::Finite => 0.0,
        }
    }

    fn unnormalized_derivative(&self, x: f64) -> f64 {
        match self.shape {
            Shape::PowerLaw { c, phi, .. } => {
                phi.derivative(x) * x.powf(-c) - c * phi.value(x) * x.powf(-c - 1.0)
            }
            Shape::Finite => 0.0,
        }
    }

    fn weighted(&self, w: Weight, x: f64) -> (f64, f64) {
        let f = self.unnormalized(x);
        let df = self.unnormalized_derivative(x);
        let g = w.value(x);
        (g * f, w.derivative(x) * f + g * df)
    }

    fn em_start(&self) -> usize {
        let Shape::PowerLaw { c, tail_tol, .. } = self.shape else {
            return EM_START;
        };
        // Leading neglected Euler-Maclaurin term ~ c(c+1)(c+2) f(K) / (720 K^3).
        let mut k = EM_START;
        while c * (c + 1.0) * (c + 2.0) * self.unnormalized(k as f64) / (720.0 * (k as f64).powi(3))
            > tail_tol
            && k < (1 << 30)
        {
            k *= 2;
        }
        k
    }

    fn bridged(&self, k: usize) -> f64 {
        match k.checked_sub(self.cap + 1).and_then(|i| self.bridge.get(i)) {
            Some(v) => *v,
            None => self.unnormalized(k as f64),
        }
    }

    /// `sum_{k > from} g(k) phi(k) k^-c` (unnormalized).
    fn upper_sum(&self, from: usize, w: Weight) -> f64 {
        if matches!(self.shape, Shape::Finite) {
            return 0.0;
        }
        let start = self.start.max(from);
        let direct: f64 = (from + 1..=start)
            .rev()
            .map(|k| w.value(k as f64) * self.bridged(k))
            .sum();
        direct + self.em_tail(start, w)
    }

    /// `sum_{from < k <= to} g(k) phi(k) k^-c` (unnormalized).
    fn range_sum(&self, from: usize, to: usize, w: Weight) -> f64 {
        if to <= from {
            return 0.0;
        }
        let start = self.start.max(from);
        if to <= start || to - start <= (1 << 20) {
            return (from + 1..=to)
                .rev()
                .map(|k| w.value(k as f64) * self.bridged(k))
                .sum();
        }
        let direct: f64 = (from + 1..=start)
            .rev()
            .map(|k| w.value(k as f64) * self.bridged(k))
            .sum();
        let (ga, dga) = self.weighted(w, start as f64);
        let (gb, dgb) = self.weighted(w, to as f64);
        let integral = self.integral(start as f64, Some(to as f64), w);
        direct + integral + 0.5 * (gb - ga) + (dgb - dga) / 12.0
    }

    /// `sum_{k > start} g(k) f(k)` by Euler-Maclaurin.
    fn em_tail(&self, start: usize, w: Weight) -> f64 {
        let x = start as f64;
        let (g, dg) = self.weighted(w, x);
        if g == 0.0 && dg == 0.0 {
            return 0.0;
        }
        let integral = self.integral(x, None, w);
        if integral.is_infinite() {
            return integral;
        }
        integral - 0.5 * g - dg / 12.0
    }

    /// `int_a^b g(x) phi(x) x^-c dx`, with `b = None` meaning infinity.
    fn integral(&self, a: f64, b: Option<f64>, w: Weight) -> f64 {
        let Shape::PowerLaw { c, phi, .. } = self.shape else {
            return 0.0;
        };
        let t = w.rate();
        let decay = c - 1.0 - w.power();
        if b.is_none() && t == 0.0 {
            if decay < 0.0 {
                return f64::INFINITY;
            }
            if decay == 0.0 {
                return match phi {
                    SlowVariation::LogPower { a: amp, gamma } if gamma < -1.0 => {
                        log_power_harmonic_tail(amp, gamma, a)
                    }
                    _ => f64::INFINITY,
                };
            }
            if let (SlowVariation::Constant { a: amp }, Weight::One) = (phi, w) {
                return amp * a.powf(1.0 - c) / (c - 1.0);
            }
        }
        if t * a > 745.0 {
            return 0.0;
        }
        // Substitute x = a e^s.
        let mut s_max = match b {
            Some(b) => (b / a).ln(),
            None => f64::INFINITY,
        };
        if decay > 0.0 {
            let pad = 60.0 + 4.0 * phi.log_growth() * (1.0 + a.ln());
            s_max = s_max.min(pad / decay);
        }
        // Contributions below e^-80 of the leading term, or below 1e-18 of
        // e^{-t}, are irrelevant next to the table part.
        let mut abs_tol = 0.0;
        if t > 0.0 {
            s_max = s_max.min((80.0 / (t * a)).ln_1p());
            abs_tol = 1e-18 * (-t).exp();
        }
        let integrand = |s: f64| {
            let x = a * s.exp();
            w.value(x) * phi.value(x) * x.powf(1.0 - c)
        };
        let panel = if t > 0.0 {
            (0.5f64).min(s_max / 4.0)
        } else {
            0.5
        };
        numeric::integrate(integrand, 0.0, s_max, panel, 1e-14, abs_tol)
    }

    fn compute_mean(&self) -> f64 {
        match self.shape {
            Shape::PowerLaw { c, phi, norm, .. } => {
                let finite = c > 2.0
                    || (c == 2.0
                        && matches!(phi, SlowVariation::LogPower { gamma, .. } if gamma < -1.0));
                if !finite {
                    return f64::INFINITY;
                }
                self.mbar[self.cap] + self.upper_sum(self.cap, Weight::LinExp(0.0)) / norm
            }
            Shape::Finite => self.mbar[self.cap],
        }
    }
}

/// `int_K^inf a ln(e+x)^gamma / x dx` for `gamma < -1`, via `y = ln(e + x)`:
/// the integrand becomes `a y^gamma (1 + e / (e^y - e))`.
fn log_power_harmonic_tail(amp: f64, gamma: f64, k: f64) -> f64 {
    let y0 = (E + k).ln();
    let main = y0.powf(gamma + 1.0) / (-gamma - 1.0);
    let corr = numeric::integrate(
        |y: f64| y.powf(gamma) * E / (y.exp() - E),
        y0,
        y0 + 80.0,
        0.5,
        1e-14,
        0.0,
    );
    amp * (main + corr)
}

/// Excursion law truncated at `R` and tilted by `e^{alpha k}`.
#[derive(Debug, Clone)]
pub struct TiltedLaw {
    alpha: f64,
    truncation: usize,
    pmf: Vec<f64>,
    log_norm: f64,
}

impl TiltedLaw {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Probability of length `k`; zero outside `1..=R`.
    pub fn pmf(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    /// Table indexed by length, entry 0 is zero.
    pub fn pmf_table(&self) -> &[f64] {
        &self.pmf
    }

    /// `ln E[e^{alpha E} | E <= R]`.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}

fn check_truncation(law: &ExcursionLaw, r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::InvalidParameter(
            "truncation R must be at least 1".into(),
        ));
    }
    if r > law.cap() {
        return Err(Error::CapTooSmall {
            requested: r,
            cap: law.cap(),
        });
    }
    Ok(())
}

/// `ln E[e^{alpha E} | E <= R]` from `ln p(1..=R)` and their log-sum `base`.
/// Small tilts go through `ln_1p(sum q_k expm1(alpha k))` to keep relative
/// accuracy as `alpha -> 0`.
fn tilted_log_norm(log_p: &[f64], base: f64, alpha: f64) -> f64 {
    if (alpha * log_p.len() as f64).abs() < 1.0 {
        let s: f64 = log_p
            .iter()
            .enumerate()
            .map(|(i, lp)| (lp - base).exp() * (alpha * (i + 1) as f64).exp_m1())
            .sum();
        return s.ln_1p();
    }
    let lw: Vec<f64> = log_p
        .iter()
        .enumerate()
        .map(|(i, lp)| alpha * (i + 1) as f64 + lp)
        .collect();
    log_sum_exp(&lw) - base
}

/// `nu_{alpha,R}(k) = e^{alpha k} p(k | E <= R) / E[e^{alpha E} | E <= R]`.
pub fn tilt_truncate(law: &ExcursionLaw, alpha: f64, r: usize) -> Result<TiltedLaw> {
    check_truncation(law, r)?;
    if !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "tilt must be finite, got {alpha}"
        )));
    }
    let log_p: Vec<f64> = (1..=r).map(|k| law.log_pmf(k)).collect();
    let log_mass = log_sum_exp(&log_p);
    let log_norm = tilted_log_norm(&log_p, log_mass, alpha);
    let log_total = log_mass + log_norm;
    let pmf = std::iter::once(0.0)
        .chain(
            log_p
                .iter()
                .enumerate()
                .map(|(i, lp)| (alpha * (i + 1) as f64 + lp - log_total).exp()),
        )
        .collect();
    Ok(TiltedLaw {
        alpha,
        truncation: r,
        pmf,
        log_norm,
    })
}

/// `chi = (1/beta) ln E[e^{alpha E} | E <= R]`.
pub fn solve_chi(law: &ExcursionLaw, alpha: f64, r: usize, beta: f64) -> Result<f64> {
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need alpha > 0 and beta > 0, got alpha = {alpha}, beta = {beta}"
        )));
    }
    Ok(tilt_truncate(law, alpha, r)?.log_norm() / beta)
}

/// Inverse of [`solve_chi`]: the tilt `alpha` with
/// `ln E[e^{alpha E} | E <= R] = beta_chi`.
pub fn tilt_for_log_norm(law: &ExcursionLaw, r: usize, beta_chi: f64) -> Result<f64> {
    check_truncation(law, r)?;
    if beta_chi == 0.0 {
        return Ok(0.0);
    }
    let log_p: Vec<f64> = (1..=r).map(|k| law.log_pmf(k)).collect();
    let base = log_sum_exp(&log_p);
    if r == 1 {
        return Ok(beta_chi);
    }
    // ln E[e^{aE} | E <= R] lies between a and aR for a > 0 (reversed for a < 0).
    let (lo, hi) = if beta_chi > 0.0 {
        (beta_chi / r as f64, beta_chi)
    } else {
        (beta_chi, beta_chi / r as f64)
    };
    let f = |a: f64| tilted_log_norm(&log_p, base, a) - beta_chi;
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    numeric::brent(f, lo, hi, 0.0, 1e-15)
        .map_err(|_| Error::NoConvergence("tilt alpha(beta chi, R)"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zeta2_law(cap: usize) -> ExcursionLaw {
        build_law(2.0, SlowVariation::Constant { a: 1.0 }, cap, 1e-12).unwrap()
    }

    /// Independent check of the normalization: plain partial sum plus the
    /// midpoint-rule integral tail, computed in test code only.
    fn zeta_oracle(c: f64, terms: usize) -> f64 {
        let head: f64 = (1..=terms).rev().map(|k| (k as f64).powf(-c)).sum();
        head + (terms as f64 + 0.5).powf(1.0 - c) / (c - 1.0)
    }

    #[test]
    fn zeta_two_normalization() {
        let law = zeta2_law(4096);
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((law.norm() - pi2_6).abs() < 1e-12, "norm {}", law.norm());
        assert!((law.norm() - zeta_oracle(2.0, 10_000_000)).abs() < 1e-12);
        assert!((law.pmf(1) - 0.607_927_101_854_026_6).abs() < 1e-13);
        assert_eq!(law.tail(0), 1.0);
    }

    #[test]
    fn table_mass_plus_tail_is_one() {
        for (c, phi) in [
            (1.3, SlowVariation::Constant { a: 1.0 }),
            (1.5, SlowVariation::InverseLog { a: 2.0 }),
            (1.8, SlowVariation::LogPower { a: 0.5, gamma: 1.5 }),
            (
                2.5,
                SlowVariation::LogPower {
                    a: 1.0,
                    gamma: -2.0,
                },
            ),
        ] {
            let law = build_law(c, phi, 1000, 1e-12).unwrap();
            let mass: f64 = law.pmf_table().iter().sum();
            assert!((mass + law.tail(law.cap()) - 1.0).abs() < 1e-12, "c={c}");
            for w in law.tail_table().windows(2) {
                assert!(w[1] < w[0]);
            }
            for k in 1..=law.cap() {
                let phi_k = law.pmf(k) * law.norm() * (k as f64).powf(c);
                assert!((phi_k / phi.value(k as f64) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let phi = SlowVariation::Constant { a: 1.0 };
        assert!(matches!(
            build_law(1.0, phi, 128, 1e-12),
            Err(Error::NonSummable(_))
        ));
        assert!(matches!(
            build_law(0.7, phi, 128, 1e-12),
            Err(Error::NonSummable(_))
        ));
        assert!(build_law(2.0, phi, 10, 1e-12).is_err());
        assert!(build_law(2.0, phi, 128, 1e-3).is_err());
        assert!(build_law(2.0, SlowVariation::Constant { a: -1.0 }, 128, 1e-12).is_err());
    }

    #[test]
    fn tail_beyond_cap_is_consistent_with_table() {
        let small = build_law(
            1.8,
            SlowVariation::LogPower { a: 1.0, gamma: 1.0 },
            256,
            1e-12,
        )
        .unwrap();
        let big = build_law(
            1.8,
            SlowVariation::LogPower { a: 1.0, gamma: 1.0 },
            8192,
            1e-12,
        )
        .unwrap();
        for n in [300, 1000, 5000, 8192] {
            assert!((small.tail(n) / big.tail(n) - 1.0).abs() < 1e-11, "n={n}");
            assert!((small.mbar(n) / big.mbar(n) - 1.0).abs() < 1e-11, "n={n}");
        }
        let lt = small.log_tail_vec(8192);
        assert!((lt[8192] - big.tail(8192).ln()).abs() < 1e-11);
        assert!((lt[700] - big.tail(700).ln()).abs() < 1e-11);
    }

    #[test]
    fn laplace_examples() {
        let law = zeta2_law(4096);
        assert_eq!(law.laplace(0.0), 1.0);
        // High-precision series value for sum e^{-k/10} k^-2 / zeta(2).
        assert!((law.laplace(0.1) - 0.797_715_526_834_193_3).abs() < 1e-12);
        assert!(law.laplace(0.2) < law.laplace(0.1));

        let a = 0.3;
        let two = ExcursionLaw::from_pmf(&[a, 1.0 - a]).unwrap();
        let t = 2f64.ln();
        assert!((two.laplace(t) - (a / 2.0 + (1.0 - a) / 4.0)).abs() < 1e-15);
        assert!((two.laplace(t) + two.laplace_deficit(t) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_mgf_slope_examples() {
        let two = ExcursionLaw::from_pmf(&[0.5, 0.5]).unwrap();
        assert!((two.log_mgf_slope(0.0) - 1.5).abs() < 1e-15);

        let law = build_law(2.5, SlowVariation::Constant { a: 1.0 }, 4096, 1e-12).unwrap();
        // zeta(1.5) / zeta(2.5)
        assert!((law.log_mgf_slope(0.0) - 1.947_372_466_316_956_7).abs() < 1e-10);
        assert!((law.log_mgf_slope(0.05) - 1.531_780_597_444_883).abs() < 1e-11);

        let heavy = build_law(1.8, SlowVariation::Constant { a: 1.0 }, 1024, 1e-12).unwrap();
        assert_eq!(heavy.log_mgf_slope(0.0), f64::INFINITY);
        assert!(heavy.log_mgf_slope(1e-6).is_finite());
    }

    #[test]
    fn deficit_matches_one_minus_laplace() {
        let law = build_law(1.5, SlowVariation::InverseLog { a: 1.0 }, 512, 1e-12).unwrap();
        for t in [1e-3, 1e-1, 1.0, 5.0] {
            assert!((law.laplace_deficit(t) - (1.0 - law.laplace(t))).abs() < 1e-14);
        }
    }

    #[test]
    fn laplace_sandwich_for_c_two() {
        // (1/2) t mbar(1/t) <= 1 - M(-t) <= 3 t mbar(1/t)
        let law = zeta2_law(4096);
        let mut t: f64 = 1e-6;
        while t <= 1e-2 {
            let mb = law.mbar((1.0 / t).floor() as usize);
            let d = law.laplace_deficit(t);
            assert!(0.5 * t * mb <= d && d <= 3.0 * t * mb, "t={t}");
            t *= 1.7;
        }
    }

    #[test]
    fn mbar_is_monotone_and_bounded() {
        let law = build_law(2.5, SlowVariation::Constant { a: 1.0 }, 2048, 1e-12).unwrap();
        let mb = law.mbar_table();
        for n in 1..mb.len() {
            assert!(mb[n] >= mb[n - 1]);
            assert!(mb[n] <= (n as f64).min(law.mean()) + 1e-12);
        }
    }

    #[test]
    fn tilt_examples() {
        let law = zeta2_law(4096);
        let plain = tilt_truncate(&law, 0.0, law.cap()).unwrap();
        let mass = 1.0 - law.tail(law.cap());
        for k in [1, 2, 17, 4096] {
            assert!((plain.pmf(k) / (law.pmf(k) / mass) - 1.0).abs() < 1e-13);
        }
        let single = tilt_truncate(&law, 0.0, 1).unwrap();
        assert_eq!(single.pmf(1), 1.0);

        let tilted = tilt_truncate(&law, 0.2, 5).unwrap();
        let total: f64 = tilted.pmf_table().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let expected = (0.8f64).exp() / 25.0;
        assert!((tilted.pmf(5) / tilted.pmf(1) - expected).abs() < 1e-13);
        assert_eq!(tilted.pmf(6), 0.0);
        assert!(matches!(
            tilt_truncate(&law, 0.1, 5000),
            Err(Error::CapTooSmall { .. })
        ));
    }

    #[test]
    fn chi_examples() {
        let law = zeta2_law(4096);
        assert!((solve_chi(&law, 0.7, 1, 2.0).unwrap() - 0.35).abs() < 1e-15);
        assert!(solve_chi(&law, 1e-9, 50, 1.0).unwrap() < 1e-7);
        // ln(sum_{k<=10} e^{0.1k} k^-2 / sum_{k<=10} k^-2), direct ten-term sum.
        let chi = solve_chi(&law, 0.1, 10, 1.0).unwrap();
        assert!((chi - 0.205_708_782_160_353_7).abs() < 1e-14);
        let back = tilt_for_log_norm(&law, 10, chi).unwrap();
        assert!((back - 0.1).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn tilting_raises_the_mean(a1 in -0.5f64..0.5, gap in 0.01f64..0.5, r in 2usize..60) {
            let law = build_law(1.7, SlowVariation::Constant { a: 1.0 }, 64, 1e-12).unwrap();
            let m1 = tilt_truncate(&law, a1, r).unwrap().mean();
            let m2 = tilt_truncate(&law, a1 + gap, r).unwrap().mean();
            prop_assert!(m2 > m1);
        }

        #[test]
        fn positive_tilt_is_stochastically_larger(alpha in 0.0f64..1.0, r in 1usize..64) {
            let law = build_law(2.2, SlowVariation::InverseLog { a: 1.0 }, 64, 1e-12).unwrap();
            let nu = tilt_truncate(&law, alpha, r).unwrap();
            let cond = tilt_truncate(&law, 0.0, r).unwrap();
            let (mut a, mut b) = (0.0, 0.0);
            for j in 1..=r {
                a += nu.pmf(j);
                b += cond.pmf(j);
                prop_assert!(a <= b + 1e-12);
            }
        }

        #[test]
        fn laplace_decreasing_and_slope_nonincreasing(t in 1e-6f64..3.0, ratio in 1.01f64..4.0) {
            let law = build_law(1.6, SlowVariation::LogPower { a: 1.0, gamma: 0.5 }, 128, 1e-12).unwrap();
            let (t1, t2) = (t, t * ratio);
            let (l1, l2) = (law.laplace(t1), law.laplace(t2));
            prop_assert!(l1 > l2 && l1 <= 1.0 && l2 > 0.0);
            prop_assert!(law.log_mgf_slope(t1) >= law.log_mgf_slope(t2));
        }
    }
}
