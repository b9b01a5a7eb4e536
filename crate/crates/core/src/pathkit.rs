//! Return paths sampled from the quenched measure, and the skeleton
//! constructions built on them: skeleton, lifted skeleton, block
//! coarse-graining, semi-coarse-graining and dense/sparse classification.
//!
//! A skeleton of `[0, N]` is a list of closed occupied segments
//! `[b_{i-1}, a_i]` interleaved with open gaps `(a_i, b_i)`. Segment length is
//! `a - b`; its site count is `a - b + 1`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::annealed::AnnealedSolution;
use crate::error::{Error, Result};
use crate::quenched::PartitionTables;

/// Return times of one path on `[0, N]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnPath {
    #[serde(rename = "N")]
    pub n: usize,
    pub zeros: Vec<usize>,
    #[serde(default)]
    pub endpoint_constrained: bool,
}

impl ReturnPath {
    pub fn new(n: usize, zeros: Vec<usize>, endpoint_constrained: bool) -> Result<Self> {
        let ok = zeros.first() == Some(&0)
            && zeros.windows(2).all(|w| w[0] < w[1])
            && zeros.last().is_some_and(|&z| z <= n)
            && (!endpoint_constrained || zeros.last() == Some(&n));
        if !ok {
            return Err(Error::InvalidParameter(
                "zeros must increase strictly from 0 within [0, N] (ending at N if constrained)"
                    .into(),
            ));
        }
        Ok(ReturnPath {
            n,
            zeros,
            endpoint_constrained,
        })
    }

    /// Local time `L_N`.
    pub fn local_time(&self) -> usize {
        self.zeros.len()
    }

    /// Lengths of complete excursions.
    pub fn excursions(&self) -> impl Iterator<Item = usize> + '_ {
        self.zeros.windows(2).map(|w| w[1] - w[0])
    }
}

/// Exact draw from the polymer measure encoded by `tables`.
///
/// Constrained paths are built backwards from `N`, choosing the previous
/// zero `n - k` with probability `p(k) Z0[n-k] w_n / Z0[n]`. Free paths first
/// draw the last zero `n` with probability `Z0[n] P(E > N - n) / Z_N`.
pub fn sample_path<R: Rng + ?Sized>(
    tables: &PartitionTables,
    constrained: bool,
    rng: &mut R,
) -> ReturnPath {
    let n = tables.size();
    let kernel = &tables.kernel;
    let mut current = if constrained {
        n
    } else {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = None;
        let mut last_ok = 0;
        for m in (0..=n).rev() {
            let w = (tables.log_z0[m] + kernel.log_tail(n - m) - tables.log_zfree).exp();
            if w > 0.0 {
                last_ok = m;
            }
            acc += w;
            if acc >= u {
                pick = Some(m);
                break;
            }
        }
        pick.unwrap_or(last_ok)
    };
    let mut zeros = vec![current];
    while current > 0 {
        let norm = tables.log_z0[current] - tables.log_w[current];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = None;
        let mut last_ok = 1;
        for k in 1..=current.min(kernel.reach()) {
            let w = (kernel.log_p(k) + tables.log_z0[current - k] - norm).exp();
            if w > 0.0 {
                last_ok = k;
            }
            acc += w;
            if acc >= u {
                pick = Some(k);
                break;
            }
        }
        current -= pick.unwrap_or(last_ok);
        zeros.push(current);
    }
    zeros.reverse();
    ReturnPath {
        n,
        zeros,
        endpoint_constrained: constrained,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skeleton {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R")]
    pub r: usize,
    /// Closed occupied segments `[b, a]`, one more than the gaps.
    pub segments: Vec<(usize, usize)>,
    /// Open gaps `(a, b)`.
    pub gaps: Vec<(usize, usize)>,
    /// The path never returns after the last gap, which then ends at `N`;
    /// the degenerate final segment `[N, N]` carries no site.
    #[serde(default)]
    pub open_end: bool,
}

impl Skeleton {
    /// Number of gaps `m`.
    pub fn m(&self) -> usize {
        self.gaps.len()
    }

    /// Site count `|J|`.
    pub fn sites(&self) -> usize {
        let all: usize = self.segments.iter().map(|(b, a)| a - b + 1).sum();
        all - usize::from(self.open_end)
    }

    /// Total segment length `sum (a - b)`, the measure used when comparing a
    /// skeleton with its coarse-graining.
    pub fn length(&self) -> usize {
        self.segments.iter().map(|(b, a)| a - b).sum()
    }

    /// Shortest gap length `b - a`, or `None` without gaps.
    pub fn min_gap(&self) -> Option<usize> {
        self.gaps.iter().map(|(a, b)| b - a).min()
    }

    /// Whether segments and gaps interleave and cover `[0, N]` exactly.
    pub fn tiles(&self) -> bool {
        if self.segments.len() != self.gaps.len() + 1 {
            return false;
        }
        let mut pos = 0;
        for (i, &(b, a)) in self.segments.iter().enumerate() {
            if b != pos || a < b {
                return false;
            }
            pos = a;
            if let Some(&(ga, gb)) = self.gaps.get(i) {
                if ga != pos || gb <= ga + 1 {
                    return false;
                }
                pos = gb;
            }
        }
        pos == self.n
    }

    fn from_gaps(n: usize, r: usize, gaps: Vec<(usize, usize)>, open_end: bool) -> Self {
        let mut segments = Vec::with_capacity(gaps.len() + 1);
        let mut start = 0;
        for &(a, b) in &gaps {
            segments.push((start, a));
            start = b;
        }
        segments.push((start, n));
        Skeleton {
            n,
            r,
            segments,
            gaps,
            open_end,
        }
    }
}

/// Gaps are the excursions longer than `R`. An unfinished final excursion of
/// a free path longer than `R` becomes the gap `(z_last, N)`.
pub fn skeleton(path: &ReturnPath, r: usize) -> Skeleton {
    let mut gaps: Vec<(usize, usize)> = path
        .zeros
        .windows(2)
        .filter(|w| w[1] - w[0] > r)
        .map(|w| (w[0], w[1]))
        .collect();
    let last = *path.zeros.last().expect("paths contain 0");
    let open_end = path.n - last > r;
    if open_end {
        gaps.push((last, path.n));
    }
    Skeleton::from_gaps(path.n, r, gaps, open_end)
}

/// Removes central segments of length at most `M`, merging each with its two
/// neighbouring gaps. Initial and final segments are kept.
pub fn lift(skel: &Skeleton, m: f64) -> Skeleton {
    let k = skel.gaps.len();
    if k < 2 {
        return skel.clone();
    }
    let mut gaps = vec![skel.gaps[0]];
    for i in 1..k {
        let (b, a) = skel.segments[i];
        if ((a - b) as f64) <= m {
            gaps.last_mut().expect("nonempty").1 = skel.gaps[i].1;
        } else {
            gaps.push(skel.gaps[i]);
        }
    }
    Skeleton::from_gaps(skel.n, skel.r, gaps, skel.open_end)
}

/// Shrinks each gap `(a, b)` to `(a*, b*)`, with `a*` the smallest multiple of
/// `block` at or above `a` and `b*` the largest at or below `b`. Gaps that
/// vanish are dropped.
pub fn cg_skeleton(skel: &Skeleton, block: usize) -> Result<Skeleton> {
    if block == 0 || !skel.n.is_multiple_of(block) {
        return Err(Error::BlockMisaligned { n: skel.n, block });
    }
    let gaps = skel
        .gaps
        .iter()
        .filter_map(|&(a, b)| {
            let lo = a.div_ceil(block) * block;
            let hi = b / block * block;
            (hi > lo + 1).then_some((lo, hi))
        })
        .collect::<Vec<_>>();
    let open_end = skel.open_end && gaps.last().is_some_and(|g| g.1 == skel.n);
    Ok(Skeleton::from_gaps(skel.n, skel.r, gaps, open_end))
}

/// Result of [`semi_cg_skeleton`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemiCg {
    pub skeleton: Skeleton,
    /// Some segment would have reached into the following gap's right end and
    /// was clamped to leave a gap of length 1.
    pub clamped: bool,
}

/// Extends every segment followed by a gap to the smallest allowed length
/// `n_k^+` at or above its own length.
pub fn semi_cg_skeleton(skel: &Skeleton, config: &SkeletonConfig) -> SemiCg {
    let mut clamped = false;
    let gaps = skel
        .gaps
        .iter()
        .zip(&skel.segments)
        .map(|(&(a, b), &(start, _))| {
            let target = start + config.snap_length(a - start);
            if target + 1 >= b {
                clamped = true;
                (b - 2, b)
            } else {
                (target, b)
            }
        })
        .collect::<Vec<_>>();
    SemiCg {
        skeleton: Skeleton::from_gaps(skel.n, skel.r, gaps, skel.open_end),
        clamped,
    }
}

/// Scales for the skeleton constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkeletonConfig {
    pub eps2: f64,
    /// Adjusted so that `eps3 R` is an integer.
    pub eps3: f64,
    /// Adjusted so that `(1 + eps4)^l1 = R`.
    pub eps4: f64,
    #[serde(rename = "R")]
    pub r: usize,
    /// Short-segment threshold `eps2 R`.
    #[serde(rename = "M")]
    pub m: f64,
    /// Coarse-graining block `eps3 R`.
    pub block: usize,
    pub h1: f64,
    pub l0: i64,
    pub l1: i64,
    pub delta2: f64,
}

impl SkeletonConfig {
    pub fn new(eps2: f64, eps3: f64, eps4: f64, r: usize, delta2: f64) -> Result<Self> {
        if !(eps2 > 0.0 && eps2 < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "eps2 must lie in (0, 1/2), got {eps2}"
            )));
        }
        if !(eps3 > 0.0) || !(eps4 > 0.0) || r < 2 {
            return Err(Error::InvalidParameter(format!(
                "need eps3, eps4 > 0 and R >= 2, got eps3 = {eps3}, eps4 = {eps4}, R = {r}"
            )));
        }
        let rf = r as f64;
        let block = ((eps3 * rf).round() as usize).max(1);
        let eps3 = block as f64 / rf;
        let h1 = 4.0 * eps3 / eps2;
        if h1 >= 0.5 {
            return Err(Error::InvalidParameter(format!(
                "h1 = 4 eps3 / eps2 = {h1} must be below 1/2"
            )));
        }
        let l1 = ((rf.ln() / eps4.ln_1p()).round() as i64).max(1);
        let eps4 = rf.powf(1.0 / l1 as f64) - 1.0;
        let m = eps2 * rf;
        let q = 1.0 + eps4;
        let mut l0 = ((m / 4.0).ln() / q.ln()).floor() as i64;
        while q.powf(l0 as f64) >= m / 4.0 {
            l0 -= 1;
        }
        while q.powf((l0 + 1) as f64) < m / 4.0 {
            l0 += 1;
        }
        Ok(SkeletonConfig {
            eps2,
            eps3,
            eps4,
            r,
            m,
            block,
            h1,
            l0,
            l1,
            delta2,
        })
    }

    /// Uses `R = round(R(Delta))` and `delta2` of an annealed solution.
    pub fn from_annealed(sol: &AnnealedSolution, eps3: f64, eps4: f64) -> Result<Self> {
        if !sol.scale_r.is_finite() {
            return Err(Error::InvalidParameter("coarse scale R is infinite".into()));
        }
        Self::new(
            sol.eps2,
            eps3,
            eps4,
            sol.scale_r.round() as usize,
            sol.delta2,
        )
    }

    /// Upper end of interval `I_k` as a real number.
    fn upper(&self, k: i64) -> f64 {
        let rf = self.r as f64;
        if k <= self.l1 {
            rf.powf(k as f64 / self.l1 as f64)
        } else {
            rf + (k - self.l1) as f64 * self.eps4 * rf
        }
    }

    /// `(n_k^-, n_k^+)`, the smallest and largest integers in `I_k`, or `None`
    /// when the interval holds no integer.
    pub fn interval(&self, k: i64) -> Option<(usize, usize)> {
        if k < self.l0 {
            return None;
        }
        // Guard against powers landing a hair below an integer.
        let hi = (self.upper(k) + 1e-9).floor();
        let lo = if k == self.l0 {
            0.0
        } else {
            (self.upper(k - 1) + 1e-9).floor() + 1.0
        };
        (lo <= hi).then_some((lo as usize, hi as usize))
    }

    /// Index `k >= l0` of the interval containing `len`.
    pub fn interval_index(&self, len: usize) -> i64 {
        let mut k = self.l0;
        while (self.upper(k) + 1e-9).floor() < len as f64 {
            k += 1;
        }
        k
    }

    /// Smallest allowed segment length `n_k^+` that is at least `len`.
    pub fn snap_length(&self, len: usize) -> usize {
        let k = self.interval_index(len);
        self.interval(k).expect("len lies in I_k").1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReturnClass {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: ReturnClass,
    /// Contact fraction on the lifted skeleton.
    pub density: f64,
    pub zeros: usize,
    pub sites: usize,
}

/// Contact fraction on the lifted skeleton, compared with `delta2`.
pub fn classify(path: &ReturnPath, config: &SkeletonConfig) -> Classification {
    let lifted = lift(&skeleton(path, config.r), config.m);
    let zeros = count_zeros_in(&lifted, &path.zeros);
    let sites = lifted.sites();
    let density = if sites == 0 {
        0.0
    } else {
        zeros as f64 / sites as f64
    };
    let class = if density <= config.delta2 {
        ReturnClass::Sparse
    } else {
        ReturnClass::Dense
    };
    Classification {
        class,
        density,
        zeros,
        sites,
    }
}

/// Zeros of a sorted list lying in the skeleton's segments.
pub fn count_zeros_in(skel: &Skeleton, zeros: &[usize]) -> usize {
    skel.segments
        .iter()
        .map(|&(b, a)| {
            let lo = zeros.partition_point(|&z| z < b);
            let hi = zeros.partition_point(|&z| z <= a);
            hi - lo
        })
        .sum()
}
