//! Parameter sweeps over `(beta, Delta, N, replica)`, replica aggregation,
//! CSV/JSON persistence, the quenched-vs-annealed contact probe and
//! gnuplot-ready plot data.
//!
//! Each replica owns the random stream `(master_seed, point << 32 | replica)`,
//! where `point` is the row-major index of `(beta, Delta, N)` in the grid, so
//! every row can be recomputed on its own.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annealed::{annealed_solution, crossover_delta0, DEFAULT_EPS2};
use crate::error::{Error, Result};
use crate::excursion::{ExcursionLaw, LawConfig};
use crate::numeric::mean_and_se;
use crate::quenched::{
    contact_fraction, recursion_with_kernel, sample_disorder, CapMode, ModelParams, RenewalKernel,
};

/// Values of `Delta`, either absolute or in units of `Delta0(beta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaGrid {
    Absolute(Vec<f64>),
    RelativeToDelta0(Vec<f64>),
}

impl DeltaGrid {
    fn values(&self) -> &[f64] {
        match self {
            DeltaGrid::Absolute(v) | DeltaGrid::RelativeToDelta0(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub law: LawConfig,
    pub betas: Vec<f64>,
    pub deltas: DeltaGrid,
    #[serde(rename = "N")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    pub master_seed: u64,
    #[serde(default = "default_mode")]
    pub mode: CapMode,
    #[serde(default = "default_eps2")]
    pub eps2: f64,
    /// Directory receiving `replicas.csv`, `summary.csv` and `result.json`.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_replicas() -> usize {
    32
}

fn default_mode() -> CapMode {
    CapMode::Exact
}

fn default_eps2() -> f64 {
    DEFAULT_EPS2
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() || self.deltas.values().is_empty() || self.sizes.is_empty() {
            return Err(Error::InvalidParameter("grids must be nonempty".into()));
        }
        if self.replicas < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 replicas for a standard error, got {}",
                self.replicas
            )));
        }
        if self.betas.iter().any(|b| !(*b > 0.0)) || self.sizes.contains(&0) {
            return Err(Error::InvalidParameter(
                "betas and sizes must be positive".into(),
            ));
        }
        let points = self.betas.len() * self.deltas.values().len() * self.sizes.len();
        if points > u32::MAX as usize || self.replicas > u32::MAX as usize {
            return Err(Error::InvalidParameter(
                "grid too large for stream ids".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let spec: ScanSpec = serde_json::from_reader(File::open(path)?)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Stream id of one replica.
pub fn stream_id(point: usize, replica: usize) -> u64 {
    ((point as u64) << 32) | replica as u64
}

/// One row of `replicas.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRow {
    pub seed: u64,
    pub stream_id: u64,
    pub beta: f64,
    pub delta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "log_Z0_N")]
    pub log_z0_n: f64,
    pub f_q_hat: f64,
    pub contact_mean: f64,
}

/// Aggregate over replicas at one grid point; one row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub point: usize,
    pub beta: f64,
    pub delta: f64,
    /// `Delta / Delta0(beta)` when `Delta0` is defined.
    pub delta_over_delta0: Option<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
    pub first_stream_id: u64,
    pub f_q_mean: f64,
    pub f_q_se: f64,
    pub contact_mean: f64,
    pub contact_se: f64,
    pub f_a: f64,
    pub delta_star: f64,
    pub delta0: Option<f64>,
    /// `contact_mean / delta_star`.
    pub contact_ratio: f64,
    /// `f_q_mean <= f_a + 3 SE`.
    pub jensen_ok: bool,
    /// `contact_mean <= 2 Delta / beta + 3 SE`.
    pub linear_bound_ok: bool,
    pub cap_bias: Option<f64>,
    pub error: Option<String>,
}

impl PointResult {
    fn failed(point: usize, beta: f64, delta: f64, n: usize, seed: u64, err: String) -> Self {
        PointResult {
            point,
            beta,
            delta,
            delta_over_delta0: None,
            n,
            replicas: 0,
            seed,
            first_stream_id: stream_id(point, 0),
            f_q_mean: f64::NAN,
            f_q_se: f64::NAN,
            contact_mean: f64::NAN,
            contact_se: f64::NAN,
            f_a: f64::NAN,
            delta_star: f64::NAN,
            delta0: None,
            contact_ratio: f64::NAN,
            jensen_ok: false,
            linear_bound_ok: false,
            cap_bias: None,
            error: Some(err),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub spec: ScanSpec,
    /// `(beta, Delta0(beta))`, `None` where no crossover root exists.
    pub delta0: Vec<(f64, Option<f64>)>,
    pub points: Vec<PointResult>,
}

struct Sinks {
    replicas: csv::Writer<File>,
    summary: csv::Writer<File>,
}

impl Sinks {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Sinks {
            replicas: csv::Writer::from_path(dir.join("replicas.csv"))?,
            summary: csv::Writer::from_path(dir.join("summary.csv"))?,
        })
    }

    fn append(&mut self, rows: &[ReplicaRow], point: &PointResult) -> Result<()> {
        for row in rows {
            self.replicas.serialize(row)?;
        }
        self.summary.serialize(point)?;
        self.replicas.flush()?;
        self.summary.flush()?;
        Ok(())
    }
}

/// Runs every grid point, appending rows to the output directory (if any)
/// as each point completes.
pub fn run_scan(spec: &ScanSpec) -> Result<ScanResult> {
    spec.validate()?;
    let law = spec.law.build()?;
    let mut sinks = match &spec.output {
        Some(dir) => Some(Sinks::create(dir)?),
        None => None,
    };

    let delta0: Vec<(f64, Option<f64>)> = spec
        .betas
        .iter()
        .map(|&b| (b, crossover_delta0(&law, b).ok().map(|x| x.delta0)))
        .collect();

    let mut points = Vec::new();
    let nd = spec.deltas.values().len();
    let nn = spec.sizes.len();
    for (ib, &beta) in spec.betas.iter().enumerate() {
        let d0 = delta0[ib].1;
        for (id, &dv) in spec.deltas.values().iter().enumerate() {
            for (inn, &n) in spec.sizes.iter().enumerate() {
                let point = (ib * nd + id) * nn + inn;
                let (rows, result) = run_point(spec, &law, point, beta, dv, d0, n);
                if let Some(s) = sinks.as_mut() {
                    s.append(&rows, &result)?;
                }
                points.push(result);
            }
        }
    }
    let result = ScanResult {
        spec: spec.clone(),
        delta0,
        points,
    };
    if let Some(dir) = &spec.output {
        let file = BufWriter::new(File::create(dir.join("result.json"))?);
        serde_json::to_writer_pretty(file, &result)?;
    }
    Ok(result)
}

fn run_point(
    spec: &ScanSpec,
    law: &ExcursionLaw,
    point: usize,
    beta: f64,
    dv: f64,
    d0: Option<f64>,
    n: usize,
) -> (Vec<ReplicaRow>, PointResult) {
    let seed = spec.master_seed;
    let delta = match (&spec.deltas, d0) {
        (DeltaGrid::Absolute(_), _) => dv,
        (DeltaGrid::RelativeToDelta0(_), Some(d0)) => dv * d0,
        (DeltaGrid::RelativeToDelta0(_), None) => {
            let msg = format!("Delta0 undefined at beta = {beta}");
            return (
                Vec::new(),
                PointResult::failed(point, beta, f64::NAN, n, seed, msg),
            );
        }
    };
    let params = ModelParams {
        beta,
        delta,
        n,
        mode: spec.mode,
    };
    let kernel = match RenewalKernel::new(law, n, spec.mode) {
        Ok(k) => Arc::new(k),
        Err(e) => {
            return (
                Vec::new(),
                PointResult::failed(point, beta, delta, n, seed, e.to_string()),
            )
        }
    };
    let rows: Result<Vec<ReplicaRow>> = (0..spec.replicas)
        .into_par_iter()
        .map(|rep| {
            let sid = stream_id(point, rep);
            let disorder = sample_disorder(seed, sid, n);
            let log_w = params.log_weights(&disorder)?;
            let tables = recursion_with_kernel(Arc::clone(&kernel), log_w);
            let log_z0_n = tables.log_z0[n];
            Ok(ReplicaRow {
                seed,
                stream_id: sid,
                beta,
                delta,
                n,
                log_z0_n,
                f_q_hat: log_z0_n / (beta * n as f64),
                contact_mean: contact_fraction(&tables),
            })
        })
        .collect();
    let rows = match rows {
        Ok(r) => r,
        Err(e) => {
            return (
                Vec::new(),
                PointResult::failed(point, beta, delta, n, seed, e.to_string()),
            )
        }
    };
    let fq: Vec<f64> = rows.iter().map(|r| r.f_q_hat).collect();
    let cq: Vec<f64> = rows.iter().map(|r| r.contact_mean).collect();
    let (f_q_mean, f_q_se) = mean_and_se(&fq);
    let (contact_mean, contact_se) = mean_and_se(&cq);

    let mut error = None;
    let (f_a, delta_star) = match annealed_solution(law, beta, delta, spec.eps2) {
        Ok(s) => (s.f_a, s.delta_star),
        Err(e) => {
            error = Some(e.to_string());
            (f64::NAN, f64::NAN)
        }
    };
    let result = PointResult {
        point,
        beta,
        delta,
        delta_over_delta0: d0.map(|d0| delta / d0),
        n,
        replicas: rows.len(),
        seed,
        first_stream_id: stream_id(point, 0),
        f_q_mean,
        f_q_se,
        contact_mean,
        contact_se,
        f_a,
        delta_star,
        delta0: d0,
        contact_ratio: contact_mean / delta_star,
        jensen_ok: f_q_mean <= f_a + 3.0 * f_q_se,
        linear_bound_ok: contact_mean <= 2.0 * delta / beta + 3.0 * contact_se,
        cap_bias: kernel.cap_bias(),
        error,
    };
    (rows, result)
}

/// One point of a quenched-vs-annealed contact curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub delta_over_delta0: f64,
    pub c_q: f64,
    pub c_q_se: f64,
    pub c_a: f64,
    pub ratio: f64,
    pub ratio_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeCurve {
    pub beta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub delta0: f64,
    pub points: Vec<ProbePoint>,
    /// Consecutive `Delta / Delta0` values between which `C_q / C_a` first
    /// rises through 1/2.
    pub crossover: Option<(f64, f64)>,
}

/// Finite-size diagnostic: `C_q / C_a` against `Delta / Delta0` per `(beta, N)`.
/// It is not an estimate of the infinite-volume quenched critical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub note: String,
    pub curves: Vec<ProbeCurve>,
    /// Betas skipped because `Delta0` is undefined.
    pub skipped_betas: Vec<f64>,
}

/// Builds the contact-ratio curves from a finished scan.
pub fn gap_probe(result: &ScanResult) -> GapReport {
    let mut curves = Vec::new();
    let mut skipped = Vec::new();
    for &(beta, d0) in &result.delta0 {
        let Some(d0) = d0 else {
            skipped.push(beta);
            continue;
        };
        for &n in &result.spec.sizes {
            let mut points: Vec<ProbePoint> = result
                .points
                .iter()
                .filter(|p| p.beta == beta && p.n == n && p.error.is_none())
                .map(|p| ProbePoint {
                    delta_over_delta0: p.delta / d0,
                    c_q: p.contact_mean,
                    c_q_se: p.contact_se,
                    c_a: p.delta_star,
                    ratio: p.contact_ratio,
                    ratio_se: p.contact_se / p.delta_star,
                })
                .collect();
            points.sort_by(|a, b| a.delta_over_delta0.total_cmp(&b.delta_over_delta0));
            let crossover = points
                .windows(2)
                .find(|w| w[0].ratio < 0.5 && w[1].ratio >= 0.5)
                .map(|w| (w[0].delta_over_delta0, w[1].delta_over_delta0));
            curves.push(ProbeCurve {
                beta,
                n,
                delta0: d0,
                points,
                crossover,
            });
        }
    }
    GapReport {
        note: "finite-size diagnostic: curves at fixed N, no extrapolation in N".into(),
        curves,
        skipped_betas: skipped,
    }
}

/// Runs the scan described by `spec` and returns its contact-ratio report.
pub fn gap_probe_spec(spec: &ScanSpec) -> Result<GapReport> {
    Ok(gap_probe(&run_scan(spec)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    FreeEnergyVsDelta,
    ContactRatioVsDeltaOverDelta0,
    Delta0VsBeta,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [
        PlotKind::FreeEnergyVsDelta,
        PlotKind::ContactRatioVsDeltaOverDelta0,
        PlotKind::Delta0VsBeta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::FreeEnergyVsDelta => "free_energy_vs_delta",
            PlotKind::ContactRatioVsDeltaOverDelta0 => "contact_ratio_vs_delta_over_delta0",
            PlotKind::Delta0VsBeta => "delta0_vs_beta",
        }
    }
}

/// A block of rows sharing `(beta, N)`; gnuplot sees blocks as separate indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotBlock {
    pub label: String,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub kind: PlotKind,
    pub columns: Vec<String>,
    pub blocks: Vec<PlotBlock>,
}

/// Tabulates one kind of plot from a scan result.
pub fn plot_data(result: &ScanResult, kind: PlotKind) -> PlotData {
    let cols = |names: &[&str]| names.iter().map(|s| s.to_string()).collect();
    let group = |f: &dyn Fn(&PointResult) -> Option<Vec<f64>>| {
        let mut blocks = Vec::new();
        for &(beta, _) in &result.delta0 {
            for &n in &result.spec.sizes {
                let mut rows: Vec<Vec<f64>> = result
                    .points
                    .iter()
                    .filter(|p| p.beta == beta && p.n == n && p.error.is_none())
                    .filter_map(f)
                    .collect();
                rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
                if !rows.is_empty() {
                    blocks.push(PlotBlock {
                        label: format!("beta={beta} N={n}"),
                        rows,
                    });
                }
            }
        }
        blocks
    };
    match kind {
        PlotKind::FreeEnergyVsDelta => PlotData {
            kind,
            columns: cols(&["delta", "f_q_mean", "f_q_se", "f_a"]),
            blocks: group(&|p| Some(vec![p.delta, p.f_q_mean, p.f_q_se, p.f_a])),
        },
        PlotKind::ContactRatioVsDeltaOverDelta0 => PlotData {
            kind,
            columns: cols(&["delta_over_delta0", "contact_ratio", "contact_ratio_se"]),
            blocks: group(&|p| {
                p.delta_over_delta0
                    .map(|x| vec![x, p.contact_ratio, p.contact_se / p.delta_star])
            }),
        },
        PlotKind::Delta0VsBeta => PlotData {
            kind,
            columns: cols(&["beta", "delta0"]),
            blocks: vec![PlotBlock {
                label: "delta0".into(),
                rows: result
                    .delta0
                    .iter()
                    .filter_map(|&(b, d)| d.map(|d| vec![b, d]))
                    .collect(),
            }],
        },
    }
}

/// Writes `<kind>.dat` (whitespace columns, blank lines between blocks) and a
/// `<kind>.json` mirror for each requested kind. Returns the written paths.
pub fn emit_plot_data(result: &ScanResult, kinds: &[PlotKind], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if kinds.is_empty() {
        return Ok(written);
    }
    fs::create_dir_all(dir)?;
    for &kind in kinds {
        let data = plot_data(result, kind);
        let dat = dir.join(format!("{}.dat", kind.name()));
        let mut out = BufWriter::new(File::create(&dat)?);
        writeln!(out, "# {}", data.columns.join(" "))?;
        for (i, block) in data.blocks.iter().enumerate() {
            if i > 0 {
                writeln!(out)?;
                writeln!(out)?;
            }
            writeln!(out, "# {}", block.label)?;
            for row in &block.rows {
                let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                writeln!(out, "{}", line.join(" "))?;
            }
        }
        out.flush()?;
        let json = dir.join(format!("{}.json", kind.name()));
        serde_json::to_writer_pretty(BufWriter::new(File::create(&json)?), &data)?;
        written.push(dat);
        written.push(json);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excursion::SlowVariation;

    fn small_spec(output: Option<PathBuf>) -> ScanSpec {
        ScanSpec {
            law: LawConfig::new(1.8, SlowVariation::Constant { a: 1.0 }, 256),
            betas: vec![0.5],
            deltas: DeltaGrid::Absolute(vec![0.2]),
            sizes: vec![64],
            replicas: 2,
            master_seed: 42,
            mode: CapMode::Exact,
            eps2: 0.1,
            output,
        }
    }

    #[test]
    fn two_replica_standard_error() {
        let res = run_scan(&small_spec(None)).unwrap();
        assert_eq!(res.points.len(), 1);
        let p = &res.points[0];
        let rows: Vec<f64> = (0..2)
            .map(|r| {
                let d = sample_disorder(42, stream_id(0, r), 64);
                let law = res.spec.law.build().unwrap();
                let t =
                    crate::quenched::forward_recursion(&law, &ModelParams::new(0.5, 0.2, 64), &d)
                        .unwrap();
                t.log_z0[64] / (0.5 * 64.0)
            })
            .collect();
        assert!((p.f_q_se - (rows[0] - rows[1]).abs() / 2.0).abs() < 1e-15);
        assert!((p.f_q_mean - (rows[0] + rows[1]) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_degenerate_specs() {
        let mut s = small_spec(None);
        s.replicas = 1;
        assert!(run_scan(&s).is_err());
        let mut s = small_spec(None);
        s.betas.clear();
        assert!(run_scan(&s).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let s = small_spec(Some(PathBuf::from("out")));
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<ScanSpec>(&text).unwrap(), s);
        let rel: ScanSpec = serde_json::from_str(
            r#"{"law": {"c": 1.8, "phi": {"variant": "Constant", "a": 1.0}, "cap": 512},
                "betas": [0.5], "deltas": {"relative_to_delta0": [0.1, 3.0]},
                "N": [128], "replicas": 4, "master_seed": 7, "mode": {"Capped": 64}}"#,
        )
        .unwrap();
        assert_eq!(rel.deltas, DeltaGrid::RelativeToDelta0(vec![0.1, 3.0]));
        assert_eq!(rel.mode, CapMode::Capped(64));
        assert_eq!(rel.eps2, 0.1);
    }

    #[test]
    fn undefined_delta0_is_recorded_in_row() {
        let mut s = small_spec(None);
        s.law.c = 2.5;
        s.deltas = DeltaGrid::RelativeToDelta0(vec![1.0]);
        let res = run_scan(&s).unwrap();
        assert!(res.points[0].error.is_some());
        assert_eq!(gap_probe(&res).skipped_betas, vec![0.5]);
    }

    #[test]
    fn empty_kind_list_writes_nothing() {
        let res = run_scan(&small_spec(None)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("plots");
        assert!(emit_plot_data(&res, &[], &target).unwrap().is_empty());
        assert!(!target.exists());
    }
}
