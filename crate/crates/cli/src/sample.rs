use anyhow::{bail, Result};
use clap::Args;
use pinning::annealed::annealed_solution;
use pinning::pathkit::{
    classify, lift, sample_path, semi_cg_skeleton, skeleton, ReturnClass, ReturnPath, Skeleton,
    SkeletonConfig,
};
use pinning::quenched::{forward_recursion, sample_disorder, stream_rng, ModelParams};
use serde::Serialize;

use crate::{emit_json, LawArgs, Settings};

/// Path draws use this bit on top of the disorder stream id.
const PATH_STREAM_BIT: u64 = 1 << 63;

#[derive(Args)]
pub struct SampleArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    delta: f64,
    /// System size N.
    #[arg(short = 'N', long = "size")]
    n: usize,
    /// Number of paths drawn from one disorder realization.
    #[arg(long, default_value_t = 100)]
    paths: usize,
    /// Leave the endpoint free instead of pinning x_N = 0.
    #[arg(long)]
    free: bool,
    /// Disorder stream id.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Long-excursion threshold; defaults to the annealed coarse scale.
    #[arg(long = "r")]
    r: Option<usize>,
    #[arg(long)]
    eps2: Option<f64>,
    /// Coarse-graining block as a fraction of R (default eps2 / 16).
    #[arg(long)]
    eps3: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    eps4: f64,
    /// Include every path and lifted skeleton in the output.
    #[arg(long)]
    keep_paths: bool,
    #[command(flatten)]
    law: LawArgs,
}

#[derive(Serialize)]
struct Bin {
    lo: f64,
    hi: f64,
    count: usize,
}

#[derive(Serialize)]
struct SampleReport {
    beta: f64,
    delta: f64,
    #[serde(rename = "N")]
    n: usize,
    seed: u64,
    stream_id: u64,
    constrained: bool,
    config: SkeletonConfig,
    paths: usize,
    mean_local_time: f64,
    mean_gaps: f64,
    dense_fraction: f64,
    semi_cg_clamped: usize,
    /// Lifted-skeleton segment lengths in bins `[0,0], [1,1], [2,3], [4,7], ...`.
    segment_lengths: Vec<Bin>,
    /// Contact fraction on the lifted skeleton, 20 bins on `[0, 1]`.
    density: Vec<Bin>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<(ReturnPath, Skeleton)>>,
}

fn length_bin(len: usize) -> usize {
    (usize::BITS - len.leading_zeros()) as usize
}

pub fn run(ctx: &Settings, args: &SampleArgs) -> Result<()> {
    if args.paths == 0 {
        bail!("--paths must be at least 1");
    }
    let law = ctx.law(&args.law).build()?;
    let eps2 = ctx.eps2(args.eps2);
    let sol = annealed_solution(&law, args.beta, args.delta, eps2)?;
    let r = match args.r {
        Some(r) => r,
        None if sol.scale_r.is_finite() => sol.scale_r.round() as usize,
        None => bail!("annealed coarse scale is infinite here; pass --r"),
    };
    let config = SkeletonConfig::new(
        eps2,
        args.eps3.unwrap_or(eps2 / 16.0),
        args.eps4,
        r,
        sol.delta2,
    )?;

    let seed = ctx.seed();
    let params = ModelParams::new(args.beta, args.delta, args.n);
    let disorder = sample_disorder(seed, args.stream, args.n);
    let tables = forward_recursion(&law, &params, &disorder)?;
    let mut rng = stream_rng(seed, args.stream | PATH_STREAM_BIT);

    let mut seg_counts = vec![0usize; length_bin(args.n) + 1];
    let mut dens_counts = [0usize; 20];
    let (mut local, mut gaps, mut dense, mut clamped) = (0usize, 0usize, 0usize, 0usize);
    let mut kept = args.keep_paths.then(Vec::new);
    for _ in 0..args.paths {
        let path = sample_path(&tables, !args.free, &mut rng);
        let lifted = lift(&skeleton(&path, config.r), config.m);
        for &(b, a) in &lifted.segments {
            seg_counts[length_bin(a - b)] += 1;
        }
        let class = classify(&path, &config);
        dens_counts[((class.density * 20.0) as usize).min(19)] += 1;
        dense += usize::from(class.class == ReturnClass::Dense);
        clamped += usize::from(semi_cg_skeleton(&lifted, &config).clamped);
        local += path.local_time();
        gaps += lifted.m();
        if let Some(k) = kept.as_mut() {
            k.push((path, lifted));
        }
    }

    let count = args.paths as f64;
    let segment_lengths = seg_counts
        .iter()
        .enumerate()
        .map(|(k, &count)| {
            let (lo, hi) = if k == 0 {
                (0, 0)
            } else {
                (1 << (k - 1), (1 << k) - 1)
            };
            Bin {
                lo: lo as f64,
                hi: hi as f64,
                count,
            }
        })
        .collect();
    let density = dens_counts
        .iter()
        .enumerate()
        .map(|(k, &count)| Bin {
            lo: k as f64 / 20.0,
            hi: (k + 1) as f64 / 20.0,
            count,
        })
        .collect();
    let report = SampleReport {
        beta: args.beta,
        delta: args.delta,
        n: args.n,
        seed,
        stream_id: args.stream,
        constrained: !args.free,
        config,
        paths: args.paths,
        mean_local_time: local as f64 / count,
        mean_gaps: gaps as f64 / count,
        dense_fraction: dense as f64 / count,
        semi_cg_clamped: clamped,
        segment_lengths,
        density,
        samples: kept,
    };
    emit_json(&report, ctx.out.as_deref())
}

#[cfg(test)]
mod tests {
    use super::length_bin;

    #[test]
    fn bins_are_powers_of_two() {
        let bins: Vec<usize> = [0, 1, 2, 3, 4, 7, 8]
            .iter()
            .map(|&l| length_bin(l))
            .collect();
        assert_eq!(bins, vec![0, 1, 2, 2, 3, 3, 4]);
    }
}
