use std::process::ExitCode;

use anyhow::Result;
use clap::Args;
use pinning::excursion::{build_law, ExcursionLaw, SlowVariation};
use pinning::numeric::mean_and_se;
use pinning::oracle::{
    enumerate_contacts, enumerate_partition, enumerate_with_potential, verify_ldp_identity,
    verify_ratio_bound, EnumerationSpec,
};
use pinning::pathkit::SkeletonConfig;
use pinning::quenched::{
    annealed_reference, contact_profile, forward_recursion, sample_disorder, stream_rng,
    ModelParams,
};
use rand::Rng;

#[derive(Args)]
pub struct VerifyArgs {
    /// Random recursion-vs-enumeration cases.
    #[arg(long, default_value_t = 200)]
    cases: u64,
    /// Disorder draws for the disorder-average check.
    #[arg(long, default_value_t = 10_000)]
    draws: u64,
}

struct Row {
    check: &'static str,
    cases: usize,
    worst: f64,
    tolerance: f64,
    /// `worst` and `tolerance` are in standard errors.
    statistical: bool,
}

impl Row {
    fn ok(&self) -> bool {
        self.worst <= self.tolerance
    }
}

fn law(c: f64) -> Result<ExcursionLaw> {
    Ok(build_law(
        c,
        SlowVariation::Constant { a: 1.0 },
        256,
        1e-12,
    )?)
}

fn recursion_vs_enumeration(args: &VerifyArgs, seed: u64) -> Result<Row> {
    let laws = [law(1.5)?, law(1.8)?, law(2.0)?, law(2.5)?];
    let mut rng = stream_rng(seed, u64::MAX);
    let mut worst: f64 = 0.0;
    for i in 0..args.cases {
        let l = &laws[rng.random_range(0..laws.len())];
        let n = rng.random_range(1..=16);
        let beta = rng.random_range(0.05..2.0);
        let bd: f64 = rng.random_range(0.0..=1.0);
        let params = ModelParams::new(beta, bd / beta, n);
        let disorder = sample_disorder(seed, i, n);
        let tables = forward_recursion(l, &params, &disorder)?;
        for constrained in [true, false] {
            let spec = EnumerationSpec {
                n,
                constrain_endpoint: constrained,
                truncation: None,
            };
            let exact = enumerate_partition(l, &params, &disorder, &spec)?;
            let got = if constrained {
                tables.log_z0[n]
            } else {
                tables.log_zfree
            };
            worst = worst.max((got - exact).abs());
        }
    }
    Ok(Row {
        check: "log Z: recursion vs enumeration",
        cases: 2 * args.cases as usize,
        worst,
        tolerance: 1e-9,
        statistical: false,
    })
}

fn contacts(seed: u64) -> Result<Row> {
    let l = law(1.8)?;
    let mut worst: f64 = 0.0;
    for n in [6, 11, 16] {
        let params = ModelParams::new(0.9, 0.4, n);
        let disorder = sample_disorder(seed, 1 << 40 | n as u64, n);
        let tables = forward_recursion(&l, &params, &disorder)?;
        let exact = enumerate_contacts(&l, &params.log_weights(&disorder)?, n)?;
        for (e, r) in exact.iter().zip(contact_profile(&tables)) {
            worst = worst.max((e - r).abs());
        }
    }
    Ok(Row {
        check: "contact profile vs enumeration",
        cases: 3,
        worst,
        tolerance: 1e-9,
        statistical: false,
    })
}

fn ldp() -> Result<Row> {
    let l = law(1.8)?;
    let mut worst: f64 = 0.0;
    for n in [8, 10, 12, 14] {
        for r in [3, 5, 8] {
            for bc in [0.1, 0.5, 1.0] {
                let (lhs, rhs) = verify_ldp_identity(&l, 1.0, bc, n, r)?;
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    Ok(Row {
        check: "tilted renewal identity",
        cases: 36,
        worst,
        tolerance: 1e-10,
        statistical: false,
    })
}

fn annealed_exact() -> Result<Row> {
    let l = law(2.0)?;
    let mut worst: f64 = 0.0;
    for n in [4, 9, 14] {
        let params = ModelParams::new(0.7, 0.6, n);
        let spec = EnumerationSpec {
            n,
            constrain_endpoint: false,
            truncation: None,
        };
        let exact = enumerate_with_potential(&l, &vec![0.7 * 0.6; n + 1], &spec)?;
        worst = worst.max((annealed_reference(&l, &params)? - exact).abs());
    }
    Ok(Row {
        check: "homogeneous recursion vs enumeration",
        cases: 3,
        worst,
        tolerance: 1e-9,
        statistical: false,
    })
}

fn disorder_average(args: &VerifyArgs, seed: u64) -> Result<Row> {
    let l = law(1.8)?;
    let n = 10;
    let params = ModelParams::new(0.6, 0.5, n);
    let spec = EnumerationSpec {
        n,
        constrain_endpoint: false,
        truncation: None,
    };
    let exact = annealed_reference(&l, &params)?.exp();
    let draws: Vec<f64> = (0..args.draws)
        .map(|i| {
            let d = sample_disorder(seed, 2 << 40 | i, n);
            enumerate_partition(&l, &params, &d, &spec).map(f64::exp)
        })
        .collect::<pinning::Result<_>>()?;
    let (mean, se) = mean_and_se(&draws);
    Ok(Row {
        check: "disorder mean of Z_10 vs annealed",
        cases: draws.len(),
        worst: (mean - exact).abs() / se,
        tolerance: 3.0,
        statistical: true,
    })
}

fn ratio_at_first_interval() -> Result<Row> {
    let l = law(1.8)?;
    let config = SkeletonConfig::new(0.25, 3.0 / 128.0, 0.1, 128, 0.01)?;
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for k in 0..=10 {
        let alpha = k as f64 * 0.2 / config.r as f64;
        let ratio = verify_ratio_bound(&l, alpha, &config, config.l0)?;
        worst = worst.max(ratio - 1.0);
        cases += 1;
    }
    Ok(Row {
        check: "renewal ratio on the first interval <= 1",
        cases,
        worst: worst.max(0.0),
        tolerance: 1e-9,
        statistical: false,
    })
}

pub fn run(args: &VerifyArgs, seed: u64) -> Result<ExitCode> {
    let rows = vec![
        recursion_vs_enumeration(args, seed)?,
        contacts(seed)?,
        annealed_exact()?,
        disorder_average(args, seed)?,
        ldp()?,
        ratio_at_first_interval()?,
    ];
    println!(
        "{:<42} {:>7} {:>12} {:>10}  status",
        "check", "cases", "worst", "tolerance"
    );
    for r in &rows {
        let unit = if r.statistical { " SE" } else { "" };
        println!(
            "{:<42} {:>7} {:>12.3e} {:>10.1e}{unit:3}  {}",
            r.check,
            r.cases,
            r.worst,
            r.tolerance,
            if r.ok() { "PASS" } else { "FAIL" }
        );
    }
    let failed = rows.iter().filter(|r| !r.ok()).count();
    if failed == 0 {
        println!("all {} checks passed", rows.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{failed} of {} checks failed", rows.len());
        Ok(ExitCode::FAILURE)
    }
}
