use pinning::excursion::{build_law, ExcursionLaw, SlowVariation};
use pinning::numeric::{log_sum_exp, mean_and_se};
use pinning::oracle::{
    enumerate_contacts, enumerate_partition, enumerate_with_potential, EnumerationSpec,
};
use pinning::quenched::{
    annealed_reference, contact_profile, forward_recursion, forward_with_potential,
    sample_disorder, CapMode, ModelParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn law(c: f64) -> ExcursionLaw {
    build_law(c, SlowVariation::Constant { a: 1.0 }, 256, 1e-12).unwrap()
}

#[test]
fn recursion_matches_enumeration_on_random_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let laws: Vec<ExcursionLaw> = [1.5, 1.8, 2.0, 2.5].iter().map(|&c| law(c)).collect();
    for case in 0..60 {
        let l = &laws[case % 4];
        let n = rng.random_range(1..=14);
        let beta = rng.random_range(0.1..2.0);
        let bd: f64 = rng.random_range(0.0..1.0);
        let params = ModelParams::new(beta, bd / beta, n);
        let d = sample_disorder(5, case as u64, n);
        let t = forward_recursion(l, &params, &d).unwrap();
        for constrained in [true, false] {
            let spec = EnumerationSpec {
                n,
                constrain_endpoint: constrained,
                truncation: None,
            };
            let e = enumerate_partition(l, &params, &d, &spec).unwrap();
            let r = if constrained {
                t.log_z0[n]
            } else {
                t.log_zfree
            };
            assert!((e - r).abs() <= 1e-9, "case {case}: {e} vs {r}");
        }
    }
}

#[test]
fn contact_profile_matches_enumeration() {
    let l = build_law(1.6, SlowVariation::InverseLog { a: 1.0 }, 256, 1e-12).unwrap();
    for seed in 0..4 {
        let n = 10 + seed as usize;
        let params = ModelParams::new(1.2, 0.3, n);
        let d = sample_disorder(seed, 0, n);
        let t = forward_recursion(&l, &params, &d).unwrap();
        let exact = enumerate_contacts(&l, &params.log_weights(&d).unwrap(), n).unwrap();
        for (e, r) in exact.iter().zip(contact_profile(&t)) {
            assert!((e - r).abs() <= 1e-9);
        }
    }
}

#[test]
fn disorder_average_of_partition_function_is_annealed() {
    // E^V Z_N = E^X e^{beta Delta L_N} at N = 10, from 10^4 enumerated draws.
    let l = law(1.8);
    let n = 10;
    let params = ModelParams::new(0.6, 0.5, n);
    let spec = EnumerationSpec {
        n,
        constrain_endpoint: false,
        truncation: None,
    };
    let exact = enumerate_with_potential(&l, &vec![params.beta * params.delta; n + 1], &spec)
        .unwrap()
        .exp();
    let draws: Vec<f64> = (0..10_000)
        .map(|i| {
            let d = sample_disorder(17, i, n);
            enumerate_partition(&l, &params, &d, &spec).unwrap().exp()
        })
        .collect();
    let (mean, se) = mean_and_se(&draws);
    assert!((mean - exact).abs() <= 3.0 * se, "{mean} ± {se} vs {exact}");
    let reference = annealed_reference(&l, &params).unwrap().exp();
    assert!((reference / exact - 1.0).abs() < 1e-12);
}

#[test]
fn annealed_reference_matches_replica_average() {
    let l = law(2.0);
    for n in [8, 16] {
        let beta = 0.6;
        let params = ModelParams::new(beta, 0.3 / beta, n);
        let logs: Vec<f64> = (0..64)
            .map(|i| {
                forward_recursion(&l, &params, &sample_disorder(3, i, n))
                    .unwrap()
                    .log_zfree
            })
            .collect();
        let z: Vec<f64> = logs.iter().map(|x| x.exp()).collect();
        // Jackknife standard error of the replicate mean.
        let total: f64 = z.iter().sum();
        let m = z.len() as f64;
        let loo: Vec<f64> = z.iter().map(|zi| (total - zi) / (m - 1.0)).collect();
        let loo_mean = loo.iter().sum::<f64>() / m;
        let jk_se =
            ((m - 1.0) / m * loo.iter().map(|x| (x - loo_mean).powi(2)).sum::<f64>()).sqrt();
        let mean = total / m;
        let exact = annealed_reference(&l, &params).unwrap().exp();
        assert!(
            (mean - exact).abs() <= 3.0 * jk_se,
            "N={n}: {mean} ± {jk_se} vs {exact}"
        );
        assert!(log_sum_exp(&logs) - m.ln() <= exact.ln() + 3.0 * jk_se / mean);
    }
}

#[test]
fn two_point_law_by_hand() {
    let a = 0.25;
    let two = ExcursionLaw::from_pmf(&[a, 1.0 - a]).unwrap();
    let log_w = vec![-0.3, 0.9, 0.1];
    let t = forward_with_potential(&two, log_w.clone(), CapMode::Exact).unwrap();
    let spec = EnumerationSpec {
        n: 2,
        constrain_endpoint: true,
        truncation: None,
    };
    let e = enumerate_with_potential(&two, &log_w, &spec).unwrap();
    let w: Vec<f64> = log_w.iter().map(|x| x.exp()).collect();
    let hand = (w[2] * (a * a * w[0] * w[1] + (1.0 - a) * w[0])).ln();
    assert!((t.log_z0[2] - hand).abs() < 1e-12 && (e - hand).abs() < 1e-12);
}
