use pinning::annealed::annealed_solution;
use pinning::excursion::{build_law, SlowVariation};
use pinning::numeric::mean_and_se;
use pinning::oracle::renewal_density;
use pinning::pathkit::{classify, sample_path, ReturnClass, SkeletonConfig};
use pinning::quenched::{contact_fraction, forward_with_potential, CapMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Chi-square statistic of the first excursion length of constrained
/// zero-potential paths against `p(k) u(N - k) / u(N)`.
#[test]
fn first_excursion_passes_chi_square() {
    let n = 256;
    let law = build_law(1.8, SlowVariation::Constant { a: 1.0 }, 1024, 1e-12).unwrap();
    let tables = forward_with_potential(&law, vec![0.0; n + 1], CapMode::Exact).unwrap();
    let pmf: Vec<f64> = (0..=n).map(|k| law.pmf(k)).collect();
    let u = renewal_density(&pmf, n);
    let expected: Vec<f64> = (1..=n).map(|k| pmf[k] * u[n - k] / u[n]).collect();
    assert!((expected.iter().sum::<f64>() - 1.0).abs() < 1e-10);

    let draws = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut counts = vec![0usize; n];
    for _ in 0..draws {
        let path = sample_path(&tables, true, &mut rng);
        counts[path.zeros[1] - 1] += 1;
    }

    // Pool consecutive lengths until each bin expects at least 20 draws.
    let mut bins = Vec::new();
    let (mut e_acc, mut o_acc) = (0.0, 0usize);
    for (e, o) in expected.iter().zip(&counts) {
        e_acc += e * draws as f64;
        o_acc += o;
        if e_acc >= 20.0 {
            bins.push((e_acc, o_acc));
            e_acc = 0.0;
            o_acc = 0;
        }
    }
    if let Some(last) = bins.last_mut() {
        last.0 += e_acc;
        last.1 += o_acc;
    }
    let chi2: f64 = bins.iter().map(|(e, o)| (*o as f64 - e).powi(2) / e).sum();
    let dof = (bins.len() - 1) as f64;
    // Wilson-Hilferty upper 0.1% point.
    let z = 3.090;
    let crit = dof * (1.0 - 2.0 / (9.0 * dof) + z * (2.0 / (9.0 * dof)).sqrt()).powi(3);
    assert!(chi2 < crit, "chi2 = {chi2} with {dof} dof, critical {crit}");
}

#[test]
fn sampled_contact_fraction_matches_profile() {
    let n = 400;
    let law = build_law(1.5, SlowVariation::Constant { a: 1.0 }, 1024, 1e-12).unwrap();
    // beta Delta = 3 with V = 0.
    let tables = forward_with_potential(&law, vec![3.0; n + 1], CapMode::Exact).unwrap();
    let exact = contact_fraction(&tables);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let fractions: Vec<f64> = (0..4000)
        .map(|_| {
            let p = sample_path(&tables, false, &mut rng);
            p.local_time() as f64 / (n + 1) as f64
        })
        .collect();
    let (mean, se) = mean_and_se(&fractions);
    assert!((mean - exact).abs() <= 3.0 * se, "{mean} ± {se} vs {exact}");
}

/// Zero disorder, `delta2 = eps2 delta*(Delta)` and `R = R(Delta)` at each point.
#[test]
fn dense_share_grows_with_pinning() {
    let n = 8192;
    let law = build_law(1.8, SlowVariation::Constant { a: 1.0 }, 8192, 1e-12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let draws = 400;
    let mut shares = Vec::new();
    for bd in [0.002, 0.005, 0.01, 0.05] {
        let sol = annealed_solution(&law, 1.0, bd, 0.4).unwrap();
        let config = SkeletonConfig::from_annealed(&sol, 0.02, 0.1).unwrap();
        let tables = forward_with_potential(&law, vec![bd; n + 1], CapMode::Exact).unwrap();
        let dense = (0..draws)
            .filter(|_| {
                let p = sample_path(&tables, false, &mut rng);
                classify(&p, &config).class == ReturnClass::Dense
            })
            .count();
        let share = dense as f64 / draws as f64;
        shares.push((
            share,
            (share * (1.0 - share) / draws as f64).sqrt(),
            config.r,
        ));
    }
    for w in shares.windows(2) {
        let se = (w[0].1.powi(2) + w[1].1.powi(2)).sqrt();
        assert!(w[1].0 >= w[0].0 - 3.0 * se, "{shares:?}");
    }
}
