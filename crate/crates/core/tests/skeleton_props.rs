use pinning::pathkit::{
    cg_skeleton, count_zeros_in, lift, semi_cg_skeleton, skeleton, ReturnPath, SkeletonConfig,
};
use proptest::prelude::*;

/// Random return sets on `[0, N]` built from a mix of short and long steps.
fn arb_path() -> impl Strategy<Value = ReturnPath> {
    (
        prop::collection::vec(prop_oneof![3 => 1usize..20, 1 => 20usize..400], 1..60),
        any::<bool>(),
        0usize..300,
    )
        .prop_map(|(steps, constrained, tail)| {
            let mut zeros = vec![0];
            for s in steps {
                zeros.push(zeros.last().unwrap() + s);
            }
            let last = *zeros.last().unwrap();
            let n = if constrained { last } else { last + tail };
            // Round N up to a multiple of 8 for coarse-graining.
            let n8 = n.div_ceil(8) * 8;
            if constrained && n8 != n {
                zeros.push(n8);
            }
            ReturnPath::new(n8, zeros, constrained).unwrap()
        })
}

fn config() -> SkeletonConfig {
    SkeletonConfig::new(0.25, 2.0 / 128.0, 0.1, 128, 0.5).unwrap()
}

proptest! {
    #[test]
    fn skeleton_tiles_and_keeps_every_zero(path in arb_path()) {
        let s = skeleton(&path, 64);
        prop_assert!(s.tiles());
        prop_assert_eq!(count_zeros_in(&s, &path.zeros), path.local_time());
        prop_assert!(s.min_gap().is_none_or(|g| g > 64));
    }

    #[test]
    fn lift_is_idempotent_and_shrinks(path in arb_path()) {
        let cfg = config();
        let s = skeleton(&path, cfg.r);
        let l = lift(&s, cfg.m);
        prop_assert!(l.tiles());
        prop_assert_eq!(lift(&l, cfg.m), l.clone());
        prop_assert!(l.sites() <= s.sites());
    }

    #[test]
    fn coarse_grainings_keep_gaps_long(path in arb_path()) {
        let cfg = config();
        let l = lift(&skeleton(&path, cfg.r), cfg.m);
        let cg = cg_skeleton(&l, cfg.block).unwrap();
        prop_assert!(cg.tiles());
        prop_assert!(cg.gaps.iter().all(|(a, b)| a % cfg.block == 0 && b % cfg.block == 0));
        if l.m() >= 2 {
            let (j, js) = (l.length() as f64, cg.length() as f64);
            prop_assert!(j <= js && js <= (1.0 + cfg.h1) * j);
        }
        let floor = (1.0 - 2.0 * cfg.eps3) * cfg.r as f64;
        prop_assert!(cg.min_gap().is_none_or(|g| g as f64 >= floor));
        let semi = semi_cg_skeleton(&l, &cfg);
        prop_assert!(semi.skeleton.tiles());
        if !semi.clamped {
            let bound = (1.0 - cfg.eps4) * cfg.r as f64;
            prop_assert!(semi.skeleton.min_gap().is_none_or(|g| g as f64 > bound));
        }
    }
}

#[test]
fn short_segment_merges_gaps() {
    let zeros: Vec<usize> = vec![0, 1, 2, 200, 205, 210, 400, 401];
    let path = ReturnPath::new(401, zeros, true).unwrap();
    let cfg = config();
    let s = skeleton(&path, cfg.r);
    assert_eq!(s.gaps, vec![(2, 200), (210, 400)]);
    let l = lift(&s, cfg.m);
    assert_eq!(l.gaps, vec![(2, 400)]);
    assert_eq!(l.sites(), 3 + 2);
}
