use macol_core::agents::{ContextStats, ContextVector, Decision, MacolAgent, Mask};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn same_kind(a: Decision, b: Decision) -> bool {
    matches!(
        (a, b),
        (Decision::Serve, Decision::Serve) | (Decision::Explore, Decision::Explore) | (Decision::Backoff(_), Decision::Backoff(_))
    )
}

proptest! {
    #[test]
    fn incremental_mean_equals_batch(xs in prop::collection::vec(-1e3..1e3f64, 1..400)) {
        let mut s = ContextStats::default();
        for &x in &xs {
            s.record(x, 1.0);
        }
        let batch = xs.iter().sum::<f64>() / xs.len() as f64;
        prop_assert!((s.mean_reward - batch).abs() < 1e-12);
        prop_assert_eq!(s.trials, xs.len() as u64);
    }

    #[test]
    fn interleaved_contexts_keep_separate_means(obs in prop::collection::vec((0u64..8, 0.0..10.0f64), 1..200)) {
        let mut a = MacolAgent::new(0, Mask::from_bits(0b1110, 4).unwrap(), 0.0, 0.0).unwrap();
        for &(c, r) in &obs {
            a.update_reward(ContextVector::from_bits(c << 1, 4).unwrap(), r, 1.0).unwrap();
        }
        for (ctx, stats) in &a.contexts {
            let rs: Vec<f64> = obs.iter().filter(|(c, _)| c << 1 == ctx.bits()).map(|(_, r)| *r).collect();
            let batch = rs.iter().sum::<f64>() / rs.len() as f64;
            prop_assert!((stats.mean_reward - batch).abs() < 1e-12);
        }
        prop_assert!(a.contexts.len() <= 8);
    }

    #[test]
    fn decisions_ignore_reward_scale(
        obs in prop::collection::vec((0u64..16, 0.0..1.0f64, 0.1..5.0f64), 1..100),
        scale in 0.001..1000.0f64,
        epsilon in 0.0..1.0f64,
        seed in any::<u64>(),
    ) {
        let mask = Mask::from_bits(0b11110, 5).unwrap();
        let mut a = MacolAgent::new(0, mask, epsilon, 0.0).unwrap();
        let mut b = a.clone();
        for &(c, r, d) in &obs {
            let ctx = ContextVector::from_bits(c << 1, 5).unwrap();
            a.update_reward(ctx, r, d).unwrap();
            b.update_reward(ctx, r * scale, d).unwrap();
        }
        let mut ra = ChaCha8Rng::seed_from_u64(seed);
        let mut rb = ChaCha8Rng::seed_from_u64(seed);
        for c in 0..16u64 {
            let ctx = ContextVector::from_bits(c << 1, 5).unwrap();
            let (da, db) = (a.decide(&ctx, 1.0 + c as f64 * 100.0, &mut ra), b.decide(&ctx, 1.0 + c as f64 * 100.0, &mut rb));
            prop_assert!(same_kind(da, db), "{:?} vs {:?}", da, db);
        }
    }

    #[test]
    fn exploitation_serves_only_above_threshold(obs in prop::collection::vec((0u64..8, 0.0..1.0f64), 1..60), c in 0u64..8) {
        let mut a = MacolAgent::new(0, Mask::from_bits(0b1110, 4).unwrap(), 0.0, 0.0).unwrap();
        for &(k, r) in &obs {
            a.update_reward(ContextVector::from_bits(k << 1, 4).unwrap(), r, 1.0).unwrap();
        }
        let ctx = ContextVector::from_bits(c << 1, 4).unwrap();
        let above = a.stats(&ctx).mean_reward > a.classification_threshold().unwrap();
        let d = a.decide(&ctx, 1.0, &mut ChaCha8Rng::seed_from_u64(0));
        prop_assert_eq!(d == Decision::Serve, above);
    }
}
