use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use unrealdc::losses::RewardClass;
use unrealdc::minidoom::Observation;
use unrealdc::replay::{ReplayBuffer, Transition};

fn tr(id: usize, reward: f64, done: bool) -> Transition {
    Transition { observation: Observation::new(1, 1, vec![id as f32, 0.0, 0.0]), action: 0, reward, done }
}

#[test]
fn start_index_is_uniform() {
    // 14 transitions, windows of 5 -> 10 valid starts.
    let mut b = ReplayBuffer::new(100);
    for i in 0..14 {
        b.push(tr(i, 0.0, false));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 100_000;
    let mut counts = [0u64; 10];
    for _ in 0..draws {
        let s = b.sample_uniform_sequence(5, &mut rng).unwrap();
        counts[s[0].observation.data()[0] as usize] += 1;
    }
    let expected = draws as f64 / 10.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(9.0).unwrap().cdf(chi2);
    for c in counts {
        assert!((c as f64 / draws as f64 - 0.1).abs() < 0.01);
    }
    assert!(p > 0.01, "chi2 {chi2} p {p}");
}

#[test]
fn rp_batches_exactly_balanced() {
    let mut b = ReplayBuffer::new(200);
    for i in 0..104 {
        b.push(tr(i, if i % 26 == 25 { -0.06 } else { 0.0 }, false));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let batch = b.sample_rp_batch(6, &mut rng).unwrap();
        let zeros = batch.iter().filter(|s| s.class == RewardClass::Zero).count();
        assert_eq!((zeros, batch.len() - zeros), (3, 3));
    }
}
