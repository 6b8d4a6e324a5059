use catloop::policy::{
    grpo_loss, grpo_loss_gradient, group_advantages, kl_estimate, mmtg_loss, mmtg_loss_additive,
    normalized_logprob, CandidateGroup, GroupMember, GrpoConfig, MmtgConfig, Policy, SequenceLogProbs,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn member(cur: Vec<f64>, reference: Vec<f64>, reward: f64) -> GroupMember {
    GroupMember {
        sequence: SequenceLogProbs::from_logprobs(cur, reference).unwrap(),
        reward,
    }
}

fn group_of(rewards: &[f64], eps: f64) -> CandidateGroup {
    let members = rewards.iter().map(|&r| member(vec![-1.0], vec![-1.0], r)).collect();
    CandidateGroup::new("p", members, eps).unwrap()
}

#[test]
fn three_reward_example() {
    let a = group_advantages(&group_of(&[0.2, 0.5, 0.8], 0.0));
    assert!((a[0] + 1.22474).abs() < 1e-5);
    assert!(a[1].abs() < 1e-12);
    assert!((a[2] - 1.22474).abs() < 1e-5);
}

#[test]
fn kl_zero_for_identical_policies() {
    let s = SequenceLogProbs::from_logprobs(vec![-0.3, -1.7, -2.2], vec![-0.3, -1.7, -2.2]).unwrap();
    assert_eq!(kl_estimate(&s), 0.0);
    let s = SequenceLogProbs::from_logprobs(vec![-0.5, -1.0], vec![-1.0, -1.0]).unwrap();
    assert!((kl_estimate(&s) - 0.25).abs() < 1e-15);
    assert!((normalized_logprob(&s, Policy::Current) + 0.75).abs() < 1e-15);
}

/// A 3-parameter categorical policy over 4 tokens: logits = F θ.
struct Toy {
    features: [[f64; 3]; 4],
}

impl Toy {
    fn logp(&self, theta: &[f64; 3]) -> [f64; 4] {
        let logits: Vec<f64> = self.features.iter().map(|f| f.iter().zip(theta).map(|(a, b)| a * b).sum()).collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        std::array::from_fn(|v| logits[v] - lse)
    }

    fn dlogp(&self, theta: &[f64; 3], v: usize) -> Vec<f64> {
        let p = self.logp(theta).map(f64::exp);
        (0..3)
            .map(|k| self.features[v][k] - (0..4).map(|u| p[u] * self.features[u][k]).sum::<f64>())
            .collect()
    }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let toy = Toy {
        features: [[1.0, 0.0, 0.5], [0.0, 1.0, -0.3], [0.7, -0.4, 1.0], [-0.2, 0.3, 0.1]],
    };
    let theta_ref = [0.1, -0.2, 0.05];
    let seqs: Vec<Vec<usize>> = vec![vec![0, 2, 1], vec![3, 3], vec![1, 0, 2, 2], vec![2]];
    let rewards = [0.9, 0.1, 0.5, 0.35];
    let cfg = GrpoConfig { beta: 0.1, epsilon: 1e-8 };
    let group_at = |theta: &[f64; 3]| {
        let (cur, reference) = (toy.logp(theta), toy.logp(&theta_ref));
        let members = seqs
            .iter()
            .zip(rewards)
            .map(|(s, r)| member(s.iter().map(|&v| cur[v]).collect(), s.iter().map(|&v| reference[v]).collect(), r))
            .collect();
        CandidateGroup::new("toy", members, cfg.epsilon).unwrap()
    };
    let loss = |theta: &[f64; 3]| grpo_loss(&group_at(theta), &cfg).unwrap().total;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let theta: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let dlogp: Vec<Vec<Vec<f64>>> = seqs.iter().map(|s| s.iter().map(|&v| toy.dlogp(&theta, v)).collect()).collect();
        let analytic = grpo_loss_gradient(&group_at(&theta), &cfg, &dlogp).unwrap();
        let h = 1e-6;
        let numeric: Vec<f64> = (0..3)
            .map(|k| {
                let (mut p, mut m) = (theta, theta);
                p[k] += h;
                m[k] -= h;
                (loss(&p) - loss(&m)) / (2.0 * h)
            })
            .collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) <= 1e-5 * norm(&numeric), "{analytic:?} vs {numeric:?}");
    }
}

#[test]
fn mmtg_reference_value() {
    let cfg = MmtgConfig::new(1.0).unwrap();
    let v = mmtg_loss(2.0, 1.0, &cfg).unwrap();
    assert!((v - 2.0 * (2.0 - 1f64.tanh())).abs() < 1e-15);
    assert!((v - 2.47682).abs() < 1e-5);
    assert_eq!(mmtg_loss(1.0, 2.0, &cfg).unwrap(), v);
    assert!(MmtgConfig::new(0.0).is_err());
    assert!(mmtg_loss(-1.0, 1.0, &cfg).is_err());
}

#[test]
fn groups_file_round_trip() {
    let line = r#"{"tokens":["Cu",17],"logp_current":[-0.5,-1.0],"logp_reference":[-1.0,-1.0],"reward":0.4}"#;
    let m: GroupMember = serde_json::from_str(line).unwrap();
    assert_eq!(m.reward, 0.4);
    assert_eq!(m.sequence.len(), 2);
    assert_eq!(serde_json::to_string(&m).unwrap(), line);
    let bad = r#"{"tokens":["Cu",17],"logp_current":[-0.5],"logp_reference":[-1.0,-1.0],"reward":0.4}"#;
    assert!(serde_json::from_str::<GroupMember>(bad).is_err());
}

proptest! {
    #[test]
    fn advantages_mean_zero(rewards in prop::collection::vec(-10.0f64..10.0, 2..16), eps in 0.0f64..1e-3) {
        let a = group_advantages(&group_of(&rewards, eps));
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        prop_assert!(mean.abs() < 1e-9);
    }

    #[test]
    fn advantages_shift_and_scale_invariant(rewards in prop::collection::vec(-5.0f64..5.0, 2..10), shift in -100.0f64..100.0, scale in 0.1f64..10.0) {
        let a = group_advantages(&group_of(&rewards, 0.0));
        let moved: Vec<f64> = rewards.iter().map(|r| r * scale + shift).collect();
        let b = group_advantages(&group_of(&moved, 0.0));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn mmtg_forms_agree_and_bounded(x in 0.0f64..50.0, y in 0.0f64..50.0, lambda in 1e-6f64..=1.0) {
        let cfg = MmtgConfig::new(lambda).unwrap();
        let m = mmtg_loss(x, y, &cfg).unwrap();
        let a = mmtg_loss_additive(x, y, &cfg).unwrap();
        prop_assert!((m - a).abs() <= 1e-12 * m.max(1.0));
        let hi = x.max(y);
        prop_assert!(hi <= m + 1e-12 && m <= 2.0 * hi + 1e-12);
    }
}
