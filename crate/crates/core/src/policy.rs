//! Group-relative policy optimization math and the max–min tanh-gated
//! multi-task loss.
//!
//! Everything works on per-token log-probabilities supplied by the caller, so
//! any policy can be plugged in. All arithmetic is `f64`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("sequence has no tokens")]
    EmptySequence,
    #[error("sequence lengths differ: {tokens} tokens, {current} current and {reference} reference log-probs")]
    LengthMismatch {
        tokens: usize,
        current: usize,
        reference: usize,
    },
    #[error("log-probability {0} is not finite and non-positive")]
    BadLogProb(f64),
    #[error("group needs at least 2 members, got {0}")]
    GroupTooSmall(usize),
    #[error("reward {0} is not finite")]
    BadReward(f64),
    #[error("{name} must be finite and non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("gating strength lambda must lie in (0, 1], got {0}")]
    BadLambda(f64),
    #[error("gradient input shape does not match the group: {0}")]
    GradientShape(String),
}

/// A token identifier as found in log-prob files: either an id or a string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Token {
    Id(i64),
    Text(String),
}

/// Per-token log-probabilities of one sampled sequence under the current and
/// the frozen reference policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSequence", into = "RawSequence")]
pub struct SequenceLogProbs {
    tokens: Vec<Token>,
    logp_current: Vec<f64>,
    logp_reference: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSequence {
    tokens: Vec<Token>,
    logp_current: Vec<f64>,
    logp_reference: Vec<f64>,
}

impl TryFrom<RawSequence> for SequenceLogProbs {
    type Error = PolicyError;
    fn try_from(r: RawSequence) -> Result<Self, Self::Error> {
        SequenceLogProbs::new(r.tokens, r.logp_current, r.logp_reference)
    }
}

impl From<SequenceLogProbs> for RawSequence {
    fn from(s: SequenceLogProbs) -> Self {
        RawSequence {
            tokens: s.tokens,
            logp_current: s.logp_current,
            logp_reference: s.logp_reference,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Current,
    Reference,
}

impl SequenceLogProbs {
    pub fn new(tokens: Vec<Token>, logp_current: Vec<f64>, logp_reference: Vec<f64>) -> Result<Self, PolicyError> {
        if tokens.len() != logp_current.len() || tokens.len() != logp_reference.len() {
            return Err(PolicyError::LengthMismatch {
                tokens: tokens.len(),
                current: logp_current.len(),
                reference: logp_reference.len(),
            });
        }
        if tokens.is_empty() {
            return Err(PolicyError::EmptySequence);
        }
        if let Some(&bad) = logp_current
            .iter()
            .chain(&logp_reference)
            .find(|x| !(x.is_finite() && **x <= 0.0))
        {
            return Err(PolicyError::BadLogProb(bad));
        }
        Ok(SequenceLogProbs {
            tokens,
            logp_current,
            logp_reference,
        })
    }

    /// Sequence with numbered placeholder tokens.
    pub fn from_logprobs(logp_current: Vec<f64>, logp_reference: Vec<f64>) -> Result<Self, PolicyError> {
        let tokens = (0..logp_current.len() as i64).map(Token::Id).collect();
        SequenceLogProbs::new(tokens, logp_current, logp_reference)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn logp(&self, which: Policy) -> &[f64] {
        match which {
            Policy::Current => &self.logp_current,
            Policy::Reference => &self.logp_reference,
        }
    }
}

/// (1/T) Σ_t log π(y_t | ·) under the chosen policy.
pub fn normalized_logprob(seq: &SequenceLogProbs, which: Policy) -> f64 {
    let logp = seq.logp(which);
    logp.iter().sum::<f64>() / logp.len() as f64
}

/// Single-trajectory KL estimate: (1/T) Σ_t (log π_θ − log π_ref). Can be
/// negative on an individual sequence.
pub fn kl_estimate(seq: &SequenceLogProbs) -> f64 {
    let sum: f64 = seq
        .logp_current
        .iter()
        .zip(&seq.logp_reference)
        .map(|(c, r)| c - r)
        .sum();
    sum / seq.len() as f64
}

pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_BETA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMember {
    #[serde(flatten)]
    pub sequence: SequenceLogProbs,
    pub reward: f64,
}

/// K ≥ 2 sampled sequences for one prompt, with their rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGroup {
    prompt_id: String,
    members: Vec<GroupMember>,
    epsilon: f64,
}

impl CandidateGroup {
    pub fn new(prompt_id: impl Into<String>, members: Vec<GroupMember>, epsilon: f64) -> Result<Self, PolicyError> {
        if members.len() < 2 {
            return Err(PolicyError::GroupTooSmall(members.len()));
        }
        if let Some(m) = members.iter().find(|m| !m.reward.is_finite()) {
            return Err(PolicyError::BadReward(m.reward));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(PolicyError::Negative {
                name: "epsilon",
                value: epsilon,
            });
        }
        Ok(CandidateGroup {
            prompt_id: prompt_id.into(),
            members,
            epsilon,
        })
    }

    pub fn prompt_id(&self) -> &str {
        &self.prompt_id
    }

    pub fn members(&self) -> &[GroupMember] {
        &self.members
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.reward).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoConfig {
    /// KL penalty coefficient.
    pub beta: f64,
    /// Added to the group standard deviation.
    pub epsilon: f64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            beta: DEFAULT_BETA,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        for (name, value) in [("beta", self.beta), ("epsilon", self.epsilon)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(PolicyError::Negative { name, value });
            }
        }
        Ok(())
    }
}

/// A_k = (r_k − μ) / (σ + ε), with σ the population standard deviation.
pub fn group_advantages(g: &CandidateGroup) -> Vec<f64> {
    let rewards = g.rewards();
    if rewards.iter().all(|r| *r == rewards[0]) {
        return vec![0.0; rewards.len()];
    }
    let k = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / k;
    let mut centered: Vec<f64> = rewards.iter().map(|r| r - mean).collect();
    let residual = centered.iter().sum::<f64>() / k;
    centered.iter_mut().for_each(|c| *c -= residual);
    let var = centered.iter().map(|c| c * c).sum::<f64>() / k;
    let sigma = var.sqrt() + g.epsilon;
    centered
        .iter()
        .map(|c| if sigma > 0.0 { c / sigma } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrpoLoss {
    pub total: f64,
    pub per_member: Vec<f64>,
    pub advantages: Vec<f64>,
    pub kl: Vec<f64>,
    pub logprob: Vec<f64>,
}

/// Per member −A_k·ℓ_θ(y_k) + β·KL(y_k), averaged over the group. Advantages
/// enter as constants.
pub fn grpo_loss(g: &CandidateGroup, cfg: &GrpoConfig) -> Result<GrpoLoss, PolicyError> {
    cfg.validate()?;
    let advantages = group_advantages(g);
    let logprob: Vec<f64> = g
        .members
        .iter()
        .map(|m| normalized_logprob(&m.sequence, Policy::Current))
        .collect();
    let kl: Vec<f64> = g.members.iter().map(|m| kl_estimate(&m.sequence)).collect();
    let per_member: Vec<f64> = advantages
        .iter()
        .zip(logprob.iter().zip(&kl))
        .map(|(a, (l, kl))| -a * l + cfg.beta * kl)
        .collect();
    let total = per_member.iter().sum::<f64>() / per_member.len() as f64;
    Ok(GrpoLoss {
        total,
        per_member,
        advantages,
        kl,
        logprob,
    })
}

/// Gradient of [`grpo_loss`] with respect to policy parameters θ.
///
/// `dlogp[k][t]` is ∂ log π_θ(y_{k,t}) / ∂θ for member `k`, token `t`. The
/// reference policy is frozen and the advantages are constants, so
/// ∂L/∂θ = (1/K) Σ_k (β − A_k) (1/T_k) Σ_t ∂ log π_θ(y_{k,t}) / ∂θ.
pub fn grpo_loss_gradient(
    g: &CandidateGroup,
    cfg: &GrpoConfig,
    dlogp: &[Vec<Vec<f64>>],
) -> Result<Vec<f64>, PolicyError> {
    cfg.validate()?;
    if dlogp.len() != g.members.len() {
        return Err(PolicyError::GradientShape(format!(
            "{} members but {} gradient blocks",
            g.members.len(),
            dlogp.len()
        )));
    }
    let dim = dlogp
        .first()
        .and_then(|m| m.first())
        .map(Vec::len)
        .unwrap_or(0);
    let advantages = group_advantages(g);
    let k = g.members.len() as f64;
    let mut grad = vec![0.0; dim];
    for ((member, block), a) in g.members.iter().zip(dlogp).zip(&advantages) {
        if block.len() != member.sequence.len() || block.iter().any(|row| row.len() != dim) {
            return Err(PolicyError::GradientShape(format!(
                "member with {} tokens has a {}-row gradient block",
                member.sequence.len(),
                block.len()
            )));
        }
        let coef = (cfg.beta - a) / (block.len() as f64 * k);
        for row in block {
            for (gd, x) in grad.iter_mut().zip(row) {
                *gd += coef * x;
            }
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmtgConfig {
    pub lambda: f64,
}

impl Default for MmtgConfig {
    fn default() -> Self {
        MmtgConfig { lambda: 1.0 }
    }
}

impl MmtgConfig {
    pub fn new(lambda: f64) -> Result<Self, PolicyError> {
        let cfg = MmtgConfig { lambda };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.lambda > 0.0 && self.lambda <= 1.0 {
            Ok(())
        } else {
            Err(PolicyError::BadLambda(self.lambda))
        }
    }
}

fn max_min(l_mae: f64, l_ce: f64) -> Result<(f64, f64), PolicyError> {
    for (name, value) in [("l_mae", l_mae), ("l_ce", l_ce)] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(PolicyError::Negative { name, value });
        }
    }
    Ok((l_mae.max(l_ce), l_mae.min(l_ce)))
}

/// L_max · (2 − λ·tanh(L_min)).
pub fn mmtg_loss(l_mae: f64, l_ce: f64, cfg: &MmtgConfig) -> Result<f64, PolicyError> {
    cfg.validate()?;
    let (hi, lo) = max_min(l_mae, l_ce)?;
    Ok(hi * (2.0 - cfg.lambda * lo.tanh()))
}

/// The same loss in additive form, L_max + L_max · (1 − λ·tanh(L_min)).
pub fn mmtg_loss_additive(l_mae: f64, l_ce: f64, cfg: &MmtgConfig) -> Result<f64, PolicyError> {
    cfg.validate()?;
    let (hi, lo) = max_min(l_mae, l_ce)?;
    Ok(hi + hi * (1.0 - cfg.lambda * lo.tanh()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(cur: &[f64], reference: &[f64]) -> SequenceLogProbs {
        SequenceLogProbs::from_logprobs(cur.to_vec(), reference.to_vec()).unwrap()
    }

    fn group(rewards: &[f64], eps: f64) -> CandidateGroup {
        let members = rewards
            .iter()
            .map(|&reward| GroupMember {
                sequence: seq(&[-1.0, -0.5], &[-1.0, -0.5]),
                reward,
            })
            .collect();
        CandidateGroup::new("p", members, eps).unwrap()
    }

    #[test]
    fn logprob_and_kl() {
        assert_eq!(normalized_logprob(&seq(&[-1.0; 3], &[-1.0; 3]), Policy::Current), -1.0);
        assert_eq!(normalized_logprob(&seq(&[0.0], &[0.0]), Policy::Current), 0.0);
        assert_eq!(normalized_logprob(&seq(&[-1.0], &[-3.0]), Policy::Reference), -3.0);
        assert_eq!(kl_estimate(&seq(&[-0.3, -2.0], &[-0.3, -2.0])), 0.0);
        assert_eq!(kl_estimate(&seq(&[-1.0, -1.0], &[-2.0, -2.0])), 1.0);
        assert_eq!(kl_estimate(&seq(&[-2.0], &[-1.0])), -1.0);
    }

    #[test]
    fn sequence_validation() {
        assert_eq!(
            SequenceLogProbs::from_logprobs(vec![], vec![]),
            Err(PolicyError::EmptySequence)
        );
        assert!(matches!(
            SequenceLogProbs::from_logprobs(vec![-1.0], vec![-1.0, -2.0]),
            Err(PolicyError::LengthMismatch { .. })
        ));
        assert!(SequenceLogProbs::from_logprobs(vec![0.5], vec![-1.0]).is_err());
        assert!(SequenceLogProbs::from_logprobs(vec![f64::NAN], vec![-1.0]).is_err());
    }

    #[test]
    fn advantages() {
        assert_eq!(group_advantages(&group(&[1.0, 1.0, 1.0], 1e-8)), vec![0.0; 3]);
        let a = group_advantages(&group(&[0.2, 0.5, 0.8], 0.0));
        // mu = 0.5, sigma = sqrt(0.06)
        let expect = 0.3 / 0.06f64.sqrt();
        assert!((a[0] + expect).abs() < 1e-12 && a[1].abs() < 1e-12 && (a[2] - expect).abs() < 1e-12);
        assert!((expect - 1.22474).abs() < 1e-5);
        let shifted = group_advantages(&group(&[5.2, 5.5, 5.8], 0.0));
        for (x, y) in a.iter().zip(&shifted) {
            assert!((x - y).abs() < 1e-9);
        }
        assert_eq!(group_advantages(&group(&[3.0, 3.0], 0.0)), vec![0.0, 0.0]);
        assert!(matches!(
            CandidateGroup::new("p", vec![], 1e-8),
            Err(PolicyError::GroupTooSmall(0))
        ));
    }

    #[test]
    fn grpo_loss_examples() {
        let cfg0 = GrpoConfig { beta: 0.0, epsilon: 0.0 };
        let l = grpo_loss(&group(&[0.4, 0.4, 0.4], 1e-8), &cfg0).unwrap();
        assert_eq!(l.total, 0.0);

        // Two members with rewards ±1 give advantages of exactly ±1.
        let members = vec![
            GroupMember { sequence: seq(&[-0.5], &[-0.5]), reward: 1.0 },
            GroupMember { sequence: seq(&[-2.0], &[-2.0]), reward: -1.0 },
        ];
        let g = CandidateGroup::new("p", members, 0.0).unwrap();
        let l = grpo_loss(&g, &cfg0).unwrap();
        assert_eq!(l.advantages, vec![1.0, -1.0]);
        assert_eq!(l.per_member, vec![0.5, -2.0]);
        assert_eq!(l.total, -0.75);
        let with_kl = grpo_loss(&g, &GrpoConfig { beta: 1.0, epsilon: 0.0 }).unwrap();
        assert_eq!(with_kl.total, l.total);
        assert!(grpo_loss(&g, &GrpoConfig { beta: -1.0, epsilon: 0.0 }).is_err());
    }

    #[test]
    fn mmtg_examples() {
        let cfg = MmtgConfig::default();
        assert_eq!(mmtg_loss(0.0, 0.0, &cfg).unwrap(), 0.0);
        let v = mmtg_loss(2.0, 1.0, &cfg).unwrap();
        assert!((v - 2.0 * (2.0 - 1f64.tanh())).abs() < 1e-15);
        assert!((v - 2.47682).abs() < 1e-5);
        assert_eq!(mmtg_loss(1.0, 2.0, &cfg).unwrap(), v);
        assert!(mmtg_loss(-1.0, 1.0, &cfg).is_err());
        assert!(MmtgConfig::new(0.0).is_err());
        assert!(MmtgConfig::new(1.5).is_err());
        let tie = mmtg_loss(0.7, 0.7, &MmtgConfig::new(0.3).unwrap()).unwrap();
        assert!((tie - 0.7 * (2.0 - 0.3 * 0.7f64.tanh())).abs() < 1e-15);
    }

    #[test]
    fn group_json_shape() {
        let line = r#"{"tokens":[1,"x"],"logp_current":[-0.1,-0.2],"logp_reference":[-0.1,-0.3],"reward":0.5}"#;
        let m: GroupMember = serde_json::from_str(line).unwrap();
        assert_eq!(m.sequence.tokens()[1], Token::Text("x".into()));
        assert_eq!(serde_json::to_string(&m).unwrap(), line);
        let bad = r#"{"tokens":[1],"logp_current":[-0.1,-0.2],"logp_reference":[-0.1,-0.3],"reward":0.5}"#;
        assert!(serde_json::from_str::<GroupMember>(bad).is_err());
    }
}
