//! Contract records, the incentive payoff matrix and sampling-detection math.

use std::ops::{Add, Mul, Sub};

use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{hash, Digest32, PublicKey};

/// Currency in integer micro-units.
pub type Amount = u64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContractError {
    #[error("reward per input must be positive")]
    ZeroReward,
    #[error("deposit {deposit} cannot cover fee {fee}")]
    DepositBelowFee { deposit: Amount, fee: Amount },
    #[error("invalid QoS thresholds: {0}")]
    InvalidQos(&'static str),
    #[error("invalid cost model: {0}")]
    InvalidCostModel(&'static str),
    #[error("{name} = {value} lies outside [0, 1]")]
    ProbabilityDomain { name: &'static str, value: f64 },
    #[error("confidence {0} is unreachable with cheat rate 0")]
    UnreachableConfidence(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContractId(pub [u8; 32]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FunctionId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Contractor,
    Verifier,
}

impl Role {
    pub const fn to_byte(self) -> u8 {
        match self {
            Role::Contractor => 0,
            Role::Verifier => 1,
        }
    }
}

/// A participant of one outsourcing session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Outsourcer,
    Contractor,
    Verifier,
}

impl Party {
    pub const fn name(self) -> &'static str {
        match self {
            Party::Outsourcer => "outsourcer",
            Party::Contractor => "contractor",
            Party::Verifier => "verifier",
        }
    }
}

impl std::fmt::Display for Party {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Quality-of-service limits, in simulation ticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosThresholds {
    pub max_response_time: u64,
    pub min_response_rate: f64,
    pub timeout: u64,
}

impl Default for QosThresholds {
    fn default() -> Self {
        Self { max_response_time: 20, min_response_rate: 0.9, timeout: 50 }
    }
}

impl QosThresholds {
    pub fn validate(&self) -> Result<(), ContractError> {
        if self.max_response_time == 0 || self.timeout == 0 {
            return Err(ContractError::InvalidQos("time limits must be positive"));
        }
        if !(self.min_response_rate > 0.0 && self.min_response_rate <= 1.0) {
            return Err(ContractError::InvalidQos("minimum response rate must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub contract_id: ContractId,
    pub outsourcer_pk: PublicKey,
    pub worker_pk: PublicKey,
    pub role: Role,
    pub reward_per_input: Amount,
    pub fee: Amount,
    pub bounty: Amount,
    pub deposit: Amount,
    pub function_id: FunctionId,
    pub qos: QosThresholds,
}

/// Length of [`Contract::encode`] output.
pub const CONTRACT_ENCODING_LEN: usize = 32 * 3 + 1 + 8 * 8;

impl Contract {
    pub fn validate(&self) -> Result<(), ContractError> {
        if self.reward_per_input == 0 {
            return Err(ContractError::ZeroReward);
        }
        if self.deposit < self.fee {
            return Err(ContractError::DepositBelowFee { deposit: self.deposit, fee: self.fee });
        }
        self.qos.validate()
    }

    /// Canonical byte layout:
    /// `[contract_id:32][outsourcer_pk:32][worker_pk:32][role:1]`
    /// `[reward:8][fee:8][bounty:8][deposit:8][function_id:8]`
    /// `[max_response_time:8][min_response_rate:8 (IEEE-754 bits)][timeout:8]`,
    /// integers little-endian.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CONTRACT_ENCODING_LEN);
        out.extend_from_slice(&self.contract_id.0);
        out.extend_from_slice(self.outsourcer_pk.as_bytes());
        out.extend_from_slice(self.worker_pk.as_bytes());
        out.push(self.role.to_byte());
        for v in [
            self.reward_per_input,
            self.fee,
            self.bounty,
            self.deposit,
            self.function_id.0,
            self.qos.max_response_time,
            self.qos.min_response_rate.to_bits(),
            self.qos.timeout,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn hash(&self) -> Digest32 {
        contract_hash(self)
    }
}

pub fn contract_hash(contract: &Contract) -> Digest32 {
    hash(&contract.encode())
}

/// Computation costs and the success rate of the cheap "q-algorithm".
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel<T> {
    pub honest_cost: T,
    pub dishonest_cost: T,
    pub q: T,
}

impl CostModel<f64> {
    pub fn validate(&self) -> Result<(), ContractError> {
        if !(0.0 <= self.dishonest_cost && self.dishonest_cost <= self.honest_cost) {
            return Err(ContractError::InvalidCostModel("need 0 <= c_d <= c_h"));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(ContractError::ProbabilityDomain { name: "q", value: self.q });
        }
        Ok(())
    }
}

/// Payoffs for one participant. First letter is this participant's strategy,
/// second the counterparty's; `d` = diligent, `D` = dishonest.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix<T> {
    pub dd: T,
    pub d_dishonest: T,
    pub dishonest_d: T,
    pub dishonest_dishonest: T,
}

/// Payoffs with fee `fee` and bounty `bounty`:
///
/// | self \ other | diligent                  | dishonest   |
/// |--------------|---------------------------|-------------|
/// | diligent     | r - c_h                   | r - c_h + b |
/// | dishonest    | r q - (f + b)(1 - q) - c_d | r - c_d     |
pub fn payoff_matrix<T>(reward: T, cost: &CostModel<T>, fee: T, bounty: T) -> PayoffMatrix<T>
where
    T: Clone + One + Add<Output = T> + Sub<Output = T> + Mul<Output = T>,
{
    let CostModel { honest_cost, dishonest_cost, q } = cost.clone();
    let honest = reward.clone() - honest_cost;
    PayoffMatrix {
        dd: honest.clone(),
        d_dishonest: honest + bounty.clone(),
        dishonest_d: reward.clone() * q.clone() - (fee + bounty) * (T::one() - q) - dishonest_cost.clone(),
        dishonest_dishonest: reward - dishonest_cost,
    }
}

/// True iff diligence strictly dominates dishonesty against both counterparty
/// strategies. Ties are not dominance.
pub fn is_honesty_dominant<T: PartialOrd>(m: &PayoffMatrix<T>) -> bool {
    m.dd > m.dishonest_d && m.d_dishonest > m.dishonest_dishonest
}

fn check_probability(name: &'static str, value: f64) -> Result<(), ContractError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ContractError::ProbabilityDomain { name, value })
    }
}

/// Chance that at least one of `intervals` samples catches a contractor that
/// cheats on a fraction `cheat_rate` of inputs: `1 - (1 - c)^i`.
pub fn detection_probability(cheat_rate: f64, intervals: u32) -> Result<f64, ContractError> {
    check_probability("cheat rate", cheat_rate)?;
    let miss = match i32::try_from(intervals) {
        Ok(i) => (1.0 - cheat_rate).powi(i),
        Err(_) => (1.0 - cheat_rate).powf(f64::from(intervals)),
    };
    Ok(1.0 - miss)
}

/// Smallest interval count whose detection probability reaches `confidence`.
pub fn required_intervals(cheat_rate: f64, confidence: f64) -> Result<u32, ContractError> {
    check_probability("cheat rate", cheat_rate)?;
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(ContractError::ProbabilityDomain { name: "confidence", value: confidence });
    }
    if cheat_rate == 0.0 {
        return Err(ContractError::UnreachableConfidence(confidence));
    }
    let reaches = |i: u32| detection_probability(cheat_rate, i).map(|p| p >= confidence);
    // Closed-form estimate, then walk to the exact boundary of the float predicate.
    let estimate = ((1.0 - confidence).ln() / (-cheat_rate).ln_1p()).ceil();
    let mut i = if estimate.is_finite() { estimate.clamp(0.0, f64::from(u32::MAX)) as u32 } else { 1 };
    while !reaches(i)? {
        i += 1;
    }
    while i > 0 && reaches(i - 1)? {
        i -= 1;
    }
    Ok(i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_contract(id: u8) -> Contract {
        Contract {
            contract_id: ContractId([id; 32]),
            outsourcer_pk: PublicKey([1; 32]),
            worker_pk: PublicKey([2; 32]),
            role: Role::Contractor,
            reward_per_input: 10,
            fee: 10,
            bounty: 4,
            deposit: 50,
            function_id: FunctionId(1),
            qos: QosThresholds::default(),
        }
    }

    fn cost(c_h: f64, c_d: f64, q: f64) -> CostModel<f64> {
        CostModel { honest_cost: c_h, dishonest_cost: c_d, q }
    }

    #[test]
    fn encoding_has_documented_length() {
        assert_eq!(sample_contract(0).encode().len(), CONTRACT_ENCODING_LEN);
        assert_eq!(CONTRACT_ENCODING_LEN, 161);
    }

    #[test]
    fn contract_hash_identity_and_id_sensitivity() {
        assert_eq!(contract_hash(&sample_contract(1)), contract_hash(&sample_contract(1)));
        for a in 0..=255u8 {
            let b = a.wrapping_add(1);
            assert_ne!(contract_hash(&sample_contract(a)), contract_hash(&sample_contract(b)));
        }
    }

    #[test]
    fn contract_validation() {
        let mut c = sample_contract(0);
        assert!(c.validate().is_ok());
        c.deposit = 9;
        assert_eq!(c.validate(), Err(ContractError::DepositBelowFee { deposit: 9, fee: 10 }));
        c.deposit = 50;
        c.reward_per_input = 0;
        assert_eq!(c.validate(), Err(ContractError::ZeroReward));
        c.reward_per_input = 1;
        c.qos.min_response_rate = 1.5;
        assert!(matches!(c.validate(), Err(ContractError::InvalidQos(_))));
    }

    #[test]
    fn payoff_examples() {
        let m = payoff_matrix(10.0, &cost(4.0, 1.0, 0.5), 10.0, 2.0);
        assert_eq!(m, PayoffMatrix { dd: 6.0, d_dishonest: 8.0, dishonest_d: -2.0, dishonest_dishonest: 9.0 });
        assert!(!is_honesty_dominant(&m));

        let m = payoff_matrix(10.0, &cost(4.0, 1.0, 0.5), 10.0, 4.0);
        assert_eq!(m, PayoffMatrix { dd: 6.0, d_dishonest: 10.0, dishonest_d: -3.0, dishonest_dishonest: 9.0 });
        assert!(is_honesty_dominant(&m));
    }

    #[test]
    fn payoff_degenerate_cases() {
        let m = payoff_matrix(10.0, &cost(4.0, 1.0, 1.0), 0.0, 0.0);
        assert_eq!(m.dishonest_d, 9.0);
        let m = payoff_matrix(10.0, &cost(4.0, 1.0, 0.3), 5.0, 0.0);
        assert_eq!(m.dd, m.d_dishonest);
        // Cheating that saves nothing is never worth it.
        let m = payoff_matrix(10.0, &cost(3.0, 3.0, 0.9), 0.0, 0.5);
        assert!(is_honesty_dominant(&m));
    }

    #[test]
    fn ties_are_not_dominance() {
        // b == c_h - c_d makes d_dishonest == dishonest_dishonest.
        let m = payoff_matrix(10.0, &cost(4.0, 1.0, 0.0), 100.0, 3.0);
        assert_eq!(m.d_dishonest, m.dishonest_dishonest);
        assert!(!is_honesty_dominant(&m));
    }

    #[test]
    fn cost_model_validation() {
        assert!(cost(4.0, 1.0, 0.5).validate().is_ok());
        assert!(cost(1.0, 4.0, 0.5).validate().is_err());
        assert!(cost(4.0, 1.0, 1.5).validate().is_err());
    }

    #[test]
    fn detection_probability_examples() {
        let p = detection_probability(0.1, 44).unwrap();
        assert!((p - 0.990_302_8).abs() < 1e-6, "{p}");
        assert_eq!(detection_probability(0.0, 1000).unwrap(), 0.0);
        assert_eq!(detection_probability(1.0, 1).unwrap(), 1.0);
        assert_eq!(detection_probability(0.5, 0).unwrap(), 0.0);
        assert!(detection_probability(1.1, 1).is_err());
        assert!(detection_probability(-0.1, 1).is_err());
    }

    #[test]
    fn required_intervals_examples() {
        assert_eq!(required_intervals(0.1, 0.99).unwrap(), 44);
        assert_eq!(required_intervals(0.5, 0.5).unwrap(), 1);
        assert_eq!(required_intervals(0.0, 0.9), Err(ContractError::UnreachableConfidence(0.9)));
        assert!(required_intervals(0.1, 1.0).is_err());
    }

    #[test]
    fn required_intervals_is_minimal() {
        for &c in &[0.001, 0.01, 0.05, 0.1, 0.25, 0.5, 0.9, 1.0] {
            for &conf in &[0.5, 0.9, 0.95, 0.99, 0.999] {
                let i = required_intervals(c, conf).unwrap();
                assert!(detection_probability(c, i).unwrap() >= conf);
                if i > 0 {
                    assert!(detection_probability(c, i - 1).unwrap() < conf, "c={c} conf={conf}");
                }
            }
        }
    }
}
