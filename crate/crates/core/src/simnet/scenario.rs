//! Scenario definitions and the per-threat presets.

use serde::{Deserialize, Serialize};

use super::network::{inject_drop, inject_latency, inject_tamper, Latency, LinkFilter, NetworkModel, TamperRule};
use crate::contract::{payoff_matrix, Amount, ContractError, CostModel, Party, PayoffMatrix, QosThresholds};
use crate::execution::{FalseOutputRule, ReferenceFunction};
use crate::settlement::LedgerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThreatId {
    Honest,
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
    T8,
    T9,
}

impl ThreatId {
    pub const ALL: [ThreatId; 9] = [
        ThreatId::T1,
        ThreatId::T2,
        ThreatId::T3,
        ThreatId::T4,
        ThreatId::T5,
        ThreatId::T6,
        ThreatId::T7,
        ThreatId::T8,
        ThreatId::T9,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ThreatId::Honest => "honest",
            ThreatId::T1 => "T1",
            ThreatId::T2 => "T2",
            ThreatId::T3 => "T3",
            ThreatId::T4 => "T4",
            ThreatId::T5 => "T5",
            ThreatId::T6 => "T6",
            ThreatId::T7 => "T7",
            ThreatId::T8 => "T8",
            ThreatId::T9 => "T9",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ThreatId::Honest => "all parties follow the protocol",
            ThreatId::T1 => "contractor returns forged results",
            ThreatId::T2 => "verifier returns forged results",
            ThreatId::T3 => "outsourcer splits the input between workers",
            ThreatId::T4 => "convicted worker disowns its signed record",
            ThreatId::T5 => "outsourcer withholds payment",
            ThreatId::T6 => "outsourcer and a hand-picked verifier frame the contractor",
            ThreatId::T7 => "contractor and verifier agree on a cheap answer",
            ThreatId::T8 => "worker breaches QoS limits",
            ThreatId::T9 => "network adversary corrupts messages",
        }
    }

    pub fn techniques(self) -> &'static str {
        match self {
            ThreatId::Honest => "-",
            ThreatId::T1 => "Sampling-based re-execution",
            ThreatId::T2 => "Contestation",
            ThreatId::T3 => "Digital signatures (signature chain), Contestation",
            ThreatId::T4 => "Digital signatures",
            ThreatId::T5 => "Payment on behalf (settlement escrow)",
            ThreatId::T6 => "Randomization, Game-theoretic incentives, Contestation",
            ThreatId::T7 => "Randomization, Game-theoretic incentives",
            ThreatId::T8 => "Blacklisting, Review system, Contract abortion",
            ThreatId::T9 => "Digital signatures",
        }
    }

    /// The party the scenario scripts as deviating, if any.
    pub fn deviator(self) -> Option<Party> {
        match self {
            ThreatId::Honest | ThreatId::T9 => None,
            ThreatId::T1 | ThreatId::T4 | ThreatId::T8 => Some(Party::Contractor),
            ThreatId::T2 => Some(Party::Verifier),
            ThreatId::T3 | ThreatId::T5 | ThreatId::T6 => Some(Party::Outsourcer),
            ThreatId::T7 => Some(Party::Contractor),
        }
    }
}

/// Strategy as written in a config file; partners are named by role and
/// resolved to keys when the scenario starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    #[default]
    Honest,
    CheatRate { rate: f64 },
    QAlgorithm { q: f64 },
    Colluder { partner: Party, rule: FalseOutputRule },
    SplitInput,
    PaymentRefuser,
    SlowResponder { delay: u64 },
}

impl StrategySpec {
    pub fn is_honest(&self) -> bool {
        *self == StrategySpec::Honest
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Terms {
    pub reward: Amount,
    pub fee: Amount,
    pub bounty: Amount,
    pub deposit: Amount,
}

impl Default for Terms {
    fn default() -> Self {
        Self { reward: 2, fee: 20, bounty: 10, deposit: 60 }
    }
}

/// Per-input execution cost of the full function and of the cheap answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Costs {
    pub honest: f64,
    pub dishonest: f64,
}

impl Default for Costs {
    fn default() -> Self {
        Self { honest: 1.0, dishonest: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub threat: ThreatId,
    pub seed: u64,
    pub inputs: u32,
    pub interval_size: u32,
    /// Ticks between two inputs.
    pub input_period: u64,
    pub function: ReferenceFunction,
    /// Share of grid frames that contain objects.
    pub object_rate: f64,
    /// Merkle batch size for the Contractor; unset means per-response
    /// signatures.
    pub batch_size: Option<u32>,
    /// Registered verifiers, the selected one included.
    pub verifiers: usize,
    /// Registered verifiers that back the deviating worker during
    /// contestation.
    pub colluding_verifiers: usize,
    pub outsourcer: StrategySpec,
    pub contractor: StrategySpec,
    pub verifier: StrategySpec,
    pub terms: Terms,
    pub costs: Costs,
    pub qos: QosThresholds,
    pub ledger: LedgerConfig,
    pub network: NetworkModel,
    /// Whether a deviating worker opens contestation rounds too.
    pub deviator_contests: bool,
    /// Whether an accused deviator first submits an altered record.
    pub repudiate: bool,
    /// Ablation: the workers learn each other's identity, as if the
    /// Verifier were not drawn by commit-reveal.
    pub reveal_partner: bool,
    pub max_ticks: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "honest".into(),
            threat: ThreatId::Honest,
            seed: 1,
            inputs: 12,
            interval_size: 3,
            input_period: 1,
            function: ReferenceFunction::GridDetector { width: 8, height: 8 },
            object_rate: 0.5,
            batch_size: None,
            verifiers: 7,
            colluding_verifiers: 0,
            outsourcer: StrategySpec::Honest,
            contractor: StrategySpec::Honest,
            verifier: StrategySpec::Honest,
            terms: Terms::default(),
            costs: Costs::default(),
            qos: QosThresholds::default(),
            ledger: LedgerConfig::default(),
            network: NetworkModel::default(),
            deviator_contests: true,
            repudiate: false,
            reveal_partner: false,
            max_ticks: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg.into()))
}

fn probability(name: &str, p: f64) -> Result<(), ScenarioError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        invalid(format!("{name} = {p} lies outside [0, 1]"))
    }
}

impl Scenario {
    /// Chance that the empty cheap answer happens to be right. Only empty
    /// grid frames have an empty box list.
    pub fn cheap_answer_accuracy(&self) -> f64 {
        match self.function {
            ReferenceFunction::GridDetector { .. } => 1.0 - self.object_rate,
            ReferenceFunction::Identity | ReferenceFunction::IteratedHash { .. } => 0.0,
        }
    }

    /// Worker payoffs per input under this scenario's terms and costs.
    pub fn incentives(&self) -> Result<PayoffMatrix<f64>, ScenarioError> {
        let cost = CostModel { honest_cost: self.costs.honest, dishonest_cost: self.costs.dishonest, q: self.cheap_answer_accuracy() };
        cost.validate()?;
        let t = self.terms;
        Ok(payoff_matrix(t.reward as f64, &cost, t.fee as f64, t.bounty as f64))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.terms.reward == 0 {
            return Err(ContractError::ZeroReward.into());
        }
        if self.terms.deposit < self.terms.fee {
            return Err(ContractError::DepositBelowFee { deposit: self.terms.deposit, fee: self.terms.fee }.into());
        }
        self.qos.validate()?;
        if self.inputs == 0 || self.interval_size == 0 || self.input_period == 0 {
            return invalid("inputs, interval_size and input_period must be positive");
        }
        if self.verifiers == 0 {
            return invalid("at least one verifier must be registered");
        }
        if self.colluding_verifiers >= self.verifiers {
            return invalid("colluding verifiers must be fewer than registered verifiers");
        }
        if self.batch_size == Some(0) {
            return invalid("batch_size must be positive");
        }
        probability("object_rate", self.object_rate)?;
        for (who, s) in [("outsourcer", &self.outsourcer), ("contractor", &self.contractor), ("verifier", &self.verifier)] {
            match *s {
                StrategySpec::SplitInput | StrategySpec::PaymentRefuser if who != "outsourcer" => {
                    return invalid(format!("{who} cannot use an outsourcer strategy"))
                }
                StrategySpec::CheatRate { .. } | StrategySpec::QAlgorithm { .. } | StrategySpec::SlowResponder { .. }
                    if who == "outsourcer" =>
                {
                    return invalid("outsourcer cannot use a worker strategy")
                }
                StrategySpec::CheatRate { rate } => probability("cheat rate", rate)?,
                StrategySpec::QAlgorithm { q } => probability("q", q)?,
                _ => {}
            }
        }
        for d in &self.network.drops {
            probability("drop probability", d.probability)?;
        }
        if let Some(t) = &self.network.tamper {
            probability("tamper probability", t.probability)?;
        }
        Ok(())
    }

    /// The preset used by the threat suite for `threat`.
    pub fn for_threat(threat: ThreatId, seed: u64) -> Self {
        let base = Scenario { name: threat.label().to_lowercase(), threat, seed, ..Scenario::default() };
        match threat {
            ThreatId::Honest => base,
            ThreatId::T1 => Scenario {
                inputs: 88,
                interval_size: 2,
                contractor: StrategySpec::CheatRate { rate: 0.1 },
                deviator_contests: false,
                ..base
            },
            ThreatId::T2 => Scenario { verifier: StrategySpec::CheatRate { rate: 1.0 }, ..base },
            ThreatId::T3 => Scenario {
                function: ReferenceFunction::IteratedHash { iterations: 8 },
                outsourcer: StrategySpec::SplitInput,
                ..base
            },
            ThreatId::T4 => Scenario { contractor: StrategySpec::CheatRate { rate: 1.0 }, repudiate: true, ..base },
            ThreatId::T5 => Scenario { outsourcer: StrategySpec::PaymentRefuser, ..base },
            ThreatId::T6 => Scenario {
                outsourcer: StrategySpec::Colluder { partner: Party::Verifier, rule: FalseOutputRule::Forged },
                verifier: StrategySpec::Colluder { partner: Party::Outsourcer, rule: FalseOutputRule::Forged },
                ..base
            },
            ThreatId::T7 => Scenario {
                contractor: StrategySpec::Colluder { partner: Party::Verifier, rule: FalseOutputRule::CheapAnswer },
                verifier: StrategySpec::Colluder { partner: Party::Contractor, rule: FalseOutputRule::CheapAnswer },
                ..base
            },
            ThreatId::T8 => {
                let c_to_o = LinkFilter::Link { from: Party::Contractor, to: Party::Outsourcer };
                let network = match seed % 3 {
                    0 => inject_latency(NetworkModel::default(), c_to_o, Latency::Fixed(60)),
                    1 => inject_drop(NetworkModel::default(), c_to_o, 0.5),
                    _ => inject_latency(NetworkModel::default(), c_to_o, Latency::Fixed(30)),
                };
                Scenario { inputs: 30, interval_size: 5, network, ..base }
            }
            ThreatId::T9 => Scenario {
                network: inject_tamper(NetworkModel::default(), TamperRule { links: LinkFilter::All, probability: 0.3 }),
                ..base
            },
        }
    }
}
