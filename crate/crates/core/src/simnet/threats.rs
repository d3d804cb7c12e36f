//! Per-threat success predicates and the repeated threat suite.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::run::{run_scenario, Mechanism, ScenarioReport};
use super::scenario::{Scenario, ScenarioError, StrategySpec, ThreatId};
use crate::contract::{detection_probability, is_honesty_dominant, Party};
use crate::crypto::hash_parts;
use crate::execution::{DetectionKind, ViolationKind};
use crate::settlement::ConvictionReason;

fn conviction_mechanism(r: &ScenarioReport) -> Option<Mechanism> {
    match r.conviction_reason? {
        ConvictionReason::SplitInput => Some(Mechanism::SignatureChain),
        ConvictionReason::IllegitimateVerifier => Some(Mechanism::Randomization),
        _ if r.contest_rounds > 0 => Some(Mechanism::Contestation),
        _ => Some(Mechanism::SamplingReexecution),
    }
}

/// Did the run catch (or neutralise) the scripted deviation, and how.
pub fn assess(r: &ScenarioReport) -> (bool, Option<Mechanism>) {
    let both_paid = [Party::Contractor, Party::Verifier]
        .iter()
        .all(|p| r.ledger.parties[p].rewards == r.ledger.parties[p].entitled);
    match r.threat {
        ThreatId::Honest => (false, None),
        ThreatId::T1 => {
            let hit = r.convicted == Some(Party::Contractor)
                && r.detection.is_some_and(|d| d.kind == DetectionKind::Mismatch || d.kind == DetectionKind::BatchRootMismatch);
            (hit, hit.then_some(Mechanism::SamplingReexecution))
        }
        ThreatId::T2 => {
            let hit = r.convicted == Some(Party::Verifier);
            (hit, hit.then(|| conviction_mechanism(r)).flatten())
        }
        ThreatId::T3 => {
            let hit = r.convicted == Some(Party::Outsourcer) && r.conviction_reason == Some(ConvictionReason::SplitInput);
            (hit, hit.then_some(Mechanism::SignatureChain))
        }
        ThreatId::T4 => {
            let hit = r.convicted == Some(Party::Contractor) && r.repudiation_rejected;
            (hit, hit.then_some(Mechanism::DigitalSignatures))
        }
        ThreatId::T5 => {
            let hit = both_paid && r.ledger.parties[&Party::Contractor].entitled > 0;
            (hit, hit.then_some(Mechanism::PaymentOnBehalf))
        }
        ThreatId::T6 => {
            let hit = r.convicted != Some(Party::Contractor)
                && r.ledger.parties[&Party::Contractor].penalties == 0
                && matches!(r.convicted, Some(Party::Outsourcer | Party::Verifier));
            (hit, hit.then(|| conviction_mechanism(r)).flatten())
        }
        ThreatId::T7 => {
            let hit = !r.collusion_channel && r.false_responses == 0;
            (hit, hit.then_some(Mechanism::Randomization))
        }
        ThreatId::T8 => {
            let raised = r
                .qos_violations
                .iter()
                .any(|v| v.peer == Party::Contractor && v.kind != ViolationKind::InvalidMessage);
            let hit = raised
                && r.outsourcer_phase == "aborted"
                && r.blacklisted.contains(&(Party::Outsourcer, Party::Contractor))
                && r.negative_reviews.contains(&Party::Contractor);
            (hit, hit.then_some(Mechanism::QosEnforcement))
        }
        ThreatId::T9 => {
            let hit = r.messages.tampered_rejected == r.messages.tampered;
            (hit, hit.then_some(Mechanism::DigitalSignatures))
        }
    }
}

/// Seed of repetition `rep` of `threat`, decorrelated from its neighbours.
pub fn rep_seed(base_seed: u64, threat: ThreatId, rep: u32) -> u64 {
    let d = hash_parts(&[b"rep", &base_seed.to_le_bytes(), threat.label().as_bytes(), &rep.to_le_bytes()]);
    u64::from_le_bytes(d.0[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatRow {
    pub threat: ThreatId,
    pub description: String,
    pub techniques: String,
    pub runs: u32,
    pub detected: u32,
    pub detection_rate: f64,
    pub mean_detection_latency: Option<f64>,
    pub mechanisms: BTreeMap<String, u32>,
    pub honest_party_fined: u32,
    pub honest_party_convicted: u32,
    pub conservation_failures: u32,
    pub truncated: u32,
    /// Analytic detection probability when the deviator cheats at random.
    pub expected_rate: Option<f64>,
    /// Whether honesty dominates under the preset's terms and costs.
    pub honesty_dominant: Option<bool>,
}

impl ThreatRow {
    fn new(threat: ThreatId) -> Self {
        Self {
            threat,
            description: threat.description().to_string(),
            techniques: threat.techniques().to_string(),
            runs: 0,
            detected: 0,
            detection_rate: 0.0,
            mean_detection_latency: None,
            mechanisms: BTreeMap::new(),
            honest_party_fined: 0,
            honest_party_convicted: 0,
            conservation_failures: 0,
            truncated: 0,
            expected_rate: None,
            honesty_dominant: None,
        }
    }

    fn add(&mut self, r: &ScenarioReport, latency_sum: &mut (u64, u32)) {
        self.runs += 1;
        self.detected += u32::from(r.violation_detected);
        if let Some(m) = r.mechanism {
            let name = serde_json_name(m);
            *self.mechanisms.entry(name).or_default() += 1;
        }
        if let Some(l) = r.detection_latency {
            latency_sum.0 += l;
            latency_sum.1 += 1;
        }
        self.honest_party_fined += u32::from(r.honest_party_fined);
        self.honest_party_convicted += u32::from(r.honest_party_convicted);
        self.conservation_failures += u32::from(!r.ledger.conserved);
        self.truncated += u32::from(r.truncated);
    }

    /// Half-width of the acceptance band around `expected_rate`: four
    /// binomial standard errors.
    pub fn rate_tolerance(&self) -> Option<f64> {
        let p = self.expected_rate?;
        Some(4.0 * (p * (1.0 - p) / f64::from(self.runs.max(1))).sqrt())
    }

    /// The honest control passes when nothing fires. Random cheating must
    /// be caught at its analytic rate, everything else in every run, and
    /// nobody honest may be harmed.
    pub fn passed(&self) -> bool {
        let clean = self.honest_party_fined == 0
            && self.honest_party_convicted == 0
            && self.conservation_failures == 0
            && self.truncated == 0;
        let caught = match (self.threat, self.expected_rate, self.rate_tolerance()) {
            (ThreatId::Honest, _, _) => self.detected == 0,
            (_, Some(p), Some(tol)) => (self.detection_rate - p).abs() <= tol,
            (ThreatId::T7, _, _) => self.detected == self.runs && self.honesty_dominant == Some(true),
            _ => self.detected == self.runs,
        };
        clean && caught && self.runs > 0
    }
}

fn serde_json_name(m: Mechanism) -> String {
    match m {
        Mechanism::SamplingReexecution => "sampling_reexecution",
        Mechanism::Contestation => "contestation",
        Mechanism::SignatureChain => "signature_chain",
        Mechanism::DigitalSignatures => "digital_signatures",
        Mechanism::Randomization => "randomization",
        Mechanism::PaymentOnBehalf => "payment_on_behalf",
        Mechanism::QosEnforcement => "qos_enforcement",
    }
    .to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatMatrix {
    pub base_seed: u64,
    pub reps: u32,
    pub rows: Vec<ThreatRow>,
}

impl ThreatMatrix {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(ThreatRow::passed)
    }

    pub fn row(&self, threat: ThreatId) -> Option<&ThreatRow> {
        self.rows.iter().find(|r| r.threat == threat)
    }
}

/// Runs `reps` seeded repetitions of `threat`'s preset.
pub fn run_threat(base_seed: u64, threat: ThreatId, reps: u32) -> Result<ThreatRow, ScenarioError> {
    run_threat_with(base_seed, threat, reps, |s| s)
}

/// Like [`run_threat`], letting the caller adjust each preset first.
pub fn run_threat_with(
    base_seed: u64,
    threat: ThreatId,
    reps: u32,
    mut adjust: impl FnMut(Scenario) -> Scenario,
) -> Result<ThreatRow, ScenarioError> {
    let mut row = ThreatRow::new(threat);
    let mut latency = (0u64, 0u32);
    for rep in 0..reps {
        let sc = adjust(Scenario::for_threat(threat, rep_seed(base_seed, threat, rep)));
        if rep == 0 {
            if let StrategySpec::CheatRate { rate } = sc.contractor {
                row.expected_rate = Some(detection_probability(rate, sc.inputs.div_ceil(sc.interval_size))?);
            }
            if threat == ThreatId::T7 {
                row.honesty_dominant = Some(is_honesty_dominant(&sc.incentives()?));
            }
        }
        let report = run_scenario(&sc)?;
        row.add(&report, &mut latency);
    }
    row.detection_rate = if row.runs == 0 { 0.0 } else { f64::from(row.detected) / f64::from(row.runs) };
    row.mean_detection_latency = (latency.1 > 0).then(|| latency.0 as f64 / f64::from(latency.1));
    Ok(row)
}

/// Honest control row followed by T1..T9.
pub fn run_threat_suite(base_seed: u64, reps: u32) -> Result<ThreatMatrix, ScenarioError> {
    let rows = std::iter::once(ThreatId::Honest)
        .chain(ThreatId::ALL)
        .map(|t| run_threat(base_seed, t, reps))
        .collect::<Result<_, _>>()?;
    Ok(ThreatMatrix { base_seed, reps, rows })
}
