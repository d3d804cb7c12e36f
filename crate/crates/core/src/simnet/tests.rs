use super::*;
use crate::contract::Party;

#[test]
fn same_seed_same_run() {
    for t in ThreatId::ALL {
        let sc = Scenario::for_threat(t, 42);
        assert_eq!(run_scenario(&sc).unwrap(), run_scenario(&sc).unwrap(), "{t:?}");
    }
}

#[test]
fn seeds_change_the_trace() {
    let a = run_scenario(&Scenario::for_threat(ThreatId::Honest, 1)).unwrap();
    let b = run_scenario(&Scenario::for_threat(ThreatId::Honest, 2)).unwrap();
    assert_ne!(a.trace_digest, b.trace_digest);
}

#[test]
fn honest_run_pays_everyone_in_full() {
    let r = run_scenario(&Scenario::default()).unwrap();
    assert!(!r.violation_detected && !r.accusation_filed && r.convicted.is_none());
    assert_eq!(r.outsourcer_phase, "closed");
    for p in [Party::Contractor, Party::Verifier] {
        let l = r.ledger.parties[&p];
        assert!(l.entitled > 0);
        assert_eq!(l.rewards, l.entitled);
        assert_eq!(l.penalties, 0);
    }
    assert!(r.ledger.conserved);
    assert_eq!((r.input_overhead.min, r.input_overhead.max), (84, 84));
    // One input per interval goes to the Verifier, plus its closing input.
    let sc = Scenario::default();
    assert_eq!(r.verifier_inputs, sc.inputs / sc.interval_size);
    assert_eq!(r.input_overhead.count, r.contractor_inputs + r.verifier_inputs + 2);
}

#[test]
fn invalid_scenarios_are_refused() {
    let bad = [
        Scenario { contractor: StrategySpec::SplitInput, ..Scenario::default() },
        Scenario { outsourcer: StrategySpec::CheatRate { rate: 0.5 }, ..Scenario::default() },
        Scenario { contractor: StrategySpec::CheatRate { rate: 1.5 }, ..Scenario::default() },
        Scenario { batch_size: Some(0), ..Scenario::default() },
        Scenario { interval_size: 0, ..Scenario::default() },
        Scenario { inputs: 0, ..Scenario::default() },
        Scenario { verifiers: 0, ..Scenario::default() },
        Scenario { object_rate: -0.1, ..Scenario::default() },
    ];
    for sc in bad {
        assert!(run_scenario(&sc).is_err(), "{sc:?}");
    }
}

#[test]
fn scenario_round_trips_through_json() {
    let sc = Scenario::for_threat(ThreatId::T8, 5);
    let text = serde_json::to_string(&sc).unwrap();
    assert_eq!(serde_json::from_str::<Scenario>(&text).unwrap(), sc);
    assert!(serde_json::from_str::<Scenario>(r#"{"bogus": 1}"#).is_err());
}

#[test]
fn known_partner_lets_collusion_through() {
    // Without commit-reveal the pair agrees on the cheap answer and the
    // sampled comparison never disagrees.
    let mut hits = 0;
    for seed in 0..20 {
        let mut sc = Scenario::for_threat(ThreatId::T7, seed);
        sc.reveal_partner = true;
        let r = run_scenario(&sc).unwrap();
        assert!(r.collusion_channel);
        assert!(!r.violation_detected);
        assert_eq!(r.detection, None);
        hits += u32::from(r.false_responses > 0);
    }
    assert!(hits > 0);
}

#[test]
fn batched_cheater_is_convicted() {
    for seed in 0..5 {
        let mut sc = Scenario::for_threat(ThreatId::T1, seed);
        sc.batch_size = Some(4);
        sc.contractor = StrategySpec::CheatRate { rate: 1.0 };
        let r = run_scenario(&sc).unwrap();
        assert_eq!(r.convicted, Some(Party::Contractor), "seed {seed}");
        assert!(r.ledger.conserved);
    }
}

#[test]
fn batched_honest_run_is_clean() {
    let sc = Scenario { batch_size: Some(4), ..Scenario::default() };
    let r = run_scenario(&sc).unwrap();
    assert!(r.detection.is_none() && !r.honest_party_fined);
    assert!(r.messages.by_kind.contains_key("root_commitment"));
}

#[test]
fn threat_presets_name_their_deviator() {
    assert_eq!(ThreatId::T1.deviator(), Some(Party::Contractor));
    assert_eq!(ThreatId::T3.deviator(), Some(Party::Outsourcer));
    assert_eq!(ThreatId::Honest.deviator(), None);
    for t in ThreatId::ALL {
        Scenario::for_threat(t, 0).validate().unwrap();
    }
}

#[test]
fn rep_seeds_differ() {
    let seeds: std::collections::BTreeSet<u64> = (0..100).map(|r| rep_seed(1, ThreatId::T1, r)).collect();
    assert_eq!(seeds.len(), 100);
    assert_ne!(rep_seed(1, ThreatId::T1, 0), rep_seed(1, ThreatId::T2, 0));
}

#[test]
fn explorer_honours_the_majority_bound() {
    let cfg = |pool, colluders| ExploreConfig { pool, colluders, false_responder: Party::Contractor, seed: 2 };
    assert!(explore_contestation(cfg(3, 1)).unwrap().sound());
    // Half the pool colluding is enough to convict the honest worker on
    // some branch.
    let tie = explore_contestation(cfg(4, 2)).unwrap();
    assert!(!tie.sound());
    assert!(tie.honest_worker_convicted > 0);
}

#[test]
fn small_suite_passes() {
    let m = run_threat_suite(3, 3).unwrap();
    assert_eq!(m.rows.len(), 10);
    for row in &m.rows {
        assert_eq!(row.honest_party_fined, 0, "{:?}", row.threat);
        assert_eq!(row.conservation_failures, 0, "{:?}", row.threat);
    }
    assert_eq!(m.row(ThreatId::T7).unwrap().honesty_dominant, Some(true));
    assert!(m.row(ThreatId::T1).unwrap().expected_rate.is_some());
}
