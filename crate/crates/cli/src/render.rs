//! Text rendering. Every figure printed here comes from the core crate.

use std::fmt::Write as _;

use edgecheck::contract::PayoffMatrix;
use edgecheck::simnet::{ScenarioReport, ThreatRow};

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn snake<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => "?".into(),
    }
}

pub fn report(r: &ScenarioReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {} (threat {}, seed {})", r.scenario, r.threat.label(), r.seed);
    let _ = writeln!(s, "  violation detected   {}", r.violation_detected);
    let _ = writeln!(s, "  mechanism            {}", opt(r.mechanism.as_ref().map(snake)));
    let _ = writeln!(s, "  convicted            {}", opt(r.convicted));
    let _ = writeln!(s, "  reason               {}", opt(r.conviction_reason.as_ref().map(snake)));
    let _ = writeln!(s, "  contest rounds       {}", r.contest_rounds);
    let _ = writeln!(s, "  detection latency    {}", opt(r.detection_latency));
    let _ = writeln!(s, "  outsourcer phase     {}", r.outsourcer_phase);
    let qos: Vec<String> = r.qos_violations.iter().map(|v| format!("{}:{}@{}", v.peer, snake(&v.kind), v.at)).collect();
    let _ = writeln!(s, "  qos violations       {}", if qos.is_empty() { "-".into() } else { qos.join(" ") });
    let _ = writeln!(s, "  inputs C/V           {}/{}", r.contractor_inputs, r.verifier_inputs);
    let m = &r.messages;
    let _ = writeln!(
        s,
        "  messages             sent {} delivered {} dropped {} rejected {} tampered {} ({} rejected)",
        m.sent, m.delivered, m.dropped, m.rejected, m.tampered, m.tampered_rejected
    );
    let _ = writeln!(s, "  bytes                {} total, {} payload", m.bytes, m.payload_bytes);
    let o = &r.input_overhead;
    let _ = writeln!(s, "  input overhead       {} inputs, min {} max {} bytes", o.count, o.min, o.max);
    let _ = writeln!(s, "  ledger               conserved {} ({} units)", r.ledger.conserved, r.ledger.total);
    for (party, l) in &r.ledger.parties {
        let _ = writeln!(
            s,
            "    {:<11} delta {:>5}  rewards {:>4}/{:<4} penalties {}",
            party.to_string(),
            l.delta,
            l.rewards,
            l.entitled,
            l.penalties
        );
    }
    let _ = writeln!(s, "  honest party fined   {}", r.honest_party_fined);
    let _ = writeln!(s, "  trace                {}", r.trace_digest);
    s
}

pub fn threat_table(rows: &[ThreatRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<7} {:<58} {:<56} {:>6} {:>8} {:>8} {:>8}  status",
        "threat", "violation", "techniques", "runs", "detected", "rate", "analytic"
    );
    for r in rows {
        let analytic = r.expected_rate.map_or_else(|| "-".to_string(), |p| format!("{p:.4}"));
        let mut status = if r.passed() { "ok".to_string() } else { "FAIL".to_string() };
        if let Some(d) = r.honesty_dominant {
            let _ = write!(status, " (honesty dominant: {d})");
        }
        let _ = writeln!(
            s,
            "{:<7} {:<58} {:<56} {:>6} {:>8} {:>8.4} {:>8}  {}",
            r.threat.label(),
            r.description,
            r.techniques,
            r.runs,
            r.detected,
            r.detection_rate,
            analytic,
            status
        );
    }
    s
}

pub fn payoff(m: &PayoffMatrix<f64>, dominant: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<10} {:>15} {:>16}", "", "other diligent", "other dishonest");
    let _ = writeln!(s, "{:<10} {:>15} {:>16}", "diligent", m.dd, m.d_dishonest);
    let _ = writeln!(s, "{:<10} {:>15} {:>16}", "dishonest", m.dishonest_d, m.dishonest_dishonest);
    let _ = writeln!(s, "honesty dominant: {}", if dominant { "yes" } else { "no" });
    s
}

pub fn sampling_table(rates: &[f64], intervals: &[u32], cell: impl Fn(f64, u32) -> String, need: impl Fn(f64) -> String) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:>6}", "c \\ i");
    for i in intervals {
        let _ = write!(s, " {i:>8}");
    }
    let _ = writeln!(s, " {:>10}", "i@99%");
    for &c in rates {
        let _ = write!(s, "{c:>6}");
        for &i in intervals {
            let _ = write!(s, " {:>8}", cell(c, i));
        }
        let _ = writeln!(s, " {:>10}", need(c));
    }
    s
}

