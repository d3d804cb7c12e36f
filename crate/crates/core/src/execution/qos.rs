//! Per-peer response bookkeeping and threshold checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::contract::{Party, QosThresholds};

/// Below this many due responses the response rate is not judged.
pub const MIN_RATE_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Timeout,
    LowResponseRate,
    HighResponseTime,
    InvalidMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QosStatus {
    Ok,
    Violation(ViolationKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub peer: Party,
    pub kind: ViolationKind,
    pub at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Request {
    sent_at: u64,
    answered_at: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PeerQos {
    requests: BTreeMap<u32, Request>,
    last_heard: Option<u64>,
    max_latency: u64,
}

impl PeerQos {
    pub fn expect(&mut self, index: u32, now: u64) {
        self.requests.entry(index).or_insert(Request { sent_at: now, answered_at: None });
    }

    /// Returns the response time, or `None` for unknown or repeated answers.
    pub fn answer(&mut self, index: u32, now: u64) -> Option<u64> {
        let req = self.requests.get_mut(&index).filter(|r| r.answered_at.is_none())?;
        req.answered_at = Some(now);
        self.last_heard = Some(now);
        let latency = now - req.sent_at;
        self.max_latency = self.max_latency.max(latency);
        Some(latency)
    }

    pub fn expected(&self) -> usize {
        self.requests.len()
    }

    pub fn received(&self) -> usize {
        self.requests.values().filter(|r| r.answered_at.is_some()).count()
    }

    pub fn outstanding(&self) -> usize {
        self.expected() - self.received()
    }

    pub fn response_times(&self) -> impl Iterator<Item = u64> + '_ {
        self.requests.values().filter_map(|r| r.answered_at.map(|a| a - r.sent_at))
    }
}

pub fn qos_check(peer: &PeerQos, thresholds: &QosThresholds, now: u64) -> QosStatus {
    let oldest_open = peer.requests.values().filter(|r| r.answered_at.is_none()).map(|r| r.sent_at).min();
    if let Some(oldest) = oldest_open {
        let quiet_since = oldest.max(peer.last_heard.unwrap_or(0));
        if now.saturating_sub(quiet_since) > thresholds.timeout {
            return QosStatus::Violation(ViolationKind::Timeout);
        }
    }
    let due: Vec<&Request> = peer.requests.values().filter(|r| r.sent_at + thresholds.timeout <= now).collect();
    if due.len() >= MIN_RATE_SAMPLES {
        let answered = due.iter().filter(|r| r.answered_at.is_some()).count();
        if (answered as f64) < thresholds.min_response_rate * due.len() as f64 {
            return QosStatus::Violation(ViolationKind::LowResponseRate);
        }
    }
    if peer.max_latency > thresholds.max_response_time {
        return QosStatus::Violation(ViolationKind::HighResponseTime);
    }
    QosStatus::Ok
}

/// An actor's view of its peers. A peer only enters the blacklist together
/// with the violation that put it there.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QosLedgerLocal {
    peers: BTreeMap<Party, PeerQos>,
    violations: Vec<ViolationRecord>,
    blacklist: BTreeMap<Party, ViolationKind>,
}

impl QosLedgerLocal {
    pub fn peer(&self, party: Party) -> Option<&PeerQos> {
        self.peers.get(&party)
    }

    pub fn peer_mut(&mut self, party: Party) -> &mut PeerQos {
        self.peers.entry(party).or_default()
    }

    /// Records the violation and blacklists the peer. Returns false if the
    /// peer was already blacklisted.
    pub fn blacklist(&mut self, peer: Party, kind: ViolationKind, at: u64) -> bool {
        self.violations.push(ViolationRecord { peer, kind, at });
        self.blacklist.insert(peer, kind).is_none()
    }

    pub fn is_blacklisted(&self, peer: Party) -> bool {
        self.blacklist.contains_key(&peer)
    }

    pub fn blacklisted(&self) -> impl Iterator<Item = (Party, ViolationKind)> + '_ {
        self.blacklist.iter().map(|(p, k)| (*p, *k))
    }

    pub fn violations(&self) -> &[ViolationRecord] {
        &self.violations
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: QosThresholds = QosThresholds { max_response_time: 20, min_response_rate: 0.9, timeout: 50 };

    #[test]
    fn prompt_answers_are_fine() {
        let mut p = PeerQos::default();
        for i in 0..100 {
            p.expect(i, u64::from(i));
            assert_eq!(p.answer(i, u64::from(i) + 3), Some(3));
        }
        assert_eq!(qos_check(&p, &T, 200), QosStatus::Ok);
        assert_eq!(p.answer(5, 300), None);
    }

    #[test]
    fn silence_times_out() {
        let mut p = PeerQos::default();
        p.expect(0, 0);
        assert_eq!(qos_check(&p, &T, 50), QosStatus::Ok);
        assert_eq!(qos_check(&p, &T, 51), QosStatus::Violation(ViolationKind::Timeout));
    }

    #[test]
    fn half_answered_is_low_rate() {
        let mut p = PeerQos::default();
        for i in 0..40u32 {
            p.expect(i, u64::from(i));
            if i % 2 == 0 {
                p.answer(i, u64::from(i) + 2);
            }
        }
        assert_eq!(qos_check(&p, &T, 70), QosStatus::Violation(ViolationKind::LowResponseRate));
    }

    #[test]
    fn slow_answers_flag_response_time() {
        let mut p = PeerQos::default();
        p.expect(0, 0);
        p.answer(0, 30);
        assert_eq!(qos_check(&p, &T, 31), QosStatus::Violation(ViolationKind::HighResponseTime));
    }

    #[test]
    fn blacklist_records_violation() {
        let mut l = QosLedgerLocal::default();
        assert!(l.blacklist(Party::Contractor, ViolationKind::Timeout, 9));
        assert!(l.is_blacklisted(Party::Contractor));
        assert_eq!(l.violations(), &[ViolationRecord { peer: Party::Contractor, kind: ViolationKind::Timeout, at: 9 }]);
    }
}
