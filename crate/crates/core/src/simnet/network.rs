//! Link latency, loss and the tampering adversary.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contract::Party;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Latency {
    Fixed(u64),
    /// Inclusive range.
    Uniform { min: u64, max: u64 },
}

impl Default for Latency {
    fn default() -> Self {
        Latency::Fixed(1)
    }
}

impl Latency {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        match *self {
            Latency::Fixed(t) => t,
            Latency::Uniform { min, max } => rng.gen_range(min..=max.max(min)),
        }
    }
}

/// Selects directed links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum LinkFilter {
    #[default]
    All,
    From(Party),
    To(Party),
    Link { from: Party, to: Party },
}

impl LinkFilter {
    pub fn matches(&self, from: Party, to: Party) -> bool {
        match *self {
            LinkFilter::All => true,
            LinkFilter::From(p) => p == from,
            LinkFilter::To(p) => p == to,
            LinkFilter::Link { from: f, to: t } => f == from && t == to,
        }
    }
}

/// Flips one byte of a matching message with the given probability. The
/// adversary has no keys, so it can only corrupt bytes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TamperRule {
    #[serde(default)]
    pub links: LinkFilter,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkLatency {
    pub links: LinkFilter,
    pub latency: Latency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropRule {
    pub links: LinkFilter,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkModel {
    pub latency: Latency,
    /// Later entries win over earlier ones and over `latency`.
    pub link_latency: Vec<LinkLatency>,
    pub drops: Vec<DropRule>,
    pub tamper: Option<TamperRule>,
}

impl NetworkModel {
    pub fn latency_for(&self, from: Party, to: Party) -> Latency {
        self.link_latency.iter().rev().find(|l| l.links.matches(from, to)).map_or(self.latency, |l| l.latency)
    }

    pub fn drop_probability(&self, from: Party, to: Party) -> f64 {
        let keep: f64 = self.drops.iter().filter(|d| d.links.matches(from, to)).map(|d| 1.0 - d.probability).product();
        1.0 - keep
    }

    pub fn tamper_probability(&self, from: Party, to: Party) -> f64 {
        self.tamper.filter(|t| t.links.matches(from, to)).map_or(0.0, |t| t.probability)
    }
}

pub fn inject_tamper(mut network: NetworkModel, rule: TamperRule) -> NetworkModel {
    network.tamper = Some(rule);
    network
}

pub fn inject_latency(mut network: NetworkModel, links: LinkFilter, latency: Latency) -> NetworkModel {
    network.link_latency.push(LinkLatency { links, latency });
    network
}

pub fn inject_drop(mut network: NetworkModel, links: LinkFilter, probability: f64) -> NetworkModel {
    network.drops.push(DropRule { links, probability });
    network
}

/// XORs a non-zero mask into one byte; the result always differs.
pub fn flip_byte<R: Rng>(bytes: &mut [u8], rng: &mut R) -> Option<usize> {
    if bytes.is_empty() {
        return None;
    }
    let pos = rng.gen_range(0..bytes.len());
    bytes[pos] ^= rng.gen_range(1..=u8::MAX);
    Some(pos)
}
