//! Balances, escrowed deposits, redemptions and reviews.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::case::Case;
use super::SettlementError;
use crate::contract::{Amount, Contract};
use crate::crypto::{Digest32, PublicKey};
use crate::wire::SignedInput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LedgerConfig {
    /// Ticks a redemption waits for accusations, and the time a party has
    /// to answer each step of a dispute.
    pub deadline: u64,
    /// Paid to every verifier consulted in a contestation. Defaults to the
    /// per-input reward of the convicted party's contract.
    pub contest_reward: Option<Amount>,
    pub seed: u64,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        Self { deadline: 100, contest_reward: None, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferKind {
    Deposit,
    Release,
    Reward,
    Fee,
    Bounty,
    ContestReward,
    Transfer,
}

impl TransferKind {
    pub fn is_penalty(self) -> bool {
        matches!(self, TransferKind::Fee | TransferKind::Bounty | TransferKind::ContestReward)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub kind: TransferKind,
    pub from: PublicKey,
    pub to: PublicKey,
    pub amount: Amount,
    /// Amount that could not be collected.
    pub shortfall: Amount,
    pub contract: Option<Digest32>,
    pub at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RedemptionState {
    Unclaimed,
    Pending { amount: Amount, due: u64 },
    Paid { amount: Amount },
    Forfeited,
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct ContractRecord {
    pub contract: Contract,
    pub redemption: RedemptionState,
    /// The dispute freezing this contract.
    pub case: Option<Digest32>,
    pub released: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub from: PublicKey,
    pub score: i8,
    pub contract: Digest32,
}

#[derive(Debug, Clone)]
pub struct Ledger {
    pub(super) cfg: LedgerConfig,
    pub(super) rng: ChaCha8Rng,
    balances: BTreeMap<PublicKey, Amount>,
    escrow: BTreeMap<(Digest32, PublicKey), Amount>,
    funded: u128,
    pub(super) contracts: BTreeMap<Digest32, ContractRecord>,
    pub(super) verifiers: BTreeSet<PublicKey>,
    pub(super) cases: BTreeMap<Digest32, Case>,
    reviews: BTreeMap<PublicKey, Vec<Review>>,
    log: Vec<TransferRecord>,
}

impl Ledger {
    pub fn new(cfg: LedgerConfig) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            balances: BTreeMap::new(),
            escrow: BTreeMap::new(),
            funded: 0,
            contracts: BTreeMap::new(),
            verifiers: BTreeSet::new(),
            cases: BTreeMap::new(),
            reviews: BTreeMap::new(),
            log: Vec::new(),
        }
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.cfg
    }

    /// Currency entering the system from outside.
    pub fn fund(&mut self, account: PublicKey, amount: Amount) {
        *self.balances.entry(account).or_default() += amount;
        self.funded += u128::from(amount);
    }

    pub fn balance(&self, account: &PublicKey) -> Amount {
        self.balances.get(account).copied().unwrap_or(0)
    }

    pub fn escrowed(&self, contract: &Digest32, owner: &PublicKey) -> Amount {
        self.escrow.get(&(*contract, *owner)).copied().unwrap_or(0)
    }

    pub fn total_currency(&self) -> u128 {
        self.balances.values().chain(self.escrow.values()).map(|&a| u128::from(a)).sum()
    }

    pub fn total_funded(&self) -> u128 {
        self.funded
    }

    pub fn is_conserved(&self) -> bool {
        self.total_currency() == self.funded
    }

    pub fn transfers(&self) -> &[TransferRecord] {
        &self.log
    }

    /// Sum of fees, bounties and contest rewards `account` has paid.
    pub fn penalties_paid(&self, account: &PublicKey) -> Amount {
        self.log.iter().filter(|t| t.kind.is_penalty() && t.from == *account).map(|t| t.amount).sum()
    }

    pub fn received(&self, account: &PublicKey, kind: TransferKind) -> Amount {
        self.log.iter().filter(|t| t.kind == kind && t.to == *account).map(|t| t.amount).sum()
    }

    pub fn transfer(&mut self, from: PublicKey, to: PublicKey, amount: Amount, now: u64) -> Result<(), SettlementError> {
        let available = self.balance(&from);
        if available < amount {
            return Err(SettlementError::InsufficientFunds { needed: amount, available });
        }
        self.debit(from, amount);
        self.credit(to, amount);
        self.record(TransferKind::Transfer, from, to, amount, 0, None, now);
        Ok(())
    }

    fn debit(&mut self, account: PublicKey, amount: Amount) {
        let b = self.balances.entry(account).or_default();
        *b -= amount;
    }

    fn credit(&mut self, account: PublicKey, amount: Amount) {
        *self.balances.entry(account).or_default() += amount;
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        kind: TransferKind,
        from: PublicKey,
        to: PublicKey,
        amount: Amount,
        shortfall: Amount,
        contract: Option<Digest32>,
        at: u64,
    ) {
        self.log.push(TransferRecord { kind, from, to, amount, shortfall, contract, at });
    }

    /// Moves up to `amount` from `payer` to `payee`, drawing on the payer's
    /// escrow in `contract` before its free balance. Returns what was paid.
    #[allow(clippy::too_many_arguments)]
    pub(super) fn collect(
        &mut self,
        kind: TransferKind,
        payer: PublicKey,
        payee: PublicKey,
        contract: Digest32,
        amount: Amount,
        now: u64,
        escrow_first: bool,
    ) -> Amount {
        let from_escrow = |l: &mut Self, want: Amount| {
            let slot = l.escrow.entry((contract, payer)).or_default();
            let take = want.min(*slot);
            *slot -= take;
            take
        };
        let from_balance = |l: &mut Self, want: Amount| {
            let take = want.min(l.balance(&payer));
            l.debit(payer, take);
            take
        };
        let mut paid = if escrow_first { from_escrow(self, amount) } else { from_balance(self, amount) };
        paid += if escrow_first { from_balance(self, amount - paid) } else { from_escrow(self, amount - paid) };
        self.credit(payee, paid);
        self.record(kind, payer, payee, paid, amount - paid, Some(contract), now);
        paid
    }

    fn lock(&mut self, contract: Digest32, owner: PublicKey, amount: Amount, now: u64) -> Result<(), SettlementError> {
        let available = self.balance(&owner);
        if available < amount {
            return Err(SettlementError::InsufficientFunds { needed: amount, available });
        }
        self.debit(owner, amount);
        *self.escrow.entry((contract, owner)).or_default() += amount;
        self.record(TransferKind::Deposit, owner, owner, amount, 0, Some(contract), now);
        Ok(())
    }

    /// Registers a contract and escrows the worker's deposit and
    /// `outsourcer_deposit` from the Outsourcer.
    pub fn open_contract(&mut self, contract: Contract, outsourcer_deposit: Amount, now: u64) -> Result<Digest32, SettlementError> {
        contract.validate()?;
        let ch = contract.hash();
        if self.contracts.contains_key(&ch) {
            return Err(SettlementError::DuplicateContract);
        }
        let need_w = contract.deposit;
        let need_o = outsourcer_deposit;
        if contract.worker_pk == contract.outsourcer_pk {
            return Err(SettlementError::NotAParty);
        }
        if self.balance(&contract.worker_pk) < need_w {
            return Err(SettlementError::InsufficientFunds { needed: need_w, available: self.balance(&contract.worker_pk) });
        }
        if self.balance(&contract.outsourcer_pk) < need_o {
            return Err(SettlementError::InsufficientFunds {
                needed: need_o,
                available: self.balance(&contract.outsourcer_pk),
            });
        }
        self.lock(ch, contract.worker_pk, need_w, now)?;
        self.lock(ch, contract.outsourcer_pk, need_o, now)?;
        self.contracts.insert(ch, ContractRecord { contract, redemption: RedemptionState::Unclaimed, case: None, released: false });
        Ok(ch)
    }

    pub fn contract(&self, ch: &Digest32) -> Option<&Contract> {
        self.contracts.get(ch).map(|r| &r.contract)
    }

    pub fn redemption(&self, ch: &Digest32) -> Option<RedemptionState> {
        self.contracts.get(ch).map(|r| r.redemption)
    }

    pub fn register_verifier(&mut self, verifier: PublicKey, attested: bool) -> Result<(), SettlementError> {
        if !attested {
            return Err(SettlementError::MissingAttestation);
        }
        if !self.verifiers.insert(verifier) {
            return Err(SettlementError::DuplicateVerifier);
        }
        Ok(())
    }

    pub fn registered_verifiers(&self) -> &BTreeSet<PublicKey> {
        &self.verifiers
    }

    /// Claims `reward * ack_count` with the newest signed input. Paid once
    /// `deadline` ticks pass without an accusation.
    pub fn redeem(&mut self, worker: &PublicKey, final_input: &SignedInput, now: u64) -> Result<Amount, SettlementError> {
        let deadline = self.cfg.deadline;
        let record = self.contracts.get_mut(&final_input.contract_ref).ok_or(SettlementError::UnknownContract)?;
        if record.contract.worker_pk != *worker {
            return Err(SettlementError::NotAParty);
        }
        if !final_input.verify(&record.contract.outsourcer_pk) {
            return Err(SettlementError::BadSignature("redeemed input"));
        }
        if record.redemption != RedemptionState::Unclaimed {
            return Err(SettlementError::DuplicateRedemption);
        }
        let amount = record.contract.reward_per_input * Amount::from(final_input.ack_count);
        record.redemption = RedemptionState::Pending { amount, due: now + deadline };
        Ok(amount)
    }

    pub(super) fn pay_redemption(&mut self, ch: Digest32, now: u64) {
        let record = &self.contracts[&ch];
        let RedemptionState::Pending { amount, .. } = record.redemption else { return };
        let (o, w) = (record.contract.outsourcer_pk, record.contract.worker_pk);
        let paid = self.collect(TransferKind::Reward, o, w, ch, amount, now, false);
        self.contracts.get_mut(&ch).expect("exists").redemption = RedemptionState::Paid { amount: paid };
    }

    /// Returns the escrow of a contract nobody disputes anymore.
    pub(super) fn release(&mut self, ch: Digest32, now: u64) {
        let record = &self.contracts[&ch];
        if record.released || record.case.is_some() || matches!(record.redemption, RedemptionState::Pending { .. }) {
            return;
        }
        let owners = [record.contract.worker_pk, record.contract.outsourcer_pk];
        for owner in owners {
            let amount = self.escrow.remove(&(ch, owner)).unwrap_or(0);
            if amount > 0 {
                self.credit(owner, amount);
                self.record(TransferKind::Release, owner, owner, amount, 0, Some(ch), now);
            }
        }
        self.contracts.get_mut(&ch).expect("exists").released = true;
    }

    /// Processes every deadline up to `now`.
    pub fn advance_to(&mut self, now: u64) {
        self.expire_cases(now);
        let due: Vec<Digest32> = self
            .contracts
            .iter()
            .filter(|(_, r)| r.case.is_none() && matches!(r.redemption, RedemptionState::Pending { due, .. } if due <= now))
            .map(|(ch, _)| *ch)
            .collect();
        for ch in due {
            self.pay_redemption(ch, now);
            self.release(ch, now);
        }
    }

    /// End of the session: settles what is still pending and returns every
    /// undisputed deposit.
    pub fn finalize(&mut self, now: u64) {
        self.advance_to(now);
        let open: Vec<Digest32> = self.contracts.iter().filter(|(_, r)| r.case.is_none()).map(|(ch, _)| *ch).collect();
        for ch in open {
            self.pay_redemption(ch, now);
            self.release(ch, now);
        }
    }

    /// One review per reviewer and contract; both must be its parties.
    /// Scores are -1, 0 or 1.
    pub fn submit_review(&mut self, from: PublicKey, about: PublicKey, score: i8, contract: &Digest32) -> Result<(), SettlementError> {
        let record = self.contracts.get(contract).ok_or(SettlementError::UnknownContract)?;
        let parties = [record.contract.outsourcer_pk, record.contract.worker_pk];
        if from == about || !parties.contains(&from) || !parties.contains(&about) {
            return Err(SettlementError::NotAParty);
        }
        if !(-1..=1).contains(&score) {
            return Err(SettlementError::ScoreOutOfRange(score));
        }
        let list = self.reviews.entry(about).or_default();
        if list.iter().any(|r| r.from == from && r.contract == *contract) {
            return Err(SettlementError::DuplicateReview);
        }
        list.push(Review { from, score, contract: *contract });
        Ok(())
    }

    pub fn reviews(&self, about: &PublicKey) -> &[Review] {
        self.reviews.get(about).map_or(&[], Vec::as_slice)
    }

    /// Mean review score, if any.
    pub fn reputation(&self, about: &PublicKey) -> Option<f64> {
        let list = self.reviews.get(about)?;
        if list.is_empty() {
            return None;
        }
        Some(list.iter().map(|r| f64::from(r.score)).sum::<f64>() / list.len() as f64)
    }

    /// Line-oriented dump of the ledger state, stable across runs.
    pub fn snapshot_records(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (pk, amount) in &self.balances {
            out.push(format!("balance {pk} {amount}"));
        }
        for ((ch, pk), amount) in &self.escrow {
            out.push(format!("escrow {ch} {pk} {amount}"));
        }
        for (ch, r) in &self.contracts {
            out.push(format!("contract {ch} redemption={:?} released={}", r.redemption, r.released));
        }
        for (id, case) in &self.cases {
            out.push(format!("case {id} {}", case.summary()));
        }
        for (pk, list) in &self.reviews {
            for r in list {
                out.push(format!("review {pk} from={} score={} contract={}", r.from, r.score, r.contract));
            }
        }
        out
    }
}
