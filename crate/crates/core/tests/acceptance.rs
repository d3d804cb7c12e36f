//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use edgecheck::contract::{
    detection_probability, is_honesty_dominant, payoff_matrix, required_intervals, CostModel, Party, PayoffMatrix,
};
use edgecheck::crypto::{hash, Digest32};
use edgecheck::execution::sample_schedule;
use edgecheck::merkle::{expected_path_len, merkle_verify, MerkleTree};
use edgecheck::simnet::{
    explore_contestation, run_scenario, run_threat, ExploreConfig, Scenario, StrategySpec, ThreatId,
};

const BASE_SEED: u64 = 20_240_601;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Every SignedInput in every preset carries exactly 84 bytes of signature
/// and integers.
fn overhead() -> Verdict {
    let mut seen = 0u32;
    let mut mismatches = 0u32;
    let mut sizes = std::collections::BTreeSet::new();
    let mut scenarios: Vec<Scenario> = std::iter::once(ThreatId::Honest)
        .chain(ThreatId::ALL)
        .flat_map(|t| (0..3).map(move |s| Scenario::for_threat(t, BASE_SEED + s)))
        .collect();
    scenarios.push(Scenario { batch_size: Some(4), ..Scenario::default() });
    scenarios.push(Scenario { object_rate: 1.0, ..Scenario::default() });
    for sc in &scenarios {
        let r = run_scenario(sc).expect("preset runs");
        seen += r.input_overhead.count;
        mismatches += r.input_overhead.mismatches;
        if r.input_overhead.count > 0 {
            sizes.insert(r.input_overhead.min);
            sizes.insert(r.input_overhead.max);
        }
    }
    let pass = seen > 0 && sizes.len() == 1 && sizes.contains(&84) && mismatches == 0;
    verdict(
        pass,
        format!("{seen} inputs over {} runs, overhead sizes {sizes:?}, {mismatches} encoding mismatches", scenarios.len()),
    )
}

fn sampling_math() -> Verdict {
    let p = detection_probability(0.1, 44).expect("valid");
    let i = required_intervals(0.1, 0.99).expect("reachable");
    let schedule = sample_schedule(BASE_SEED, 8800, 200).expect("valid schedule");
    let contractor = schedule.total_inputs();
    let verifier = schedule.sampled_indices().count() as u32;
    // 0.5% exactly: 200 * verifier == contractor.
    let share_ok = u64::from(verifier) * 200 == u64::from(contractor);
    let pass = (0.9902..=0.9904).contains(&p) && i == 44 && schedule.interval_count() == 44 && share_ok;
    verdict(
        pass,
        format!("p(0.1, 44) = {p:.6}, required_intervals = {i}, verifier/contractor = {verifier}/{contractor}"),
    )
}

fn monte_carlo() -> Verdict {
    let runs = 10_000;
    let row = run_threat(BASE_SEED, ThreatId::T1, runs).expect("T1 preset runs");
    let sc = Scenario::for_threat(ThreatId::T1, 0);
    let intervals = sc.inputs.div_ceil(sc.interval_size);
    let StrategySpec::CheatRate { rate } = sc.contractor else { return verdict(false, "T1 preset lost its cheat rate") };
    let p = detection_probability(rate, intervals).expect("valid");
    let diff = (row.detection_rate - p).abs();
    let pass = diff <= 0.01 && rate == 0.1 && intervals == 44 && row.honest_party_fined == 0;
    verdict(
        pass,
        format!("{runs} runs, c = {rate}, {intervals} intervals: empirical {:.4} vs analytic {p:.4} (|diff| {diff:.4})", row.detection_rate),
    )
}

fn threat_matrix() -> Verdict {
    let reps = 1_000;
    let mut lines = Vec::new();
    let mut pass = true;
    for t in std::iter::once(ThreatId::Honest).chain(ThreatId::ALL) {
        let row = run_threat(BASE_SEED, t, reps).expect("preset runs");
        let ok = row.passed();
        pass &= ok;
        let extra = match t {
            ThreatId::T1 => format!(
                " analytic {:.4} +- {:.4}",
                row.expected_rate.unwrap_or(f64::NAN),
                row.rate_tolerance().unwrap_or(f64::NAN)
            ),
            ThreatId::T7 => format!(" honesty_dominant={:?}", row.honesty_dominant),
            _ => String::new(),
        };
        lines.push(format!(
            "    {:<6} {:>4}/{} detected ({:.4}){extra} fined={} convicted_honest={} conservation_failures={} {}",
            t.label(),
            row.detected,
            row.runs,
            row.detection_rate,
            row.honest_party_fined,
            row.honest_party_convicted,
            row.conservation_failures,
            if ok { "ok" } else { "FAIL" }
        ));
    }
    verdict(pass, format!("{reps} seeds per threat\n{}", lines.join("\n")))
}

fn contestation() -> Verdict {
    let mut branches = 0;
    let mut failures = Vec::new();
    let mut configs = 0;
    for pool in [3usize, 5, 7] {
        // Strictly more than half of the pool is honest.
        for colluders in 0..=(pool - 1) / 2 {
            for false_responder in [Party::Contractor, Party::Verifier] {
                let e = explore_contestation(ExploreConfig { pool, colluders, false_responder, seed: BASE_SEED })
                    .expect("fixture builds");
                configs += 1;
                branches += e.branches;
                if !e.sound() {
                    failures.push(format!("pool {pool} colluders {colluders} {false_responder}: {e:?}"));
                }
            }
        }
    }
    let detail = format!("{configs} configurations, {branches} branches, {} unsound", failures.len());
    verdict(failures.is_empty(), if failures.is_empty() { detail } else { format!("{detail}: {}", failures.join("; ")) })
}

type Q = Ratio<i128>;

/// Expected payoff by enumerating the row player's own outcomes. A
/// dishonest row player's cheap answer is right with probability `q`
/// and passes, or wrong with `1 - q` and is caught. A dishonest
/// counterpart facing a diligent row player is exposed, and the row
/// player collects the bounty. Matching cheap answers are never compared
/// with a correct one.
fn oracle(r: Q, ch: Q, cd: Q, q: Q, f: Q, b: Q) -> [Q; 4] {
    let one = Q::from_integer(1);
    let expect = |branches: &[(Q, Q)]| branches.iter().fold(Q::from_integer(0), |acc, (p, v)| acc + p * v);
    let dd = expect(&[(one, r - ch)]);
    let d_dis = expect(&[(one, r + b - ch)]);
    let dis_d = expect(&[(q, r - cd), (one - q, -(f + b) - cd)]);
    let dis_dis = expect(&[(one, r - cd)]);
    [dd, d_dis, dis_d, dis_dis]
}

fn payoff() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(BASE_SEED);
    let mut discrepancies = 0;
    let mut region_violations = 0;
    let n = 10_000;
    for _ in 0..n {
        let mut rat = |max: i128| Q::new(rng.gen_range(0..=max), rng.gen_range(1..=60));
        let (r, f, b) = (rat(200), rat(200), rat(200));
        let (x, y) = (rat(60), rat(60));
        let (ch, cd) = if x >= y { (x, y) } else { (y, x) };
        let den = rng.gen_range(1..=50);
        let q = Q::new(rng.gen_range(0..=den), den);
        let m: PayoffMatrix<Q> = payoff_matrix(r, &CostModel { honest_cost: ch, dishonest_cost: cd, q }, f, b);
        let got = [m.dd, m.d_dishonest, m.dishonest_d, m.dishonest_dishonest];
        if got != oracle(r, ch, cd, q, f, b) {
            discrepancies += 1;
        }
        let one = Q::from_integer(1);
        if q < one && b > ch - cd && f + b > (ch - cd) / (one - q) - r && !is_honesty_dominant(&m) {
            region_violations += 1;
        }
    }
    // Worked example: r=10, c_h=4, c_d=1, q=1/2, f=10, b=2.
    let half = Q::new(1, 2);
    let int = Q::from_integer;
    let m = payoff_matrix(int(10), &CostModel { honest_cost: int(4), dishonest_cost: int(1), q: half }, int(10), int(2));
    let example = [m.dd, m.d_dishonest, m.dishonest_d, m.dishonest_dishonest] == [int(6), int(8), int(-2), int(9)]
        && !is_honesty_dominant(&m);
    verdict(
        discrepancies == 0 && region_violations == 0 && example,
        format!("{n} random rational points: {discrepancies} discrepancies, {region_violations} dominance-region misses"),
    )
}

fn merkle() -> Verdict {
    let mut failures = 0u64;
    let mut checks = 0u64;
    let leaves_for = |n: usize| -> Vec<Digest32> { (0..n as u32).map(|i| hash(&i.to_be_bytes())).collect() };
    for n in 1..=64 {
        let leaves = leaves_for(n);
        let tree = MerkleTree::build(leaves.clone()).expect("non-empty");
        let root = tree.root();
        for (i, leaf) in leaves.iter().enumerate() {
            let path = tree.prove(i).expect("in range");
            checks += 1;
            if path.len() != expected_path_len(n) || !merkle_verify(&root, leaf, i, &path) {
                failures += 1;
            }
            for pos in 0..32 {
                for mask in [0x01u8, 0x80, 0xff] {
                    let mut bad_leaf = *leaf;
                    bad_leaf.0[pos] ^= mask;
                    let mut bad_root = root;
                    bad_root.0[pos] ^= mask;
                    checks += 2;
                    failures += u64::from(merkle_verify(&root, &bad_leaf, i, &path));
                    failures += u64::from(merkle_verify(&bad_root, leaf, i, &path));
                    for step in 0..path.len() {
                        let mut bad_path = path.clone();
                        bad_path.siblings[step].0 .0[pos] ^= mask;
                        checks += 1;
                        failures += u64::from(merkle_verify(&root, leaf, i, &bad_path));
                    }
                }
            }
        }
    }
    verdict(failures == 0, format!("n = 1..=64, {checks} checks, {failures} failures"))
}

type Criterion = (&'static str, fn() -> Verdict, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 byte overhead", overhead, Duration::from_secs(1)),
        ("2 sampling math", sampling_math, Duration::from_secs(1)),
        ("3 monte-carlo agreement", monte_carlo, Duration::from_secs(120)),
        ("4+8 threat matrix, conservation, no false conviction", threat_matrix, Duration::from_secs(600)),
        ("5 contestation soundness", contestation, Duration::from_secs(60)),
        ("6 payoff matrix", payoff, Duration::from_secs(10)),
        ("7 merkle", merkle, Duration::from_secs(10)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut all = true;
    for (name, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.starts_with(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let took = start.elapsed();
        let in_time = took <= budget;
        let pass = v.pass && in_time;
        all &= pass;
        let timing = format!("{:.2}s of {}s", took.as_secs_f64(), budget.as_secs());
        let late = if in_time { "" } else { " OVER BUDGET" };
        println!("{} criterion {name}: {} [{timing}{late}]", if pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
