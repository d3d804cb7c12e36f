use proptest::prelude::*;

use edgecheck::contract::{detection_probability, is_honesty_dominant, payoff_matrix, required_intervals, CostModel};
use edgecheck::crypto::{hash, Digest32, KeyPair, PublicKey};
use edgecheck::merkle::{expected_path_len, merkle_build, merkle_prove, merkle_root, merkle_verify};
use edgecheck::randomization::{list_similarity, select_index};
use edgecheck::simnet::{run_scenario, Scenario, ThreatId};
use edgecheck::wire::{Message, SignedInput, SignedResponse};

fn leaves(n: usize, salt: u8) -> Vec<Digest32> {
    (0..n).map(|i| hash(&[salt, (i & 0xff) as u8, (i >> 8) as u8])).collect()
}

fn key(tag: u8) -> KeyPair {
    KeyPair::from_seed(&[tag; 32])
}

fn pks(ids: &[u8]) -> Vec<PublicKey> {
    ids.iter().map(|&i| key(i).public).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn merkle_paths_verify_and_bind_index(n in 1usize..200, salt: u8, pick: prop::sample::Index) {
        let tree = merkle_build(leaves(n, salt)).unwrap();
        let i = pick.index(n);
        let path = merkle_prove(&tree, i).unwrap();
        let root = merkle_root(&tree);
        prop_assert_eq!(path.len(), expected_path_len(n));
        prop_assert!(merkle_verify(&root, &tree.leaves()[i], i, &path));
        let other = hash(b"not a leaf");
        prop_assert!(!merkle_verify(&root, &other, i, &path));
        if n > 1 {
            let j = (i + 1) % n;
            if tree.leaves()[j] != tree.leaves()[i] {
                prop_assert!(!merkle_verify(&root, &tree.leaves()[j], i, &path));
            }
        }
    }

    #[test]
    fn input_round_trips_and_rejects_bit_flips(
        index: u32, ack: u32, interval: u32, flags in 0u32..4,
        payload in prop::collection::vec(any::<u8>(), 0..256),
        flip: prop::sample::Index, mask in 1u8..=255,
    ) {
        let o = key(1);
        let input = SignedInput::sign(&o, hash(b"contract"), index, ack, interval, flags, payload);
        let msg = Message::Input(input.clone());
        let bytes = msg.encode();
        prop_assert_eq!(Message::decode(&bytes).unwrap(), msg.clone());
        prop_assert!(input.verify(&o.public));

        let mut bad = bytes.clone();
        bad[flip.index(bytes.len())] ^= mask;
        match Message::decode(&bad) {
            Ok(Message::Input(i)) => prop_assert!(!i.verify(&o.public)),
            Ok(other) => prop_assert_ne!(other, msg),
            Err(_) => {}
        }
    }

    #[test]
    fn response_round_trips(
        index: u32,
        input_payload in prop::collection::vec(any::<u8>(), 0..64),
        payload in prop::collection::vec(any::<u8>(), 0..256),
    ) {
        let input = SignedInput::sign(&key(1), hash(b"c"), index, 0, 0, 0, input_payload);
        let w = key(2);
        let resp = SignedResponse::sign(&w, &input, payload);
        let msg = Message::Response(resp.clone());
        prop_assert_eq!(Message::decode(&msg.encode()).unwrap(), msg);
        prop_assert!(resp.verify(&w.public));
        prop_assert!(!resp.verify(&key(3).public));
    }

    #[test]
    fn truncated_encodings_never_decode_to_the_original(
        payload in prop::collection::vec(any::<u8>(), 0..64), cut: prop::sample::Index,
    ) {
        let msg = Message::Input(SignedInput::sign(&key(1), hash(b"c"), 3, 2, 1, 0, payload));
        let bytes = msg.encode();
        let short = &bytes[..cut.index(bytes.len())];
        prop_assert!(Message::decode(short).map_or(true, |m| m != msg));
    }

    #[test]
    fn selected_index_is_in_range(x: [u8; 32], y: [u8; 32], n in 1usize..10_000) {
        let i = select_index(&x, &y, n).unwrap();
        prop_assert!(i < n);
        // Addition is symmetric, so neither party's value is privileged.
        prop_assert_eq!(i, select_index(&y, &x, n).unwrap());
    }

    #[test]
    fn similarity_is_a_bounded_symmetric_measure(
        a in prop::collection::vec(0u8..16, 0..12), b in prop::collection::vec(0u8..16, 0..12),
    ) {
        let (a, b) = (pks(&a), pks(&b));
        let s = list_similarity(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, list_similarity(&b, &a));
        prop_assert_eq!(list_similarity(&a, &a), 1.0);
    }

    #[test]
    fn detection_grows_with_intervals(c in 0.0f64..=1.0, i in 0u32..500) {
        let p0 = detection_probability(c, i).unwrap();
        let p1 = detection_probability(c, i + 1).unwrap();
        prop_assert!((0.0..=1.0).contains(&p0));
        prop_assert!(p1 >= p0);
    }

    #[test]
    fn required_intervals_is_minimal(c in 0.005f64..1.0, conf in 0.5f64..0.999) {
        let i = required_intervals(c, conf).unwrap();
        prop_assert!(detection_probability(c, i).unwrap() >= conf);
        if i > 0 {
            prop_assert!(detection_probability(c, i - 1).unwrap() < conf);
        }
    }

    #[test]
    fn dominance_matches_closed_form_region(
        r in 0i32..100, ch in 0i32..50, cd_frac in 0i32..=8, q8 in 0i32..8, f in 0i32..100, b in 0i32..100,
    ) {
        // Integer eighths keep the float arithmetic exact.
        let (r, ch, f, b) = (r as f64, ch as f64, f as f64, b as f64);
        let cd = ch * cd_frac as f64 / 8.0;
        let q = q8 as f64 / 8.0;
        let m = payoff_matrix(r, &CostModel { honest_cost: ch, dishonest_cost: cd, q }, f, b);
        let region = b > ch - cd && f + b > (ch - cd) / (1.0 - q) - r;
        prop_assert_eq!(is_honesty_dominant(&m), region);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_run_conserves_currency(
        threat in prop::sample::select(vec![
            ThreatId::Honest, ThreatId::T1, ThreatId::T2, ThreatId::T3, ThreatId::T4,
            ThreatId::T5, ThreatId::T6, ThreatId::T7, ThreatId::T8, ThreatId::T9,
        ]),
        seed: u64,
        drop in 0.0f64..0.3,
    ) {
        let mut sc = Scenario::for_threat(threat, seed);
        if drop > 0.15 {
            sc.network = edgecheck::simnet::inject_drop(sc.network, edgecheck::simnet::LinkFilter::All, drop);
        }
        let report = run_scenario(&sc).unwrap();
        prop_assert!(report.ledger.conserved, "{:?} seed {}", threat, seed);
        prop_assert!(!report.honest_party_convicted, "{:?} seed {}", threat, seed);
        // Whatever the three parties gain net must come from the contestation pool.
        let sum: i128 = report.ledger.parties.values().map(|p| p.delta).sum();
        let pool = report.ledger.contest_rewards as i128 - report.ledger.pool_penalties as i128;
        prop_assert!(sum + pool <= 0, "{:?} seed {}: triad {} pool {}", threat, seed, sum, pool);
    }
}
