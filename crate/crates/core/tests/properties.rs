use proptest::prelude::*;

use firegate::belief::{bayes_update, Likelihood};
use firegate::coordination::allocation::{allocate_zones, ZoneScore};
use firegate::crypto::{KeyPair, KeyRegistry, Role, Scheme};
use firegate::governance::{evaluate_alert_gate, GateDecision, GatePolicy};
use firegate::grid::Cell;
use firegate::harness::experiments::latency_bound;
use firegate::harness::metrics::{decompose, Stamps};
use firegate::harness::Decomposition;
use firegate::ledger::{ApprovalRecord, Decision, EventRecord, Transaction, TxBody};
use firegate::rng::labeled;
use firegate::sensing::Rect;
use firegate::verification::{stage1_confidence, Stage1Params};

fn key() -> KeyPair {
    KeyPair::generate("controller", Scheme::Ed25519, &mut labeled(1, "prop"))
}

prop_compose! {
    fn event_tx()(id in any::<u64>(), step in any::<u64>(), x in 0u32..500, y in 0u32..500,
                  conf in 0.0f64..1.0, ev in any::<[u8; 32]>(), nonce in any::<u64>()) -> Transaction {
        let body = TxBody::Event(EventRecord {
            event_id: id, step, cell: Cell::new(x, y),
            boundary: Rect { x0: x.saturating_sub(2), y0: y.saturating_sub(2), x1: x + 2, y1: y + 2 },
            confidence: conf, evidence: ev,
        });
        Transaction::sign(body, nonce, &key())
    }
}

prop_compose! {
    fn stamps()(origin in 0u64..100, d in proptest::collection::vec(0u64..50, 7), approved in any::<bool>(),
                ledger in any::<bool>()) -> Stamps {
        let created = origin + d[0];
        let dispatched = created + d[1];
        let verified = dispatched + d[2];
        let (committed, approved_at, authorized) = if ledger {
            let c = verified + d[3];
            let a = c + d[4];
            (Some(c), approved.then_some(a), if approved { a } else { c } + d[5])
        } else {
            // without a ledger the decision itself authorizes the broadcast
            let a = verified + d[4];
            (None, approved.then_some(a), if approved { a } else { verified })
        };
        Stamps {
            origin: Some(origin),
            created,
            dispatched: Some(dispatched),
            verified,
            committed,
            approved: approved_at,
            authorized,
            delivered: authorized + d[6],
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tx_codec_roundtrip_and_byte_flips(tx in event_tx(), pos in any::<prop::sample::Index>(), bit in 0u8..8) {
        let mut reg = KeyRegistry::default();
        reg.register("controller", Role::Submitter, key().public());
        let bytes = tx.encode();
        let back = Transaction::decode(&bytes).unwrap();
        prop_assert_eq!(&back, &tx);
        prop_assert!(back.verify(&reg, 0));
        let mut bad = bytes.clone();
        let i = pos.index(bad.len());
        bad[i] ^= 1 << bit;
        if let Ok(t) = Transaction::decode(&bad) {
            prop_assert!(!t.verify(&reg, 0), "flipped byte {} still verifies", i);
        }
    }

    #[test]
    fn decomposition_fractions_sum_to_one(items in proptest::collection::vec(stamps(), 1..20)) {
        let comps: Vec<_> = items.iter().map(decompose).collect();
        for (s, c) in items.iter().zip(&comps) {
            prop_assert_eq!(c.total(), s.delivered - s.origin.unwrap());
        }
        let d = Decomposition::from_components(&comps);
        let f = &d.fractions;
        let sum = f.coordination + f.sensing_verification + f.consensus + f.human + f.dissemination;
        if d.steps.total() > 0 {
            prop_assert!((sum - 1.0).abs() < 1e-12, "sum {}", sum);
        }
    }

    #[test]
    fn bayes_step_stays_a_probability(p in 0.0f64..=1.0, tpr in 0.01f64..0.99, fpr in 0.01f64..0.99, d in any::<bool>()) {
        let l = Likelihood::new(tpr, fpr);
        let q = bayes_update(p, l, d);
        prop_assert!((0.0..=1.0).contains(&q));
        if tpr > fpr && p > 0.0 && p < 1.0 {
            if d { prop_assert!(q >= p) } else { prop_assert!(q <= p) }
        }
    }

    #[test]
    fn stage_one_is_monotone(b in 0.0f64..1.0, r in 0.0f64..1.0, db in 0.0f64..0.5, dr in 0.0f64..0.5) {
        let p = Stage1Params::default();
        let c = stage1_confidence(b, r, &p);
        prop_assert!(stage1_confidence((b + db).min(1.0), r, &p) >= c);
        prop_assert!(stage1_confidence(b, (r + dr).min(1.0), &p) >= c);
    }

    #[test]
    fn gate_alerts_only_with_confidence_and_quorum(conf in 0.0f64..1.0, m in 1usize..4, extra in 0usize..3,
                                                   votes in proptest::collection::vec(any::<bool>(), 0..6)) {
        let policy = GatePolicy { tau: 0.8, m, n: m + extra };
        let k = key();
        let recs: Vec<ApprovalRecord> = votes.iter().enumerate()
            .map(|(i, &a)| {
                let mut r = ApprovalRecord::sign(&k, 1, if a { Decision::Approve } else { Decision::Reject }, i as u64);
                r.reviewer = format!("reviewer-{i}");
                r
            })
            .collect();
        let approvals = votes.iter().filter(|&&v| v).count();
        let out = evaluate_alert_gate(conf, &recs, &policy);
        prop_assert_eq!(out == GateDecision::Alert, conf > 0.8 && approvals >= m);
    }

    #[test]
    fn allocation_assigns_every_uav(zones in proptest::collection::vec((0.0f64..1.0, 0.01f64..1.0), 1..8), n in 0u32..12) {
        let z: Vec<ZoneScore> = zones.iter().map(|&(risk, gain)| ZoneScore { risk, gain }).collect();
        let ids: Vec<u32> = (0..n).collect();
        let a = allocate_zones(&z, &ids, &[]).unwrap();
        prop_assert_eq!(a.len(), n as usize);
        prop_assert!(a.iter().all(|&(_, zi)| zi < z.len()));
    }

    #[test]
    fn bound_travel_term_halves_with_double_fleet(area in 1u64..1_000_000, v in 1u32..10, n in 1u32..500, delta in 0u64..20) {
        let a = latency_bound(area, v, n, delta) - delta as f64;
        let b = latency_bound(area, v, 2 * n, delta) - delta as f64;
        prop_assert!((a - 2.0 * b).abs() <= 1e-9 * a.max(1.0));
    }
}
