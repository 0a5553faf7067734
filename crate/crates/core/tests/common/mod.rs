//! Checks shared by the acceptance target and the focused test files.
#![allow(dead_code)]

use firegate::belief::{bayes_update, BeliefMap, Likelihood, Likelihoods};
use firegate::coordination::allocation::{allocate_zones, objective, ZoneScore};
use firegate::crypto::Scheme;
use firegate::governance::{GatePolicy, GovernanceContract};
use firegate::grid::{Cell, Dims};
use firegate::harness::{run_scenario, ScenarioConfig};
use firegate::ledger::{verify_chain, Block, ChainDump, GateOutcome, Location, TxBody};
use firegate::sensing::{Modality, Observation, Rect, Target};
use firegate::verification::stage2_confidence;
use rand::{Rng, SeedableRng};

type BodyEdit = Box<dyn Fn(&mut TxBody)>;
use rand_chacha::ChaCha8Rng;

/// Committed chain of one governed run, cut to its first `blocks` blocks.
pub fn sim_chain(scheme: Scheme, seed: u64, horizon: u64, blocks: usize) -> ChainDump {
    let mut cfg = ScenarioConfig { horizon, seeds: vec![seed], ..Default::default() };
    cfg.ledger.scheme = scheme;
    let mut dump = run_scenario(&cfg, seed).expect("run").chain.expect("governed run keeps a chain");
    dump.blocks.truncate(blocks);
    dump
}

pub fn dump_policy(d: &ChainDump) -> (usize, GatePolicy) {
    let f = d.param("f").unwrap().expect("f");
    let g = GatePolicy { tau: d.param("tau").unwrap().unwrap(), m: d.param("m").unwrap().unwrap(), n: d.param("n").unwrap().unwrap() };
    (f, g)
}

pub fn verify_dump(d: &ChainDump, blocks: &[Block]) -> firegate::ledger::Verdict {
    let (f, g) = dump_policy(d);
    verify_chain(blocks, &d.registry, f, Some(GovernanceContract::new(g)))
}

fn flip(b: &mut [u8], i: usize) {
    let i = i % b.len().max(1);
    if !b.is_empty() {
        b[i] ^= 0x01;
    }
}

fn nudge(x: f64) -> f64 {
    f64::from_bits(x.to_bits() ^ 1)
}

type Mutation = (String, Box<dyn Fn(&mut Block)>, Location);

/// One entry per mutable field of block `i`: header fields, every field of
/// every transaction and receipt, and every signature entry.
fn block_mutations(i: usize, b: &Block, validator_ids: &[String]) -> Vec<Mutation> {
    let h = i as u64;
    let at = Location { block: h, tx: None };
    let mut out: Vec<Mutation> = vec![
        ("height".into(), Box::new(|b: &mut Block| b.height += 1), at),
        ("prev[0]".into(), Box::new(|b: &mut Block| b.prev[0] ^= 1), at),
        ("prev[31]".into(), Box::new(|b: &mut Block| b.prev[31] ^= 0x80), at),
        ("commit_step".into(), Box::new(|b: &mut Block| b.commit_step += 1), at),
    ];
    for (j, tx) in b.txs.iter().enumerate() {
        let tat = Location { block: h, tx: Some(j) };
        let mut fields: Vec<(&str, BodyEdit)> = Vec::new();
        match &tx.body {
            TxBody::Event(_) => {
                fn ev(f: impl Fn(&mut firegate::ledger::EventRecord) + 'static) -> Box<dyn Fn(&mut TxBody)> {
                    Box::new(move |b| {
                        if let TxBody::Event(e) = b {
                            f(e)
                        }
                    })
                }
                fields.push(("event.event_id", ev(|e| e.event_id += 1)));
                fields.push(("event.step", ev(|e| e.step += 1)));
                fields.push(("event.cell.x", ev(|e| e.cell.x ^= 1)));
                fields.push(("event.cell.y", ev(|e| e.cell.y ^= 1)));
                fields.push(("event.boundary.x0", ev(|e| e.boundary.x0 ^= 1)));
                fields.push(("event.boundary.y0", ev(|e| e.boundary.y0 ^= 1)));
                fields.push(("event.boundary.x1", ev(|e| e.boundary.x1 ^= 1)));
                fields.push(("event.boundary.y1", ev(|e| e.boundary.y1 ^= 1)));
                fields.push(("event.confidence", ev(|e| e.confidence = nudge(e.confidence))));
                fields.push(("event.evidence", ev(|e| e.evidence[7] ^= 1)));
            }
            TxBody::Approval(_) => {
                fn ap(f: impl Fn(&mut firegate::ledger::ApprovalRecord) + 'static) -> Box<dyn Fn(&mut TxBody)> {
                    Box::new(move |b| {
                        if let TxBody::Approval(a) = b {
                            f(a)
                        }
                    })
                }
                fields.push(("approval.event_id", ap(|a| a.event_id += 1)));
                fields.push(("approval.reviewer", ap(|a| a.reviewer.push('x'))));
                fields.push((
                    "approval.decision",
                    ap(|a| {
                        a.decision = match a.decision {
                            firegate::ledger::Decision::Approve => firegate::ledger::Decision::Reject,
                            firegate::ledger::Decision::Reject => firegate::ledger::Decision::Approve,
                        }
                    }),
                ));
                fields.push(("approval.step", ap(|a| a.step += 1)));
                fields.push(("approval.signature", ap(|a| flip(&mut a.signature, 3))));
            }
            TxBody::Revocation { .. } => {
                fields.push((
                    "revocation.key",
                    Box::new(|b| {
                        if let TxBody::Revocation { key, .. } = b {
                            key.push('x')
                        }
                    }),
                ));
                fields.push((
                    "revocation.step",
                    Box::new(|b| {
                        if let TxBody::Revocation { step, .. } = b {
                            *step += 1
                        }
                    }),
                ));
            }
        }
        for (name, f) in fields {
            out.push((format!("tx[{j}].{name}"), Box::new(move |b: &mut Block| f(&mut b.txs[j].body)), tat));
        }
        out.push((format!("tx[{j}].nonce"), Box::new(move |b: &mut Block| b.txs[j].nonce += 1), tat));
        out.push((format!("tx[{j}].submitter"), Box::new(move |b: &mut Block| b.txs[j].submitter.push('x')), tat));
        out.push((format!("tx[{j}].signature"), Box::new(move |b: &mut Block| flip(&mut b.txs[j].signature, 0)), tat));
    }
    for r in 0..b.receipts.len() {
        out.push((format!("receipt[{r}].event_id"), Box::new(move |b: &mut Block| b.receipts[r].event_id += 1), at));
        out.push((
            format!("receipt[{r}].outcome"),
            Box::new(move |b: &mut Block| {
                b.receipts[r].outcome = match b.receipts[r].outcome {
                    GateOutcome::Alert => GateOutcome::Reject,
                    GateOutcome::Reject => GateOutcome::Alert,
                }
            }),
            at,
        ));
        out.push((format!("receipt[{r}].step"), Box::new(move |b: &mut Block| b.receipts[r].step += 1), at));
        out.push((
            format!("receipt[{r}].confidence"),
            Box::new(move |b: &mut Block| b.receipts[r].confidence = nudge(b.receipts[r].confidence)),
            at,
        ));
        out.push((format!("receipt[{r}].signers"), Box::new(move |b: &mut Block| b.receipts[r].signers.push("ghost".into())), at));
    }
    for s in 0..b.signatures.len() {
        let other = validator_ids.iter().find(|v| **v != b.signatures[s].0).cloned().unwrap_or_default();
        out.push((format!("sig[{s}].id"), Box::new(move |b: &mut Block| b.signatures[s].0 = other.clone()), at));
        out.push((format!("sig[{s}].bytes"), Box::new(move |b: &mut Block| flip(&mut b.signatures[s].1, 5)), at));
    }
    out
}

#[derive(Debug, Default)]
pub struct SweepResult {
    pub blocks: usize,
    pub mutations: usize,
    pub flagged: usize,
    pub located: usize,
    pub misses: Vec<String>,
}

impl SweepResult {
    pub fn complete(&self) -> bool {
        self.mutations > 0 && self.flagged == self.mutations && self.located == self.mutations
    }
}

/// Mutate each field of each block in turn and audit the altered chain.
pub fn tamper_sweep(d: &ChainDump) -> SweepResult {
    assert!(verify_dump(d, &d.blocks).is_ok(), "baseline chain must verify");
    let validator_ids: Vec<String> = d.blocks.first().map(|b| b.signatures.iter().map(|(id, _)| id.clone()).collect()).unwrap_or_default();
    let mut res = SweepResult { blocks: d.blocks.len(), ..Default::default() };
    for (i, b) in d.blocks.iter().enumerate() {
        for (name, mutate, want) in block_mutations(i, b, &validator_ids) {
            let mut chain = d.blocks.clone();
            mutate(&mut chain[i]);
            if chain[i] == d.blocks[i] {
                continue;
            }
            res.mutations += 1;
            match verify_dump(d, &chain).location() {
                Some(at) => {
                    res.flagged += 1;
                    if at == want {
                        res.located += 1;
                    } else {
                        res.misses.push(format!("block {i} {name}: flagged at {at}, expected {want}"));
                    }
                }
                None => res.misses.push(format!("block {i} {name}: not flagged")),
            }
        }
    }
    res
}

// ---- probabilistic oracles ----

fn random_lik(rng: &mut ChaCha8Rng) -> Likelihood {
    Likelihood::new(rng.gen_range(0.55..0.99), rng.gen_range(0.01..0.45))
}

/// Largest gap between the belief filter and a closed-form posterior over
/// random observation batches on a small grid. The oracle multiplies the
/// likelihood ratio of every observation covering a cell, independent of
/// order; unobserved cells relax toward the prior by the drift rate.
pub fn belief_oracle_error(seed: u64, trials: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = Dims::new(4, 3);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let lik = Likelihoods { thermal: random_lik(&mut rng), ground: random_lik(&mut rng), satellite: random_lik(&mut rng) };
        let init: Vec<f64> = (0..dims.len()).map(|_| rng.gen_range(0.01..0.99)).collect();
        let prior: Vec<f64> = (0..dims.len()).map(|_| rng.gen_range(0.0..0.2)).collect();
        let drift = rng.gen_range(0.0..0.3);
        let mut obs = Vec::new();
        for _ in 0..rng.gen_range(0..12) {
            let modality = Modality::ALL[rng.gen_range(0..3)];
            let c = Cell::new(rng.gen_range(0..dims.width), rng.gen_range(0..dims.height));
            let target = if modality == Modality::Satellite {
                Target::Region(Rect { x0: c.x.min(2), y0: c.y.min(1), x1: c.x.min(2) + 1, y1: c.y.min(1) + 1 })
            } else {
                Target::Cell(c)
            };
            obs.push(Observation {
                modality,
                sensor_id: 0,
                target,
                reading: 0.0,
                detection: rng.gen_bool(0.5),
                emitted: 0,
                delivered: 0,
                truth_burning: false,
                spoofed_from: None,
            });
        }
        let mut map = BeliefMap::from_probs(dims, init.clone());
        map.update(&obs, &lik, &prior, drift).unwrap();
        for i in 0..dims.len() {
            let c = dims.cell(i);
            let mut fire = init[i];
            let mut none = 1.0 - init[i];
            let mut seen = false;
            for o in &obs {
                let covers = match o.target {
                    Target::Cell(t) => t == c,
                    Target::Region(r) => r.contains(c),
                };
                if covers {
                    seen = true;
                    let l = lik.get(o.modality);
                    fire *= if o.detection { l.tpr } else { 1.0 - l.tpr };
                    none *= if o.detection { l.fpr } else { 1.0 - l.fpr };
                }
            }
            let want = if seen { fire / (fire + none) } else { init[i] + drift * (prior[i] - init[i]) };
            worst = worst.max((map.get(i) - want).abs());
        }
    }
    worst
}

/// Stage-2 confidence against the odds-form posterior.
pub fn stage2_oracle_error(seed: u64, trials: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let lik = random_lik(&mut rng);
        let conf1 = rng.gen_range(0.01..0.99);
        let n = rng.gen_range(3..8);
        let samples: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let got = stage2_confidence(conf1, &samples, lik, 3).unwrap();
        let pos = samples.iter().filter(|&&s| s).count() as i32;
        let neg = n - pos;
        let odds = conf1 / (1.0 - conf1)
            * (lik.tpr / lik.fpr).powi(pos)
            * ((1.0 - lik.tpr) / (1.0 - lik.fpr)).powi(neg);
        worst = worst.max((got - odds / (1.0 + odds)).abs());
        // and against the unrolled single-step rule
        let step = samples.iter().fold(conf1, |p, &d| bayes_update(p, lik, d));
        worst = worst.max((got - step).abs());
    }
    worst
}

#[derive(Debug, Default)]
pub struct GreedyResult {
    pub instances: usize,
    pub matches: usize,
    pub min_ratio: f64,
}

/// Greedy allocation against exhaustive search over every assignment of
/// `uavs` UAVs to `zones` zones.
pub fn greedy_vs_exhaustive(seed: u64, instances: usize, uavs: usize, zones: usize) -> GreedyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = GreedyResult { instances, min_ratio: f64::INFINITY, ..Default::default() };
    for _ in 0..instances {
        let z: Vec<ZoneScore> =
            (0..zones).map(|_| ZoneScore { risk: rng.gen_range(0.0..1.0), gain: rng.gen_range(0.05..1.0) }).collect();
        let ids: Vec<u32> = (0..uavs as u32).collect();
        let mut counts = vec![0u32; zones];
        for (_, zi) in allocate_zones(&z, &ids, &[]).unwrap() {
            counts[zi] += 1;
        }
        let greedy = objective(&z, &counts);
        let mut best = f64::NEG_INFINITY;
        for code in 0..zones.pow(uavs as u32) {
            let mut c = vec![0u32; zones];
            let mut k = code;
            for _ in 0..uavs {
                c[k % zones] += 1;
                k /= zones;
            }
            best = best.max(objective(&z, &c));
        }
        if (greedy - best).abs() <= 1e-12 * best.abs().max(1.0) {
            res.matches += 1;
        }
        let ratio = if best > 0.0 { greedy / best } else { 1.0 };
        res.min_ratio = res.min_ratio.min(ratio);
    }
    res
}
