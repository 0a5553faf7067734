//! The per-step simulation loop.
//!
//! Step order: fire, sensing, belief and risk, thresholds, allocation, UAV
//! movement, verification pipeline, ledger round, oracle decisions, gate,
//! dissemination, attacks.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::adversary::{AttackKind, AttackOutcome, AttackPlan, Outcome};
use crate::belief::{compute_risk, BeliefMap};
use crate::coordination::{
    allocate_zones, make_zones, step_uavs, zone_sweep, CoverageTracker, Mode, Policy, StaticRoutes, Uav, Zone,
    ZoneScore,
};
use crate::crypto::{KeyPair, KeyRegistry, Role};
use crate::error::{Error, Result};
use crate::governance::{
    assign_severity, evaluate_alert_gate, valid_votes, AlertAuthority, AlertPayload, Disseminator, Enforcement,
    GateDecision, GatePolicy, GovernanceContract, HumanOracle, Review, Severity,
};
use crate::grid::{Cell, Dims};
use crate::ledger::{
    verify_chain, Behavior, Block, ChainDump, EventRecord, GateOutcome, Ledger, NetConditions, Transaction, TxBody,
    Validator, Verdict, Wallet,
};
use crate::rng::{substream, KeyedStream, SimRng, Stream};
use crate::sensing::{
    ground_layout, satellite_regions, sense_ground, sense_satellite, sense_thermal_with, thermal_draw, Modality,
    Observation, Rect, Target,
};
use crate::verification::{
    adapt_thresholds, dispatch_verification, evidence_digest, evidence_root, stage1_confidence, AnomalyEvent,
    EventStatus, VolatilityTracker,
};
use crate::world::{BurnState, GridWorld};

use super::config::ScenarioConfig;
use super::metrics::{
    decompose, mean, percentile, ratio, scalar_cost, AlertRow, BlockRow, Components, Decomposition,
    DecompositionRow, EventRow, FireRow, RunMetrics, Stamps,
};

const NO_LINEAGE: u32 = u32::MAX;
/// Event ids used by injected alerts start here so they never collide with
/// pipeline events.
pub const INJECTED_ID_BASE: u64 = 1 << 48;

/// Everything one run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub fires: Vec<FireRow>,
    pub events: Vec<EventRow>,
    pub alerts: Vec<AlertRow>,
    pub decomposition: Vec<DecompositionRow>,
    pub attacks: Vec<AttackOutcome>,
    pub blocks: Vec<BlockRow>,
    pub confirmation_delays: Vec<u64>,
    pub chain: Option<ChainDump>,
}

/// Run label combining policy and ablation.
pub fn run_label(cfg: &ScenarioConfig) -> String {
    if cfg.governed() {
        match cfg.ablation.label() {
            "full" => cfg.policy.as_str().to_string(),
            other => other.to_string(),
        }
    } else {
        cfg.policy.as_str().to_string()
    }
}

pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<RunOutput> {
    cfg.validate()?;
    let mut sim = Sim::new(cfg, seed)?;
    for _ in 0..cfg.horizon {
        sim.step()?;
    }
    Ok(sim.finish())
}

#[derive(Debug, Clone)]
struct Tracked {
    ev: AnomalyEvent,
    lineage: usize,
    boundary: Rect,
    risk: f64,
    assigned: Option<u32>,
    spoofed: bool,
    severity: Option<Severity>,
}

#[derive(Debug, Clone, Default)]
struct Lineage {
    /// Escalated or released: no further events until the lineage retires.
    closed: bool,
    open: Option<u64>,
    quiet_until: u64,
    events: u32,
    /// Last step a trigger landed on the lineage.
    last_active: u64,
}

#[derive(Debug, Clone)]
struct Delivered {
    event_id: u64,
    attempt: u64,
    delivery: u64,
    false_alert: bool,
    injected: bool,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    seed: u64,
    label: String,
    dims: Dims,
    world: GridWorld,
    rng_world: SimRng,
    rng_ignition: SimRng,
    rng_sensors: SimRng,
    thermal_keys: KeyedStream,
    /// Thermal looks per cell in the current step.
    looks: BTreeMap<usize, u64>,
    /// Command messages sent this step.
    sent: u32,
    rng_consensus: SimRng,
    rng_dissem: SimRng,
    rng_attacks: SimRng,
    ground: Vec<Cell>,
    regions: Vec<Rect>,
    sat_queue: Vec<Observation>,
    belief: BeliefMap,
    prior: Vec<f64>,
    risk: Vec<f64>,
    touched: Vec<bool>,
    volatility: VolatilityTracker,
    tau: (f64, f64),
    uavs: Vec<Uav>,
    /// Zone and remaining sweep of a UAV pulled off patrol to verify.
    parked: Vec<Option<(Option<usize>, VecDeque<Cell>)>>,
    zones: Vec<Zone>,
    coverage: CoverageTracker,
    routes: Option<StaticRoutes>,
    events: Vec<Tracked>,
    lineage_of: Vec<u32>,
    lineages: Vec<Lineage>,
    ledger: Option<Ledger<GovernanceContract>>,
    genesis: KeyRegistry,
    controller: Wallet,
    reviewer_wallets: Vec<Wallet>,
    oracle: HumanOracle,
    gate: GatePolicy,
    reviews: BTreeMap<(u64, u64), Review>,
    reviews_done: usize,
    overrides: usize,
    outbox: BTreeSet<u64>,
    dissem: Disseminator,
    delivered: Vec<Delivered>,
    alert_rows: Vec<AlertRow>,
    last_event_tx: Option<Transaction>,
    injected: u64,
    spoof_cells: BTreeMap<usize, u64>,
    attacks: Vec<AttackOutcome>,
    duplicate_alerts: usize,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, seed: u64) -> Result<Self> {
        let horizon = cfg.horizon;
        let mut fields = substream(seed, Stream::Fields);
        let mut world = GridWorld::generate(cfg.world.clone(), horizon, &mut fields);
        let dims = world.dims();
        let mut anomaly_rng = substream(seed, Stream::Anomaly);
        for a in cfg.anomalies.generate(dims, horizon, &mut anomaly_rng) {
            world.inject_anomaly(a)?;
        }

        let s = &cfg.sensing;
        let ground = ground_layout(dims, s.ground_spacing);
        let regions = satellite_regions(dims, s.satellite_region);
        let zones = make_zones(dims, cfg.coordination.zone_tile);
        let up = &cfg.coordination.uav;
        let static_routes = cfg.policy == Policy::Static || (cfg.governed() && cfg.ablation.no_coordination);
        let routes = static_routes.then(|| StaticRoutes::lawnmower(dims, up.count));
        let base = up.base_cell(dims);
        let uavs = (0..up.count)
            .map(|i| {
                let start = routes.as_ref().and_then(|r| r.start(i as usize)).unwrap_or(base);
                Uav::new(i, start, up.speed)
            })
            .collect();

        // keys
        let mut keys = substream(seed, Stream::Keys);
        let scheme = cfg.ledger.scheme;
        let mut genesis = KeyRegistry::default();
        let validators: Vec<Validator> = (0..cfg.ledger.validators)
            .map(|i| {
                let key = KeyPair::generate(format!("validator-{i}"), scheme, &mut keys);
                genesis.register(key.id.clone(), Role::Validator, key.public());
                Validator { key, behavior: Behavior::Honest }
            })
            .collect();
        let controller = KeyPair::generate("controller", scheme, &mut keys);
        genesis.register("controller", Role::Submitter, controller.public());
        let admin = KeyPair::generate("admin", scheme, &mut keys);
        genesis.register("admin", Role::Admin, admin.public());
        let reviewers: Vec<KeyPair> = (0..cfg.gate.n)
            .map(|j| {
                let k = KeyPair::generate(format!("reviewer-{j}"), scheme, &mut keys);
                genesis.register(k.id.clone(), Role::Reviewer, k.public());
                k
            })
            .collect();

        let gate = if cfg.ablation.no_hitl { GatePolicy { tau: cfg.gate.tau, m: 0, n: 0 } } else { cfg.gate };
        let ledger = if cfg.uses_ledger() {
            Some(Ledger::new(
                cfg.ledger.consensus,
                genesis.clone(),
                validators,
                GovernanceContract::new(gate),
            )?)
        } else {
            None
        };
        let enforcement = if ledger.is_some() { Enforcement::Chain } else { Enforcement::None };
        let oracle = HumanOracle::new(cfg.oracle, reviewers.clone(), seed);

        let b = &cfg.belief;
        let prior0 = b.prior_floor;
        Ok(Sim {
            cfg,
            seed,
            label: run_label(cfg),
            dims,
            world,
            rng_world: substream(seed, Stream::World),
            rng_ignition: substream(seed, Stream::Ignition),
            rng_sensors: substream(seed, Stream::Sensors),
            thermal_keys: KeyedStream::new(seed, "thermal"),
            looks: BTreeMap::new(),
            sent: 0,
            rng_consensus: substream(seed, Stream::Consensus),
            rng_dissem: substream(seed, Stream::Dissemination),
            rng_attacks: substream(seed, Stream::Attacks),
            ground,
            regions,
            sat_queue: Vec::new(),
            belief: BeliefMap::new(dims, prior0),
            prior: vec![prior0; dims.len()],
            risk: vec![0.0; dims.len()],
            touched: vec![false; dims.len()],
            volatility: VolatilityTracker::new(cfg.verification.thresholds.window),
            tau: (cfg.verification.thresholds.tau1_base, cfg.verification.thresholds.tau2_base),
            parked: vec![None; up.count as usize],
            uavs,
            zones,
            coverage: CoverageTracker::new(dims, cfg.coordination.lambda),
            routes,
            events: Vec::new(),
            lineage_of: vec![NO_LINEAGE; dims.len()],
            lineages: Vec::new(),
            ledger,
            genesis,
            controller: Wallet::new(controller),
            reviewer_wallets: reviewers.into_iter().map(Wallet::new).collect(),
            oracle,
            gate,
            reviews: BTreeMap::new(),
            reviews_done: 0,
            overrides: 0,
            outbox: BTreeSet::new(),
            dissem: Disseminator::new(cfg.channels, enforcement),
            delivered: Vec::new(),
            alert_rows: Vec::new(),
            last_event_tx: None,
            injected: 0,
            spoof_cells: BTreeMap::new(),
            attacks: Vec::new(),
            duplicate_alerts: 0,
        })
    }

    fn plans(&self) -> impl Iterator<Item = (usize, &'a AttackPlan)> {
        self.cfg.attacks.iter().enumerate()
    }

    fn step(&mut self) -> Result<()> {
        // fire
        self.world.step_fire(&mut self.rng_world);
        let t = self.world.step();
        if t + self.cfg.world.ignition_cutoff < self.cfg.horizon {
            self.world.spawn_random_ignitions(self.cfg.world.ignition_rate, &mut self.rng_ignition);
        }

        self.sent = 0;
        let obs = self.sense(t);
        self.update_belief(&obs, t)?;
        self.update_thresholds(&obs);
        self.allocate(t);
        let report = step_uavs(&mut self.uavs, &self.cfg.coordination.uav, self.dims);
        for task in report.aborted {
            let e = &mut self.events[task.event_id as usize];
            if let Some(uid) = e.assigned {
                self.parked[uid as usize] = None;
            }
            e.assigned = None;
            if e.ev.status == EventStatus::Verifying {
                e.ev.status = EventStatus::Pending;
            }
        }
        self.verification(&obs, t)?;
        self.ledger_round(t);
        self.oracle_decisions(t)?;
        self.disseminate(t);
        self.attack_phase(t);
        Ok(())
    }

    /// Spend one command message; false once the step's budget is used up.
    fn send(&mut self) -> bool {
        let budget = self.cfg.coordination.message_budget;
        if budget > 0 && self.sent >= budget {
            return false;
        }
        self.sent += 1;
        true
    }

    fn sense(&mut self, t: u64) -> Vec<Observation> {
        let s = &self.cfg.sensing;
        let mut obs = Vec::new();
        self.looks.clear();
        for u in &self.uavs {
            let (world, dims, keys, looks) = (&self.world, self.dims, &self.thermal_keys, &mut self.looks);
            obs.extend(sense_thermal_with(u.id, u.pos, world, s, |c| {
                thermal_draw(world, c, s, &mut keyed_look(keys, looks, dims.index(c), t))
            }));
            self.coverage.mark_footprint(u.pos, s.footprint_radius, t);
        }
        let mut ground = sense_ground(&self.ground, &self.world, s, &mut self.rng_sensors);
        for (_, plan) in self.plans() {
            if plan.kind != AttackKind::SensorSpoof || !plan.active_at(t) {
                continue;
            }
            if !s.uav_links_authenticated {
                for o in obs.iter_mut().filter(|o| plan.uav_targets.contains(&o.sensor_id)) {
                    o.spoofed_from = Some(o.reading);
                    o.reading = plan.reading;
                    // same absolute threshold as a ground sensor
                    o.detection = plan.reading > s.ground_threshold;
                    if let Target::Cell(c) = o.target {
                        self.spoof_cells.insert(self.dims.index(c), t);
                    }
                }
            }
            for &id in &plan.targets {
                if let Some(o) = ground.get_mut(id as usize) {
                    o.spoofed_from = Some(o.reading);
                    o.reading = plan.reading;
                    o.detection = plan.reading > s.ground_threshold;
                    if let Target::Cell(c) = o.target {
                        self.spoof_cells.insert(self.dims.index(c), t);
                    }
                }
            }
        }
        obs.extend(ground);
        self.sat_queue.extend(sense_satellite(&self.regions, &self.world, s, &mut self.rng_sensors));
        let (ready, later): (Vec<_>, Vec<_>) = std::mem::take(&mut self.sat_queue).into_iter().partition(|o| o.delivered <= t);
        self.sat_queue = later;
        obs.extend(ready);
        obs
    }

    fn update_belief(&mut self, obs: &[Observation], t: u64) -> Result<()> {
        let b = &self.cfg.belief;
        for (p, r) in self.prior.iter_mut().zip(&self.risk) {
            *p = b.prior_floor + b.prior_scale * r;
        }
        self.belief.update(obs, &b.likelihoods, &self.prior, b.drift)?;
        let map = compute_risk(self.dims, &self.world.fuel, &self.world.humidity, &self.belief.probs, &b.risk, t);
        self.risk = map.values;
        for o in obs {
            match o.target {
                Target::Cell(c) => self.touched[self.dims.index(c)] = true,
                Target::Region(r) => {
                    for c in r.cells() {
                        self.touched[self.dims.index(c)] = true;
                    }
                }
            }
        }
        Ok(())
    }

    fn update_thresholds(&mut self, obs: &[Observation]) {
        let ground: Vec<f64> = obs.iter().filter(|o| o.modality == Modality::GroundIot).map(|o| o.reading).collect();
        if !ground.is_empty() {
            self.volatility.push(mean(&ground));
        }
        self.tau = adapt_thresholds(self.volatility.variance(), &self.cfg.verification.thresholds);
    }

    fn allocate(&mut self, t: u64) {
        let radius = self.cfg.sensing.footprint_radius;
        let speed = self.cfg.coordination.uav.speed;
        if let Some(routes) = self.routes.as_mut() {
            for u in self.uavs.iter_mut() {
                if !u.needs_zone() {
                    continue;
                }
                let i = u.id as usize;
                let Some(cur) = routes.position(i) else { continue };
                if u.pos.chebyshev(cur) > speed {
                    routes.rejoin(i, u.pos);
                    if let Some(p) = routes.position(i) {
                        u.route.push_back(p);
                    }
                } else if let Some(next) = routes.advance(i, speed) {
                    u.route.push_back(next);
                }
            }
            return;
        }
        let idle: Vec<u32> = self.uavs.iter().filter(|u| u.needs_zone()).map(|u| u.id).collect();
        if idle.is_empty() {
            return;
        }
        let mut occupied = vec![0u32; self.zones.len()];
        for u in &self.uavs {
            if let Some(z) = u.zone {
                occupied[z] += 1;
            }
        }
        let scores: Vec<ZoneScore> = self
            .zones
            .iter()
            .map(|z| {
                let r: f64 = z.rect.cells().map(|c| self.risk[self.dims.index(c)]).sum::<f64>() / z.rect.area() as f64;
                ZoneScore { risk: r, gain: self.coverage.gain(&z.rect, t) }
            })
            .collect();
        let assignment = allocate_zones(&scores, &idle, &occupied).expect("zones partition a non-empty grid");
        for (id, z) in assignment {
            if !self.send() {
                break;
            }
            let u = &mut self.uavs[id as usize];
            u.zone = Some(z);
            u.route = zone_sweep(self.zones[z].rect, radius).into();
        }
    }

    // ---- verification pipeline ----

    fn verification(&mut self, obs: &[Observation], t: u64) -> Result<()> {
        let v = &self.cfg.verification;
        let radius = self.cfg.sensing.footprint_radius;
        let governed = self.cfg.governed();
        let opportunistic = self.cfg.ablation.no_coordination;

        // new events from this step's observations
        let mut cells: Vec<usize> = Vec::new();
        for o in obs {
            match o.target {
                Target::Cell(c) => cells.push(self.dims.index(c)),
                Target::Region(r) => cells.extend(r.cells().map(|c| self.dims.index(c))),
            }
        }
        cells.sort_unstable();
        cells.dedup();
        let trigger = if governed { self.tau.0 } else { self.cfg.gate.tau };
        for &i in &cells {
            self.touched[i] = false;
            let conf1 = stage1_confidence(self.belief.probs[i], self.risk[i], &v.stage1);
            if conf1 > trigger {
                self.candidate(i, conf1, t)?;
            }
        }

        // dispatch
        if governed && !opportunistic {
            let pending: Vec<(u64, Cell)> = self
                .events
                .iter()
                .filter(|e| e.ev.status == EventStatus::Pending)
                .map(|e| (e.ev.id, e.ev.cell))
                .collect();
            if !pending.is_empty() {
                let reserve = self.cfg.coordination.uav.reserve;
                for (uid, task) in dispatch_verification(&pending, &self.uavs, reserve, t) {
                    if !self.send() {
                        break;
                    }
                    let u = &mut self.uavs[uid as usize];
                    u.mode = Mode::Verify;
                    u.task = Some(task);
                    self.parked[uid as usize] = Some((u.zone.take(), std::mem::take(&mut u.route)));
                    let e = &mut self.events[task.event_id as usize];
                    e.assigned = Some(uid);
                    e.ev.status = EventStatus::Verifying;
                    e.ev.time.dispatched.get_or_insert(t);
                }
            }
        }

        // samples and stage 2; a UAV already over its target samples in the dispatch step
        if governed {
            for k in 0..self.events.len() {
                let e = &self.events[k];
                if !matches!(e.ev.status, EventStatus::Verifying | EventStatus::Pending) {
                    continue;
                }
                let target = e.ev.cell;
                let covering = if opportunistic {
                    self.uavs.iter().find(|u| u.pos.chebyshev(target) <= radius).map(|u| u.id)
                } else {
                    e.assigned.filter(|&id| self.uavs[id as usize].pos.chebyshev(target) <= radius)
                };
                if e.ev.status == EventStatus::Verifying {
                    if let Some(uid) = covering {
                        let mut rng = keyed_look(&self.thermal_keys, &mut self.looks, self.dims.index(target), t);
                        let hit = thermal_draw(&self.world, target, &self.cfg.sensing, &mut rng);
                        let o = Observation {
                            modality: Modality::ThermalUav,
                            sensor_id: uid,
                            target: Target::Cell(target),
                            reading: self.world.temperature(target),
                            detection: hit,
                            emitted: t,
                            delivered: t,
                            truth_burning: self.world.burn_state(target) == BurnState::Burning,
                            spoofed_from: None,
                        };
                        let e = &mut self.events[k];
                        e.ev.samples.push(hit);
                        e.ev.evidence.push(evidence_digest(&o));
                    }
                }
                let e = &self.events[k];
                if e.ev.status == EventStatus::Verifying && e.ev.samples.len() >= v.v_min {
                    self.finalize(k, t)?;
                } else if t.saturating_sub(e.ev.time.created) > v.verify_timeout {
                    self.close_event(k, EventStatus::Dismissed, t);
                }
            }
        }
        Ok(())
    }

    /// Handle a cell whose stage-1 score cleared the trigger.
    fn candidate(&mut self, i: usize, conf1: f64, t: u64) -> Result<()> {
        let v = &self.cfg.verification;
        let c = self.dims.cell(i);
        let live = |l: &Lineage| l.open.is_some() || t < l.last_active + v.rearm_after;
        let mut near: Vec<u32> =
            self.dims.square(c, v.suppression_radius).map(|n| self.lineage_of[self.dims.index(n)]).collect();
        near.retain(|&l| l != NO_LINEAGE && live(&self.lineages[l as usize]));
        near.sort_unstable();
        near.dedup();
        let own_live = self.lineage_of[i] != NO_LINEAGE && live(&self.lineages[self.lineage_of[i] as usize]);
        let blocking = |l: &Lineage| l.closed || l.open.is_some() || t < l.quiet_until || l.events > v.max_reescalations;
        if let Some(&l) = near.iter().find(|&&l| blocking(&self.lineages[l as usize])) {
            self.lineages[l as usize].last_active = t;
            if !own_live {
                self.lineage_of[i] = l;
            }
            return Ok(());
        }
        let lineage = match near.first() {
            Some(&l) => l as usize,
            None => {
                self.lineages.push(Lineage::default());
                self.lineages.len() - 1
            }
        };
        self.lineages[lineage].last_active = t;
        if !own_live {
            self.lineage_of[i] = lineage as u32;
        }
        let id = self.events.len() as u64;
        let mut ev = AnomalyEvent::new(id, c, t, conf1);
        ev.escalation = self.lineages[lineage].events;
        // ground truth: a burning cell inside the footprint around the event cell
        let fr = self.cfg.sensing.footprint_radius;
        let burning = self
            .dims
            .square(c, fr)
            .filter(|&n| self.world.burn_state(n) == BurnState::Burning)
            .min_by_key(|&n| (n.chebyshev(c), n));
        ev.truth_fire = burning.is_some();
        ev.fire_id = burning.and_then(|n| self.world.fire_id(n));
        let spoofed = self
            .dims
            .square(c, fr)
            .any(|n| self.spoof_cells.get(&self.dims.index(n)).is_some_and(|&s| t.saturating_sub(s) <= 30));
        let l = &mut self.lineages[lineage];
        l.events += 1;
        l.open = Some(id);
        let tracked = Tracked {
            ev,
            lineage,
            boundary: Rect::around(self.dims, c, v.boundary_radius),
            risk: self.risk[i],
            assigned: None,
            spoofed,
            severity: None,
        };
        self.events.push(tracked);
        let k = id as usize;
        if !self.cfg.governed() {
            // released on the stage-1 score alone
            let e = &mut self.events[k];
            e.ev.conf_final = Some(conf1);
            e.ev.time.verified = Some(t);
            e.ev.time.authorized = Some(t);
            e.ev.status = EventStatus::Alerted;
            if let Some(f) = e.ev.fire_id {
                self.world.record_detection(f, t);
            }
            let l = &mut self.lineages[lineage];
            l.open = None;
            l.closed = true;
            self.authorize(k, t);
        } else if self.cfg.ablation.no_coordination {
            self.events[k].ev.status = EventStatus::Verifying;
        }
        Ok(())
    }

    fn release_uav(&mut self, k: usize) {
        if let Some(uid) = self.events[k].assigned.take() {
            let u = &mut self.uavs[uid as usize];
            u.task = None;
            u.route.clear();
            if u.mode == Mode::Verify {
                u.mode = Mode::Patrol;
                if let Some((zone, route)) = self.parked[uid as usize].take() {
                    u.zone = zone;
                    u.route = route;
                }
            }
        }
    }

    fn close_event(&mut self, k: usize, status: EventStatus, t: u64) {
        self.release_uav(k);
        let e = &mut self.events[k];
        e.ev.status = status;
        let l = &mut self.lineages[e.lineage];
        l.open = None;
        l.quiet_until = t + self.cfg.verification.cooldown;
    }

    fn finalize(&mut self, k: usize, t: u64) -> Result<()> {
        let lik = self.cfg.belief.likelihoods.thermal;
        let conf = self.events[k].ev.finalize(lik, self.cfg.verification.v_min)?;
        if conf <= self.tau.1 {
            self.close_event(k, EventStatus::Dismissed, t);
            return Ok(());
        }
        self.release_uav(k);
        let e = &mut self.events[k];
        e.ev.status = EventStatus::Escalated;
        e.ev.time.verified = Some(t);
        let l = &mut self.lineages[e.lineage];
        l.open = None;
        l.closed = true;
        if let Some(f) = e.ev.fire_id {
            self.world.record_detection(f, t);
        }
        let (id, truth) = (e.ev.id, e.ev.truth_fire);
        if let Some(ledger) = self.ledger.as_mut() {
            let record = EventRecord {
                event_id: id,
                step: t,
                cell: e.ev.cell,
                boundary: e.boundary,
                confidence: conf,
                evidence: evidence_root(&e.ev.evidence),
            };
            e.ev.time.submitted = Some(t);
            let tx = self.controller.make_tx(TxBody::Event(record));
            self.last_event_tx = Some(tx.clone());
            ledger.submit(tx, t)?;
        } else {
            // local gate; review starts straight away
            let review = self.oracle.decide(id, truth, t);
            self.reviews.insert((review.decided_at, id), review);
        }
        Ok(())
    }

    // ---- governance ----

    fn ledger_round(&mut self, t: u64) {
        let Some(ledger) = self.ledger.as_mut() else { return };
        let mut net = NetConditions::default();
        for plan in self.cfg.attacks.iter() {
            if plan.kind == AttackKind::Dos && plan.active_at(t) {
                net.drop_prob = net.drop_prob.max(plan.drop_prob);
                net.added_delay += plan.added_delay;
                net.delay_multiplier *= plan.delay_multiplier;
            }
        }
        ledger.round(t, net, &mut self.rng_consensus);
        let blocks = ledger.commit_ready(t);
        for b in &blocks {
            for tx in &b.txs {
                if let TxBody::Event(r) = &tx.body {
                    let k = r.event_id as usize;
                    if k < self.events.len() {
                        let e = &mut self.events[k];
                        e.ev.time.committed.get_or_insert(t);
                        if self.gate.m > 0 {
                            let review = self.oracle.decide(r.event_id, e.ev.truth_fire, t);
                            self.reviews.insert((review.decided_at, r.event_id), review);
                        }
                    }
                }
            }
            for r in &b.receipts {
                let k = r.event_id as usize;
                if k >= self.events.len() {
                    continue;
                }
                match r.outcome {
                    GateOutcome::Alert => self.authorize(k, t),
                    GateOutcome::Reject => self.events[k].ev.status = EventStatus::Rejected,
                }
            }
        }
    }

    fn oracle_decisions(&mut self, t: u64) -> Result<()> {
        while let Some((&(at, id), _)) = self.reviews.first_key_value() {
            if at > t {
                break;
            }
            let review = self.reviews.remove(&(at, id)).expect("present");
            let k = id as usize;
            self.events[k].ev.time.approved = Some(at);
            self.reviews_done += review.records.len();
            self.overrides += review.records.iter().filter(|r| r.decision == crate::ledger::Decision::Reject).count();
            match self.ledger.as_mut() {
                Some(ledger) => {
                    for rec in review.records {
                        let j = self
                            .reviewer_wallets
                            .iter()
                            .position(|w| w.id() == rec.reviewer)
                            .ok_or_else(|| Error::UnknownSubmitter(rec.reviewer.clone()))?;
                        let tx = self.reviewer_wallets[j].make_tx(TxBody::Approval(rec));
                        ledger.submit(tx, t)?;
                    }
                }
                None => {
                    let conf = self.events[k].ev.conf_final.unwrap_or(0.0);
                    let votes = valid_votes(id, &review.records, &self.genesis, 0);
                    match evaluate_alert_gate(conf, &votes, &self.gate) {
                        GateDecision::Alert => self.authorize(k, t),
                        GateDecision::Reject => self.events[k].ev.status = EventStatus::Rejected,
                        GateDecision::Hold => {}
                    }
                }
            }
        }
        Ok(())
    }

    fn authorize(&mut self, k: usize, t: u64) {
        let burning = {
            let e = &self.events[k];
            e.boundary.cells().filter(|&c| self.belief.probs[self.dims.index(c)] > 0.5).count()
        };
        let e = &mut self.events[k];
        e.ev.time.authorized.get_or_insert(t);
        e.ev.status = EventStatus::Alerted;
        let conf = e.ev.conf_final.unwrap_or(e.ev.conf1);
        e.severity = Some(assign_severity(conf, self.cfg.gate.tau, e.risk, burning, &self.cfg.severity, &mut self.rng_dissem));
        self.outbox.insert(e.ev.id);
    }

    fn disseminate(&mut self, t: u64) {
        let ids: Vec<u64> = self.outbox.iter().copied().collect();
        for id in ids {
            let k = id as usize;
            let e = &self.events[k];
            let sev = e.severity.map_or(1, |s| s.confirmed);
            let payload = AlertPayload::new(id, e.boundary, sev);
            let authority = self.ledger.as_ref().map(|l| l as &dyn AlertAuthority);
            match self.dissem.disseminate(&payload, authority, t, &mut self.rng_dissem) {
                Ok(rep) => {
                    if let Some(d) = rep.delivery_step {
                        self.outbox.remove(&id);
                        let e = &mut self.events[k];
                        e.ev.time.delivered = Some(d);
                        if let Some(f) = e.ev.fire_id {
                            self.world.record_alert(f, d);
                        }
                        self.delivered.push(Delivered {
                            event_id: id,
                            attempt: t,
                            delivery: d,
                            false_alert: !e.ev.truth_fire,
                            injected: false,
                        });
                        self.alert_rows.push(alert_row(&rep, d));
                    }
                }
                Err(Error::DuplicateAlert(_)) => {
                    self.outbox.remove(&id);
                    self.duplicate_alerts += 1;
                }
                Err(_) => {
                    // authorization not visible yet; retry next step
                }
            }
        }
    }

    // ---- attacks ----

    fn attack_phase(&mut self, t: u64) {
        let plans: Vec<(usize, &AttackPlan)> = self.plans().collect();
        for (pi, plan) in plans {
            if plan.kind == AttackKind::ByzantineMix {
                self.byzantine(pi, plan, t);
                continue;
            }
            if !plan.active_at(t) {
                continue;
            }
            match plan.kind {
                AttackKind::AlertInject => self.inject(pi, t),
                AttackKind::Replay => self.replay(pi, t),
                AttackKind::DataTamper if plan.post_commit => self.tamper_committed(pi, plan, t),
                AttackKind::DataTamper => self.tamper_in_flight(pi, t),
                _ => {}
            }
        }
    }

    fn log(&mut self, plan: usize, kind: AttackKind, t: u64, target: String, outcome: Outcome, detail: String) {
        self.attacks.push(AttackOutcome { plan, kind, step: t, target, outcome, detail });
    }

    fn byzantine(&mut self, _plan_index: usize, plan: &AttackPlan, t: u64) {
        let Some(ledger) = self.ledger.as_mut() else { return };
        let switch_on = t == plan.start.max(1);
        let switch_off = t == plan.end;
        if !switch_on && !switch_off {
            return;
        }
        for (j, &v) in plan.targets.iter().enumerate() {
            let b = if switch_on { plan.behavior_for(j) } else { Behavior::Honest };
            let _ = ledger.set_behavior(&format!("validator-{v}"), b);
        }
    }

    fn inject(&mut self, pi: usize, t: u64) {
        let n = self.injected;
        self.injected += 1;
        // alternate between a fabricated event and a real event that has not
        // been authorized
        let real = (n % 2 == 1)
            .then(|| self.events.iter().rev().find(|e| e.ev.time.authorized.is_none()).map(|e| (e.ev.id, e.boundary)))
            .flatten();
        let (id, boundary) = real.unwrap_or_else(|| {
            let c = Cell::new(
                rand::Rng::gen_range(&mut self.rng_attacks, 0..self.dims.width),
                rand::Rng::gen_range(&mut self.rng_attacks, 0..self.dims.height),
            );
            (INJECTED_ID_BASE + n, Rect::around(self.dims, c, 3))
        });
        let payload = AlertPayload::new(id, boundary, 5);
        let authority = self.ledger.as_ref().map(|l| l as &dyn AlertAuthority);
        let res = self.dissem.disseminate(&payload, authority, t, &mut self.rng_attacks);
        let (outcome, detail) = match res {
            Err(e) => (Outcome::Rejected, e.to_string()),
            Ok(rep) => match rep.delivery_step {
                Some(d) => {
                    self.delivered.push(Delivered { event_id: id, attempt: t, delivery: d, false_alert: true, injected: true });
                    self.alert_rows.push(alert_row(&rep, d));
                    (Outcome::GuaranteeViolated, "unauthorized alert delivered".to_string())
                }
                None => (Outcome::Absorbed, "accepted for broadcast but every channel failed".to_string()),
            },
        };
        self.log(pi, AttackKind::AlertInject, t, format!("event {id}"), outcome, detail);
    }

    fn replay(&mut self, pi: usize, t: u64) {
        let mut refused = 0usize;
        let mut accepted = 0usize;
        if let Some(ledger) = self.ledger.as_mut() {
            let captured: Vec<Transaction> = ledger.chain().iter().flat_map(|b| b.txs.iter().cloned()).collect();
            for tx in captured {
                match ledger.submit(tx, t) {
                    Ok(()) => accepted += 1,
                    Err(_) => refused += 1,
                }
            }
        }
        let delivered: Vec<(u64, u64)> =
            self.delivered.iter().filter(|d| !d.injected).map(|d| (d.event_id, d.delivery)).collect();
        for (id, _) in delivered {
            let e = &self.events[id as usize];
            let payload = AlertPayload::new(id, e.boundary, e.severity.map_or(1, |s| s.confirmed));
            let authority = self.ledger.as_ref().map(|l| l as &dyn AlertAuthority);
            match self.dissem.disseminate(&payload, authority, t, &mut self.rng_attacks) {
                Ok(rep) if rep.delivered() => {
                    accepted += 1;
                    self.duplicate_alerts += 1;
                }
                Ok(_) => refused += 1,
                Err(_) => refused += 1,
            }
        }
        let outcome = if accepted == 0 { Outcome::Rejected } else { Outcome::GuaranteeViolated };
        self.log(pi, AttackKind::Replay, t, "all captured".into(), outcome, format!("{refused} refused, {accepted} accepted"));
    }

    fn tamper_in_flight(&mut self, pi: usize, t: u64) {
        let Some(ledger) = self.ledger.as_mut() else {
            self.log(pi, AttackKind::DataTamper, t, "-".into(), Outcome::Absorbed, "no ledger traffic".into());
            return;
        };
        let Some(mut tx) = self.last_event_tx.clone() else {
            self.log(pi, AttackKind::DataTamper, t, "-".into(), Outcome::Absorbed, "nothing in flight".into());
            return;
        };
        if let TxBody::Event(r) = &mut tx.body {
            r.confidence = 0.999;
            r.cell = Cell::new((r.cell.x + 7) % self.dims.width, r.cell.y);
        }
        let target = format!("tx {}#{}", tx.submitter, tx.nonce);
        let (outcome, detail) = match ledger.submit(tx, t) {
            Err(e) => (Outcome::Rejected, e.to_string()),
            Ok(()) => (Outcome::GuaranteeViolated, "modified transaction entered the pool".to_string()),
        };
        self.log(pi, AttackKind::DataTamper, t, target, outcome, detail);
    }

    fn tamper_committed(&mut self, pi: usize, plan: &AttackPlan, t: u64) {
        let Some(ledger) = self.ledger.as_ref() else { return };
        let mut chain: Vec<Block> = ledger.chain().to_vec();
        let Some(last) = chain.last_mut() else {
            self.log(pi, AttackKind::DataTamper, t, "-".into(), Outcome::Absorbed, "empty chain".into());
            return;
        };
        let height = last.height;
        let what = match last.txs.first_mut().map(|tx| &mut tx.body) {
            Some(TxBody::Event(r)) => {
                r.confidence = 1.0 - r.confidence / 2.0;
                "event confidence"
            }
            Some(TxBody::Approval(a)) => {
                a.step += 1;
                "approval step"
            }
            Some(TxBody::Revocation { step, .. }) => {
                *step += 1;
                "revocation step"
            }
            None => {
                last.commit_step += 1;
                "commit step"
            }
        };
        let verdict = verify_chain(&chain, ledger.genesis(), ledger.params.f, Some(GovernanceContract::new(self.gate)));
        let f = ledger.params.f;
        let (outcome, detail) = match verdict {
            Verdict::Violation { at, what: v } if at.block == height => {
                if plan.colluders > f {
                    (
                        Outcome::GuaranteeViolated,
                        format!("assumption exceeded: {} colluders > f={f}; detected {v:?} at {at}", plan.colluders),
                    )
                } else {
                    (Outcome::Rejected, format!("{what}: {v:?} at {at}"))
                }
            }
            Verdict::Violation { at, what: v } => {
                (Outcome::GuaranteeViolated, format!("{what}: flagged at {at} ({v:?}), expected block {height}"))
            }
            Verdict::Ok => (Outcome::GuaranteeViolated, format!("{what}: modification not detected")),
        };
        self.log(pi, AttackKind::DataTamper, t, format!("block {height}"), outcome, detail);
    }

    fn summarize_attacks(&mut self) {
        let plans: Vec<(usize, &AttackPlan)> = self.plans().collect();
        let horizon = self.cfg.horizon;
        for (pi, plan) in plans {
            match plan.kind {
                AttackKind::SensorSpoof => {
                    let tainted: Vec<&Tracked> = self.events.iter().filter(|e| e.spoofed && !e.ev.truth_fire).collect();
                    let alerted = tainted.iter().filter(|e| e.ev.time.delivered.is_some()).count();
                    let governed_chain = self.ledger.is_some() && self.gate.m > 0;
                    let outcome = if alerted == 0 {
                        Outcome::Rejected
                    } else if governed_chain {
                        // passed stage 2 and a genuine (mistaken) human approval
                        Outcome::Absorbed
                    } else {
                        Outcome::GuaranteeViolated
                    };
                    let detail = format!("{} spoof-driven events, {alerted} reached the public", tainted.len());
                    let target = format!("sensors {:?}", plan.targets);
                    self.log(pi, plan.kind, horizon, target, outcome, detail);
                }
                AttackKind::Dos => {
                    let (stalled, dropped) =
                        self.ledger.as_ref().map_or((0, 0), |l| (l.stats.stalled_rounds, l.stats.dropped_votes));
                    let detail = format!("{stalled} stalled rounds, {dropped} dropped votes");
                    self.log(pi, plan.kind, horizon, "consensus network".into(), Outcome::Absorbed, detail);
                }
                AttackKind::ByzantineMix => {
                    let f = self.cfg.ledger.consensus.f;
                    let forged = self
                        .ledger
                        .as_ref()
                        .map_or(0, |l| l.stats.rejections.iter().filter(|r| r.forged).count());
                    let eq = self.ledger.as_ref().map_or(0, |l| l.stats.discarded_equivocations);
                    let (outcome, detail) = if plan.targets.len() > f {
                        (
                            Outcome::GuaranteeViolated,
                            format!("assumption exceeded: {} byzantine > f={f}", plan.targets.len()),
                        )
                    } else {
                        (Outcome::Rejected, format!("{forged} forged txs refused, {eq} equivocations discarded"))
                    };
                    self.log(pi, plan.kind, horizon, format!("validators {:?}", plan.targets), outcome, detail);
                }
                _ => {}
            }
        }
    }

    fn finish(mut self) -> RunOutput {
        self.summarize_attacks();
        let cfg = self.cfg;

        let fires: Vec<FireRow> = self
            .world
            .ignitions
            .iter()
            .map(|f| FireRow {
                fire_id: f.fire_id,
                x: f.cell.x,
                y: f.cell.y,
                ignition: f.ignition_step,
                detection: f.detection_step,
                alert: f.alert_step,
                latency: f.detection_step.map(|d| d - f.ignition_step),
            })
            .collect();
        let lds: Vec<f64> = fires.iter().filter_map(|f| f.latency.map(|l| l as f64)).collect();
        let alert_lat: Vec<f64> = fires.iter().filter_map(|f| f.alert.map(|a| (a - f.ignition) as f64)).collect();

        let mut decomp_rows = Vec::new();
        let mut comps = Vec::new();
        let (mut gov, mut e2e) = (0u64, 0u64);
        for d in self.delivered.iter().filter(|d| !d.injected) {
            let e = &self.events[d.event_id as usize];
            let tl = &e.ev.time;
            let origin = e.ev.fire_id.filter(|_| e.ev.truth_fire).map(|f| self.world.ignitions[f as usize].ignition_step);
            let s = Stamps {
                origin,
                created: tl.created,
                dispatched: tl.dispatched,
                verified: tl.verified.unwrap_or(tl.created),
                committed: tl.committed,
                approved: tl.approved,
                authorized: tl.authorized.unwrap_or(d.attempt),
                delivered: d.delivery,
            };
            let c: Components = decompose(&s);
            if let Some(f) = e.ev.fire_id.filter(|_| e.ev.truth_fire) {
                gov += c.governance();
                e2e += d.delivery - self.world.ignitions[f as usize].ignition_step;
            }
            decomp_rows.push(DecompositionRow {
                event_id: e.ev.id,
                truth_fire: e.ev.truth_fire,
                coordination: c.coordination,
                sensing_verification: c.sensing_verification,
                consensus: c.consensus,
                human: c.human,
                dissemination: c.dissemination,
                total: c.total(),
            });
            comps.push(c);
        }
        let decomp = Decomposition::from_components(&comps);

        let events: Vec<EventRow> = self
            .events
            .iter()
            .map(|e| EventRow {
                event_id: e.ev.id,
                x: e.ev.cell.x,
                y: e.ev.cell.y,
                lineage: e.lineage,
                created: e.ev.time.created,
                dispatched: e.ev.time.dispatched,
                verified: e.ev.time.verified,
                submitted: e.ev.time.submitted,
                committed: e.ev.time.committed,
                approved: e.ev.time.approved,
                authorized: e.ev.time.authorized,
                delivered: e.ev.time.delivered,
                conf1: e.ev.conf1,
                conf_final: e.ev.conf_final,
                samples: e.ev.samples.len(),
                truth_fire: e.ev.truth_fire,
                fire_id: e.ev.fire_id,
                spoofed: e.spoofed,
                status: e.ev.status.as_str(),
            })
            .collect();

        let (blocks, delays, rejections, stalled, chain, gate_violations, duplicate_commits) = match &self.ledger {
            Some(l) => {
                let rows: Vec<BlockRow> = l
                    .chain()
                    .iter()
                    .map(|b| BlockRow {
                        height: b.height,
                        commit_step: b.commit_step,
                        txs: b.txs.len(),
                        receipts: b.receipts.len(),
                        signatures: b.signatures.len(),
                    })
                    .collect();
                let audited: Vec<(u64, u64)> = self.delivered.iter().map(|d| (d.event_id, d.attempt)).collect();
                let violations = audit_alerts(l.chain(), l.genesis(), &self.gate, &audited).len();
                let mut params = BTreeMap::new();
                params.insert("f".to_string(), l.params.f.to_string());
                params.insert("tau".to_string(), self.gate.tau.to_string());
                params.insert("m".to_string(), self.gate.m.to_string());
                params.insert("n".to_string(), self.gate.n.to_string());
                params.insert("seed".to_string(), self.seed.to_string());
                let dump = ChainDump { params, registry: l.genesis().clone(), blocks: l.chain().to_vec() };
                (
                    rows,
                    l.stats.confirmation_delays.clone(),
                    l.stats.rejections.len(),
                    l.stats.stalled_rounds,
                    Some(dump),
                    violations,
                    duplicate_commits(l.chain()),
                )
            }
            None => (Vec::new(), Vec::new(), 0, 0, None, 0, 0),
        };

        let alerts = self.delivered.len();
        let false_alerts = self.delivered.iter().filter(|d| d.false_alert).count();
        let fp = ratio(false_alerts, alerts);
        let distance: u64 = self.uavs.iter().map(|u| u.distance).sum();
        let battery: f64 = self.uavs.iter().map(|u| u.consumed).sum();
        let cost_cr = distance as f64 + battery;
        let mean_ld = mean(&lds);
        let dm: Vec<f64> = delays.iter().map(|&d| d as f64).collect();
        let metrics = RunMetrics {
            label: self.label.clone(),
            seed: self.seed,
            uavs: cfg.coordination.uav.count,
            fires: fires.len(),
            fires_detected: lds.len(),
            fires_alerted: alert_lat.len(),
            mean_ld,
            mean_alert_latency: mean(&alert_lat),
            events: events.len(),
            alerts,
            false_alerts,
            fp,
            reviews: self.reviews_done,
            overrides: self.overrides,
            override_freq: ratio(self.overrides, self.reviews_done),
            severity_overrides: self.events.iter().filter(|e| e.severity.is_some_and(|s| s.overridden())).count(),
            blocks: blocks.len(),
            confirm_mean: mean(&dm),
            confirm_p95: percentile(&delays, 0.95),
            confirm_max: delays.iter().copied().max().unwrap_or(0),
            stalled_rounds: stalled,
            tx_rejections: rejections,
            decomp_coordination: decomp.fractions.coordination,
            decomp_sensing_verification: decomp.fractions.sensing_verification,
            decomp_consensus: decomp.fractions.consensus,
            decomp_human: decomp.fractions.human,
            decomp_dissemination: decomp.fractions.dissemination,
            consensus_steps: decomp.mean(|c| c.consensus),
            sensing_verification_steps: decomp.mean(|c| c.sensing_verification),
            gov_share: if e2e == 0 { 0.0 } else { gov as f64 / e2e as f64 },
            distance,
            battery,
            cost_cr,
            cost_j: scalar_cost(&cfg.cost, mean_ld, fp, cost_cr),
            gate_violations,
            injected_delivered: self.delivered.iter().filter(|d| d.injected).count(),
            duplicate_alerts: self.duplicate_alerts,
            duplicate_commits,
        };
        RunOutput {
            metrics,
            fires,
            events,
            alerts: self.alert_rows,
            decomposition: decomp_rows,
            attacks: self.attacks,
            blocks,
            confirmation_delays: delays,
            chain,
        }
    }
}

/// Generator for the next thermal look at cell `i` during step `t`.
fn keyed_look(keys: &KeyedStream, looks: &mut BTreeMap<usize, u64>, i: usize, t: u64) -> SimRng {
    let k = looks.entry(i).or_insert(0);
    *k += 1;
    keys.at([t, i as u64, *k - 1])
}

fn alert_row(rep: &crate::governance::DeliveryReport, delivery: u64) -> AlertRow {
    AlertRow {
        event_id: rep.event_id,
        decision_step: rep.decision_step,
        delivery_step: delivery,
        severity: rep.severity,
        boundary: rep.boundary.to_string(),
        channels_ok: rep.channels_ok.iter().map(|&c| if c { '1' } else { '0' }).collect(),
    }
}

/// Transactions committed more than once, by (submitter, nonce).
pub fn duplicate_commits(chain: &[Block]) -> usize {
    let mut seen = BTreeSet::new();
    chain.iter().flat_map(|b| &b.txs).filter(|tx| !seen.insert((tx.submitter.clone(), tx.nonce))).count()
}

/// Independent check of the gate over a committed chain: every delivered
/// alert `(event_id, broadcast_step)` needs a committed event with
/// confidence above `tau` and at least `m` distinct reviewers' valid
/// approvals, all committed no later than the broadcast. Returns the event
/// ids that fail.
pub fn audit_alerts(chain: &[Block], genesis: &KeyRegistry, policy: &GatePolicy, delivered: &[(u64, u64)]) -> Vec<u64> {
    let mut registry = genesis.clone();
    let mut conf: BTreeMap<u64, f64> = BTreeMap::new();
    let mut voters: BTreeMap<u64, BTreeSet<String>> = BTreeMap::new();
    let mut approvals: BTreeMap<u64, usize> = BTreeMap::new();
    let mut satisfied_at: BTreeMap<u64, u64> = BTreeMap::new();
    for b in chain {
        for tx in &b.txs {
            match &tx.body {
                TxBody::Event(r) => {
                    conf.entry(r.event_id).or_insert(r.confidence);
                }
                TxBody::Approval(a) => {
                    if a.verify(&registry, b.height) && voters.entry(a.event_id).or_default().insert(a.reviewer.clone())
                        && a.decision == crate::ledger::Decision::Approve {
                            *approvals.entry(a.event_id).or_default() += 1;
                        }
                }
                TxBody::Revocation { .. } => {}
            }
        }
        for (&id, &c) in &conf {
            if c > policy.tau && approvals.get(&id).copied().unwrap_or(0) >= policy.m {
                satisfied_at.entry(id).or_insert(b.commit_step);
            }
        }
        for tx in &b.txs {
            if let TxBody::Revocation { key, .. } = &tx.body {
                registry.revoke(key, b.height);
            }
        }
    }
    delivered
        .iter()
        .filter(|(id, step)| satisfied_at.get(id).is_none_or(|&s| s > *step))
        .map(|(id, _)| *id)
        .collect()
}
