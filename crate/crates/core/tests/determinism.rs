use firegate::adversary::standard_matrix;
use firegate::coordination::Policy;
use firegate::harness::experiments::run_seeds;
use firegate::harness::output::csv_string;
use firegate::harness::{run_scenario, RunOutput, ScenarioConfig};
use firegate::ledger::GateOutcome;

fn attacked(horizon: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig { horizon, seeds: vec![4, 5, 6], ..Default::default() };
    let wanted = ["byzantine-mix", "alert-inject", "dos", "sensor-spoof"];
    cfg.attacks = standard_matrix(horizon, cfg.ledger.consensus.f)
        .into_iter()
        .filter(|(n, _)| wanted.contains(&n.as_str()))
        .map(|(_, p)| p)
        .collect();
    cfg
}

/// Every CSV table plus the chain dump, concatenated.
fn render(o: &RunOutput) -> String {
    [
        csv_string(std::slice::from_ref(&o.metrics)).unwrap(),
        csv_string(&o.fires).unwrap(),
        csv_string(&o.events).unwrap(),
        csv_string(&o.alerts).unwrap(),
        csv_string(&o.decomposition).unwrap(),
        csv_string(&o.attacks).unwrap(),
        csv_string(&o.blocks).unwrap(),
        o.chain.as_ref().map(|c| c.to_text()).unwrap_or_default(),
    ]
    .join("\n")
}

#[test]
fn repeated_runs_are_bit_identical() {
    let cfg = attacked(1200);
    let a = render(&run_scenario(&cfg, 5).unwrap());
    let b = render(&run_scenario(&cfg, 5).unwrap());
    assert!(a.len() > 1000);
    assert!(a == b, "outputs differ");
}

#[test]
fn parallel_driver_matches_sequential_runs() {
    let cfg = attacked(800);
    let par: Vec<String> = run_seeds(&cfg).unwrap().iter().map(render).collect();
    let seq: Vec<String> = cfg.seeds.iter().map(|&s| render(&run_scenario(&cfg, s).unwrap())).collect();
    assert!(par == seq);
}

#[test]
fn policies_share_world_history_per_seed() {
    let history = |p: Policy| {
        let cfg = ScenarioConfig { horizon: 1000, seeds: vec![9], policy: p, ..Default::default() };
        run_scenario(&cfg, 9).unwrap().fires.iter().map(|f| (f.fire_id, f.x, f.y, f.ignition)).collect::<Vec<_>>()
    };
    let a = history(Policy::Proposed);
    assert!(!a.is_empty());
    assert_eq!(a, history(Policy::AdaptiveNogov));
    assert_eq!(a, history(Policy::Static));
}

#[test]
fn every_delivered_alert_is_decided_on_chain() {
    let cfg = attacked(1500);
    for seed in [4, 5] {
        let out = run_scenario(&cfg, seed).unwrap();
        let chain = out.chain.as_ref().unwrap();
        assert!(!out.alerts.is_empty());
        for a in &out.alerts {
            let ok = chain
                .blocks
                .iter()
                .filter(|b| b.commit_step <= a.decision_step)
                .flat_map(|b| &b.receipts)
                .any(|r| r.event_id == a.event_id && r.outcome == GateOutcome::Alert);
            assert!(ok, "alert {} has no committed decision", a.event_id);
        }
        assert_eq!(out.metrics.gate_violations, 0);
        assert_eq!(out.metrics.injected_delivered, 0);
    }
}

#[test]
fn config_roundtrip_and_unknown_keys() {
    let cfg = attacked(500);
    let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back.to_toml(), cfg.to_toml());
    assert!(ScenarioConfig::from_toml("horizon = 10\nbogus = 1\n").is_err());
    assert!(ScenarioConfig::from_toml("[world]\nwidht = 5\n").is_err());
    assert!(ScenarioConfig::from_toml("horizon = 0\n").and_then(|c| c.validate()).is_err());
}
