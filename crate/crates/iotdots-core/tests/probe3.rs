// Temporary B-2 diagnostics; deleted before ship.

use iotdots_core::pipeline::*;
use iotdots_core::scenario::ThreatClass;

#[test]
#[ignore]
fn probe_b2() {
    let cfg = PipelineConfig { benign_runs: 8, threat_runs: 0, ..PipelineConfig::default() };
    let suite = OfficeSuite::new(cfg.clone()).expect("suite");
    let trained = train_office_suite(&suite).expect("train");

    let scenario = suite.threat_scenario(5, ThreatClass::Behavior2).expect("inject");
    let apps = iotdots_core::sim::prepare_apps(&scenario).unwrap();
    let output = iotdots_core::sim::run(&scenario, &apps, &suite.run_config()).unwrap();

    // Records near the unlock.
    let t0 = 86_400_000 + 12 * 3_600_000 + 55 * 60_000;
    let t1 = 86_400_000 + 13 * 3_600_000 + 10 * 60_000;
    let mut records: Vec<_> = output.logs.iter().filter(|r| r.ts >= t0 && r.ts <= t1).collect();
    records.sort_by_key(|r| r.ts);
    for r in records.iter().take(30) {
        eprintln!(
            "  {} {} {:?} {:?} {:?} ctrl={:?}",
            r.ts, r.app_id, r.kind, r.device_id, r.value, r.controller_id
        );
    }

    let (labeled, states) =
        states_for_run(&output, &trained.zones, &trained.schema, trained.params.dt_ms).unwrap();
    let _ = labeled;
    // Find the lock feature index.
    let lock_idx = trained.schema.features.iter().position(|f| f.device.as_deref() == Some("lock-main")).unwrap();
    eprintln!("lock feature index {lock_idx}");
    let tau = trained.params.tau.unwrap_or(trained.model.min_trained_prob() / 2.0);
    eprintln!("tau {tau:.3e}");
    for t in 0..states.len() - 1 {
        let ts = states[t].ts_range.0;
        if ts < t0 || ts > t1 {
            continue;
        }
        let i = states[t].bits;
        let j = states[t + 1].bits;
        let lock_bit = (j >> lock_idx) & 1;
        let p = trained.model.transition_prob(i, j);
        let seen = trained.model.seen(i, j);
        let flagged = p < tau || (trained.model.predict_next(i) != j && !seen);
        if i != j || flagged || lock_bit == 1 {
            eprintln!(
                "  t={} {:02}:{:02}:{:02} lock={} p={:.3e} seen={} flagged={}",
                t,
                (ts % 86_400_000) / 3_600_000,
                (ts % 3_600_000) / 60_000,
                (ts % 60_000) / 1000,
                lock_bit,
                p,
                seen,
                flagged
            );
        }
    }
}
