// Temporary full-scale dress rehearsal; deleted before ship.

use iotdots_core::pipeline::*;
use std::time::Instant;

#[test]
#[ignore]
fn probe_full_e2e() {
    let t0 = Instant::now();
    let report = run_e2e(PipelineConfig::default()).expect("e2e");
    eprintln!("e2e in {:?}", t0.elapsed());
    eprintln!("train {} benign-test {} threat {}", report.train_runs, report.benign_test_runs, report.threat_runs);
    eprintln!("windows evaluated {}", report.metrics.windows_evaluated);
    eprint!("{}", report.metrics.render_table());
    eprintln!("mean lines added {:.1}", report.overhead.mean_lines_added);
    // Determinism check.
    let t1 = Instant::now();
    let report2 = run_e2e(PipelineConfig::default()).expect("e2e 2");
    let a = serde_json::to_string(&report).unwrap();
    let b = serde_json::to_string(&report2).unwrap();
    eprintln!("second run in {:?}; byte-identical: {}", t1.elapsed(), a == b);
}
