//! One-to-one versus one-to-many association on the default six-camera scene.
//!
//! Run with `cargo run --release --example km_vs_fota -- [seeds]`.

use fota::metrics::{evaluate, hyp_frames, EvalConfig};
use fota::scenario::{generate, ScenarioConfig};
use fota::tracker::{run, Association, DistanceMetric, TrackerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    for metric in DistanceMetric::ALL {
        for seed in 0..seeds {
            let scenario = generate(&ScenarioConfig::default().with_seed(seed))?;
            let mut line = format!("{:<12} seed {seed:<3}", metric.name());
            for association in [Association::Fota, Association::KuhnMunkres] {
                let cfg = TrackerConfig::new(metric, association);
                let results = run(&scenario.frames, &cfg)?;
                let report = evaluate(&scenario.gt, &hyp_frames(&results), &EvalConfig::default())?;
                line += &format!(
                    "  {:>4}: IDS {:>4} MOTA {:>6.3} AMOTA {:.3} FP {:>5} FN {:>5}",
                    association.name(),
                    report.ids,
                    report.mota,
                    report.amota,
                    report.fp,
                    report.fn_
                );
            }
            println!("{line}");
        }
    }
    Ok(())
}
