//! Track one generated scene with both associators and show how often an
//! object seen by several cameras is reported once (one-to-many) or several
//! times (one-to-one).

use fota::metrics::{evaluate, hyp_frames, EvalConfig};
use fota::scenario::{generate, ScenarioConfig};
use fota::tracker::{run, Association, DistanceMetric, TrackerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let scenario = generate(&ScenarioConfig::default().with_seed(seed))?;
    let detections: usize = scenario.frames.iter().map(|f| f.detections.len()).sum();
    let (pairs, multi) = scenario.gt.iter().flat_map(|f| &f.objects).fold((0, 0), |(n, m), o| {
        (n + 1, m + usize::from(o.visible_cameras.len() > 1))
    });
    println!(
        "{} frames, {detections} detections, {:.1}% of object-frames seen by two or more cameras",
        scenario.frames.len(),
        100.0 * multi as f64 / pairs as f64
    );

    for association in [Association::Fota, Association::KuhnMunkres] {
        let cfg = TrackerConfig::new(DistanceMetric::Mahalanobis, association);
        let results = run(&scenario.frames, &cfg)?;
        let fused = results
            .iter()
            .flat_map(|r| &r.assignment.track_to_detections)
            .filter(|d| d.len() > 1)
            .count();
        let births: usize = results.iter().map(|r| r.diagnostics.num_births).sum();
        let report = evaluate(&scenario.gt, &hyp_frames(&results), &EvalConfig::default())?;
        println!(
            "{:>4}: {births:>4} births, {fused:>4} multi-view updates, IDS {:>4}, FP {:>4}, MOTA {:.3}",
            association.name(),
            report.ids,
            report.fp,
            report.mota
        );
    }
    Ok(())
}
