//! Score a tracker run with CLEAR MOT and the recall-averaged metrics, and
//! print the same table the `fota eval` command shows.

use fota::cli::eval_table;
use fota::metrics::{evaluate, hyp_frames, EvalConfig};
use fota::scenario::{generate, ScenarioConfig};
use fota::tracker::{run, TrackerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = generate(&ScenarioConfig::default().with_seed(1))?;
    let results = run(&scenario.frames, &TrackerConfig::default())?;
    for match_dist in [1.0, 2.0] {
        let report = evaluate(&scenario.gt, &hyp_frames(&results), &EvalConfig { match_dist, ..EvalConfig::default() })?;
        println!("match distance {match_dist} m");
        print!("{}", eval_table(&report));
        println!();
    }
    Ok(())
}
