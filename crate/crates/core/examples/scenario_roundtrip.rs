//! Generate a scenario, write it to disk, read it back, and confirm the
//! files are a faithful and reproducible record.

use fota::scenario::{generate, load_frames, load_gt, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("fota-roundtrip-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let prefix = dir.join("scene");

    let mut config = ScenarioConfig::default().with_seed(42);
    config.num_frames = 30;
    let scenario = generate(&config)?;
    scenario.save(&prefix)?;

    let (header, frames) = load_frames(&dir.join("scene.frames.jsonl"))?;
    let (_, gt) = load_gt(&dir.join("scene.gt.jsonl"))?;
    println!("scenario {} with {} frames", header.scenario_id, frames.len());
    println!("frames identical after reload: {}", frames == scenario.frames);
    println!("ground truth identical after reload: {}", gt == scenario.gt);

    let again = generate(&config)?;
    println!("regenerated from the same seed is identical: {}", again.frames == scenario.frames);
    let clutter: usize = frames.iter().flat_map(|f| &f.detections).filter(|d| d.gt_id.is_none()).count();
    println!("{clutter} clutter detections carry no ground-truth id");
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
