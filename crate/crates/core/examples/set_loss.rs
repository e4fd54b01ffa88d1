//! Set-prediction loss for one frame of a query-based tracker: a track query
//! continuing object 7, object queries competing for a newly visible object,
//! and a query with no object left to claim.

use fota::model::Box3D;
use fota::setloss::{match_queries, query_losses, set_prediction_loss, GroundTruthTrack, LossWeights, QueryKind, QueryPrediction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let car = |x: f64, y: f64| Box3D::new([x, y, 0.8], [4.5, 1.9, 1.6], 0.0);
    let gts = vec![
        GroundTruthTrack { track_id: 7, class_id: 1, box_t: car(10.0, 0.0)?, visible_t: true, visible_prev: true },
        GroundTruthTrack { track_id: 9, class_id: 1, box_t: car(20.0, 4.0)?, visible_t: true, visible_prev: false },
    ];
    let preds = vec![
        QueryPrediction { bbox: car(10.4, 0.1)?, class_probs: vec![0.1, 0.8, 0.05, 0.05], query_kind: QueryKind::TrackQuery { prev_track_id: 7 } },
        QueryPrediction { bbox: car(26.0, 4.0)?, class_probs: vec![0.3, 0.6, 0.05, 0.05], query_kind: QueryKind::ObjectQuery },
        QueryPrediction { bbox: car(20.5, 3.8)?, class_probs: vec![0.2, 0.7, 0.05, 0.05], query_kind: QueryKind::ObjectQuery },
    ];
    let w = LossWeights::default();
    let matching = match_queries(&gts, &preds, &w)?;
    for ((k, m), l) in matching.iter().enumerate().zip(query_losses(&gts, &preds, &matching, &w)?) {
        let target = m.map_or("background".to_owned(), |g| format!("object {}", gts[g].track_id));
        println!("query {k} -> {target:<11} loss {l:+.4}");
    }
    println!("total {:+.4}", set_prediction_loss(&gts, &preds, &matching, &w)?);
    Ok(())
}
