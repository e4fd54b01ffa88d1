//! Set-prediction loss for joint detection and tracking queries.
//!
//! Track queries carry an identity from the previous frame and are bound to
//! that ground-truth track while it is still visible. Ground-truth tracks that
//! no track query claims are matched against object queries by optimal
//! transport. Each query then pays `-p(class) + box cost` when matched and
//! `-p(background)` otherwise.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fota::{self, TransportProblem};
use crate::geometry::d_giou_3d;
use crate::hungarian::min_cost_assignment;
use crate::model::{Box3D, BACKGROUND_CLASS};

pub const MATCH_GAMMA: f64 = 0.01;
pub const MATCH_MAX_ITERS: usize = 500;
pub const MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum QueryKind {
    ObjectQuery,
    TrackQuery { prev_track_id: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPrediction {
    #[serde(rename = "box")]
    pub bbox: Box3D,
    /// Distribution over classes, index 0 being background.
    pub class_probs: Vec<f64>,
    pub query_kind: QueryKind,
}

impl QueryPrediction {
    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        if self.class_probs.is_empty() || self.class_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return invalid("class probabilities must lie in [0, 1]");
        }
        let total: f64 = self.class_probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("class probabilities sum to {total}, not 1"));
        }
        Ok(())
    }

    pub fn prob(&self, class_id: u32) -> f64 {
        self.class_probs.get(class_id as usize).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthTrack {
    pub track_id: u64,
    pub class_id: u32,
    #[serde(rename = "box")]
    pub box_t: Box3D,
    pub visible_t: bool,
    pub visible_prev: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_l1: f64,
    pub lambda_giou: f64,
    /// Metric box parameters are divided by this before the L1 term.
    pub scene_scale: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_l1: 5.0,
            lambda_giou: 2.0,
            scene_scale: 50.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_l1 >= 0.0 && self.lambda_giou >= 0.0 && self.lambda_l1.is_finite() && self.lambda_giou.is_finite()) {
            return invalid("loss weights must be finite and >= 0");
        }
        if !(self.scene_scale.is_finite() && self.scene_scale > 0.0) {
            return invalid("scene_scale must be > 0");
        }
        Ok(())
    }
}

/// `(x, y, z, l, w, h) / scale` followed by `(sin yaw, cos yaw)`.
pub fn box_params(b: &Box3D, scale: f64) -> [f64; 8] {
    let (s, c) = b.yaw.sin_cos();
    [
        b.center[0] / scale,
        b.center[1] / scale,
        b.center[2] / scale,
        b.dims[0] / scale,
        b.dims[1] / scale,
        b.dims[2] / scale,
        s,
        c,
    ]
}

/// `λ_l1 ‖params(gt) - params(pred)‖₁ + λ_giou d_giou_3d(gt, pred)`.
pub fn box_cost(gt: &Box3D, pred: &Box3D, w: &LossWeights) -> Result<f64> {
    let a = box_params(gt, w.scene_scale);
    let b = box_params(pred, w.scene_scale);
    let l1: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    Ok(w.lambda_l1 * l1 + w.lambda_giou * d_giou_3d(gt, pred)?)
}

pub fn match_cost(gt: &GroundTruthTrack, pred: &QueryPrediction, w: &LossWeights) -> Result<f64> {
    Ok(-pred.prob(gt.class_id) + box_cost(&gt.box_t, &pred.bbox, w)?)
}

/// Ground-truth index for every prediction, `None` meaning background.
pub type Matching = Vec<Option<usize>>;

/// Two-step matching: track queries follow their identity, unclaimed visible
/// ground truth goes to object queries.
pub fn match_queries(gts: &[GroundTruthTrack], preds: &[QueryPrediction], w: &LossWeights) -> Result<Matching> {
    w.validate()?;
    for p in preds {
        p.validate()?;
    }
    let mut seen = HashSet::new();
    for p in preds {
        if let QueryKind::TrackQuery { prev_track_id } = p.query_kind {
            if !seen.insert(prev_track_id) {
                return invalid(format!("two track queries carry id {prev_track_id}"));
            }
        }
    }
    let mut matching: Matching = vec![None; preds.len()];
    let mut claimed = vec![false; gts.len()];
    for (k, p) in preds.iter().enumerate() {
        if let QueryKind::TrackQuery { prev_track_id } = p.query_kind {
            if let Some(g) = gts.iter().position(|g| g.track_id == prev_track_id && g.visible_t) {
                matching[k] = Some(g);
                claimed[g] = true;
            }
        }
    }
    let new_gts: Vec<usize> = (0..gts.len()).filter(|&g| gts[g].visible_t && !claimed[g]).collect();
    let object_queries: Vec<usize> = (0..preds.len())
        .filter(|&k| preds[k].query_kind == QueryKind::ObjectQuery)
        .collect();
    if new_gts.is_empty() || object_queries.is_empty() {
        return Ok(matching);
    }
    let mut cost = DMatrix::zeros(new_gts.len(), object_queries.len());
    for (r, &g) in new_gts.iter().enumerate() {
        for (c, &q) in object_queries.iter().enumerate() {
            cost[(r, c)] = match_cost(&gts[g], &preds[q], w)?;
        }
    }
    for (c, r) in transport_matching(&cost)?.into_iter().enumerate() {
        if let Some(r) = r {
            matching[object_queries[c]] = Some(new_gts[r]);
        }
    }
    Ok(matching)
}

/// One-to-one matching of every row or every column (whichever side is
/// smaller) by a sharp entropic plan. Columns take their heaviest row; rows
/// claimed twice keep the heavier column; anything left over is completed by
/// exact assignment on the residual, and the result never costs more than the
/// exact optimum.
fn transport_matching(cost: &DMatrix<f64>) -> Result<Vec<Option<usize>>> {
    let (n, m) = cost.shape();
    let problem = TransportProblem::uniform(cost.clone())
        .with_gamma(MATCH_GAMMA)
        .with_max_iters(MATCH_MAX_ITERS)
        .with_tol(MATCH_TOL);
    let plan = fota::sinkhorn(&problem)?;
    let assignment = fota::extract_assignment(&plan, 0.0);
    let mut col_row: Vec<Option<usize>> = vec![None; m];
    let mut row_col: Vec<Option<usize>> = vec![None; n];
    for j in 0..m {
        if let Some(i) = assignment.detection_to_track[j] {
            match row_col[i] {
                Some(other) if plan.plan[(i, other)] >= plan.plan[(i, j)] => {}
                Some(other) => {
                    col_row[other] = None;
                    row_col[i] = Some(j);
                    col_row[j] = Some(i);
                }
                None => {
                    row_col[i] = Some(j);
                    col_row[j] = Some(i);
                }
            }
        }
    }
    let target = n.min(m);
    let matched = row_col.iter().filter(|c| c.is_some()).count();
    if matched < target {
        let free_rows: Vec<usize> = (0..n).filter(|&i| row_col[i].is_none()).collect();
        let free_cols: Vec<usize> = (0..m).filter(|&j| col_row[j].is_none()).collect();
        let sub = DMatrix::from_fn(free_rows.len(), free_cols.len(), |a, b| cost[(free_rows[a], free_cols[b])]);
        for (a, b) in min_cost_assignment(&sub)?.into_iter().enumerate() {
            if let Some(b) = b {
                col_row[free_cols[b]] = Some(free_rows[a]);
            }
        }
    }
    // At γ = 0.01 the plan can stop short of the optimum (near-ties, slow
    // sweeps). The exact assignment replaces it only when strictly cheaper.
    let total = |col_row: &[Option<usize>]| -> f64 {
        col_row.iter().enumerate().filter_map(|(j, r)| r.map(|i| cost[(i, j)])).sum()
    };
    let mut exact: Vec<Option<usize>> = vec![None; m];
    for (i, j) in min_cost_assignment(cost)?.into_iter().enumerate() {
        if let Some(j) = j {
            exact[j] = Some(i);
        }
    }
    if total(&exact) < total(&col_row) {
        return Ok(exact);
    }
    Ok(col_row)
}

fn check_matching(gts: &[GroundTruthTrack], preds: &[QueryPrediction], matching: &Matching) -> Result<()> {
    if matching.len() != preds.len() {
        return invalid(format!("matching has {} entries for {} predictions", matching.len(), preds.len()));
    }
    let mut used = vec![false; gts.len()];
    for g in matching.iter().flatten() {
        if *g >= gts.len() {
            return invalid(format!("matching refers to ground truth {g} of {}", gts.len()));
        }
        if std::mem::replace(&mut used[*g], true) {
            return invalid(format!("ground truth {g} is matched twice"));
        }
    }
    Ok(())
}

/// Per-query loss: matched queries pay `-p(class) + box cost`, the rest `-p(background)`.
pub fn query_losses(gts: &[GroundTruthTrack], preds: &[QueryPrediction], matching: &Matching, w: &LossWeights) -> Result<Vec<f64>> {
    w.validate()?;
    check_matching(gts, preds, matching)?;
    preds
        .iter()
        .zip(matching)
        .map(|(p, m)| match m {
            Some(g) => match_cost(&gts[*g], p, w),
            None => Ok(-p.prob(BACKGROUND_CLASS)),
        })
        .collect()
}

pub fn set_prediction_loss(gts: &[GroundTruthTrack], preds: &[QueryPrediction], matching: &Matching, w: &LossWeights) -> Result<f64> {
    Ok(query_losses(gts, preds, matching, w)?.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(x: f64) -> Box3D {
        Box3D::new([x, 0.0, 0.0], [1.0, 1.0, 1.0], 0.0).unwrap()
    }

    fn gt(id: u64, x: f64) -> GroundTruthTrack {
        GroundTruthTrack {
            track_id: id,
            class_id: 1,
            box_t: unit_box(x),
            visible_t: true,
            visible_prev: false,
        }
    }

    fn pred(x: f64, probs: Vec<f64>, kind: QueryKind) -> QueryPrediction {
        QueryPrediction {
            bbox: unit_box(x),
            class_probs: probs,
            query_kind: kind,
        }
    }

    const OBJ: QueryKind = QueryKind::ObjectQuery;

    #[test]
    fn match_cost_examples() {
        let w = LossWeights::default();
        let sure = pred(0.0, vec![0.0, 1.0], OBJ);
        assert_eq!(match_cost(&gt(0, 0.0), &sure, &w).unwrap(), -1.0);
        let uniform = pred(0.0, vec![0.2; 5], OBJ);
        assert!((match_cost(&gt(0, 0.0), &uniform, &w).unwrap() + 0.2).abs() < 1e-12);
        let giou_only = LossWeights {
            lambda_l1: 0.0,
            lambda_giou: 2.0,
            ..w
        };
        // unit cubes three meters apart are 1.5 apart in GIoU distance
        let far = pred(3.0, vec![0.0, 1.0], OBJ);
        assert!((match_cost(&gt(0, 0.0), &far, &giou_only).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn loss_examples() {
        let w = LossWeights::default();
        let gts = vec![gt(0, 0.0)];
        let preds = vec![pred(0.0, vec![0.0, 1.0], OBJ), pred(9.0, vec![1.0, 0.0], OBJ)];
        let m = match_queries(&gts, &preds, &w).unwrap();
        assert_eq!(m, vec![Some(0), None]);
        assert_eq!(set_prediction_loss(&gts, &preds, &m, &w).unwrap(), -2.0);

        let giou_only = LossWeights {
            lambda_l1: 0.0,
            lambda_giou: 2.0,
            ..w
        };
        // adjacent unit cubes: GIoU distance 1, box term 2
        let adjacent = vec![pred(1.0, vec![0.0, 1.0], OBJ)];
        assert!((box_cost(&gts[0].box_t, &adjacent[0].bbox, &giou_only).unwrap() - 2.0).abs() < 1e-12);
        assert!((set_prediction_loss(&gts, &adjacent, &vec![Some(0)], &giou_only).unwrap() - 1.0).abs() < 1e-12);

        let lone = vec![pred(0.0, vec![0.25, 0.75], OBJ)];
        assert_eq!(set_prediction_loss(&[], &lone, &vec![None], &w).unwrap(), -0.25);
    }

    #[test]
    fn single_candidate_is_always_matched() {
        let m = match_queries(&[gt(0, 0.0)], &[pred(40.0, vec![0.9, 0.1], OBJ)], &LossWeights::default()).unwrap();
        assert_eq!(m, vec![Some(0)]);
    }

    #[test]
    fn crossed_costs_match_identity() {
        let w = LossWeights::default();
        let gts = vec![gt(0, 0.0), gt(1, 20.0)];
        let preds = vec![pred(0.1, vec![0.0, 1.0], OBJ), pred(19.9, vec![0.0, 1.0], OBJ)];
        assert_eq!(match_queries(&gts, &preds, &w).unwrap(), vec![Some(0), Some(1)]);
    }

    #[test]
    fn track_queries_are_forced() {
        let w = LossWeights::default();
        let mut g7 = gt(7, 0.0);
        g7.visible_prev = true;
        let gts = vec![g7, gt(8, 5.0)];
        let preds = vec![
            pred(30.0, vec![0.0, 1.0], QueryKind::TrackQuery { prev_track_id: 7 }),
            pred(0.0, vec![0.0, 1.0], OBJ),
        ];
        // the object query sits on gt 7, but gt 7 belongs to its track query
        assert_eq!(match_queries(&gts, &preds, &w).unwrap(), vec![Some(0), Some(1)]);

        let mut gone = gts.clone();
        gone[0].visible_t = false;
        assert_eq!(match_queries(&gone, &preds, &w).unwrap(), vec![None, Some(1)]);

        let dup = vec![preds[0].clone(), preds[0].clone()];
        assert!(match_queries(&gts, &dup, &w).is_err());
    }

    #[test]
    fn bad_inputs() {
        let w = LossWeights::default();
        assert!(match_queries(&[], &[pred(0.0, vec![0.5, 0.4], OBJ)], &w).is_err());
        let preds = vec![pred(0.0, vec![0.0, 1.0], OBJ)];
        assert!(set_prediction_loss(&[gt(0, 0.0)], &preds, &vec![Some(3)], &w).is_err());
        assert!(set_prediction_loss(&[gt(0, 0.0)], &preds, &vec![], &w).is_err());
    }
}
