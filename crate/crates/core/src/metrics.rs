//! Tracking metrics: CLEAR-MOT, recall-averaged AMOTA/AMOTP, and motion errors.
//!
//! Ground truth and hypotheses are matched per frame on 2D (ground-plane)
//! center distance, within class. A correspondence made on an earlier frame is
//! kept while it stays within `match_dist`; the remaining pairs are solved by
//! minimum-cost assignment.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hungarian::gated_assignment;
use crate::model::{wrap_angle, Box3D};
use crate::scenario::{GtFrame, GtObject};
use crate::tracker::{FrameResult, TrackOutput};

pub const DEFAULT_MATCH_DIST: f64 = 2.0;
pub const DEFAULT_N_POINTS: usize = 40;
pub const MIN_RECALL: f64 = 0.1;
pub const MT_RATIO: f64 = 0.8;
pub const ML_RATIO: f64 = 0.2;

/// Tracker outputs for one frame. Deserializes from a result line, ignoring
/// everything but the frame index and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypFrame {
    pub frame_index: u64,
    pub outputs: Vec<TrackOutput>,
}

impl From<&FrameResult> for HypFrame {
    fn from(r: &FrameResult) -> Self {
        Self {
            frame_index: r.frame_index,
            outputs: r.outputs.clone(),
        }
    }
}

pub fn hyp_frames(results: &[FrameResult]) -> Vec<HypFrame> {
    results.iter().map(HypFrame::from).collect()
}

/// Counts and scores at one operating point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClearMot {
    pub num_gt: usize,
    pub num_matches: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub ids: usize,
    pub frag: usize,
    pub num_gt_tracks: usize,
    pub mt: usize,
    pub ml: usize,
    pub mota: f64,
    pub motp: f64,
    pub recall: f64,
    pub motar: f64,
}

/// One matched ground-truth/hypothesis pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub frame_index: u64,
    pub gt_id: u64,
    pub track_id: u64,
    pub gt_box: Box3D,
    pub gt_velocity: [f64; 3],
    pub pred_box: Box3D,
    pub pred_velocity: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionErrors {
    pub ate: f64,
    pub ase: f64,
    pub aoe: f64,
    pub ave: f64,
    pub num_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_id: u32,
    #[serde(flatten)]
    pub clear: ClearMot,
    pub amota: f64,
    pub amotp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub amota: f64,
    pub amotp: f64,
    pub motar: f64,
    pub mota: f64,
    pub motp: f64,
    pub recall: f64,
    pub mt: usize,
    pub ml: usize,
    pub ids: usize,
    pub frag: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub num_gt: usize,
    pub num_matches: usize,
    pub motion: MotionErrors,
    pub per_class: Vec<ClassReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub match_dist: f64,
    pub n_points: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            match_dist: DEFAULT_MATCH_DIST,
            n_points: DEFAULT_N_POINTS,
        }
    }
}

fn dist2d(a: &Box3D, b: &Box3D) -> f64 {
    (a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1])
}

/// Pairs hypothesis frames with ground-truth frames by index. Ground-truth
/// frames without a hypothesis frame count as empty output.
fn align<'a>(gt: &'a [GtFrame], hyp: &'a [HypFrame]) -> Result<Vec<(&'a GtFrame, &'a [TrackOutput])>> {
    let mut by_index: HashMap<u64, &[TrackOutput]> = HashMap::new();
    let known: BTreeSet<u64> = gt.iter().map(|g| g.frame_index).collect();
    for h in hyp {
        if !known.contains(&h.frame_index) {
            return invalid(format!("hypothesis frame {} has no ground truth", h.frame_index));
        }
        if by_index.insert(h.frame_index, &h.outputs).is_some() {
            return invalid(format!("hypothesis frame {} appears twice", h.frame_index));
        }
    }
    if gt.windows(2).any(|w| w[0].frame_index >= w[1].frame_index) {
        return invalid("ground-truth frames must be strictly increasing");
    }
    Ok(gt
        .iter()
        .map(|g| (g, by_index.get(&g.frame_index).copied().unwrap_or(&[])))
        .collect())
}

struct Accumulated {
    clear: ClearMot,
    pairs: Vec<MatchedPair>,
    /// Scores of matched hypotheses, in match order.
    tp_scores: Vec<f64>,
}

fn accumulate(frames: &[(&GtFrame, Vec<&TrackOutput>)], match_dist: f64) -> Result<Accumulated> {
    let mut last_match: HashMap<u64, u64> = HashMap::new();
    // gt id -> (present frames, matched frames, was matched at previous presence, ever matched)
    let mut life: BTreeMap<u64, (usize, usize, bool, bool)> = BTreeMap::new();
    let mut clear = ClearMot::default();
    let mut pairs = Vec::new();
    let mut tp_scores = Vec::new();
    let mut dist_sum = 0.0;

    for (g, outs) in frames {
        let objs: &[GtObject] = &g.objects;
        clear.num_gt += objs.len();
        let valid = |o: &GtObject, h: &TrackOutput| o.class_id == h.class_id && dist2d(&o.bbox, &h.bbox) <= match_dist;

        let mut gt_to_hyp: Vec<Option<usize>> = vec![None; objs.len()];
        let mut hyp_taken = vec![false; outs.len()];
        // keep last frame's correspondences that are still valid
        for (a, o) in objs.iter().enumerate() {
            if let Some(&tid) = last_match.get(&o.gt_id) {
                if let Some(b) = (0..outs.len()).find(|&b| !hyp_taken[b] && outs[b].track_id == tid && valid(o, outs[b])) {
                    gt_to_hyp[a] = Some(b);
                    hyp_taken[b] = true;
                }
            }
        }
        let free_gt: Vec<usize> = (0..objs.len()).filter(|&a| gt_to_hyp[a].is_none()).collect();
        let free_hyp: Vec<usize> = (0..outs.len()).filter(|&b| !hyp_taken[b]).collect();
        if !free_gt.is_empty() && !free_hyp.is_empty() {
            let blocked = match_dist + 1.0;
            let cost = DMatrix::from_fn(free_gt.len(), free_hyp.len(), |r, c| {
                let (o, h) = (&objs[free_gt[r]], outs[free_hyp[c]]);
                if valid(o, h) {
                    dist2d(&o.bbox, &h.bbox)
                } else {
                    blocked
                }
            });
            for (r, c) in gated_assignment(&cost, match_dist)?.into_iter().enumerate() {
                if let Some(c) = c {
                    gt_to_hyp[free_gt[r]] = Some(free_hyp[c]);
                    hyp_taken[free_hyp[c]] = true;
                }
            }
        }

        for (a, o) in objs.iter().enumerate() {
            let entry = life.entry(o.gt_id).or_insert((0, 0, false, false));
            entry.0 += 1;
            match gt_to_hyp[a] {
                Some(b) => {
                    let h = outs[b];
                    clear.num_matches += 1;
                    dist_sum += dist2d(&o.bbox, &h.bbox);
                    if let Some(prev) = last_match.insert(o.gt_id, h.track_id) {
                        if prev != h.track_id {
                            clear.ids += 1;
                        }
                    }
                    if entry.3 && !entry.2 {
                        clear.frag += 1;
                    }
                    entry.1 += 1;
                    entry.2 = true;
                    entry.3 = true;
                    tp_scores.push(h.score);
                    pairs.push(MatchedPair {
                        frame_index: g.frame_index,
                        gt_id: o.gt_id,
                        track_id: h.track_id,
                        gt_box: o.bbox,
                        gt_velocity: o.velocity,
                        pred_box: h.bbox,
                        pred_velocity: h.velocity,
                    });
                }
                None => {
                    clear.fn_ += 1;
                    entry.2 = false;
                }
            }
        }
        clear.fp += hyp_taken.iter().filter(|t| !**t).count();
    }

    clear.num_gt_tracks = life.len();
    for (present, matched, _, _) in life.values() {
        let ratio = *matched as f64 / *present as f64;
        if ratio >= MT_RATIO {
            clear.mt += 1;
        }
        if ratio < ML_RATIO {
            clear.ml += 1;
        }
    }
    let p = clear.num_gt as f64;
    let errors = (clear.fp + clear.fn_ + clear.ids) as f64;
    clear.mota = if clear.num_gt == 0 { if errors == 0.0 { 1.0 } else { 0.0 } } else { 1.0 - errors / p };
    clear.motp = if clear.num_matches == 0 { 0.0 } else { dist_sum / clear.num_matches as f64 };
    clear.recall = if clear.num_gt == 0 { 0.0 } else { clear.num_matches as f64 / p };
    clear.motar = motar(&clear);
    Ok(Accumulated { clear, pairs, tp_scores })
}

/// Recall-normalized MOTA, clipped at 0; zero when nothing is matched.
pub fn motar(c: &ClearMot) -> f64 {
    if c.num_matches == 0 || c.num_gt == 0 {
        return 0.0;
    }
    let p = c.num_gt as f64;
    let r = c.recall;
    let v = 1.0 - ((c.ids + c.fp + c.fn_) as f64 - (1.0 - r) * p) / (r * p);
    v.max(0.0)
}

fn select<'a>(
    aligned: &[(&'a GtFrame, &'a [TrackOutput])],
    class: Option<u32>,
    min_score: Option<f64>,
) -> Vec<(GtFrame, Vec<&'a TrackOutput>)> {
    aligned
        .iter()
        .map(|(g, outs)| {
            let gf = GtFrame {
                frame_index: g.frame_index,
                timestamp: g.timestamp,
                objects: g.objects.iter().filter(|o| class.is_none_or(|c| o.class_id == c)).cloned().collect(),
            };
            let hs = outs
                .iter()
                .filter(|h| class.is_none_or(|c| h.class_id == c) && min_score.is_none_or(|s| h.score >= s))
                .collect();
            (gf, hs)
        })
        .collect()
}

fn run_clear(selected: &[(GtFrame, Vec<&TrackOutput>)], match_dist: f64) -> Result<Accumulated> {
    let frames: Vec<(&GtFrame, Vec<&TrackOutput>)> = selected.iter().map(|(g, h)| (g, h.clone())).collect();
    accumulate(&frames, match_dist)
}

/// CLEAR-MOT at the operating point that keeps every hypothesis.
pub fn clear_mot(gt: &[GtFrame], hyp: &[HypFrame], match_dist: f64) -> Result<ClearMot> {
    let aligned = align(gt, hyp)?;
    Ok(run_clear(&select(&aligned, None, None), match_dist)?.clear)
}

/// Matched pairs at the keep-everything operating point.
pub fn matched_pairs(gt: &[GtFrame], hyp: &[HypFrame], match_dist: f64) -> Result<Vec<MatchedPair>> {
    let aligned = align(gt, hyp)?;
    Ok(run_clear(&select(&aligned, None, None), match_dist)?.pairs)
}

/// Recall targets of the sweep: `n_points` evenly spaced in `[0, 1]`, those
/// below [`MIN_RECALL`] dropped. A single point means "keep everything".
pub fn recall_targets(n_points: usize) -> Vec<f64> {
    if n_points <= 1 {
        return vec![];
    }
    (0..n_points)
        .map(|k| k as f64 / (n_points - 1) as f64)
        .filter(|r| *r >= MIN_RECALL - 1e-12)
        .collect()
}

/// `(amota, amotp, motar)` over a score sweep.
///
/// For a recall target `r` the score threshold is the score of the
/// `⌈r·P⌉`-th best matched hypothesis of the full run (`P` ground-truth
/// boxes); CLEAR-MOT is re-run with hypotheses at or above it. Targets the
/// full run cannot reach contribute MOTAR 0 and MOTP `match_dist`. With
/// `n_points = 1` the sweep is the single keep-everything point.
pub fn amota_amotp(gt: &[GtFrame], hyp: &[HypFrame], match_dist: f64, n_points: usize) -> Result<(f64, f64, f64)> {
    let aligned = align(gt, hyp)?;
    sweep(&aligned, None, match_dist, n_points)
}

fn sweep(aligned: &[(&GtFrame, &[TrackOutput])], class: Option<u32>, match_dist: f64, n_points: usize) -> Result<(f64, f64, f64)> {
    let full = run_clear(&select(aligned, class, None), match_dist)?;
    let p = full.clear.num_gt;
    let targets = recall_targets(n_points);
    if targets.is_empty() {
        let motp = if full.clear.num_matches == 0 { match_dist } else { full.clear.motp };
        return Ok((full.clear.motar, motp, full.clear.motar));
    }
    let mut scores = full.tp_scores.clone();
    scores.sort_by(|a, b| b.total_cmp(a));
    let mut motar_sum = 0.0;
    let mut motp_sum = 0.0;
    let mut cache: HashMap<u64, (f64, f64)> = HashMap::new();
    for r in &targets {
        let needed = (r * p as f64 - 1e-9).ceil().max(1.0) as usize;
        if p == 0 || needed > scores.len() {
            motp_sum += match_dist;
            continue;
        }
        let threshold = scores[needed - 1];
        let (m, t) = match cache.get(&threshold.to_bits()) {
            Some(v) => *v,
            None => {
                let c = run_clear(&select(aligned, class, Some(threshold)), match_dist)?.clear;
                let v = (c.motar, if c.num_matches == 0 { match_dist } else { c.motp });
                cache.insert(threshold.to_bits(), v);
                v
            }
        };
        motar_sum += m;
        motp_sum += t;
    }
    let n = targets.len() as f64;
    Ok((motar_sum / n, motp_sum / n, full.clear.motar))
}

/// Mean translation (2D), scale (1 - IoU of aligned boxes), orientation
/// (absolute wrapped yaw difference) and velocity (2D) errors.
pub fn motion_errors(pairs: &[MatchedPair]) -> MotionErrors {
    if pairs.is_empty() {
        return MotionErrors::default();
    }
    let n = pairs.len() as f64;
    let mut e = MotionErrors {
        num_pairs: pairs.len(),
        ..MotionErrors::default()
    };
    for p in pairs {
        e.ate += dist2d(&p.gt_box, &p.pred_box);
        e.ase += 1.0 - aligned_iou(&p.gt_box.dims, &p.pred_box.dims);
        e.aoe += wrap_angle(p.pred_box.yaw - p.gt_box.yaw).abs();
        e.ave += (p.pred_velocity[0] - p.gt_velocity[0]).hypot(p.pred_velocity[1] - p.gt_velocity[1]);
    }
    e.ate /= n;
    e.ase /= n;
    e.aoe /= n;
    e.ave /= n;
    e
}

fn aligned_iou(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let inter: f64 = (0..3).map(|k| a[k].min(b[k])).product();
    let union = a.iter().product::<f64>() + b.iter().product::<f64>() - inter;
    inter / union
}

/// Full report: CLEAR-MOT at the keep-everything point, the recall sweep,
/// motion errors, and a per-class breakdown.
pub fn evaluate(gt: &[GtFrame], hyp: &[HypFrame], cfg: &EvalConfig) -> Result<MetricReport> {
    if !(cfg.match_dist.is_finite() && cfg.match_dist > 0.0) {
        return invalid("match_dist must be > 0");
    }
    if cfg.n_points == 0 {
        return invalid("n_points must be >= 1");
    }
    let aligned = align(gt, hyp)?;
    let full = run_clear(&select(&aligned, None, None), cfg.match_dist)?;
    let (amota, amotp, motar) = sweep(&aligned, None, cfg.match_dist, cfg.n_points)?;
    let classes: BTreeSet<u32> = aligned
        .iter()
        .flat_map(|(g, outs)| g.objects.iter().map(|o| o.class_id).chain(outs.iter().map(|h| h.class_id)))
        .collect();
    let mut per_class = Vec::new();
    for c in classes {
        let clear = run_clear(&select(&aligned, Some(c), None), cfg.match_dist)?.clear;
        let (amota, amotp, _) = sweep(&aligned, Some(c), cfg.match_dist, cfg.n_points)?;
        per_class.push(ClassReport {
            class_id: c,
            clear,
            amota,
            amotp,
        });
    }
    let c = &full.clear;
    Ok(MetricReport {
        amota,
        amotp,
        motar,
        mota: c.mota,
        motp: c.motp,
        recall: c.recall,
        mt: c.mt,
        ml: c.ml,
        ids: c.ids,
        frag: c.frag,
        fp: c.fp,
        fn_: c.fn_,
        num_gt: c.num_gt,
        num_matches: c.num_matches,
        motion: motion_errors(&full.pairs),
        per_class,
    })
}

/// Column order of the comparison tables.
pub const TABLE_COLUMNS: [&str; 10] = ["AMOTA", "AMOTP", "MOTAR", "MOTA", "MOTP", "MT", "ML", "IDS", "FRAG", "FPS"];

impl MetricReport {
    /// Cells in [`TABLE_COLUMNS`] order.
    pub fn table_cells(&self, fps: Option<f64>) -> Vec<String> {
        vec![
            format!("{:.3}", self.amota),
            format!("{:.3}", self.amotp),
            format!("{:.3}", self.motar),
            format!("{:.3}", self.mota),
            format!("{:.3}", self.motp),
            self.mt.to_string(),
            self.ml.to_string(),
            self.ids.to_string(),
            self.frag.to_string(),
            fps.map_or_else(|| "-".to_string(), |f| format!("{f:.1}")),
        ]
    }
}

/// Right-aligned plain-text table; the first column is left-aligned.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (k, cell) in r.iter().enumerate().take(cols) {
            width[k] = width[k].max(cell.chars().count());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut out = String::new();
        for (k, cell) in cells.enumerate() {
            let pad = width[k] - cell.chars().count();
            if k == 0 {
                out.push_str(cell);
                out.push_str(&" ".repeat(pad));
            } else {
                out.push_str("  ");
                out.push_str(&" ".repeat(pad));
                out.push_str(cell);
            }
        }
        out.trim_end().to_string() + "\n"
    };
    let mut text = line(&mut header.iter().copied());
    for r in rows {
        text.push_str(&line(&mut r.iter().map(String::as_str)));
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x: f64) -> Box3D {
        Box3D::new([x, 0.0, 0.8], [4.5, 1.9, 1.6], 0.0).unwrap()
    }

    fn gt_obj(id: u64, x: f64) -> GtObject {
        GtObject {
            gt_id: id,
            class_id: 1,
            bbox: bx(x),
            velocity: [1.0, 0.0, 0.0],
            visible_cameras: vec![0],
        }
    }

    fn out(id: u64, x: f64, score: f64) -> TrackOutput {
        TrackOutput {
            track_id: id,
            class_id: 1,
            bbox: bx(x),
            score,
            velocity: [1.0, 0.0, 0.0],
        }
    }

    fn single_object(n: u64) -> Vec<GtFrame> {
        (0..n)
            .map(|t| GtFrame {
                frame_index: t,
                timestamp: t as f64,
                objects: vec![gt_obj(0, t as f64)],
            })
            .collect()
    }

    fn perfect(gt: &[GtFrame]) -> Vec<HypFrame> {
        gt.iter()
            .map(|g| HypFrame {
                frame_index: g.frame_index,
                outputs: g.objects.iter().map(|o| out(o.gt_id + 100, o.bbox.center[0], 1.0)).collect(),
            })
            .collect()
    }

    #[test]
    fn perfect_hypothesis() {
        let gt = single_object(10);
        let c = clear_mot(&gt, &perfect(&gt), 2.0).unwrap();
        assert_eq!((c.mota, c.motp, c.ids, c.frag), (1.0, 0.0, 0, 0));
        assert_eq!(c.mt, 1);
        let (amota, amotp, _) = amota_amotp(&gt, &perfect(&gt), 2.0, 40).unwrap();
        assert_eq!(amota, 1.0);
        assert_eq!(amotp, 0.0);
    }

    #[test]
    fn id_switch_halfway() {
        let gt = single_object(10);
        let hyp: Vec<HypFrame> = (0..10)
            .map(|t| HypFrame {
                frame_index: t,
                outputs: vec![out(if t < 5 { 1 } else { 2 }, t as f64, 1.0)],
            })
            .collect();
        let c = clear_mot(&gt, &hyp, 2.0).unwrap();
        assert_eq!(c.ids, 1);
        assert_eq!(c.frag, 0);
        assert!((c.mota - 0.9).abs() < 1e-12);
    }

    #[test]
    fn empty_hypothesis() {
        let gt = single_object(4);
        let c = clear_mot(&gt, &[], 2.0).unwrap();
        assert_eq!(c.mota, 0.0);
        assert_eq!(c.recall, 0.0);
        assert_eq!(c.ml, 1);
        let (amota, amotp, _) = amota_amotp(&gt, &[], 2.0, 40).unwrap();
        assert_eq!(amota, 0.0);
        assert_eq!(amotp, 2.0);
    }

    #[test]
    fn gap_counts_a_fragment() {
        let gt = single_object(6);
        let hyp: Vec<HypFrame> = (0..6)
            .filter(|t| *t != 2 && *t != 3)
            .map(|t| HypFrame {
                frame_index: t,
                outputs: vec![out(1, t as f64, 1.0)],
            })
            .collect();
        let c = clear_mot(&gt, &hyp, 2.0).unwrap();
        assert_eq!((c.frag, c.ids, c.fn_), (1, 0, 2));
    }

    #[test]
    fn sticky_match_survives_a_closer_rival() {
        let gt = single_object(3);
        let hyp = vec![
            HypFrame {
                frame_index: 0,
                outputs: vec![out(1, 0.5, 1.0)],
            },
            HypFrame {
                frame_index: 1,
                outputs: vec![out(1, 2.5, 1.0), out(2, 1.0, 1.0)],
            },
            HypFrame {
                frame_index: 2,
                outputs: vec![out(1, 2.0, 1.0)],
            },
        ];
        let c = clear_mot(&gt, &hyp, 2.0).unwrap();
        assert_eq!((c.ids, c.fp), (0, 1));
    }

    #[test]
    fn cross_class_never_matches() {
        let gt = single_object(1);
        let mut h = out(1, 0.0, 1.0);
        h.class_id = 2;
        let c = clear_mot(&gt, &[HypFrame { frame_index: 0, outputs: vec![h] }], 2.0).unwrap();
        assert_eq!((c.num_matches, c.fp, c.fn_), (0, 1, 1));
    }

    #[test]
    fn single_point_sweep_is_the_operating_point() {
        let gt = single_object(8);
        let mut hyp = perfect(&gt);
        hyp[3].outputs.clear();
        hyp[5].outputs.push(out(9, 40.0, 0.3));
        let c = clear_mot(&gt, &hyp, 2.0).unwrap();
        let (amota, _, motar_v) = amota_amotp(&gt, &hyp, 2.0, 1).unwrap();
        assert_eq!(amota, c.motar);
        assert_eq!(motar_v, c.motar);
        assert!((c.motar - (1.0 - 1.0 / 7.0)).abs() < 1e-12);
    }

    #[test]
    fn motion_error_examples() {
        let pair = |pred: Box3D, vel: [f64; 3]| MatchedPair {
            frame_index: 0,
            gt_id: 0,
            track_id: 0,
            gt_box: bx(0.0),
            gt_velocity: [1.0, 0.0, 0.0],
            pred_box: pred,
            pred_velocity: vel,
        };
        let e = motion_errors(&[pair(bx(0.0), [1.0, 0.0, 0.0])]);
        assert_eq!((e.ate, e.ase, e.aoe, e.ave), (0.0, 0.0, 0.0, 0.0));
        let e = motion_errors(&[pair(bx(1.0), [1.0, 0.0, 0.0])]);
        assert_eq!((e.ate, e.ase, e.aoe), (1.0, 0.0, 0.0));
        let mut turned = bx(0.0);
        turned.yaw = std::f64::consts::FRAC_PI_2;
        let e = motion_errors(&[pair(turned, [1.0, 3.0, 0.0])]);
        assert!((e.aoe - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert_eq!(e.ave, 3.0);
        let mut half = bx(0.0);
        half.dims[0] = 2.25;
        assert!((motion_errors(&[pair(half, [1.0, 0.0, 0.0])]).ase - 0.5).abs() < 1e-12);
    }

    #[test]
    fn misaligned_frames_are_rejected() {
        let gt = single_object(2);
        let stray = HypFrame {
            frame_index: 7,
            outputs: vec![],
        };
        assert!(clear_mot(&gt, &[stray], 2.0).is_err());
    }

    #[test]
    fn table_alignment() {
        let t = render_table(&["", "A", "BB"], &[vec!["x".into(), "1".into(), "22".into()], vec!["long".into(), "333".into(), "4".into()]]);
        assert_eq!(t, "        A  BB\nx       1  22\nlong  333   4\n");
    }
}
