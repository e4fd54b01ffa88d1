//! Track-by-detection pipeline over multi-camera frames.
//!
//! One step: predict every live and recently lost track, price every
//! track/detection pair with a world-frame distance, associate, fuse the
//! assigned detections into their tracks, then birth and retire tracks.
//!
//! Two associators share the pipeline. [`Association::Fota`] lets one track
//! absorb detections of the same object from several cameras;
//! [`Association::KuhnMunkres`] is one-to-one, so every extra co-visible
//! detection births a duplicate track.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fota::{self, Assignment, TransportProblem};
use crate::geometry::{d_giou_2d, d_giou_3d, measurement_residual, Mahalanobis};
use crate::hungarian::gated_assignment;
use crate::model::{Box3D, CameraModel, Detection, FrameBundle, TrackStatus, Tracklet};
use crate::motion::{innovation_cov_dyn, kf_init, kf_predict, update_with_multiple, KalmanConfig};

/// Added to the gate for pairs that must not match; finite so the transport
/// kernel stays well defined.
pub const GATE_PENALTY: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    Mahalanobis,
    Giou2d,
    Giou3d,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 3] = [DistanceMetric::Mahalanobis, DistanceMetric::Giou2d, DistanceMetric::Giou3d];

    pub fn default_gate(self) -> f64 {
        match self {
            DistanceMetric::Mahalanobis => 11.07,
            DistanceMetric::Giou2d | DistanceMetric::Giou3d => 1.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DistanceMetric::Mahalanobis => "mahalanobis",
            DistanceMetric::Giou2d => "giou2d",
            DistanceMetric::Giou3d => "giou3d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Association {
    Fota,
    #[serde(rename = "km")]
    KuhnMunkres,
}

impl Association {
    pub fn name(self) -> &'static str {
        match self {
            Association::Fota => "fota",
            Association::KuhnMunkres => "km",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FotaParams {
    pub gamma: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub min_mass: f64,
    /// Dustbin cost; the active gate when absent.
    pub epsilon: Option<f64>,
}

impl Default for FotaParams {
    fn default() -> Self {
        Self {
            gamma: fota::DEFAULT_GAMMA,
            max_iters: fota::DEFAULT_MAX_ITERS,
            tol: fota::DEFAULT_TOL,
            min_mass: fota::DEFAULT_MIN_MASS,
            epsilon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lifecycle {
    /// Hits before a tentative track is reported. A birth fused from several
    /// cameras starts with one hit per camera; births on the first frame of a
    /// sequence are reported immediately.
    pub confirm_hits: u32,
    /// Consecutive misses a confirmed track survives before it is lost.
    pub max_misses: u32,
    /// Frames a lost track stays eligible to reclaim its id.
    pub rebirth_window_frames: u64,
    /// Detections from different cameras fused into one track, at birth or on
    /// update, lie within this center distance (meters) of its best one. FOTA only.
    pub fuse_dist: f64,
}

impl Default for Lifecycle {
    fn default() -> Self {
        Self {
            confirm_hits: 2,
            max_misses: 2,
            rebirth_window_frames: 10,
            fuse_dist: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub distance_metric: DistanceMetric,
    /// Metric-specific gate; the metric's default when absent.
    pub gate_threshold: Option<f64>,
    pub association: Association,
    pub fota: FotaParams,
    pub lifecycle: Lifecycle,
    pub kalman: KalmanConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            distance_metric: DistanceMetric::Mahalanobis,
            gate_threshold: None,
            association: Association::Fota,
            fota: FotaParams::default(),
            lifecycle: Lifecycle::default(),
            kalman: KalmanConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn new(distance_metric: DistanceMetric, association: Association) -> Self {
        Self {
            distance_metric,
            association,
            ..Self::default()
        }
    }

    pub fn gate(&self) -> f64 {
        self.gate_threshold.unwrap_or_else(|| self.distance_metric.default_gate())
    }

    pub fn epsilon(&self) -> f64 {
        self.fota.epsilon.unwrap_or_else(|| self.gate())
    }

    pub fn validate(&self) -> Result<()> {
        let gate = self.gate();
        if !(gate.is_finite() && gate > 0.0) {
            return invalid("gate_threshold must be finite and > 0");
        }
        if self.lifecycle.confirm_hits < 1 {
            return invalid("lifecycle.confirm_hits must be >= 1");
        }
        if !(self.lifecycle.fuse_dist.is_finite() && self.lifecycle.fuse_dist >= 0.0) {
            return invalid("lifecycle.fuse_dist must be >= 0");
        }
        let f = &self.fota;
        if !(f.gamma.is_finite() && f.gamma > 0.0) {
            return invalid("fota.gamma must be > 0");
        }
        if f.max_iters == 0 {
            return invalid("fota.max_iters must be >= 1");
        }
        if !(f.tol.is_finite() && f.tol > 0.0) {
            return invalid("fota.tol must be > 0");
        }
        if !(0.0..=1.0).contains(&f.min_mass) {
            return invalid("fota.min_mass must be in [0, 1]");
        }
        if let Some(e) = f.epsilon {
            if !(e.is_finite() && e >= 0.0) {
                return invalid("fota.epsilon must be >= 0");
            }
        }
        self.kalman.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LostTrack {
    pub track: Tracklet,
    /// Last frame at which the track may still be reclaimed.
    pub expires_after: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackerState {
    /// Tentative and confirmed tracks, in birth order.
    pub tracks: Vec<Tracklet>,
    pub next_track_id: u64,
    pub frame_index: Option<u64>,
    pub timestamp: Option<f64>,
    pub lost_pool: Vec<LostTrack>,
}

impl TrackerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn find(&self, track_id: u64) -> Option<&Tracklet> {
        self.tracks
            .iter()
            .chain(self.lost_pool.iter().map(|l| &l.track))
            .find(|t| t.track_id == track_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackOutput {
    pub track_id: u64,
    pub class_id: u32,
    #[serde(rename = "box")]
    pub bbox: Box3D,
    pub score: f64,
    pub velocity: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub num_births: usize,
    pub num_deaths: usize,
    pub num_rebirths: usize,
    pub solver_iterations: usize,
    pub marginal_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub frame_index: u64,
    pub outputs: Vec<TrackOutput>,
    /// Rows index `candidate_ids`; columns are the frame's detections.
    pub assignment: Assignment,
    /// Track id of each association row (live tracks, then the lost pool).
    pub candidate_ids: Vec<u64>,
    pub diagnostics: Diagnostics,
}

/// Distances between predicted tracks and detections. Cross-class pairs and
/// pairs beyond the gate cost `gate + GATE_PENALTY`.
pub fn build_cost_matrix(tracks: &[&Tracklet], dets: &[Detection], cfg: &TrackerConfig) -> Result<DMatrix<f64>> {
    let gate = cfg.gate();
    let blocked = gate + GATE_PENALTY;
    let mut cost = DMatrix::from_element(tracks.len(), dets.len(), blocked);
    for (i, track) in tracks.iter().enumerate() {
        let predicted = track.current_box();
        let maha = match cfg.distance_metric {
            DistanceMetric::Mahalanobis => Some(Mahalanobis::new(&innovation_cov_dyn(&track.kf, &cfg.kalman))?),
            _ => None,
        };
        for (j, det) in dets.iter().enumerate() {
            if det.class_id != track.class_id {
                continue;
            }
            let d = match cfg.distance_metric {
                DistanceMetric::Mahalanobis => maha
                    .as_ref()
                    .expect("factored above")
                    .distance(&measurement_residual(&predicted, &det.bbox))?,
                DistanceMetric::Giou2d => d_giou_2d(&predicted, &det.bbox)?,
                DistanceMetric::Giou3d => d_giou_3d(&predicted, &det.bbox)?,
            };
            if d <= gate {
                cost[(i, j)] = d;
            }
        }
    }
    Ok(cost)
}

fn within_range(rig: &[CameraModel], p: [f64; 3]) -> bool {
    rig.iter().any(|c| {
        let o = c.position();
        let d2: f64 = (0..3).map(|k| (p[k] - o[k]).powi(2)).sum();
        d2 <= c.max_range * c.max_range
    })
}

struct Associated {
    assignment: Assignment,
    iterations: usize,
    marginal_error: f64,
}

fn associate_km(cost: &DMatrix<f64>, gate: f64) -> Result<Associated> {
    let (n, m) = cost.shape();
    let rows = gated_assignment(cost, gate)?;
    let mut det_to_track = vec![None; m];
    for (i, j) in rows.into_iter().enumerate() {
        if let Some(j) = j {
            det_to_track[j] = Some(i);
        }
    }
    Ok(Associated {
        assignment: Assignment::from_detection_map(n, det_to_track),
        iterations: 0,
        marginal_error: 0.0,
    })
}

/// Transported mass: for each camera, the size of the largest one-to-one
/// in-gate matching between tracks and that camera's detections.
fn transported_fraction(cost: &DMatrix<f64>, dets: &[Detection], gate: f64) -> f64 {
    let n = cost.nrows();
    let mut cameras: Vec<usize> = dets.iter().map(|d| d.camera_id).collect();
    cameras.sort_unstable();
    cameras.dedup();
    cameras
        .into_iter()
        .map(|cam| {
            let cols: Vec<usize> = (0..dets.len()).filter(|&j| dets[j].camera_id == cam).collect();
            let sub = DMatrix::from_fn(n, cols.len(), |i, k| cost[(i, cols[k])]);
            fota::fraction_within_bound(&sub, &vec![1.0; n], &vec![1.0; cols.len()], gate)
        })
        .sum()
}

fn associate_fota(cost: &DMatrix<f64>, dets: &[Detection], num_cameras: usize, cfg: &TrackerConfig) -> Result<Associated> {
    let (n, m) = cost.shape();
    let gate = cfg.gate();
    let s = transported_fraction(cost, dets, gate);
    if s < 0.5 {
        return Ok(Associated {
            assignment: Assignment::empty(n, m),
            iterations: 0,
            marginal_error: 0.0,
        });
    }
    let problem = TransportProblem::new(cost.clone(), vec![num_cameras.max(1) as f64; n], vec![1.0; m])
        .with_s(s)
        .with_epsilon(cfg.epsilon())
        .with_gamma(cfg.fota.gamma)
        .with_max_iters(cfg.fota.max_iters)
        .with_tol(cfg.fota.tol);
    let (plan, mut assignment) = fota::solve_with(&problem, cfg.fota.min_mass)?;

    for j in 0..m {
        if let Some(i) = assignment.detection_to_track[j] {
            if cost[(i, j)] > gate {
                assignment.unmatch(j);
            }
        }
    }
    // a track keeps at most one detection per camera: the cheapest
    for i in 0..n {
        let mut keep: Vec<(usize, usize)> = Vec::new(); // (camera, detection)
        let mut drop = Vec::new();
        for &j in &assignment.track_to_detections[i] {
            let cam = dets[j].camera_id;
            match keep.iter_mut().find(|(c, _)| *c == cam) {
                Some(slot) => {
                    let cur = slot.1;
                    if cost[(i, j)] < cost[(i, cur)] || (cost[(i, j)] == cost[(i, cur)] && j < cur) {
                        drop.push(cur);
                        slot.1 = j;
                    } else {
                        drop.push(j);
                    }
                }
                None => keep.push((cam, j)),
            }
        }
        for j in drop {
            assignment.unmatch(j);
        }
    }
    // views fused into one track must agree with its cheapest detection
    for i in 0..n {
        let mine = &assignment.track_to_detections[i];
        let Some(&anchor) = mine.iter().min_by(|&&a, &&b| cost[(i, a)].total_cmp(&cost[(i, b)]).then(a.cmp(&b))) else {
            continue;
        };
        let far: Vec<usize> = mine
            .iter()
            .copied()
            .filter(|&j| center_distance(&dets[anchor].bbox, &dets[j].bbox) > cfg.lifecycle.fuse_dist)
            .collect();
        for j in far {
            assignment.unmatch(j);
        }
    }
    Ok(Associated {
        assignment,
        iterations: plan.iterations_used,
        marginal_error: plan.marginal_error,
    })
}

/// Groups unmatched detections into births. FOTA joins detections from
/// distinct cameras around the first (highest-ranked) one; KM births each.
fn birth_groups(unmatched: &[usize], dets: &[Detection], cfg: &TrackerConfig) -> Vec<Vec<usize>> {
    if cfg.association == Association::KuhnMunkres {
        return unmatched.iter().map(|&j| vec![j]).collect();
    }
    let merge = cfg.lifecycle.fuse_dist;
    let mut taken = vec![false; unmatched.len()];
    let mut groups = Vec::new();
    for a in 0..unmatched.len() {
        if taken[a] {
            continue;
        }
        taken[a] = true;
        let seed = &dets[unmatched[a]];
        let mut group = vec![unmatched[a]];
        let mut cams = vec![seed.camera_id];
        // closest candidate per other camera
        let mut candidates: Vec<(f64, usize)> = (a + 1..unmatched.len())
            .filter(|&b| !taken[b])
            .filter_map(|b| {
                let d = &dets[unmatched[b]];
                let dist = center_distance(&seed.bbox, &d.bbox);
                (d.class_id == seed.class_id && d.camera_id != seed.camera_id && dist <= merge).then_some((dist, b))
            })
            .collect();
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for (_, b) in candidates {
            let cam = dets[unmatched[b]].camera_id;
            if !cams.contains(&cam) {
                cams.push(cam);
                taken[b] = true;
                group.push(unmatched[b]);
            }
        }
        groups.push(group);
    }
    groups
}

fn center_distance(a: &Box3D, b: &Box3D) -> f64 {
    let dx = a.center[0] - b.center[0];
    let dy = a.center[1] - b.center[1];
    let dz = a.center[2] - b.center[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn best_score(dets: &[&Detection]) -> f64 {
    dets.iter().map(|d| d.score).fold(f64::NEG_INFINITY, f64::max)
}

/// Online tracker holding its configuration and state.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    state: TrackerState,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            state: TrackerState::new(),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn state(&self) -> &TrackerState {
        &self.state
    }

    pub fn into_state(self) -> TrackerState {
        self.state
    }

    /// Advances by one frame. On error the state is left untouched.
    pub fn step(&mut self, frame: &FrameBundle) -> Result<FrameResult> {
        let (state, result) = step(&self.state, frame, &self.config)?;
        self.state = state;
        Ok(result)
    }

    pub fn run<'a>(&mut self, frames: impl IntoIterator<Item = &'a FrameBundle>) -> Result<Vec<FrameResult>> {
        frames.into_iter().map(|f| self.step(f)).collect()
    }
}

/// Runs a fresh tracker over a frame sequence.
pub fn run<'a>(frames: impl IntoIterator<Item = &'a FrameBundle>, cfg: &TrackerConfig) -> Result<Vec<FrameResult>> {
    Tracker::new(cfg.clone())?.run(frames)
}

/// One-to-one variant of [`step`], whatever `cfg.association` says.
pub fn km_baseline_step(state: &TrackerState, frame: &FrameBundle, cfg: &TrackerConfig) -> Result<(TrackerState, FrameResult)> {
    let cfg = TrackerConfig {
        association: Association::KuhnMunkres,
        ..cfg.clone()
    };
    step(&state.clone(), frame, &cfg)
}

/// Pure tracker step.
pub fn step(state: &TrackerState, frame: &FrameBundle, cfg: &TrackerConfig) -> Result<(TrackerState, FrameResult)> {
    cfg.validate()?;
    frame.validate()?;
    if let Some(prev) = state.frame_index {
        if frame.frame_index <= prev {
            return invalid(format!("frame index {} does not follow {prev}", frame.frame_index));
        }
    }
    let t = frame.frame_index;
    let mut next = state.clone();

    // 1. predict
    if let Some(prev_ts) = state.timestamp {
        let dt = frame.timestamp - prev_ts;
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("timestamp {} does not advance past {prev_ts}", frame.timestamp));
        }
        for tr in next.tracks.iter_mut().chain(next.lost_pool.iter_mut().map(|l| &mut l.track)) {
            tr.kf = kf_predict(&tr.kf, dt, &cfg.kalman)?;
        }
    }

    // a lost track predicted beyond every camera's range has left the scene
    let before = next.lost_pool.len();
    next.lost_pool.retain(|l| within_range(&frame.rig, l.track.current_box().center));
    let exited = before - next.lost_pool.len();

    // 2. price
    let dets = &frame.detections;
    let num_live = next.tracks.len();
    let candidates: Vec<&Tracklet> = next.tracks.iter().chain(next.lost_pool.iter().map(|l| &l.track)).collect();
    let candidate_ids: Vec<u64> = candidates.iter().map(|c| c.track_id).collect();
    let cost = build_cost_matrix(&candidates, dets, cfg)?;
    drop(candidates);

    // 3. associate
    let (n, m) = cost.shape();
    let associated = if n == 0 || m == 0 {
        Associated {
            assignment: Assignment::empty(n, m),
            iterations: 0,
            marginal_error: 0.0,
        }
    } else {
        match cfg.association {
            Association::Fota => associate_fota(&cost, dets, frame.num_cameras(), cfg)?,
            Association::KuhnMunkres => associate_km(&cost, cfg.gate())?,
        }
    };
    let assignment = associated.assignment;
    debug_assert!(assignment.is_consistent());

    // 4. update matched, age the rest
    let mut diagnostics = Diagnostics {
        num_deaths: exited,
        solver_iterations: associated.iterations,
        marginal_error: associated.marginal_error,
        ..Diagnostics::default()
    };
    let mut matched_ids = Vec::new();
    let mut lost_pool = std::mem::take(&mut next.lost_pool);
    let mut live = std::mem::take(&mut next.tracks);
    let mut revived = Vec::new();
    for (row, det_ids) in assignment.track_to_detections.iter().enumerate() {
        if det_ids.is_empty() {
            continue;
        }
        let assigned: Vec<&Detection> = det_ids.iter().map(|&j| &dets[j]).collect();
        let track = if row < num_live {
            &mut live[row]
        } else {
            &mut lost_pool[row - num_live].track
        };
        let (kf, _) = update_with_multiple(&track.kf, &assigned, &cfg.kalman)?;
        track.kf = kf;
        track.hits += 1;
        track.misses = 0;
        track.last_seen_frame = t;
        track.score = best_score(&assigned);
        track.history.push((t, track.kf.to_box()));
        if track.status == TrackStatus::Tentative && track.hits >= cfg.lifecycle.confirm_hits {
            track.status = TrackStatus::Confirmed;
        }
        if row >= num_live {
            track.status = TrackStatus::Confirmed;
            revived.push(row - num_live);
            diagnostics.num_rebirths += 1;
        }
        matched_ids.push(track.track_id);
    }

    let mut kept = Vec::with_capacity(live.len());
    let mut newly_lost = Vec::new();
    for mut track in live {
        if matched_ids.contains(&track.track_id) {
            kept.push(track);
            continue;
        }
        track.misses += 1;
        match track.status {
            TrackStatus::Tentative => diagnostics.num_deaths += 1,
            _ if track.misses > cfg.lifecycle.max_misses => {
                track.status = TrackStatus::Lost;
                newly_lost.push(LostTrack {
                    expires_after: t + cfg.lifecycle.rebirth_window_frames,
                    track,
                });
            }
            _ => kept.push(track),
        }
    }

    let mut remaining_lost = Vec::with_capacity(lost_pool.len());
    for (k, mut lost) in lost_pool.into_iter().enumerate() {
        if revived.contains(&k) {
            kept.push(lost.track);
        } else if t >= lost.expires_after {
            diagnostics.num_deaths += 1;
        } else {
            lost.track.misses += 1;
            remaining_lost.push(lost);
        }
    }
    remaining_lost.extend(newly_lost);
    // revived tracks rejoin in id order so birth order stays stable
    kept.sort_by_key(|tr| tr.track_id);

    // 5. births
    let unmatched: Vec<usize> = (0..m).filter(|&j| assignment.detection_to_track[j].is_none()).collect();
    for group in birth_groups(&unmatched, dets, cfg) {
        let seed = &dets[group[0]];
        let mut kf = kf_init(seed, &cfg.kalman);
        if group.len() > 1 {
            let rest: Vec<&Detection> = group[1..].iter().map(|&j| &dets[j]).collect();
            kf = update_with_multiple(&kf, &rest, &cfg.kalman)?.0;
        }
        let members: Vec<&Detection> = group.iter().map(|&j| &dets[j]).collect();
        // each corroborating camera counts as one hit; the first frame of a
        // sequence has no history to vet births against, so they report at once
        let hits = group.len() as u32;
        let status = if hits >= cfg.lifecycle.confirm_hits || state.frame_index.is_none() {
            TrackStatus::Confirmed
        } else {
            TrackStatus::Tentative
        };
        kept.push(Tracklet {
            track_id: next.next_track_id,
            class_id: seed.class_id,
            history: vec![(t, kf.to_box())],
            kf,
            status,
            hits,
            misses: 0,
            last_seen_frame: t,
            score: best_score(&members),
        });
        next.next_track_id += 1;
        diagnostics.num_births += 1;
    }

    let outputs = kept
        .iter()
        .filter(|tr| tr.status == TrackStatus::Confirmed && tr.last_seen_frame == t)
        .map(|tr| TrackOutput {
            track_id: tr.track_id,
            class_id: tr.class_id,
            bbox: tr.kf.to_box(),
            score: tr.score,
            velocity: tr.kf.velocity(),
        })
        .collect();

    next.tracks = kept;
    next.lost_pool = remaining_lost;
    next.frame_index = Some(t);
    next.timestamp = Some(frame.timestamp);
    for tr in &next.tracks {
        tr.kf.check_covariance().map_err(|e| Error::FilterDivergence(format!("track {}: {e}", tr.track_id)))?;
    }

    Ok((
        next,
        FrameResult {
            frame_index: t,
            outputs,
            assignment,
            candidate_ids,
            diagnostics,
        },
    ))
}
