//! Synthetic multi-camera driving scenes.
//!
//! An ego vehicle drives along +x carrying a rig of pinhole cameras mounted at
//! a common point. Objects travel in lanes parallel to the ego path; an object
//! that drifts too far from the ego is replaced by a new one, under a new
//! ground-truth id, at the edge from which its lane drifts into view. Every frame each camera reports a noisy detection for
//! every object whose center it sees, drops some at random, and adds clutter.
//!
//! # Random numbers
//!
//! All draws come from one SplitMix64 stream seeded with `config.seed`:
//!
//! * uniform `[0, 1)`: `(next_u64 >> 11) · 2⁻⁵³`
//! * uniform `[a, b)`: `a + (b - a) · u`
//! * normal: Box-Muller, `sqrt(-2 ln(1 - u₁)) · cos(2π u₂)`, one pair per draw
//! * Poisson(λ): Knuth's product-of-uniforms method
//!
//! Draw order is part of the format: changing it changes every scenario.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::model::{wrap_angle, Box3D, CameraModel, Detection, FrameBundle};

pub const SCHEMA_VERSION: u32 = 1;

/// Yaw offsets of the default six-camera rig: three facing forward, three back.
pub const DEFAULT_YAW_OFFSETS_DEG: [f64; 6] = [0.0, 55.0, -55.0, 180.0, 110.0, -110.0];

const LANE_SPACING: f64 = 4.0;
const LANE_HALF_SPAN: f64 = 30.0;
const SPAWN_HALF_SPAN: f64 = 50.0;
const DESPAWN_HALF_SPAN: f64 = 56.0;
const MIN_GAP: f64 = 12.0;
const WIGGLE_AMPLITUDE: f64 = 0.03;
const WIGGLE_PERIOD_S: f64 = 20.0;

/// Class id with its nominal (length, width, height).
pub const CLASSES: [(u32, [f64; 3]); 3] = [(1, [4.5, 1.9, 1.6]), (2, [0.7, 0.7, 1.8]), (3, [8.0, 2.5, 3.0])];

/// Portable pseudo-random stream; see the module docs for the conversions.
#[derive(Debug, Clone)]
pub struct ScenarioRng {
    inner: SplitMix64,
}

impl ScenarioRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: SplitMix64::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn normal(&mut self, sigma: f64) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        sigma * (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    pub fn poisson(&mut self, lambda: f64) -> u64 {
        if lambda <= 0.0 {
            return 0;
        }
        let limit = (-lambda).exp();
        let mut k = 0;
        let mut p = self.uniform();
        while p > limit {
            k += 1;
            p *= self.uniform();
        }
        k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigConfig {
    /// Horizontal field of view of every camera, degrees.
    pub fov_deg: f64,
    /// Camera headings relative to the ego heading, degrees. Evenly spaced
    /// when absent, or the six-camera layout when `num_cameras` is 6.
    pub yaw_offsets_deg: Option<Vec<f64>>,
    pub max_range: f64,
    pub image_size: (u32, u32),
    pub mount_height: f64,
}

impl Default for RigConfig {
    fn default() -> Self {
        Self {
            fov_deg: 70.0,
            yaw_offsets_deg: None,
            max_range: 50.0,
            image_size: (1600, 900),
            mount_height: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSigma {
    pub pos: f64,
    pub dims: f64,
    pub yaw: f64,
    /// Noise on the velocity hint attached to each detection, m/s.
    pub velocity: f64,
}

impl Default for NoiseSigma {
    fn default() -> Self {
        Self {
            pos: 0.3,
            dims: 0.1,
            yaw: 0.2,
            velocity: 0.5,
        }
    }
}

impl NoiseSigma {
    pub fn zero() -> Self {
        Self {
            pos: 0.0,
            dims: 0.0,
            yaw: 0.0,
            velocity: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub num_cameras: usize,
    pub rig: RigConfig,
    pub num_objects: usize,
    pub num_frames: usize,
    pub dt: f64,
    pub object_speed_range: [f64; 2],
    pub detection_noise_sigma: NoiseSigma,
    pub miss_rate: f64,
    /// Expected false detections per camera per frame.
    pub clutter_rate: f64,
    pub ego_speed: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            num_cameras: 6,
            rig: RigConfig::default(),
            num_objects: 20,
            num_frames: 200,
            dt: 0.5,
            object_speed_range: [3.5, 6.5],
            detection_noise_sigma: NoiseSigma::default(),
            miss_rate: 0.1,
            clutter_rate: 0.5,
            ego_speed: 5.0,
        }
    }
}

impl ScenarioConfig {
    /// No noise, no misses, no clutter.
    pub fn noise_free(mut self) -> Self {
        self.detection_noise_sigma = NoiseSigma::zero();
        self.miss_rate = 0.0;
        self.clutter_rate = 0.0;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn yaw_offsets_deg(&self) -> Vec<f64> {
        match &self.rig.yaw_offsets_deg {
            Some(v) => v.clone(),
            None if self.num_cameras == DEFAULT_YAW_OFFSETS_DEG.len() => DEFAULT_YAW_OFFSETS_DEG.to_vec(),
            None => (0..self.num_cameras).map(|k| 360.0 * k as f64 / self.num_cameras as f64).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, ok: bool| if ok { Ok(()) } else { invalid(format!("{name} is out of range")) };
        field("num_cameras", self.num_cameras >= 1)?;
        if let Some(v) = &self.rig.yaw_offsets_deg {
            if v.len() != self.num_cameras {
                return invalid(format!(
                    "rig.yaw_offsets_deg has {} entries for {} cameras",
                    v.len(),
                    self.num_cameras
                ));
            }
            field("rig.yaw_offsets_deg", v.iter().all(|x| x.is_finite()))?;
        }
        field("rig.fov_deg", self.rig.fov_deg > 0.0 && self.rig.fov_deg < 180.0)?;
        field("rig.max_range", self.rig.max_range.is_finite() && self.rig.max_range > 0.0)?;
        field("rig.image_size", self.rig.image_size.0 > 0 && self.rig.image_size.1 > 0)?;
        field("rig.mount_height", self.rig.mount_height.is_finite())?;
        field("dt", self.dt.is_finite() && self.dt > 0.0)?;
        let [lo, hi] = self.object_speed_range;
        field("object_speed_range", lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi)?;
        let n = &self.detection_noise_sigma;
        field(
            "detection_noise_sigma",
            [n.pos, n.dims, n.yaw, n.velocity].iter().all(|s| s.is_finite() && *s >= 0.0),
        )?;
        field("miss_rate", (0.0..1.0).contains(&self.miss_rate))?;
        field("clutter_rate", self.clutter_rate.is_finite() && self.clutter_rate >= 0.0)?;
        field("ego_speed", self.ego_speed.is_finite())?;
        Ok(())
    }

    /// Stable identifier derived from the full configuration.
    pub fn scenario_id(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        format!("scn-{}", hex::encode(&digest[..8]))
    }
}

/// One ground-truth object at one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtObject {
    pub gt_id: u64,
    pub class_id: u32,
    #[serde(rename = "box")]
    pub bbox: Box3D,
    pub velocity: [f64; 3],
    /// Cameras whose frustum contains the object's center, ascending.
    pub visible_cameras: Vec<usize>,
}

/// Ground truth for one frame: objects visible in at least one camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtFrame {
    pub frame_index: u64,
    pub timestamp: f64,
    pub objects: Vec<GtObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_id: String,
    pub config: ScenarioConfig,
    pub gt: Vec<GtFrame>,
    pub frames: Vec<FrameBundle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileHeader {
    pub schema_version: u32,
    pub scenario_id: String,
    pub config: ScenarioConfig,
}

/// True when `point` projects strictly inside the image, strictly in front of
/// the camera, and no farther than `max_range` from the camera center.
pub fn frustum_contains(cam: &CameraModel, point: [f64; 3]) -> bool {
    let p = cam.to_camera(point);
    if !(p[2] > 0.0) {
        return false;
    }
    let range = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if range > cam.max_range {
        return false;
    }
    let u = cam.fx * p[0] / p[2] + cam.cx;
    let v = cam.fy * p[1] / p[2] + cam.cy;
    let (w, h) = (cam.image_size.0 as f64, cam.image_size.1 as f64);
    u > 0.0 && u < w && v > 0.0 && v < h
}

/// Rig pose at ego position `ego_x`.
pub fn rig_at(config: &ScenarioConfig, ego_x: f64) -> Vec<CameraModel> {
    config
        .yaw_offsets_deg()
        .iter()
        .enumerate()
        .map(|(k, off)| {
            CameraModel::looking_along(
                k,
                [ego_x, 0.0, config.rig.mount_height],
                off.to_radians(),
                config.rig.fov_deg,
                config.rig.image_size,
                config.rig.max_range,
            )
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Mover {
    gt_id: u64,
    class_id: u32,
    dims: [f64; 3],
    lane: usize,
    pos: [f64; 3],
    speed: f64,
    phase: f64,
}

impl Mover {
    fn heading(&self, time: f64) -> f64 {
        WIGGLE_AMPLITUDE * (2.0 * PI * time / WIGGLE_PERIOD_S + self.phase).sin()
    }

    fn velocity(&self, time: f64) -> [f64; 3] {
        let (s, c) = self.heading(time).sin_cos();
        [self.speed * c, self.speed * s, 0.0]
    }

    fn bbox(&self, time: f64) -> Box3D {
        Box3D {
            center: self.pos,
            dims: self.dims,
            yaw: wrap_angle(self.heading(time)),
        }
    }
}

fn lane_y(lane: usize) -> f64 {
    -LANE_HALF_SPAN + LANE_SPACING * lane as f64
}

fn num_lanes() -> usize {
    (2.0 * LANE_HALF_SPAN / LANE_SPACING) as usize + 1
}

struct World {
    movers: Vec<Mover>,
    lane_speed: Vec<f64>,
    next_gt_id: u64,
}

impl World {
    fn gap_ok(&self, lane: usize, x: f64) -> bool {
        self.movers.iter().all(|m| m.lane != lane || (m.pos[0] - x).abs() >= MIN_GAP)
    }

    /// Places a new object at relative x drawn by `draw_x(rng, lane_speed)`;
    /// gives up after 50 tries.
    fn spawn(&mut self, rng: &mut ScenarioRng, ego_x: f64, draw_x: impl Fn(&mut ScenarioRng, f64) -> f64) {
        let class = CLASSES[rng.index(CLASSES.len())];
        let phase = rng.range(0.0, 2.0 * PI);
        for _ in 0..50 {
            let lane = rng.index(self.lane_speed.len());
            let x = ego_x + draw_x(rng, self.lane_speed[lane]);
            if self.gap_ok(lane, x) {
                let (class_id, dims) = class;
                self.movers.push(Mover {
                    gt_id: self.next_gt_id,
                    class_id,
                    dims,
                    lane,
                    pos: [x, lane_y(lane), 0.5 * dims[2]],
                    speed: self.lane_speed[lane],
                    phase,
                });
                self.next_gt_id += 1;
                return;
            }
        }
    }
}

fn visible_cameras(rig: &[CameraModel], point: [f64; 3]) -> Vec<usize> {
    rig.iter().filter(|c| frustum_contains(c, point)).map(|c| c.camera_id).collect()
}

fn noisy_detection(
    rng: &mut ScenarioRng,
    m: &Mover,
    time: f64,
    cam: usize,
    frame: u64,
    noise: &NoiseSigma,
) -> Detection {
    let truth = m.bbox(time);
    let mut center = truth.center;
    for c in center.iter_mut() {
        *c += rng.normal(noise.pos);
    }
    let mut dims = truth.dims;
    for d in dims.iter_mut() {
        *d = (*d + rng.normal(noise.dims)).max(0.1);
    }
    let yaw = wrap_angle(truth.yaw + rng.normal(noise.yaw));
    let v = m.velocity(time);
    let hint = [v[0] + rng.normal(noise.velocity), v[1] + rng.normal(noise.velocity), 0.0];
    let score = rng.range(0.4, 1.0);
    let mut det = Detection::new(Box3D { center, dims, yaw }, m.class_id, score, cam, frame);
    det.velocity_hint = Some(hint);
    det.gt_id = Some(m.gt_id);
    det
}

fn clutter_detection(rng: &mut ScenarioRng, cam: &CameraModel, config: &ScenarioConfig, frame: u64) -> Option<Detection> {
    let heading = config.yaw_offsets_deg()[cam.camera_id].to_radians();
    let half_fov = 0.5 * config.rig.fov_deg.to_radians();
    let origin = cam.position();
    for _ in 0..20 {
        let (class_id, dims) = CLASSES[rng.index(CLASSES.len())];
        let range = rng.range(5.0, 0.9 * config.rig.max_range);
        let angle = heading + rng.range(-0.9 * half_fov, 0.9 * half_fov);
        let yaw = rng.range(-PI, PI);
        let score = rng.range(0.05, 0.6);
        let center = [origin[0] + range * angle.cos(), origin[1] + range * angle.sin(), 0.5 * dims[2]];
        if frustum_contains(cam, center) {
            return Some(Detection::new(Box3D { center, dims, yaw }, class_id, score, cam.camera_id, frame));
        }
    }
    None
}

/// Builds a scenario deterministically from its configuration.
pub fn generate(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ScenarioRng::new(config.seed);
    let [lo, hi] = config.object_speed_range;
    let lane_speed: Vec<f64> = (0..num_lanes()).map(|_| rng.range(lo, hi)).collect();
    let mut world = World {
        movers: Vec::new(),
        lane_speed,
        next_gt_id: 0,
    };
    for _ in 0..config.num_objects {
        world.spawn(&mut rng, 0.0, |r, _| r.range(-SPAWN_HALF_SPAN, SPAWN_HALF_SPAN));
    }

    let mut gt = Vec::with_capacity(config.num_frames);
    let mut frames = Vec::with_capacity(config.num_frames);
    for f in 0..config.num_frames {
        let time = f as f64 * config.dt;
        let ego_x = config.ego_speed * time;
        if f > 0 {
            let prev_time = time - config.dt;
            for m in world.movers.iter_mut() {
                let v = m.velocity(prev_time);
                m.pos[0] += v[0] * config.dt;
                m.pos[1] += v[1] * config.dt;
            }
            // respawn anything that drifted out of the scene at the edge it will
            // drift into view from: behind the ego when faster, ahead otherwise
            let ego_speed = config.ego_speed;
            let mut k = 0;
            while k < world.movers.len() {
                let rel = world.movers[k].pos[0] - ego_x;
                if rel.abs() > DESPAWN_HALF_SPAN {
                    world.movers.remove(k);
                    world.spawn(&mut rng, ego_x, move |r, speed| {
                        let edge = if speed > ego_speed { -SPAWN_HALF_SPAN } else { SPAWN_HALF_SPAN };
                        edge + r.range(-2.0, 2.0)
                    });
                } else {
                    k += 1;
                }
            }
        }

        let rig = rig_at(config, ego_x);
        let mut objects = Vec::new();
        let mut dets = Vec::new();
        for m in &world.movers {
            let bbox = m.bbox(time);
            let cams = visible_cameras(&rig, bbox.center);
            for &c in &cams {
                if rng.uniform() < config.miss_rate {
                    continue;
                }
                let d = noisy_detection(&mut rng, m, time, c, f as u64, &config.detection_noise_sigma);
                if frustum_contains(&rig[c], d.bbox.center) {
                    dets.push(d);
                }
            }
            if !cams.is_empty() {
                objects.push(GtObject {
                    gt_id: m.gt_id,
                    class_id: m.class_id,
                    bbox,
                    velocity: m.velocity(time),
                    visible_cameras: cams,
                });
            }
        }
        for cam in &rig {
            for _ in 0..rng.poisson(config.clutter_rate) {
                if let Some(d) = clutter_detection(&mut rng, cam, config, f as u64) {
                    dets.push(d);
                }
            }
        }
        objects.sort_by_key(|o| o.gt_id);
        gt.push(GtFrame {
            frame_index: f as u64,
            timestamp: time,
            objects,
        });
        frames.push(FrameBundle::new(f as u64, time, dets, rig));
    }
    Ok(Scenario {
        scenario_id: config.scenario_id(),
        config: config.clone(),
        gt,
        frames,
    })
}

pub fn frames_path(prefix: &Path) -> std::path::PathBuf {
    with_suffix(prefix, ".frames.jsonl")
}

pub fn gt_path(prefix: &Path) -> std::path::PathBuf {
    with_suffix(prefix, ".gt.jsonl")
}

fn with_suffix(prefix: &Path, suffix: &str) -> std::path::PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    s.into()
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn write_jsonl<H: Serialize, T: Serialize>(path: &Path, header: &H, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut text = serde_json::to_string(header)?;
    text.push('\n');
    w.write_all(text.as_bytes()).map_err(io_err(path))?;
    for r in rows {
        let mut text = serde_json::to_string(r)?;
        text.push('\n');
        w.write_all(text.as_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a header line followed by rows; errors name the file and 1-based line.
pub(crate) fn read_jsonl<H: for<'de> Deserialize<'de>, T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(H, Vec<T>)> {
    let file = File::open(path).map_err(io_err(path))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut header = None;
    let mut rows = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let n = k + 1;
        if line.trim().is_empty() {
            return Err(parse_err(n, "blank line".into()));
        }
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(|e| parse_err(n, format!("bad header: {e}")))?);
        } else {
            rows.push(serde_json::from_str(&line).map_err(|e| parse_err(n, e.to_string()))?);
        }
    }
    let header = header.ok_or_else(|| parse_err(1, "empty file, expected a header line".into()))?;
    Ok((header, rows))
}

fn check_header(h: &FileHeader, path: &Path) -> Result<()> {
    if h.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", h.schema_version),
        });
    }
    Ok(())
}

impl Scenario {
    pub fn header(&self) -> FileHeader {
        FileHeader {
            schema_version: SCHEMA_VERSION,
            scenario_id: self.scenario_id.clone(),
            config: self.config.clone(),
        }
    }

    /// Writes `<prefix>.frames.jsonl` and `<prefix>.gt.jsonl`.
    pub fn save(&self, prefix: &Path) -> Result<()> {
        write_jsonl(&frames_path(prefix), &self.header(), &self.frames)?;
        write_jsonl(&gt_path(prefix), &self.header(), &self.gt)
    }

    pub fn load(prefix: &Path) -> Result<Self> {
        let (fh, frames) = load_frames(&frames_path(prefix))?;
        let gpath = gt_path(prefix);
        let (gh, gt) = load_gt(&gpath)?;
        if fh.scenario_id != gh.scenario_id {
            return invalid(format!(
                "frames ({}) and ground truth ({}) belong to different scenarios",
                fh.scenario_id, gh.scenario_id
            ));
        }
        Ok(Self {
            scenario_id: fh.scenario_id,
            config: fh.config,
            gt,
            frames,
        })
    }

    /// Fraction of (object, frame) ground-truth pairs seen by two or more cameras.
    pub fn overlap_fraction(&self) -> f64 {
        let (multi, total) = self.gt.iter().flat_map(|f| &f.objects).fold((0usize, 0usize), |(m, t), o| {
            (m + usize::from(o.visible_cameras.len() >= 2), t + 1)
        });
        if total == 0 {
            0.0
        } else {
            multi as f64 / total as f64
        }
    }
}

pub fn load_frames(path: &Path) -> Result<(FileHeader, Vec<FrameBundle>)> {
    let (h, frames): (FileHeader, Vec<FrameBundle>) = read_jsonl(path)?;
    check_header(&h, path)?;
    for (k, f) in frames.iter().enumerate() {
        f.validate().map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: k + 2,
            message: e.to_string(),
        })?;
    }
    Ok((h, frames))
}

pub fn load_gt(path: &Path) -> Result<(FileHeader, Vec<GtFrame>)> {
    let (h, gt): (FileHeader, Vec<GtFrame>) = read_jsonl(path)?;
    check_header(&h, path)?;
    for (k, f) in gt.iter().enumerate() {
        for o in &f.objects {
            o.bbox.validate().map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: k + 2,
                message: format!("gt {}: {e}", o.gt_id),
            })?;
        }
    }
    Ok((h, gt))
}
