//! Domain types shared by every other module.
//!
//! The world frame is right-handed with +z up. Yaw is measured counterclockwise
//! from +x about the up axis and is kept in `[-π, π)`.

use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::motion::KalmanState;

/// Class id reserved for "background / no object".
pub const BACKGROUND_CLASS: u32 = 0;

/// Wraps an angle into `[-π, π)`.
pub fn normalize_yaw(angle: f64) -> Result<f64> {
    if !angle.is_finite() {
        return invalid(format!("yaw must be finite, got {angle}"));
    }
    Ok(wrap_angle(angle))
}

/// Infallible version of [`normalize_yaw`] for values already known to be finite.
pub(crate) fn wrap_angle(angle: f64) -> f64 {
    let mut r = (angle + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid may round up to exactly 2π
    if r >= PI {
        r -= 2.0 * PI;
    }
    if r < -PI {
        r += 2.0 * PI;
    }
    r
}

/// Oriented 3D box in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    /// Center (x, y, z) in meters.
    pub center: [f64; 3],
    /// (length, width, height) in meters. Length runs along the heading.
    pub dims: [f64; 3],
    /// Heading in radians, `[-π, π)`.
    pub yaw: f64,
}

impl Box3D {
    pub fn new(center: [f64; 3], dims: [f64; 3], yaw: f64) -> Result<Self> {
        let b = Self {
            center,
            dims,
            yaw: normalize_yaw(yaw)?,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::DegenerateBox(format!("non-finite center {:?}", self.center)));
        }
        if self.dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::DegenerateBox(format!(
                "dims must be strictly positive, got {:?}",
                self.dims
            )));
        }
        if !self.yaw.is_finite() || !(-PI..PI).contains(&self.yaw) {
            return invalid(format!("yaw {} outside [-π, π)", self.yaw));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Lowest and highest z of the box.
    pub fn z_range(&self) -> (f64, f64) {
        let half = 0.5 * self.dims[2];
        (self.center[2] - half, self.center[2] + half)
    }

    /// Same box shifted by `t`.
    pub fn translated(&self, t: [f64; 3]) -> Self {
        Self {
            center: [
                self.center[0] + t[0],
                self.center[1] + t[1],
                self.center[2] + t[2],
            ],
            ..*self
        }
    }

    /// Measurement vector (x, y, z, yaw, l, w, h) observed by the Kalman filter.
    pub fn measurement(&self) -> [f64; 7] {
        [
            self.center[0],
            self.center[1],
            self.center[2],
            self.yaw,
            self.dims[0],
            self.dims[1],
            self.dims[2],
        ]
    }
}

/// A single per-camera observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: Box3D,
    pub class_id: u32,
    pub score: f64,
    pub camera_id: usize,
    pub frame_index: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_hint: Option<[f64; 3]>,
    /// Ground-truth object this detection came from. Evaluation-only: the
    /// tracker never reads it. `None` for clutter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_id: Option<u64>,
}

impl Detection {
    pub fn new(bbox: Box3D, class_id: u32, score: f64, camera_id: usize, frame_index: u64) -> Self {
        Self {
            bbox,
            class_id,
            score,
            camera_id,
            frame_index,
            velocity_hint: None,
            gt_id: None,
        }
    }

    pub fn validate(&self, rig_size: usize) -> Result<()> {
        self.bbox.validate()?;
        if self.class_id == BACKGROUND_CLASS {
            return invalid("detection class_id 0 is reserved for background");
        }
        if !(0.0..=1.0).contains(&self.score) {
            return invalid(format!("detection score {} outside [0, 1]", self.score));
        }
        if self.camera_id >= rig_size {
            return invalid(format!(
                "camera_id {} out of range for a rig of {} cameras",
                self.camera_id, rig_size
            ));
        }
        if let Some(v) = self.velocity_hint {
            if v.iter().any(|c| !c.is_finite()) {
                return invalid("non-finite velocity hint");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Lost,
}

/// A persistent world-coordinate track shared across all cameras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracklet {
    pub track_id: u64,
    pub class_id: u32,
    pub kf: KalmanState,
    pub status: TrackStatus,
    pub hits: u32,
    pub misses: u32,
    pub last_seen_frame: u64,
    /// Highest detection score among the detections fused on the last hit.
    pub score: f64,
    pub history: Vec<(u64, Box3D)>,
}

impl Tracklet {
    pub fn current_box(&self) -> Box3D {
        self.kf.to_box()
    }
}

/// Pinhole camera with a rigid world-to-camera pose.
///
/// Camera axes follow the usual optical convention: +z along the optical axis,
/// +x to the right of the image, +y down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub camera_id: usize,
    /// Row-major rotation taking world vectors into the camera frame.
    pub rotation: [[f64; 3]; 3],
    /// Translation applied after rotation: `p_cam = R p_world + t`.
    pub translation: [f64; 3],
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub image_size: (u32, u32),
    pub max_range: f64,
}

impl CameraModel {
    /// Camera at `position` looking horizontally along `heading` (radians, world frame).
    pub fn looking_along(
        camera_id: usize,
        position: [f64; 3],
        heading: f64,
        fov_deg: f64,
        image_size: (u32, u32),
        max_range: f64,
    ) -> Self {
        let (s, c) = heading.sin_cos();
        // rows: camera x (right), camera y (down), camera z (forward) expressed in world
        let rotation = [[s, -c, 0.0], [0.0, 0.0, -1.0], [c, s, 0.0]];
        let translation = [
            -(rotation[0][0] * position[0] + rotation[0][1] * position[1] + rotation[0][2] * position[2]),
            -(rotation[1][0] * position[0] + rotation[1][1] * position[1] + rotation[1][2] * position[2]),
            -(rotation[2][0] * position[0] + rotation[2][1] * position[1] + rotation[2][2] * position[2]),
        ];
        let half_w = 0.5 * image_size.0 as f64;
        let fx = half_w / (0.5 * fov_deg.to_radians()).tan();
        Self {
            camera_id,
            rotation,
            translation,
            fx,
            fy: fx,
            cx: half_w,
            cy: 0.5 * image_size.1 as f64,
            image_size,
            max_range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rotation;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[i][k] * r[j][k]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > 1e-9 {
                    return invalid(format!("camera {} rotation is not orthonormal", self.camera_id));
                }
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if (det - 1.0).abs() > 1e-9 {
            return invalid(format!("camera {} rotation has determinant {det}", self.camera_id));
        }
        if !(self.fx > 0.0 && self.fy > 0.0 && self.max_range > 0.0) {
            return invalid(format!("camera {} has non-positive intrinsics or range", self.camera_id));
        }
        Ok(())
    }

    /// World point expressed in the camera frame.
    pub fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        let mut out = self.translation;
        for (i, o) in out.iter_mut().enumerate() {
            *o += r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2];
        }
        out
    }

    /// Camera center in world coordinates (`-Rᵀ t`).
    pub fn position(&self) -> [f64; 3] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            -(r[0][0] * t[0] + r[1][0] * t[1] + r[2][0] * t[2]),
            -(r[0][1] * t[0] + r[1][1] * t[1] + r[2][1] * t[2]),
            -(r[0][2] * t[0] + r[1][2] * t[1] + r[2][2] * t[2]),
        ]
    }
}

/// Everything observed by the rig at one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameBundle {
    pub frame_index: u64,
    pub timestamp: f64,
    pub detections: Vec<Detection>,
    pub rig: Vec<CameraModel>,
}

impl FrameBundle {
    /// Builds a bundle with detections put into canonical order.
    pub fn new(frame_index: u64, timestamp: f64, detections: Vec<Detection>, rig: Vec<CameraModel>) -> Self {
        let mut f = Self {
            frame_index,
            timestamp,
            detections,
            rig,
        };
        f.sort_detections();
        f
    }

    /// Orders detections by camera, then descending score, then box contents.
    pub fn sort_detections(&mut self) {
        self.detections.sort_by(detection_order);
    }

    pub fn num_cameras(&self) -> usize {
        self.rig.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.timestamp.is_finite() {
            return invalid("non-finite frame timestamp");
        }
        for cam in &self.rig {
            cam.validate()?;
        }
        for d in &self.detections {
            d.validate(self.rig.len())?;
        }
        if self
            .detections
            .windows(2)
            .any(|w| detection_order(&w[0], &w[1]) == Ordering::Greater)
        {
            return invalid(format!("frame {}: detections are not in canonical order", self.frame_index));
        }
        Ok(())
    }
}

fn detection_order(a: &Detection, b: &Detection) -> Ordering {
    a.camera_id
        .cmp(&b.camera_id)
        .then_with(|| b.score.total_cmp(&a.score))
        .then_with(|| a.class_id.cmp(&b.class_id))
        .then_with(|| {
            a.bbox
                .center
                .iter()
                .chain(a.bbox.dims.iter())
                .chain(std::iter::once(&a.bbox.yaw))
                .zip(b.bbox.center.iter().chain(b.bbox.dims.iter()).chain(std::iter::once(&b.bbox.yaw)))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| a.gt_id.cmp(&b.gt_id))
}
