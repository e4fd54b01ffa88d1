//! Box overlap and the distance families used to build association costs.
//!
//! Overlaps are computed on bird's-eye-view footprints by convex clipping. The
//! 3D variant extrudes the BEV result by the axis-aligned vertical overlap; the
//! enclosing volume is the BEV hull area times the joint vertical span.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Box3D;

pub type Point2 = [f64; 2];

const DUP_EPS: f64 = 1e-12;
const AREA_EPS: f64 = 1e-12;

/// Counterclockwise convex polygon. Fewer than three vertices (or zero area)
/// marks a degenerate polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    pub vertices: Vec<Point2>,
}

impl ConvexPolygon {
    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).max(0.0)
    }

    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3 || self.area() <= AREA_EPS
    }
}

fn signed_area(v: &[Point2]) -> f64 {
    if v.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..v.len() {
        let a = v[i];
        let b = v[(i + 1) % v.len()];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

#[inline]
fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Footprint rectangle, front-left corner first, counterclockwise.
pub fn bev_footprint(b: &Box3D) -> ConvexPolygon {
    let (s, c) = b.yaw.sin_cos();
    let hl = 0.5 * b.dims[0];
    let hw = 0.5 * b.dims[1];
    let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
    let vertices = local
        .iter()
        .map(|p| [b.center[0] + c * p[0] - s * p[1], b.center[1] + s * p[0] + c * p[1]])
        .collect();
    ConvexPolygon { vertices }
}

/// Andrew's monotone chain. Collinear and duplicate points are dropped.
pub fn convex_hull(points: &[Point2]) -> Result<ConvexPolygon> {
    if points.is_empty() {
        return Err(Error::Invalid("convex hull of an empty point set".into()));
    }
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() <= DUP_EPS && (a[1] - b[1]).abs() <= DUP_EPS);
    if pts.len() < 3 {
        return Ok(ConvexPolygon { vertices: pts });
    }
    let mut lower: Vec<Point2> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    Ok(ConvexPolygon { vertices: lower })
}

/// Area of the intersection of two convex polygons (Sutherland-Hodgman clipping).
pub fn polygon_intersection_area(a: &ConvexPolygon, b: &ConvexPolygon) -> f64 {
    if a.is_degenerate() || b.is_degenerate() {
        return 0.0;
    }
    let mut output = a.vertices.clone();
    let clip = &b.vertices;
    let mut input = Vec::with_capacity(output.len() + clip.len());
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let e0 = clip[i];
        let e1 = clip[(i + 1) % clip.len()];
        std::mem::swap(&mut input, &mut output);
        output.clear();
        for k in 0..input.len() {
            let cur = input[k];
            let prev = input[(k + input.len() - 1) % input.len()];
            let cur_in = cross(e0, e1, cur) >= 0.0;
            let prev_in = cross(e0, e1, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(segment_line_intersection(prev, cur, e0, e1));
                }
                output.push(cur);
            } else if prev_in {
                output.push(segment_line_intersection(prev, cur, e0, e1));
            }
        }
    }
    let area = signed_area(&output).max(0.0);
    area.min(a.area()).min(b.area())
}

fn segment_line_intersection(p: Point2, q: Point2, e0: Point2, e1: Point2) -> Point2 {
    let dp = cross(e0, e1, p);
    let dq = cross(e0, e1, q);
    let t = dp / (dp - dq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

struct Overlap {
    intersection: f64,
    area_a: f64,
    area_b: f64,
    hull: f64,
}

fn bev_overlap(a: &Box3D, b: &Box3D) -> Result<Overlap> {
    let pa = bev_footprint(a);
    let pb = bev_footprint(b);
    let area_a = pa.area();
    let area_b = pb.area();
    if area_a <= AREA_EPS || area_b <= AREA_EPS {
        return Err(Error::DegenerateBox(format!(
            "zero-area footprint (dims {:?} / {:?})",
            a.dims, b.dims
        )));
    }
    // identical footprints must give distance exactly 0, clipping rounds
    if pa.vertices == pb.vertices {
        return Ok(Overlap {
            intersection: area_a,
            area_a,
            area_b,
            hull: area_a,
        });
    }
    let intersection = polygon_intersection_area(&pa, &pb);
    let mut all = pa.vertices;
    all.extend_from_slice(&pb.vertices);
    let hull = convex_hull(&all)?.area();
    Ok(Overlap {
        intersection,
        area_a,
        area_b,
        hull,
    })
}

fn giou_distance(intersection: f64, size_a: f64, size_b: f64, enclosing: f64) -> f64 {
    let union = size_a + size_b - intersection;
    let enclosing = enclosing.max(union);
    let giou = intersection / union - (enclosing - union) / enclosing;
    (1.0 - giou).clamp(0.0, 2.0)
}

/// `1 - GIoU` of the two BEV footprints.
pub fn d_giou_2d(a: &Box3D, b: &Box3D) -> Result<f64> {
    let o = bev_overlap(a, b)?;
    Ok(giou_distance(o.intersection, o.area_a, o.area_b, o.hull))
}

/// `1 - GIoU` of the boxes as volumes (BEV clipping extruded by vertical overlap).
pub fn d_giou_3d(a: &Box3D, b: &Box3D) -> Result<f64> {
    let o = bev_overlap(a, b)?;
    let (a_lo, a_hi) = a.z_range();
    let (b_lo, b_hi) = b.z_range();
    let z_overlap = (a_hi.min(b_hi) - a_lo.max(b_lo)).max(0.0);
    let z_span = a_hi.max(b_hi) - a_lo.min(b_lo);
    // heights from the same endpoints as the overlap keep d(a, a) exactly 0
    let vol_a = o.area_a * (a_hi - a_lo);
    let vol_b = o.area_b * (b_hi - b_lo);
    Ok(giou_distance(o.intersection * z_overlap, vol_a, vol_b, o.hull * z_span))
}

/// Mahalanobis metric for a fixed innovation covariance, factored once.
#[derive(Debug, Clone)]
pub struct Mahalanobis {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Mahalanobis {
    pub fn new(innovation_cov: &DMatrix<f64>) -> Result<Self> {
        if !innovation_cov.is_square() {
            return Err(Error::Invalid("innovation covariance must be square".into()));
        }
        let scale = innovation_cov.amax().max(1.0);
        let asym = (innovation_cov - innovation_cov.transpose()).amax();
        if !asym.is_finite() || asym > 1e-9 * scale {
            return Err(Error::FilterDivergence(format!(
                "innovation covariance is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let chol = innovation_cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::FilterDivergence("innovation covariance is not positive definite".into()))?;
        Ok(Self { chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// `sqrt(rᵀ S⁻¹ r)`.
    pub fn distance(&self, residual: &DVector<f64>) -> Result<f64> {
        if residual.len() != self.dim() {
            return Err(Error::Invalid(format!(
                "residual has {} entries, covariance is {}x{}",
                residual.len(),
                self.dim(),
                self.dim()
            )));
        }
        // ‖L⁻¹ r‖ with S = L Lᵀ
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(residual)
            .ok_or_else(|| Error::FilterDivergence("singular Cholesky factor".into()))?;
        Ok(z.norm())
    }
}

/// Mahalanobis distance between a predicted measurement and a detection vector.
pub fn d_mahalanobis(predicted_mean: &DVector<f64>, innovation_cov: &DMatrix<f64>, detection: &DVector<f64>) -> Result<f64> {
    if predicted_mean.len() != detection.len() {
        return Err(Error::Invalid("measurement vectors differ in length".into()));
    }
    Mahalanobis::new(innovation_cov)?.distance(&(detection - predicted_mean))
}

/// Detection-minus-prediction residual in (x, y, z, yaw, l, w, h) with the yaw
/// component wrapped into `[-π, π)`.
pub fn measurement_residual(predicted: &Box3D, detected: &Box3D) -> DVector<f64> {
    let p = predicted.measurement();
    let d = detected.measurement();
    let mut r = DVector::from_fn(7, |i, _| d[i] - p[i]);
    r[3] = crate::model::wrap_angle(r[3]);
    r
}
