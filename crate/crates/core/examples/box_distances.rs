//! The box distances behind the association cost: BEV and volumetric GIoU,
//! and Mahalanobis distance under a Kalman innovation covariance.

use fota::geometry::{bev_footprint, d_giou_2d, d_giou_3d, measurement_residual, polygon_intersection_area, Mahalanobis};
use fota::model::{Box3D, Detection};
use fota::motion::{innovation_cov_dyn, kf_init, kf_predict, KalmanConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let box_at = |x: f64, z: f64, yaw: f64| Box3D::new([x, 0.0, z], [4.5, 1.9, 1.6], yaw);
    let car = |x: f64, y: f64, yaw: f64| Box3D::new([x, y, 0.8], [4.5, 1.9, 1.6], yaw);
    let a = car(0.0, 0.0, 0.0)?;
    println!("{:>6} {:>6} {:>6} {:>10} {:>8} {:>8}", "dx", "dz", "yaw", "overlap m2", "giou2d", "giou3d");
    for (dx, dz, yaw) in [(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (1.0, 0.8, 0.0), (2.0, 0.0, 0.3), (4.5, 0.0, 0.0), (10.0, 0.0, 1.2)] {
        let b = box_at(dx, 0.8 + dz, yaw)?;
        let overlap = polygon_intersection_area(&bev_footprint(&a), &bev_footprint(&b));
        println!(
            "{dx:>6.1} {dz:>6.1} {yaw:>6.1} {overlap:>10.3} {:>8.3} {:>8.3}",
            d_giou_2d(&a, &b)?,
            d_giou_3d(&a, &b)?
        );
    }

    // Mahalanobis distance measures offsets in units of predicted uncertainty
    let cfg = KalmanConfig::default();
    let state = kf_predict(&kf_init(&Detection::new(a, 1, 0.9, 0, 0), &cfg), 0.5, &cfg)?;
    let metric = Mahalanobis::new(&innovation_cov_dyn(&state, &cfg))?;
    let predicted = state.to_box();
    for (dx, dy) in [(0.5, 0.0), (0.0, 0.5), (2.0, 0.0), (0.0, 0.0)] {
        let residual = measurement_residual(&predicted, &car(dx, dy, 0.0)?);
        println!("detection at ({dx}, {dy}) -> mahalanobis {:.3}", metric.distance(&residual)?);
    }
    Ok(())
}
