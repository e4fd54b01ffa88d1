//! Constant-velocity Kalman filter following a car through noisy detections.
//!
//! Prints the position error of the raw detections and of the filtered
//! estimate, and the shrinking position variance.

use fota::model::{Box3D, Detection};
use fota::motion::{kf_init, kf_predict, kf_update, KalmanConfig};
use fota::scenario::ScenarioRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = KalmanConfig::default();
    let mut rng = ScenarioRng::new(4);
    let (dt, v) = (0.5, [6.0, 0.5]);
    let truth = |t: f64| [3.0 + v[0] * t, -1.0 + v[1] * t];
    let observe = |k: u64, rng: &mut ScenarioRng| -> fota::error::Result<Detection> {
        let [x, y] = truth(k as f64 * dt);
        let b = Box3D::new([x + rng.normal(0.3), y + rng.normal(0.3), 0.8], [4.5, 1.9, 1.6], rng.normal(0.05))?;
        Ok(Detection::new(b, 1, 0.9, 0, k))
    };

    let mut state = kf_init(&observe(0, &mut rng)?, &cfg);
    println!("{:>5} {:>10} {:>10} {:>8} {:>8}", "frame", "det err", "kf err", "var x", "speed");
    for k in 1..=20u64 {
        state = kf_predict(&state, dt, &cfg)?;
        let det = observe(k, &mut rng)?;
        state = kf_update(&state, &det, &cfg)?.0;
        let [x, y] = truth(k as f64 * dt);
        let err = |c: [f64; 3]| (c[0] - x).hypot(c[1] - y);
        let vel = state.velocity();
        println!(
            "{k:>5} {:>10.3} {:>10.3} {:>8.4} {:>8.3}",
            err(det.bbox.center),
            err(state.to_box().center),
            state.covariance[(0, 0)],
            vel[0].hypot(vel[1])
        );
    }
    Ok(())
}
