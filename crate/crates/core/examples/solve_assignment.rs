//! Fractional assignment of two tracks and three detections, next to the
//! exact optimum of the same extended problem.
//!
//! Track 0 is seen by two cameras, so it should absorb two detections.

use fota::fota::{extract_assignment, lp_oracle, sinkhorn, TransportProblem, DEFAULT_MIN_MASS};
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cost = DMatrix::from_row_slice(2, 3, &[0.2, 0.3, 6.0, 7.0, 6.5, 0.4]);
    // track 0 may take two detections
    let problem = TransportProblem::new(cost, vec![2.0, 1.0], vec![1.0; 3]).with_epsilon(3.0);

    let plan = sinkhorn(&problem)?;
    println!(
        "sinkhorn: {} sweeps, marginal error {:.1e}, converged {}",
        plan.iterations_used, plan.marginal_error, plan.converged
    );
    println!("plan (last row and column are the dustbins):{:.3}", plan.plan);

    let assignment = extract_assignment(&plan, DEFAULT_MIN_MASS);
    for (j, t) in assignment.detection_to_track.iter().enumerate() {
        match t {
            Some(i) => println!("detection {j} -> track {i}"),
            None => println!("detection {j} -> unmatched"),
        }
    }

    let exact = lp_oracle(&problem)?;
    let extended = problem.extended_cost()?;
    println!("transport cost {:.4}, exact optimum {:.4}", plan.cost(&extended), exact.cost);
    Ok(())
}
