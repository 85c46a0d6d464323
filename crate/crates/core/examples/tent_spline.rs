//! The minimal Lipschitz hazard through a few node values, with and without a floor.

use coxmeas::{tent_transform, tent_transform_with_floor};

fn main() -> coxmeas::Result<()> {
    let knots = [0.2, 0.5, 0.9];
    let values = [0.3, 0.1, 0.35];
    let plain = tent_transform(&knots, &values, 1.0, 1.0)?;
    let floored = tent_transform_with_floor(&knots, &values, 1.0, 1.0, 0.05)?;
    println!("{:>5} {:>8} {:>8}", "t", "tent", "floored");
    for i in 0..=20 {
        let t = i as f64 / 20.0;
        println!("{t:>5.2} {:>8.4} {:>8.4}", plain.eval(t)?, floored.eval(t)?);
    }
    println!("cumulative hazard at tau: {:.5}", plain.cumulative(1.0)?);
    Ok(())
}
