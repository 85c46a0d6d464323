//! The corrected objective under each error law, and its naive counterpart.

use coxmeas::asymptotics::Truth;
use coxmeas::simulation::sample_dataset;
use coxmeas::{corrected_objective, ErrorModel, SplineHazard};

fn main() -> coxmeas::Result<()> {
    let truth = Truth::default_fixture();
    let data = sample_dataset(&truth, 200, 3)?;
    let flat = SplineHazard::constant(1.0, 0.7, 1.0)?;
    let laws = [
        ("none", ErrorModel::none(1)),
        ("gaussian sd 0.3", ErrorModel::isotropic(1, 0.3)?),
        ("two-point +-0.3", ErrorModel::two_point(0.3)?),
    ];
    for beta in [0.0, 0.5, 1.0] {
        for (name, e) in &laws {
            let q = corrected_objective(&data, &flat, &[beta], e)?;
            println!("beta = {beta:.1}, {name:<16} M_U(beta) = {:.4}, Q = {:.5}", e.mgf(&[beta]), q.to_f64());
        }
    }
    Ok(())
}
