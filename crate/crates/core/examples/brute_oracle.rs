//! Compares the estimator against an exhaustive grid search on a tiny dataset.

use coxmeas::estimator::{brute_force_search, fit_stage1, FitConfig};
use coxmeas::{Dataset, ErrorModel, ParamBox};

fn main() -> coxmeas::Result<()> {
    let mut data = Dataset::new(1.0, 1)?;
    data.push(0.3, true, &[0.4])?;
    data.push(0.55, false, &[-0.2])?;
    data.push(0.8, true, &[1.1])?;
    let e = ErrorModel::isotropic(1, 0.3)?;
    let bx = ParamBox::new(vec![-1.0], vec![1.0])?;

    let cfg = FitConfig::new(bx.clone(), 1.0, 1.0);
    let fit = fit_stage1(&data, &e, &cfg)?;
    let oracle = brute_force_search(&data, &e, &bx, 1.0, 0.01, 0.0)?;
    println!("estimator: beta = {:.4}, objective = {:.6}", fit.beta[0], fit.objective);
    println!("grid:      beta = {:.4}, objective = {:.6}", oracle.estimate.beta[0], oracle.estimate.objective);
    println!(
        "grid sizes {} x {}, one-cell variation {:.2e}, epsilon_n {:.3e}",
        oracle.beta_grid,
        oracle.node_grid,
        oracle.cell_variation,
        cfg.epsilon_n(data.len())
    );
    let slack = fit.objective - (oracle.estimate.objective - cfg.epsilon_n(data.len()) - oracle.cell_variation);
    println!("slack against the oracle bound: {slack:.3e}");
    Ok(())
}
