//! Population matrices, the sandwich covariance and functional variances for
//! the default truth.

use coxmeas::asymptotics::{compute_tables, solve_fredholm, AsymptoticSettings, Truth, Weight};

fn main() -> coxmeas::Result<()> {
    let truth = Truth::default_fixture();
    let settings = AsymptoticSettings { reps: 50_000, ..AsymptoticSettings::default() };
    let tables = compute_tables(&truth, &settings)?;
    println!("A = {:?}", tables.a_matrix);
    println!("M = {:?}", tables.m_matrix);
    println!("score covariance = {:?}", tables.score.covariance);
    println!("Sigma_beta = {:?}", tables.sigma_beta);
    println!("M^-1 Sigma_beta M^-1 = {:?}", tables.sandwich);
    for w in [Weight::One, Weight::Identity] {
        let sol = solve_fredholm(&truth, &tables, &w, settings.reps, 1)?;
        println!(
            "f = {}: sigma_phi^2 = {:.4}, Var<q', phi> = {:.4} (se {:.4}), residual {:.1e}",
            w.label(),
            sol.sigma_sq,
            sol.variance,
            sol.variance_se,
            sol.residual
        );
    }
    Ok(())
}
