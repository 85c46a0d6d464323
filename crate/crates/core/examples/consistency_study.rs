//! A scaled-down Monte Carlo consistency study, with the per-replicate dump.

use coxmeas::simulation::{run_consistency_study, write_replicates_csv, StudyConfig};

fn main() -> coxmeas::Result<()> {
    let mut cfg = StudyConfig::default_fixture(vec![100, 200, 400], 20);
    cfg.fit.outer.starts = 4;
    let report = run_consistency_study(&cfg)?;
    for s in &report.sizes {
        println!(
            "n = {:>4}: median sup error {:.4} (trimmed {:.4}), median |beta - beta_0| {:.4}",
            s.n,
            s.supnorm_full.as_ref().map_or(f64::NAN, |x| x.median),
            s.supnorm_trim.as_ref().map_or(f64::NAN, |x| x.median),
            s.beta_error.as_ref().map_or(f64::NAN, |x| x.median),
        );
    }
    if let Some(t) = &report.trend {
        println!("trend: {t:?}");
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    write_replicates_csv(&report.replicates[..5], 1, std::io::stdout())?;
    Ok(())
}
