//! Gumbel-class risk times a uniform factor: convergence report.

use contraction::asymptotics::ProductModel;
use contraction::oracle::{convergence_report, Formula, OracleMethod};
use contraction::{make_builtin, Family, ScalingSpec};

fn main() -> contraction::Result<()> {
    let r = make_builtin(&Family::Exponential { rate: 1.0 })?;
    let m = ProductModel::single(r, ScalingSpec::uniform())?;
    let report = convergence_report(&m, Formula::GumbelProduct, &[5.0, 10.0, 20.0, 40.0], OracleMethod::Quadrature)?;
    report.write_csv(std::io::stdout())?;
    println!("trend ok: {}", report.trend_ok);
    Ok(())
}
