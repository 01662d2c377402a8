//! Conditional tail expectation: random contraction keeps the mean excess.

use contraction::asymptotics::{cte_asymptotic, cte_var_ratio_upper, ProductModel};
use contraction::dist::mean_excess;
use contraction::oracle::product_distribution;
use contraction::{make_builtin, Family, ScalingSpec};

fn main() -> contraction::Result<()> {
    let r = make_builtin(&Family::Exponential { rate: 1.0 })?;
    let m = ProductModel::single(r.clone(), ScalingSpec::uniform())?;
    let x = product_distribution(&m)?;
    for u in [5.0, 10.0, 30.0] {
        let ratio = mean_excess(&x, u)? / mean_excess(&r, u)?;
        println!("u = {u:>4}: mean excess ratio {ratio:.4}, asymptotic CTE {:.4}", cte_asymptotic(m.base(), u)?);
    }
    for u in [10.0f64, 20.0, 50.0] {
        println!("level 1 - e^-{u}: CTE / VaR = {:.4}", cte_var_ratio_upper(&r, (-u).exp())?);
    }
    Ok(())
}
