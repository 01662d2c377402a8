//! Density ratios of the product in all three domains.

use contraction::asymptotics::{frechet_density_ratio, gumbel_density, weibull_density_ratio, Conditions, ProductModel};
use contraction::oracle::{exact_density_quadrature, exact_tail_quadrature};
use contraction::{make_builtin, Family, ScalingSpec};

fn main() -> contraction::Result<()> {
    let cond = Conditions::all();

    let m = ProductModel::single(make_builtin(&Family::Pareto { gamma: 2.0, scale: 1.0 })?, ScalingSpec::uniform())?;
    let u = 1e3;
    let ratio = u * exact_density_quadrature(&m, u)? / exact_tail_quadrature(&m, u)?;
    println!("Frechet: u h(u) / P(X>u) = {ratio:.5}, limit {}", frechet_density_ratio(&m, u, cond)?);

    let m = ProductModel::single(make_builtin(&Family::Exponential { rate: 1.0 })?, ScalingSpec::uniform())?;
    for u in [10.0, 30.0, 100.0] {
        let h = exact_density_quadrature(&m, u)?;
        let approx = gumbel_density(&m, u, cond)?;
        println!("Gumbel: u = {u}, h = {h:.6e}, w P-hat = {:.6e}, ratio {:.5}", approx.value, h / approx.value);
    }

    let m = ProductModel::single(make_builtin(&Family::Uniform01)?, ScalingSpec::uniform())?;
    let delta = 1e-3;
    let ratio = delta * exact_density_quadrature(&m, 1.0 - delta)? / exact_tail_quadrature(&m, 1.0 - delta)?;
    println!("Weibull: (1-u) h(u) / P(X>u) = {ratio:.5}, limit {}", weibull_density_ratio(&m)?);
    Ok(())
}
