//! Density ratio h(u + x/w(u)) / h(u) against e^{-x}.

use contraction::asymptotics::{vm_density_ratio_check, Conditions, ProductModel};
use contraction::oracle::exact_density_quadrature;
use contraction::{make_builtin, Family, ScalingSpec};

fn main() -> contraction::Result<()> {
    let r = make_builtin(&Family::Exponential { rate: 1.0 })?;
    let w = r.tail_class().aux_scale()?.eval(30.0);
    let m = ProductModel::single(r, ScalingSpec::beta(2.0, 1.0)?)?;
    let u = 30.0;
    let h0 = exact_density_quadrature(&m, u)?;
    for x in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let pred = vm_density_ratio_check(&m, u, x, Conditions::all())?.predicted;
        let emp = exact_density_quadrature(&m, u + x / w)? / h0;
        println!("x = {x:>4}: empirical {emp:.5}, e^-x {pred:.5}");
    }
    Ok(())
}
