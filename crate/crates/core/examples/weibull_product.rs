//! Finite endpoint: Uniform01 times Uniform01 near 1.

use contraction::asymptotics::{weibull_product_tail_at_distance, ProductModel};
use contraction::{make_builtin, Family, ScalingSpec};

fn main() -> contraction::Result<()> {
    let r = make_builtin(&Family::Uniform01)?;
    let m = ProductModel::single(r, ScalingSpec::uniform())?;
    println!("{:>8} {:>14} {:>14} {:>10}", "1-u", "exact", "formula", "ratio");
    for delta in [1e-1f64, 1e-2, 1e-3, 1e-4] {
        // P(X > 1 - delta) = 1 - u + u ln u
        let exact = delta + (1.0 - delta) * (-delta).ln_1p();
        let f = weibull_product_tail_at_distance(&m, delta)?;
        println!("{delta:>8} {exact:>14.6e} {:>14.6e} {:>10.6}", f.value, exact / f.value);
    }
    Ok(())
}
