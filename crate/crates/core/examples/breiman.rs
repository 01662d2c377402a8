//! Fréchet-class risk: Breiman's lemma against exact quadrature.

use contraction::asymptotics::{breiman_tail, ProductModel};
use contraction::oracle::exact_tail_quadrature;
use contraction::{make_builtin, Family, ScalingSpec};

fn main() -> contraction::Result<()> {
    let r = make_builtin(&Family::Pareto { gamma: 2.0, scale: 1.0 })?;
    let single = ProductModel::single(r.clone(), ScalingSpec::uniform())?;
    println!("{:>8} {:>14} {:>14} {:>10}", "u", "exact", "breiman", "ratio");
    for u in [2.0, 10.0, 100.0, 1000.0] {
        let exact = exact_tail_quadrature(&single, u)?;
        let approx = breiman_tail(&single, u)?.value;
        println!("{u:>8} {exact:>14.6e} {approx:>14.6e} {:>10.6}", exact / approx);
    }
    let m = ProductModel::new(r, vec![ScalingSpec::uniform(), ScalingSpec::beta(2.0, 1.0)?])?;
    let two = breiman_tail(&m, 100.0)?;
    println!("two factors at u = 100: {:.6e} ({})", two.value, two.formula_id);
    Ok(())
}
