//! Seeded Monte Carlo oracle against quadrature.

use contraction::asymptotics::ProductModel;
use contraction::oracle::{exact_tail_quadrature, mc_tail};
use contraction::{make_builtin, Family, ScalingSpec};

fn main() -> contraction::Result<()> {
    let r = make_builtin(&Family::Lognormal { mu: 0.0, sigma: 1.0 })?;
    let m = ProductModel::single(r, ScalingSpec::beta(2.0, 1.0)?)?;
    for u in [1.0, 3.0, 10.0] {
        let q = exact_tail_quadrature(&m, u)?;
        let est = mc_tail(&m, u, 1_000_000, 42)?;
        let (lo, hi) = est.interval();
        println!("u = {u:>4}: quadrature {q:.5e}, MC {:.5e} [{lo:.5e}, {hi:.5e}]", est.value);
    }
    Ok(())
}
