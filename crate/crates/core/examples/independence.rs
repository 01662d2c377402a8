//! Joint exceedances of (U₁, U(ρ)) vanish for a Gaussian-like radius.

use contraction::aggregation::{asymptotic_independence_diagnostic, ScaleMixture};
use contraction::{make_builtin, Family};

fn main() -> contraction::Result<()> {
    let radius = make_builtin(&Family::Kotz { k: 1.0, q: 0.0, r: 0.5, gamma: 2.0 })?;
    let mix = ScaleMixture::spherical(radius)?;
    let d = asymptotic_independence_diagnostic(&mix, 0.5, &[1e2, 1e3, 1e4], 10_000_000, 7)?;
    println!("{:>8} {:>10} {:>10} {:>10}", "n", "n P joint", "+-", "b2-rho b1");
    for j in 0..d.n_grid.len() {
        println!("{:>8} {:>10.4} {:>10.4} {:>10.4}", d.n_grid[j], d.joint[j], d.joint_half_width[j], d.spread[j]);
    }
    println!("decreasing {}, spread increasing {}, verdict {}", d.decreasing, d.spread_increasing, d.verdict.as_str());
    Ok(())
}
