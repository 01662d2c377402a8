//! Subexponentiality criteria for Weibull-like and lognormal tails.

use contraction::subexp::{
    conv_square_ratio, geometric_grid, goldie_resnick_check, long_tail_trajectory, mitra_resnick_trajectory,
    tony_integral_trajectory,
};
use contraction::{make_builtin, Family};

fn main() -> contraction::Result<()> {
    let grid = geometric_grid(1e2, 1e6, 6);
    for (name, family) in [
        ("kotz(0.5)", Family::Kotz { k: 1.0, q: 0.0, r: 1.0, gamma: 0.5 }),
        ("lognormal", Family::Lognormal { mu: 0.0, sigma: 1.0 }),
    ] {
        let d = make_builtin(&family)?;
        let tony = tony_integral_trajectory(&d, 1.0, &grid)?;
        let mr = mitra_resnick_trajectory(&d, 1.0, &grid)?;
        let lt = long_tail_trajectory(&d, 1.0, &grid)?;
        let cs = conv_square_ratio(&d, &geometric_grid(1e1, 1e4, 5))?;
        println!("{name}");
        println!("  tony           {:<14} last {:.3e}", tony.verdict.as_str(), tony.last());
        println!("  mitra_resnick  {:<14} last {:.3e}", mr.verdict.as_str(), mr.last());
        println!("  long_tail      {:<14} last {:.6}", lt.verdict.as_str(), lt.last());
        println!("  conv_square    last {:.4}", cs.last());
    }
    let g = goldie_resnick_check(&|u: f64| 0.5 / u.sqrt(), 2.0, &geometric_grid(1e2, 1e8, 7))?;
    println!("goldie_resnick for w(u) = 0.5/sqrt(u): holds {}, ratio {:.4}", g.holds, g.trajectory.last());
    Ok(())
}
