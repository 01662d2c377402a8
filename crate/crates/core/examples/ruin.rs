//! Ruin probability with random discounting: simulation, term sum and
//! asymptotic formula.

use contraction::risk::{ruin_asymptotic, ruin_prob_mc, ruin_term_sum, RiskModel};
use contraction::{make_builtin, Family};

fn main() -> contraction::Result<()> {
    let losses = make_builtin(&Family::Kotz { k: 1.0, q: 0.0, r: 1.0, gamma: 0.5 })?;
    let upsilon = make_builtin(&Family::Pareto { gamma: 1.0, scale: 1.0 })?;
    let m = RiskModel::stationary(losses, upsilon, 0.5, 0.05, 1, true)?;
    println!("{:>6} {:>12} {:>12} {:>12}", "u0", "mc", "term_sum", "asymptotic");
    for u0 in [25.0, 50.0, 100.0, 400.0] {
        let mc = ruin_prob_mc(&m, u0, 200_000, 1).map(|r| format!("{:.4e}", r.value)).unwrap_or_else(|_| "-".into());
        let ts = ruin_term_sum(&m, u0)?.value;
        let asym = ruin_asymptotic(&m, u0)?.value;
        println!("{u0:>6} {mc:>12} {ts:>12.4e} {asym:>12.4e}");
    }
    Ok(())
}
