//! Spherical scale mixture: S(ρ) tail, aggregated tails, Berman identity.

use contraction::aggregation::{
    berman_identity_check, s_rho_tail, sample_s_rho, tail_equivalence_mc, u_rho_tail_frechet, u_rho_tail_gumbel,
    LocalGSpec, ScaleMixture,
};
use contraction::{make_builtin, Family};

fn main() -> contraction::Result<()> {
    let mix = ScaleMixture::spherical(make_builtin(&Family::Exponential { rate: 1.0 })?)?;
    for rho in [0.1, 0.5, 0.9] {
        let spec = LocalGSpec::for_mixture(&mix, rho)?;
        println!(
            "rho = {rho}: P(S > 1 - 1e-3) ~ {:.5e}, P(U > 25) ~ {:.5e}",
            s_rho_tail(&spec, mix.q11(), 1e-3)?,
            u_rho_tail_gumbel(&mix, &spec, 25.0)?.value
        );
    }
    let spec = LocalGSpec::spherical(0.5)?;
    let hits = sample_s_rho(&mix, 0.5, 2_000_000, 1)?.iter().filter(|d| d.value > 1.0 - 1e-3).count();
    println!("MC / formula at u = 1e-3: {:.4}", hits as f64 / 2e6 / s_rho_tail(&spec, mix.q11(), 1e-3)?);

    let b = berman_identity_check(&mix, 1.0, 1.0, 100_000, 2)?;
    println!("Berman: KS {:.4}, critical {:.4}, pass {:?}", b.distance, b.critical_value, b.pass);
    let eq = tail_equivalence_mc(&mix, 0.5, 5.0, 2_000_000, 3)?;
    println!("P(U(rho) > 5) / P(U1 > 5) = {:.4} +- {:.4}", eq.ratio, eq.half_width_95);

    let pareto = ScaleMixture::spherical(make_builtin(&Family::Pareto { gamma: 2.0, scale: 1.0 })?)?;
    let f = u_rho_tail_frechet(&pareto, 0.5, 100.0)?;
    println!("Frechet route: moment {:.4}, negative mass {:.4}, tail {:.4e}", f.moment, f.negative_mass, f.approx.value);

    let dirichlet = ScaleMixture::dirichlet(make_builtin(&Family::Exponential { rate: 1.0 })?, 2.0, 3.0)?;
    let spec = LocalGSpec::for_mixture(&dirichlet, 0.4)?;
    println!("dirichlet(2, 3), rho = 0.4: P(U > 25) ~ {:.5e}", u_rho_tail_gumbel(&dirichlet, &spec, 25.0)?.value);
    Ok(())
}
