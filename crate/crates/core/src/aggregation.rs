//! Bivariate scale mixtures `(U₁, U₂) = R (I₁ S, I₂ √(1-S²))` and the tail
//! of the aggregated risk `U(ρ) = ρU₁ + √(1-ρ²) U₂`.

use std::f64::consts::PI;

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::asymptotics::{self, ApproxResult};
use crate::dist::{make_builtin, Distribution, Family, SlowlyVarying, TailClass};
use crate::error::{check_grid, Error, Result};
use crate::mc;
use crate::quad::{self, QuadConfig};
use crate::special::ln_gamma;
use crate::subexp::{Verdict, VerdictRule};

pub const S_RHO_TAIL: &str = "local tail: P(S(rho) > 1-u) ~ q L(sqrt u) (2u(1-rho^2))^(a/2)";
pub const U_RHO_GUMBEL: &str =
    "aggregated Gumbel tail: q Gamma(a/2+1) L(eta^-1/2) (2(1-rho^2)/eta)^(a/2) F(u), eta = u w(u)";
pub const U_RHO_WEIBULL: &str =
    "aggregated Weibull tail: q Gamma(a/2+1) Gamma(g+1)/Gamma(a/2+g+1) L(sqrt u) (2u(1-rho^2))^(a/2) F(1-u)";
pub const U_RHO_FRECHET: &str = "aggregated Frechet tail (Breiman): F(u) E[max(S(rho), 0)^g]";

/// Two-sample Kolmogorov–Smirnov coefficient at level 0.01.
const KS_COEFF_01: f64 = 1.628;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureKind {
    /// `S² ~ Beta(1/2, 1/2)` with independent fair signs
    Spherical,
    /// `S ~ Beta(a, b)` in the standard parametrization
    Dirichlet { a: f64, b: f64 },
    General,
}

/// Law of `(U₁, U₂)`. `signs` holds `P(I₁ = i, I₂ = j)` for
/// `(i, j) = (1, 1), (1, -1), (-1, 1), (-1, -1)`.
#[derive(Debug, Clone)]
pub struct ScaleMixture {
    pub r: Distribution,
    pub s: Distribution,
    pub signs: [f64; 4],
    pub kind: MixtureKind,
}

const FAIR: [f64; 4] = [0.25; 4];

impl ScaleMixture {
    pub fn new(r: Distribution, s: Distribution, signs: [f64; 4]) -> Result<Self> {
        if r.support_lo() < 0.0 {
            return Err(Error::Domain("radius must be nonnegative"));
        }
        let (lo, hi) = s.support();
        if lo < 0.0 || hi > 1.0 {
            return Err(Error::Domain("scaling variable must lie in [0, 1]"));
        }
        if signs.iter().any(|p| !(0.0..=1.0).contains(p)) || (signs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("sign probabilities must be a probability vector"));
        }
        if !(signs[0] > 0.0) {
            return Err(Error::InvalidParameter {
                name: "q11",
                value: signs[0],
                reason: "P(I1 = 1, I2 = 1) must be positive",
            });
        }
        Ok(Self {
            r,
            s,
            signs,
            kind: MixtureKind::General,
        })
    }

    pub fn spherical(r: Distribution) -> Result<Self> {
        let s = make_builtin(&Family::Arcsine)?;
        Ok(Self {
            kind: MixtureKind::Spherical,
            ..Self::new(r, s, FAIR)?
        })
    }

    pub fn dirichlet(r: Distribution, a: f64, b: f64) -> Result<Self> {
        // Family::Beta uses the upper-endpoint convention
        let s = make_builtin(&Family::Beta { alpha: b, beta: a })?;
        Ok(Self {
            kind: MixtureKind::Dirichlet { a, b },
            ..Self::new(r, s, FAIR)?
        })
    }

    /// `q = P(I₁ = 1, I₂ = 1)`.
    pub fn q11(&self) -> f64 {
        self.signs[0]
    }

    fn draw_signs(&self, rng: &mut dyn RngCore) -> (f64, f64) {
        let v: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in self.signs.iter().enumerate() {
            acc += p;
            if v < acc {
                return SIGNS[k];
            }
        }
        SIGNS[3]
    }

    fn draw_s_rho(&self, rho: f64, rng: &mut dyn RngCore) -> SRhoDraw {
        let s = self.s.sample(rng);
        let (i1, i2) = self.draw_signs(rng);
        SRhoDraw {
            value: s_rho(rho, i1, i2, s),
            both_positive: i1 > 0.0 && i2 > 0.0,
        }
    }

    fn draw_pair(&self, rho: f64, rng: &mut dyn RngCore) -> (f64, f64) {
        let r = self.r.sample(rng);
        let s = self.s.sample(rng);
        let (i1, i2) = self.draw_signs(rng);
        let u1 = i1 * r * s;
        let u2 = i2 * r * (1.0 - s * s).max(0.0).sqrt();
        (u1, rho * u1 + (1.0 - rho * rho).sqrt() * u2)
    }
}

const SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

fn s_rho(rho: f64, i1: f64, i2: f64, s: f64) -> f64 {
    rho * i1 * s + (1.0 - rho * rho).sqrt() * i2 * (1.0 - s * s).max(0.0).sqrt()
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho,
            reason: "must lie in (0, 1)",
        });
    }
    Ok(())
}

/// `n` seeded draws of `(U₁, U(ρ))`.
pub fn sample_pair(mix: &ScaleMixture, rho: f64, n: u64, seed: u64) -> Result<Vec<(f64, f64)>> {
    check_rho(rho)?;
    Ok(mc::sample(n, seed, |rng| mix.draw_pair(rho, rng)))
}

/// One draw of `S(ρ) = ρI₁S + √(1-ρ²) I₂ √(1-S²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SRhoDraw {
    pub value: f64,
    pub both_positive: bool,
}

pub fn sample_s_rho(mix: &ScaleMixture, rho: f64, n: u64, seed: u64) -> Result<Vec<SRhoDraw>> {
    check_rho(rho)?;
    Ok(mc::sample(n, seed, |rng| mix.draw_s_rho(rho, rng)))
}

/// Local form `P(|S - ρ| ≤ t) = L_ρ(t) t^{α_ρ}` for `t < √window`.
#[derive(Debug, Clone)]
pub struct LocalGSpec {
    pub rho: f64,
    pub alpha_rho: f64,
    pub l_rho: SlowlyVarying,
    /// largest admissible `u` for the local formula
    pub window: f64,
}

pub const DEFAULT_WINDOW: f64 = 0.1;

impl LocalGSpec {
    pub fn new(rho: f64, alpha_rho: f64, l_rho: SlowlyVarying) -> Result<Self> {
        check_rho(rho)?;
        if !(alpha_rho >= 0.0 && alpha_rho.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "alpha_rho",
                value: alpha_rho,
                reason: "must be nonnegative",
            });
        }
        if alpha_rho == 0.0 {
            let ls: Vec<f64> = (1..=6).map(|k| l_rho.eval(10f64.powi(-2 * k))).collect();
            let vanishing = ls.windows(2).all(|p| p[1] < p[0]) && ls[5] < 0.5 * ls[0];
            if !vanishing {
                return Err(Error::Domain("alpha_rho = 0 needs L_rho(0+) = 0"));
            }
        }
        Ok(Self {
            rho,
            alpha_rho,
            l_rho,
            window: DEFAULT_WINDOW,
        })
    }

    /// `α_ρ = 1`, `L_ρ ≡ 2g(ρ)` for a density continuous at `ρ`.
    pub fn from_density_value(rho: f64, g_rho: f64) -> Result<Self> {
        crate::error::check_positive("g(rho)", g_rho)?;
        Self::new(rho, 1.0, SlowlyVarying::constant(2.0 * g_rho))
    }

    /// Local form read off the density of the mixture's `S`.
    pub fn for_mixture(mix: &ScaleMixture, rho: f64) -> Result<Self> {
        if mix.kind == MixtureKind::Spherical {
            return Self::spherical(rho);
        }
        let g = mix.s.density(rho).ok_or(Error::MissingDensity("scaling variable"))?;
        Self::from_density_value(rho, g)
    }

    /// The spherical law: `g(ρ) = 2/(π√(1-ρ²))`.
    pub fn spherical(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Self::from_density_value(rho, 2.0 / (PI * (1.0 - rho * rho).sqrt()))
    }

    fn log_local(&self, t: f64, base: f64) -> f64 {
        // ln L(t) + (α/2) ln(base)
        let l = self.l_rho.eval(t).ln();
        if self.alpha_rho == 0.0 {
            l
        } else {
            l + 0.5 * self.alpha_rho * base.ln()
        }
    }
}

/// `P(S(ρ) > 1 - u) ≈ q L_ρ(√u) (2u(1-ρ²))^{α_ρ/2}` for `u` in the local window.
pub fn s_rho_tail(spec: &LocalGSpec, q11: f64, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < spec.window) {
        return Err(Error::OutOfRange {
            u,
            lo: 0.0,
            hi: spec.window,
        });
    }
    let rho2 = spec.rho * spec.rho;
    Ok((q11.ln() + spec.log_local(u.sqrt(), 2.0 * u * (1.0 - rho2))).exp())
}

/// `P(U(ρ) > u)` for a Gumbel-class radius.
pub fn u_rho_tail_gumbel(mix: &ScaleMixture, spec: &LocalGSpec, u: f64) -> Result<ApproxResult> {
    let eta = asymptotics::eta(&mix.r, u)?;
    if !(1.0 / eta < spec.window) {
        return Err(Error::PreAsymptotic {
            u,
            eta,
            bound: 1.0 / spec.window,
        });
    }
    let a = spec.alpha_rho;
    let rho2 = spec.rho * spec.rho;
    let mut terms = [
        mix.q11().ln(),
        ln_gamma(0.5 * a + 1.0),
        spec.log_local(eta.powf(-0.5), 2.0 * (1.0 - rho2) / eta),
        mix.r.log_survival(u),
    ];
    terms.sort_by(f64::total_cmp);
    Ok(ApproxResult::from_log(terms.iter().sum(), "Gumbel", U_RHO_GUMBEL))
}

/// `P(U(ρ) > 1 - delta)` for a Weibull-class radius with endpoint 1.
pub fn u_rho_tail_weibull(mix: &ScaleMixture, spec: &LocalGSpec, delta: f64) -> Result<ApproxResult> {
    let gamma = match mix.r.tail_class() {
        TailClass::Weibull { gamma, endpoint: 1.0 } => gamma,
        TailClass::Weibull { .. } => return Err(Error::Domain("Weibull radius must have endpoint 1")),
        other => {
            return Err(Error::WrongTailClass {
                expected: "Weibull",
                found: other.kind(),
            })
        }
    };
    crate::error::check_positive("gamma", gamma)?;
    if !(delta > 0.0 && delta < spec.window) {
        return Err(Error::OutOfRange {
            u: delta,
            lo: 0.0,
            hi: spec.window,
        });
    }
    let a = spec.alpha_rho;
    let rho2 = spec.rho * spec.rho;
    let mut terms = [
        mix.q11().ln(),
        ln_gamma(0.5 * a + 1.0),
        ln_gamma(gamma + 1.0),
        -ln_gamma(0.5 * a + gamma + 1.0),
        spec.log_local(delta.sqrt(), 2.0 * delta * (1.0 - rho2)),
        mix.r.survival_below_one(delta).ln(),
    ];
    terms.sort_by(f64::total_cmp);
    Ok(ApproxResult::from_log(terms.iter().sum(), "Weibull", U_RHO_WEIBULL))
}

/// Fréchet-class radius: `P(U(ρ) > u) ~ F̄(u) E[max(S(ρ), 0)^γ]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrechetAggregate {
    pub approx: ApproxResult,
    pub moment: f64,
    /// `P(S(ρ) ≤ 0)`, the part of the composite factor dropped by the route
    pub negative_mass: f64,
}

pub fn u_rho_tail_frechet(mix: &ScaleMixture, rho: f64, u: f64) -> Result<FrechetAggregate> {
    check_rho(rho)?;
    let gamma = match mix.r.tail_class() {
        TailClass::Frechet { gamma } => gamma,
        other => {
            return Err(Error::WrongTailClass {
                expected: "Frechet",
                found: other.kind(),
            })
        }
    };
    let c = (1.0 - rho * rho).sqrt();
    // S(ρ) changes sign at S = c for signs (1, -1) and at S = ρ for (-1, 1)
    let breaks = [0.0, 1.0 - mix.s.survival(rho), 1.0 - mix.s.survival(c), 1.0];
    let mut breaks: Vec<f64> = breaks.to_vec();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let over_s = |phi: &dyn Fn(f64) -> f64| -> Result<f64> {
        let f = |p: f64| phi(mix.s.quantile(p));
        Ok(quad::integrate_breaks(f, &breaks, QuadConfig::rel(1e-11).with_abs(1e-14))?.value)
    };
    let mut moment = 0.0;
    let mut negative_mass = 0.0;
    for (k, &(i1, i2)) in SIGNS.iter().enumerate() {
        let p = mix.signs[k];
        if p == 0.0 {
            continue;
        }
        moment += p * over_s(&|s| s_rho(rho, i1, i2, s).max(0.0).powf(gamma))?;
        negative_mass += p * over_s(&|s| f64::from(u8::from(s_rho(rho, i1, i2, s) <= 0.0)))?;
    }
    let approx = ApproxResult::from_log(mix.r.log_survival(u) + moment.ln(), "Frechet", U_RHO_FRECHET);
    Ok(FrechetAggregate {
        approx,
        moment,
        negative_mass,
    })
}

/// Two-sample comparison of `c₁U₁ + c₂U₂` with `√(c₁²+c₂²) U₁`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BermanCheck {
    pub distance: f64,
    pub critical_value: f64,
    /// pass/fail at level 0.01; `None` for non-spherical mixtures, where
    /// the distance is reported without a claim
    pub pass: Option<bool>,
    pub n: u64,
    pub seed: u64,
}

/// Stream offset separating the two samples of [`berman_identity_check`].
const SECOND_SAMPLE: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn berman_identity_check(mix: &ScaleMixture, c1: f64, c2: f64, n: u64, seed: u64) -> Result<BermanCheck> {
    let norm = c1.hypot(c2);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Domain("c1 and c2 must not both vanish"));
    }
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
            reason: "need at least two samples",
        });
    }
    let left = mc::sample(n, seed, |rng| {
        let r = mix.r.sample(rng);
        let s = mix.s.sample(rng);
        let (i1, i2) = mix.draw_signs(rng);
        r * (c1 * i1 * s + c2 * i2 * (1.0 - s * s).max(0.0).sqrt())
    });
    let right = mc::sample(n, seed ^ SECOND_SAMPLE, |rng| {
        let r = mix.r.sample(rng);
        let s = mix.s.sample(rng);
        let (i1, _) = mix.draw_signs(rng);
        norm * i1 * r * s
    });
    let distance = ks_distance(left, right);
    let nf = n as f64;
    let critical_value = KS_COEFF_01 * (2.0 * nf / (nf * nf)).sqrt();
    let pass = (mix.kind == MixtureKind::Spherical).then_some(distance < critical_value);
    Ok(BermanCheck {
        distance,
        critical_value,
        pass,
        n,
        seed,
    })
}

/// `sup |F_a - F_b|` of two empirical distribution functions.
pub fn ks_distance(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// A ratio of two proportions estimated from the same sample, with a
/// delta-method 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub half_width_95: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub n_samples: u64,
}

impl RatioEstimate {
    /// From counts `a` (numerator), `b` (denominator) and `ab` (both) out of `n`.
    pub fn from_counts(a: u64, b: u64, ab: u64, n: u64) -> Self {
        let nf = n as f64;
        let (pa, pb, pab) = (a as f64 / nf, b as f64 / nf, ab as f64 / nf);
        let ratio = pa / pb;
        let var = (pa * (1.0 - pa) / (pb * pb) + pa * pa * (1.0 - pb) / (pb * pb * pb)
            - 2.0 * pa * (pab - pa * pb) / (pb * pb * pb))
            / nf;
        Self {
            ratio,
            half_width_95: 1.96 * var.max(0.0).sqrt(),
            numerator: pa,
            denominator: pb,
            n_samples: n,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.ratio - x).abs() <= self.half_width_95
    }
}

/// `P(U(ρ) > u) / P(U₁ > u)` from `n` seeded pairs.
pub fn tail_equivalence_mc(mix: &ScaleMixture, rho: f64, u: f64, n: u64, seed: u64) -> Result<RatioEstimate> {
    let pairs = sample_pair(mix, rho, n, seed)?;
    let (mut a, mut b, mut ab) = (0, 0, 0);
    for &(u1, ur) in &pairs {
        let (x, y) = (ur > u, u1 > u);
        a += u64::from(x);
        b += u64::from(y);
        ab += u64::from(x && y);
    }
    if b == 0 {
        return Err(Error::Rarity {
            estimate: 0.0,
            floor: 1.0 / n as f64,
        });
    }
    Ok(RatioEstimate::from_counts(a, b, ab, n))
}

/// Trajectory of `n·P̂(U₁ > b₁(n), U(ρ) > b₂(n))` with empirical marginal
/// quantiles `bᵢ(n)` at level `1 - 1/n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceDiagnostic {
    pub rho: f64,
    pub n_grid: Vec<f64>,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    /// `b₂(n) - ρ b₁(n)`
    pub spread: Vec<f64>,
    pub joint: Vec<f64>,
    pub joint_half_width: Vec<f64>,
    pub joint_counts: Vec<u64>,
    pub decreasing: bool,
    pub spread_increasing: bool,
    pub verdict: Verdict,
    pub n_samples: u64,
    pub seed: u64,
}

/// Fewest joint exceedances at which a trajectory point carries signal.
const MIN_JOINT_HITS: u64 = 10;

pub fn asymptotic_independence_diagnostic(
    mix: &ScaleMixture,
    rho: f64,
    n_grid: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<IndependenceDiagnostic> {
    check_grid(n_grid, 2)?;
    let nmax = n_grid[n_grid.len() - 1];
    if !(n_grid[0] > 1.0) || nmax * 100.0 > n_samples as f64 {
        return Err(Error::Domain("n grid must lie in (1, n_samples/100]"));
    }
    let pairs = sample_pair(mix, rho, n_samples, seed)?;
    let quantiles = |col: Vec<f64>| -> Vec<f64> {
        let mut col = col;
        col.sort_unstable_by(f64::total_cmp);
        let m = col.len() as f64;
        n_grid
            .iter()
            .map(|&n| {
                let k = (m * (1.0 - 1.0 / n)).ceil() as usize;
                col[k.clamp(1, col.len()) - 1]
            })
            .collect()
    };
    let b1 = quantiles(pairs.iter().map(|p| p.0).collect());
    let b2 = quantiles(pairs.iter().map(|p| p.1).collect());
    let mut counts = vec![0u64; n_grid.len()];
    for &(u1, ur) in &pairs {
        for (j, c) in counts.iter_mut().enumerate() {
            if u1 > b1[j] && ur > b2[j] {
                *c += 1;
            }
        }
    }
    let m = n_samples as f64;
    let joint: Vec<f64> = counts.iter().zip(n_grid).map(|(&c, &n)| n * c as f64 / m).collect();
    let joint_half_width = counts
        .iter()
        .zip(n_grid)
        .map(|(&c, &n)| {
            let p = c as f64 / m;
            n * 1.96 * (p * (1.0 - p) / m).sqrt()
        })
        .collect();
    let spread: Vec<f64> = b1.iter().zip(&b2).map(|(x, y)| y - rho * x).collect();
    let decreasing = joint.windows(2).all(|w| w[1] < w[0]);
    let spread_increasing = spread.windows(2).all(|w| w[1] > w[0]);
    let rule = VerdictRule {
        window: n_grid.len().min(4),
        ..VerdictRule::default()
    };
    let verdict = if counts.iter().any(|&c| c < MIN_JOINT_HITS) {
        Verdict::Inconclusive
    } else {
        rule.judge(&joint)
    };
    Ok(IndependenceDiagnostic {
        rho,
        n_grid: n_grid.to_vec(),
        b1,
        b2,
        spread,
        joint,
        joint_half_width,
        joint_counts: counts,
        decreasing,
        spread_increasing,
        verdict,
        n_samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp1() -> Distribution {
        make_builtin(&Family::Exponential { rate: 1.0 }).unwrap()
    }

    fn spherical_exp() -> ScaleMixture {
        ScaleMixture::spherical(exp1()).unwrap()
    }

    #[test]
    fn validation() {
        let s = make_builtin(&Family::Uniform01).unwrap();
        assert!(ScaleMixture::new(exp1(), s.clone(), [0.5, 0.5, 0.1, 0.0]).is_err());
        assert!(ScaleMixture::new(exp1(), s.clone(), [0.0, 0.5, 0.5, 0.0]).is_err());
        assert!(ScaleMixture::new(exp1(), exp1(), FAIR).is_err());
        assert!(ScaleMixture::new(exp1(), s, [1.0, 0.0, 0.0, 0.0]).is_ok());
        assert!(LocalGSpec::spherical(1.0).is_err());
        assert!(LocalGSpec::new(0.5, 0.0, SlowlyVarying::constant(1.0)).is_err());
        let vanishing = SlowlyVarying::new(|t: f64| 1.0 / (1.0 - t.ln()));
        assert!(LocalGSpec::new(0.5, 0.0, vanishing).is_ok());
    }

    #[test]
    fn spherical_s_rho_tail_collapses() {
        for rho in [0.1, 0.5, 0.9] {
            let spec = LocalGSpec::spherical(rho).unwrap();
            let v = s_rho_tail(&spec, 0.25, 1e-4).unwrap();
            assert!((v - (2e-4f64).sqrt() / PI).abs() < 1e-15);
        }
        assert!(((2e-4f64).sqrt() / PI - 4.5016e-3).abs() < 1e-7);
        let spec = LocalGSpec::spherical(0.5).unwrap();
        assert!(s_rho_tail(&spec, 0.25, 0.5).is_err());
    }

    #[test]
    fn direct_s_rho_formula() {
        let spec = LocalGSpec::new(0.6, 1.0, SlowlyVarying::constant(2.0)).unwrap();
        let v = s_rho_tail(&spec, 1.0, 1e-4).unwrap();
        assert!((v - 0.022_627_416_997_969_52).abs() < 1e-15);
    }

    #[test]
    fn gumbel_and_weibull_examples() {
        let mix = spherical_exp();
        let want = (2.0f64 / 25.0).sqrt() / (2.0 * PI.sqrt()) * (-25f64).exp();
        for rho in [0.1, 0.5, 0.9] {
            let spec = LocalGSpec::for_mixture(&mix, rho).unwrap();
            let g = u_rho_tail_gumbel(&mix, &spec, 25.0).unwrap();
            assert!((g.value / want - 1.0).abs() < 1e-13);
        }
        assert!(matches!(
            u_rho_tail_gumbel(&mix, &LocalGSpec::spherical(0.5).unwrap(), 5.0),
            Err(Error::PreAsymptotic { .. })
        ));
        let unif = ScaleMixture::spherical(make_builtin(&Family::Uniform01).unwrap()).unwrap();
        let want = 2.0 / (3.0 * PI) * (2e-3f64).sqrt() * 1e-3;
        let spec = LocalGSpec::spherical(0.3).unwrap();
        let w = u_rho_tail_weibull(&unif, &spec, 1e-3).unwrap();
        assert!((w.value / want - 1.0).abs() < 1e-13);
        assert!(u_rho_tail_weibull(&mix, &spec, 1e-3).is_err());
    }

    #[test]
    fn lemma_against_monte_carlo() {
        let mix = spherical_exp();
        let rho = 0.5;
        let spec = LocalGSpec::spherical(rho).unwrap();
        let draws = sample_s_rho(&mix, rho, 1_000_000, 5).unwrap();
        let u = 1e-2;
        let hits = draws.iter().filter(|d| d.value > 1.0 - u).count() as f64;
        let ratio = hits / 1e6 / s_rho_tail(&spec, mix.q11(), u).unwrap();
        assert!((ratio - 1.0).abs() < 0.03, "{ratio}");
        let bound = rho.max((1.0 - rho * rho).sqrt());
        assert!(draws.iter().all(|d| d.value <= 1.0 + 1e-15));
        assert!(draws.iter().filter(|d| !d.both_positive).all(|d| d.value <= bound + 1e-15));
    }

    #[test]
    fn dirichlet_local_form_uses_beta_density() {
        let mix = ScaleMixture::dirichlet(exp1(), 2.0, 3.0).unwrap();
        let spec = LocalGSpec::for_mixture(&mix, 0.4).unwrap();
        // Beta(2, 3) density 12 x (1-x)^2 at 0.4
        assert!((spec.l_rho.eval(1e-3) - 2.0 * 12.0 * 0.4 * 0.36).abs() < 1e-12);
    }

    #[test]
    fn second_moment_of_aggregate() {
        // E[U(ρ)²] = E[R²]/2 for the spherical law
        let pairs = sample_pair(&spherical_exp(), 0.7, 400_000, 2).unwrap();
        let m2 = pairs.iter().map(|p| p.1 * p.1).sum::<f64>() / pairs.len() as f64;
        assert!((m2 - 1.0).abs() < 0.02, "{m2}");
        assert_eq!(pairs, sample_pair(&spherical_exp(), 0.7, 400_000, 2).unwrap());
    }

    #[test]
    fn degenerate_scale_bounds_support() {
        let r = make_builtin(&Family::Uniform01).unwrap();
        let s = make_builtin(&Family::Degenerate { value: 0.3 }).unwrap();
        let mix = ScaleMixture::new(r, s, FAIR).unwrap();
        let rho: f64 = 0.8;
        let bound = rho * 0.3 + (1.0 - rho * rho).sqrt() * (1.0 - 0.09f64).sqrt();
        let pairs = sample_pair(&mix, rho, 50_000, 1).unwrap();
        assert!(pairs.iter().all(|p| p.1 <= bound + 1e-12));
    }

    #[test]
    fn frechet_route_spherical_moment() {
        // spherical S(ρ) is the cosine of a uniform angle: E[max(cos, 0)²] = 1/4
        let pareto = make_builtin(&Family::Pareto { gamma: 2.0, scale: 1.0 }).unwrap();
        let mix = ScaleMixture::spherical(pareto).unwrap();
        for rho in [0.2, 0.5, 0.8] {
            let f = u_rho_tail_frechet(&mix, rho, 100.0).unwrap();
            assert!((f.moment - 0.25).abs() < 1e-9, "{}", f.moment);
            assert!((f.negative_mass - 0.5).abs() < 1e-9);
            assert!((f.approx.value - 0.25e-4).abs() < 1e-13);
        }
        assert!(u_rho_tail_frechet(&spherical_exp(), 0.5, 10.0).is_err());
    }

    #[test]
    fn berman_identity() {
        let mix = spherical_exp();
        let same = berman_identity_check(&mix, 1.0, 0.0, 20_000, 3).unwrap();
        assert_eq!(same.pass, Some(true));
        let b = berman_identity_check(&mix, 1.0, 1.0, 100_000, 4).unwrap();
        assert_eq!(b.pass, Some(true), "{} vs {}", b.distance, b.critical_value);
        let d = ScaleMixture::dirichlet(exp1(), 2.0, 3.0).unwrap();
        let c = berman_identity_check(&d, 1.0, 1.0, 100_000, 4).unwrap();
        assert_eq!(c.pass, None);
        assert!(c.distance > b.distance);
    }

    #[test]
    fn ks_distance_basics() {
        assert_eq!(ks_distance(vec![1.0, 2.0], vec![1.0, 2.0]), 0.0);
        assert_eq!(ks_distance(vec![1.0, 2.0], vec![3.0, 4.0]), 1.0);
        assert!((ks_distance(vec![1.0, 3.0], vec![2.0, 4.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ratio_estimate_identical_events_has_zero_width() {
        let r = RatioEstimate::from_counts(100, 100, 100, 10_000);
        assert_eq!(r.ratio, 1.0);
        assert!(r.half_width_95 < 1e-6);
    }

    #[test]
    fn weibull_radius_joint_exceedance_vanishes() {
        let mix = ScaleMixture::spherical(make_builtin(&Family::Uniform01).unwrap()).unwrap();
        let d = asymptotic_independence_diagnostic(&mix, 0.5, &[1e2, 1e3, 1e4], 2_000_000, 9).unwrap();
        assert_eq!(d.joint_counts[2], 0);
        assert_eq!(d.verdict, Verdict::Inconclusive);
    }
}
