//! Discrete-time insurance model with a risky and a risk-free asset.
//!
//! Wealth evolves as `Uᵢ = Uᵢ₋₁ / Sᵢ + Zᵢ` with overall discount factor
//! `Sᵢ = 1/((1-πᵢ)(1+δᵢ) + πᵢ(1+Δᵢ))` and stock discount factor
//! `Υᵢ = 1/(1+Δᵢ)`. Net losses are `Rᵢ = -Zᵢ`.

use std::io::Write;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{self, ProductModel};
use crate::dist::{Distribution, Law, ScalingSpec, SlowlyVarying, TailClass};
use crate::error::{check_grid, Error, Result};
use crate::mc::{chunk_rng, MCEstimate};
use crate::oracle;
use crate::special::ln_gamma;
use crate::subexp::CriterionTrajectory;

pub const RUIN_ASYMPTOTIC: &str =
    "ruin asymptotics: sum_k F(u_k) prod_i Gamma(a_i+1)/(pi_i s_i)^a_i P(Y_i > u_k w(u_k)), u_k = u/prod s_i";
pub const RUIN_TERM_SUM: &str = "ruin term sum: sum_k P(R_k S_1...S_k > u)";
pub const RUIN_MC: &str = "ruin Monte Carlo: P(min_i U_i < 0 | U_0 = u)";
pub const DISCOUNT_EQUIVALENCE: &str = "P(S > s - 1/u) / P(Y > pi s^2 u) -> 1";

/// Smallest ruin probability the Monte Carlo estimator will report.
pub const MC_RARITY_FLOOR: f64 = 1e-7;

/// Model parameters over a horizon of `n` periods.
#[derive(Debug, Clone)]
pub struct RiskModel {
    /// common law `F` of the net losses `Rᵢ = -Zᵢ`
    pub net_loss: Distribution,
    /// laws of the stock discount factors `Υᵢ`
    pub upsilon: Vec<Distribution>,
    /// stock fractions `πᵢ ∈ [0, 1)`
    pub pi: Vec<f64>,
    /// bond rates `δᵢ > 0`
    pub delta: Vec<f64>,
    /// caller's assertion that `F` is subexponential
    pub subexponential: bool,
}

impl RiskModel {
    pub fn new(
        net_loss: Distribution,
        upsilon: Vec<Distribution>,
        pi: Vec<f64>,
        delta: Vec<f64>,
        subexponential: bool,
    ) -> Result<Self> {
        let n = upsilon.len();
        if n == 0 || pi.len() != n || delta.len() != n {
            return Err(Error::Domain("upsilon, pi and delta need one entry per period"));
        }
        for &p in &pi {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidParameter {
                    name: "pi",
                    value: p,
                    reason: "stock fraction must lie in [0, 1)",
                });
            }
        }
        for &d in &delta {
            crate::error::check_positive("delta", d)?;
        }
        if upsilon.iter().any(|y| y.support_lo() < 0.0) {
            return Err(Error::Domain("discount factors must be positive"));
        }
        Ok(Self {
            net_loss,
            upsilon,
            pi,
            delta,
            subexponential,
        })
    }

    /// Same parameters in every period.
    pub fn stationary(net_loss: Distribution, upsilon: Distribution, pi: f64, delta: f64, n: usize, subexponential: bool) -> Result<Self> {
        Self::new(net_loss, vec![upsilon; n], vec![pi; n], vec![delta; n], subexponential)
    }

    pub fn horizon(&self) -> usize {
        self.pi.len()
    }

    /// `ŝᵢ = 1/((1-πᵢ)(1+δᵢ))`.
    pub fn s_hat(&self, i: usize) -> f64 {
        1.0 / ((1.0 - self.pi[i]) * (1.0 + self.delta[i]))
    }

    /// `S_i / ŝ_i = Υᵢ/(Υᵢ + πᵢŝᵢ)` as a contraction factor.
    pub fn normalized_factor(&self, i: usize) -> Result<ScalingSpec> {
        let c = self.pi[i] * self.s_hat(i);
        if c == 0.0 {
            return Ok(ScalingSpec::unit());
        }
        discount_ratio_spec(&self.upsilon[i], c)
    }

    fn frechet_index(&self, i: usize) -> Result<f64> {
        match self.upsilon[i].tail_class() {
            TailClass::Frechet { gamma } => Ok(gamma),
            other => Err(Error::WrongTailClass {
                expected: "Frechet",
                found: other.kind(),
            }),
        }
    }

    fn require_subexponential(&self) -> Result<()> {
        if self.subexponential {
            Ok(())
        } else {
            Err(Error::NotAsserted("net loss subexponentiality"))
        }
    }
}

/// Law of `Υ/(Υ + c)`.
#[derive(Debug)]
struct DiscountRatio {
    upsilon: Distribution,
    c: f64,
    alpha: f64,
}

impl DiscountRatio {
    fn to_y(&self, x: f64) -> f64 {
        self.c * x / (1.0 - x)
    }

    fn ratio_at(&self, y: f64) -> f64 {
        if y.is_infinite() {
            1.0
        } else {
            y / (y + self.c)
        }
    }
}

impl Law for DiscountRatio {
    fn name(&self) -> String {
        format!("{0}/({0}+{1})", self.upsilon.name(), self.c)
    }

    fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.upsilon.support();
        (self.ratio_at(lo), self.ratio_at(hi))
    }

    fn survival(&self, x: f64) -> f64 {
        self.log_survival(x).exp()
    }

    fn log_survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            f64::NEG_INFINITY
        } else {
            self.upsilon.log_survival(self.to_y(x))
        }
    }

    fn density(&self, x: f64) -> Option<f64> {
        self.log_density(x).map(f64::exp)
    }

    fn log_density(&self, x: f64) -> Option<f64> {
        if !(x > 0.0 && x < 1.0) {
            return self.upsilon.has_density().then_some(f64::NEG_INFINITY);
        }
        let lf = self.upsilon.log_density(self.to_y(x))?;
        Some(lf + self.c.ln() - 2.0 * (-x).ln_1p())
    }

    fn has_density(&self) -> bool {
        self.upsilon.has_density()
    }

    fn quantile(&self, p: f64) -> f64 {
        self.ratio_at(self.upsilon.quantile(p))
    }

    fn upper_quantile(&self, q: f64) -> f64 {
        self.ratio_at(self.upsilon.upper_quantile(q))
    }

    fn survival_below_one(&self, delta: f64) -> f64 {
        if delta >= 1.0 {
            return 1.0;
        }
        self.upsilon.survival(self.c * (1.0 - delta) / delta)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        self.ratio_at(self.upsilon.sample(rng))
    }

    fn tail_class(&self) -> TailClass {
        TailClass::Weibull {
            gamma: self.alpha,
            endpoint: 1.0,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.upsilon.breakpoints().into_iter().map(|y| self.ratio_at(y)).collect()
    }

    fn point_mass(&self) -> Option<f64> {
        self.upsilon.point_mass().map(|y| self.ratio_at(y))
    }
}

/// `Υ/(Υ + c)` as a contraction factor. Its tail at 1 inherits the
/// Fréchet index of `Υ`, with slowly varying part
/// `L(x) = x^α P(Υ > c(x - 1))`.
pub fn discount_ratio_spec(upsilon: &Distribution, c: f64) -> Result<ScalingSpec> {
    crate::error::check_positive("pi * s_hat", c)?;
    let alpha = match upsilon.tail_class() {
        TailClass::Frechet { gamma } => gamma,
        other => {
            return Err(Error::WrongTailClass {
                expected: "Frechet",
                found: other.kind(),
            })
        }
    };
    let law = DiscountRatio {
        upsilon: upsilon.clone(),
        c,
        alpha,
    };
    let density_alpha_valid = law.has_density();
    let y = upsilon.clone();
    let l = SlowlyVarying::new(move |x: f64| x.powf(alpha) * y.survival(c * (x - 1.0)));
    ScalingSpec::custom(Distribution::new(law), alpha, l, density_alpha_valid)
}

/// How a ruin probability was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuinMethod {
    MonteCarlo,
    TermSum,
    Asymptotic,
}

impl RuinMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MonteCarlo => "montecarlo",
            Self::TermSum => "term_sum",
            Self::Asymptotic => "asymptotic",
        }
    }
}

/// `ψ(u; n)` by one method. `interval` is the 95% Monte Carlo interval or
/// the quadrature grid error band; the asymptotic value carries none.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuinResult {
    pub u0: f64,
    pub n: usize,
    pub method: RuinMethod,
    pub value: f64,
    pub log_value: f64,
    pub interval: Option<(f64, f64)>,
    pub mc: Option<MCEstimate>,
    pub formula_id: &'static str,
}

/// Writes rows `u0, n, method, value, ci_lo, ci_hi`.
pub fn write_ruin_csv<W: Write>(rows: &[RuinResult], out: W) -> Result<()> {
    let io = |_| Error::Domain("failed to write CSV");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u0", "n", "method", "value", "ci_lo", "ci_hi"]).map_err(io)?;
    for r in rows {
        let (lo, hi) = match r.interval {
            Some((lo, hi)) => (format!("{lo:e}"), format!("{hi:e}")),
            None => (String::new(), String::new()),
        };
        w.write_record([
            format!("{}", r.u0),
            r.n.to_string(),
            r.method.as_str().to_string(),
            format!("{:e}", r.value),
            lo,
            hi,
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|_| Error::Domain("failed to write CSV"))?;
    Ok(())
}

fn check_u0(u0: f64) -> Result<()> {
    if !(u0 >= 0.0 && u0.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "u0",
            value: u0,
            reason: "initial wealth must be finite and nonnegative",
        });
    }
    Ok(())
}

fn step(model: &RiskModel, i: usize, u: f64, rng: &mut dyn RngCore) -> Result<f64> {
    let y = model.upsilon[i].sample(rng);
    if !(y > 0.0) {
        return Err(Error::Domain("discount factor sample is not positive"));
    }
    let growth = (1.0 - model.pi[i]) * (1.0 + model.delta[i]) + model.pi[i] / y;
    let r = model.net_loss.sample(rng);
    Ok(growth * u - r)
}

fn path_with(model: &RiskModel, u0: f64, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
    let mut path = Vec::with_capacity(model.horizon() + 1);
    path.push(u0);
    for i in 0..model.horizon() {
        let next = step(model, i, path[i], rng)?;
        path.push(next);
    }
    Ok(path)
}

/// One wealth path `U₀, …, Uₙ`. Path `k` of a seeded run uses its own
/// stream, so `simulate_wealth_path(m, u, seed, k)` reproduces path `k` of
/// [`ruin_prob_mc`].
pub fn simulate_wealth_path(model: &RiskModel, u0: f64, seed: u64, path: u64) -> Result<Vec<f64>> {
    check_u0(u0)?;
    path_with(model, u0, &mut chunk_rng(seed, path))
}

/// Fraction of `n_paths` seeded paths with `min Uᵢ < 0`. Every path draws
/// all of its periods from its own stream, so estimates are coupled across
/// `u0` and horizons under one seed.
pub fn ruin_prob_mc(model: &RiskModel, u0: f64, n_paths: u64, seed: u64) -> Result<RuinResult> {
    check_u0(u0)?;
    if n_paths < 10_000 {
        return Err(Error::InvalidParameter {
            name: "n_paths",
            value: n_paths as f64,
            reason: "need at least 10^4 paths",
        });
    }
    let hits = (0..n_paths as usize)
        .into_par_iter()
        .map(|k| -> Result<u64> {
            let path = path_with(model, u0, &mut chunk_rng(seed, k as u64))?;
            Ok(u64::from(path.iter().any(|&x| x < 0.0)))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let est = MCEstimate::from_hits(hits, n_paths, seed);
    if est.value < MC_RARITY_FLOOR {
        return Err(Error::Rarity {
            estimate: est.value,
            floor: MC_RARITY_FLOOR,
        });
    }
    Ok(RuinResult {
        u0,
        n: model.horizon(),
        method: RuinMethod::MonteCarlo,
        value: est.value,
        log_value: est.value.ln(),
        interval: Some(est.interval()),
        mc: Some(est),
        formula_id: RUIN_MC,
    })
}

/// `u0 / (ŝ₁⋯ŝₖ)` for `k = 1..=n`.
pub fn reduced_thresholds(model: &RiskModel, u0: f64) -> Vec<f64> {
    let mut u = u0;
    (0..model.horizon())
        .map(|i| {
            u /= model.s_hat(i);
            u
        })
        .collect()
}

/// `Σₖ P(Rₖ S₁⋯Sₖ > u0)`, each term by the iterated quadrature oracle.
pub fn ruin_term_sum(model: &RiskModel, u0: f64) -> Result<RuinResult> {
    check_u0(u0)?;
    model.require_subexponential()?;
    let uk = reduced_thresholds(model, u0);
    let mut factors = Vec::new();
    let mut total = 0.0;
    let mut err = 0.0;
    for (i, &u) in uk.iter().enumerate() {
        factors.push(model.normalized_factor(i)?);
        let m = ProductModel::new(model.net_loss.clone(), factors.clone())?;
        let t = oracle::exact_tail_iterated(&m, u)?;
        total += t.value;
        err += t.value * t.grid_error;
    }
    Ok(RuinResult {
        u0,
        n: model.horizon(),
        method: RuinMethod::TermSum,
        value: total,
        log_value: total.ln(),
        interval: Some(((total - err).max(0.0), (total + err).min(1.0))),
        mc: None,
        formula_id: RUIN_TERM_SUM,
    })
}

/// The asymptotic ruin formula, each term summed in log space.
pub fn ruin_asymptotic(model: &RiskModel, u0: f64) -> Result<RuinResult> {
    check_u0(u0)?;
    model.require_subexponential()?;
    let r = &model.net_loss;
    if r.support_hi().is_finite() {
        return Err(Error::FiniteEndpoint("ruin asymptotics"));
    }
    let uk = reduced_thresholds(model, u0);
    let mut log_terms = Vec::with_capacity(uk.len());
    for (k, &u) in uk.iter().enumerate() {
        let eta = asymptotics::eta(r, u)?;
        let mut parts = vec![r.log_survival(u)];
        for i in 0..=k {
            let alpha = model.frechet_index(i)?;
            let c = model.pi[i] * model.s_hat(i);
            if c == 0.0 && alpha > 0.0 {
                return Err(Error::Domain("zero stock fraction: (pi s_hat)^alpha vanishes"));
            }
            parts.push(ln_gamma(alpha + 1.0));
            parts.push(-alpha * c.ln());
            parts.push(model.upsilon[i].log_survival(eta));
        }
        parts.sort_by(f64::total_cmp);
        log_terms.push(parts.iter().sum::<f64>());
    }
    let top = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_value = if top == f64::NEG_INFINITY {
        top
    } else {
        top + log_terms.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
    };
    Ok(RuinResult {
        u0,
        n: model.horizon(),
        method: RuinMethod::Asymptotic,
        value: log_value.exp(),
        log_value,
        interval: None,
        mc: None,
        formula_id: RUIN_ASYMPTOTIC,
    })
}

/// `P(Sᵢ > ŝᵢ - 1/u) / P(Υᵢ > πᵢŝᵢ²u)` along `u_grid`; the verdict concerns
/// the distance to 1.
pub fn discount_tail_equivalence(model: &RiskModel, i: usize, u_grid: &[f64]) -> Result<CriterionTrajectory> {
    check_grid(u_grid, 2)?;
    if i >= model.horizon() {
        return Err(Error::Domain("period index beyond horizon"));
    }
    let s = model.s_hat(i);
    let c = model.pi[i] * s;
    if c == 0.0 {
        return Err(Error::Domain("zero stock fraction: S is degenerate"));
    }
    let y = &model.upsilon[i];
    let logs = u_grid
        .iter()
        .map(|&u| {
            if !(s * u > 1.0) {
                return f64::NAN;
            }
            // P(S > ŝ - 1/u) = P(Υ > πŝ(ŝu - 1))
            y.log_survival(c * (s * u - 1.0)) - y.log_survival(c * s * u)
        })
        .collect();
    Ok(CriterionTrajectory::new(DISCOUNT_EQUIVALENCE, u_grid, logs, 1.0, Default::default()))
}
