//! Independent ground truth for the product tails.
//!
//! * Quadrature for one factor: `P(RS > u) = ∫_u Ḡ(u/y) dF(y)` when `R` has
//!   a density, otherwise `∫_u F̄(y) g(u/y) u/y² dy`. Integrands are divided
//!   by `F̄(u)` in log space so that tails far below `1e-300` stay usable.
//! * Iterated folding for several factors: the survival of `R·S₁⋯S_k` is
//!   tabulated in log form on a tail-adapted axis, interpolated with a
//!   monotone cubic and folded with the next factor density. Grid error is
//!   estimated by doubling the node count.
//! * Seeded Monte Carlo.

use std::io::Write;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{self, ApproxResult, ProductModel};
use crate::dist::{integrate_tail_with, AuxScale, Distribution, Law, ScalingSpec, TailClass};
use crate::error::{check_grid, Error, Result};
use crate::interp::Pchip;
use crate::mc::{self, MCEstimate};
use crate::quad::QuadConfig;

/// Nodes of the coarse table in the iterated fold; the error estimate uses
/// twice as many.
pub const FOLD_NODES: usize = 2048;
/// Largest acceptable relative grid error of the iterated fold.
pub const FOLD_TOL: f64 = 1e-4;

fn quad_cfg() -> QuadConfig {
    QuadConfig::rel(1e-11)
}

fn factor_breaks(s: &ScalingSpec, u: f64) -> Vec<f64> {
    s.dist.breakpoints().into_iter().filter(|&b| b > 0.0).map(|b| u / b).collect()
}

/// `ln P(R S > u)` by quadrature.
pub fn exact_log_tail(r: &Distribution, s: &ScalingSpec, u: f64) -> Result<f64> {
    if u <= 0.0 {
        return Ok(0.0);
    }
    if let Some(c) = s.point_mass() {
        return Ok(r.log_survival(u / c));
    }
    if let Some(r0) = r.point_mass() {
        return Ok(s.dist.log_survival(u / r0));
    }
    let log_fu = r.log_survival(u);
    if log_fu == f64::NEG_INFINITY && u >= r.support_hi() {
        return Ok(f64::NEG_INFINITY);
    }
    if !log_fu.is_finite() {
        return Err(Error::Underflow { u });
    }
    let breaks = factor_breaks(s, u);
    let integral = if r.has_density() {
        let f = |y: f64| {
            if y <= u {
                return 0.0;
            }
            let gbar = s.tail_at_one((y - u) / y);
            if gbar == 0.0 {
                return 0.0;
            }
            match r.log_density(y) {
                Some(lf) => gbar * (lf - log_fu).exp(),
                None => 0.0,
            }
        };
        integrate_tail_with(r, f, u, &breaks, quad_cfg())?
    } else if s.dist.has_density() {
        let f = |y: f64| {
            let g = s.dist.density(u / y).unwrap_or(0.0);
            if g == 0.0 {
                return 0.0;
            }
            g * u / (y * y) * (r.log_survival(y) - log_fu).exp()
        };
        integrate_tail_with(r, f, u, &breaks, quad_cfg())?
    } else {
        return Err(Error::MissingDensity("both the risk and the factor"));
    };
    Ok(log_fu + integral.ln())
}

fn single_factor(m: &ProductModel) -> Result<&ScalingSpec> {
    match m.factors.as_slice() {
        [s] => Ok(s),
        _ => Err(Error::Domain("quadrature oracle handles exactly one factor")),
    }
}

/// `P(R S > u)` for a one-factor model.
pub fn exact_tail_quadrature(m: &ProductModel, u: f64) -> Result<f64> {
    Ok(exact_log_tail(&m.r, single_factor(m)?, u)?.exp())
}

/// `ln h(u)` for the density `h` of `R S`.
pub fn exact_log_density(r: &Distribution, s: &ScalingSpec, u: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::OutOfRange {
            u,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    if let Some(c) = s.point_mass() {
        return r
            .log_density(u / c)
            .map(|l| l - c.ln())
            .ok_or(Error::MissingDensity("risk"));
    }
    if let Some(r0) = r.point_mass() {
        return s
            .dist
            .log_density(u / r0)
            .map(|l| l - r0.ln())
            .ok_or(Error::MissingDensity("factor"));
    }
    if !(r.has_density() && s.dist.has_density()) {
        return Err(Error::MissingDensity("risk and factor"));
    }
    if u >= r.support_hi() {
        return Ok(f64::NEG_INFINITY);
    }
    let mut norm = r.log_survival(u);
    if !norm.is_finite() {
        return Err(Error::Underflow { u });
    }
    if norm == 0.0 {
        norm = r.log_density(u).filter(|l| l.is_finite()).unwrap_or(0.0);
    }
    let f = |y: f64| {
        let g = s.dist.density(u / y).unwrap_or(0.0);
        if g == 0.0 {
            return 0.0;
        }
        match r.log_density(y) {
            Some(lf) => g / y * (lf - norm).exp(),
            None => 0.0,
        }
    };
    let integral = integrate_tail_with(r, f, u, &factor_breaks(s, u), quad_cfg())?;
    Ok(norm + integral.ln())
}

/// Density `h(u)` of `R S` for a one-factor model.
pub fn exact_density_quadrature(m: &ProductModel, u: f64) -> Result<f64> {
    Ok(exact_log_density(&m.r, single_factor(m)?, u)?.exp())
}

/// Iterated-fold result with its grid-doubling error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IteratedTail {
    pub value: f64,
    pub log_value: f64,
    pub grid_error: f64,
}

#[derive(Debug, Clone, Copy)]
enum Axis {
    /// `y = u + t·scale`
    Linear { u: f64, scale: f64 },
    /// `y = u·e^t`
    Log { u: f64 },
    /// `y = hi - (hi - u)·e^{-t}`
    Endpoint { hi: f64, span: f64 },
}

impl Axis {
    fn for_risk(r: &Distribution, u: f64) -> Self {
        let hi = r.support_hi();
        if hi.is_finite() {
            return Self::Endpoint { hi, span: hi - u };
        }
        match r.tail_class() {
            TailClass::Frechet { .. } => Self::Log { u },
            _ => Self::Linear {
                u,
                scale: r.tail_scale(u),
            },
        }
    }

    fn y(&self, t: f64) -> f64 {
        match *self {
            Self::Linear { u, scale } => u + t * scale,
            Self::Log { u } => u * t.exp(),
            Self::Endpoint { hi, span } => hi - span * (-t).exp(),
        }
    }

    fn t(&self, y: f64) -> f64 {
        match *self {
            Self::Linear { u, scale } => (y - u) / scale,
            Self::Log { u } => (y / u).ln(),
            Self::Endpoint { hi, span } => -((hi - y) / span).ln(),
        }
    }

    /// Extent of `t` over which `R`'s survival drops by `e^{-60}`.
    fn extent(&self, r: &Distribution, u: f64) -> f64 {
        let l0 = r.log_survival(u);
        let mut t = 1.0 / 64.0;
        while t < 1e7 {
            let l = r.log_survival(self.y(t));
            if !(l - l0 > -60.0) {
                break;
            }
            if matches!(self, Self::Log { .. }) && t > 600.0 {
                break;
            }
            t *= 2.0;
        }
        t
    }
}

struct Table {
    axis: Axis,
    interp: Pchip,
}

impl Table {
    fn build<F>(axis: Axis, extent: f64, nodes: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64> + Sync,
    {
        let h = extent / (nodes - 1) as f64;
        let mut logs: Vec<f64> = (0..nodes)
            .into_par_iter()
            .map(|i| f(axis.y(i as f64 * h)))
            .collect::<Result<_>>()?;
        let floor = logs[0] - 1e3;
        for l in &mut logs {
            if !(*l >= floor) {
                *l = floor;
            }
        }
        Ok(Self {
            axis,
            interp: Pchip::uniform(0.0, h, logs),
        })
    }

    fn log_survival(&self, y: f64) -> f64 {
        self.interp.eval(self.axis.t(y).max(0.0))
    }
}

/// `ln P(Y S > y)` where `ln P(Y > ·)` is `prev` and `Y ≤ hi(r)`.
fn fold_point(r: &Distribution, prev: &dyn Fn(f64) -> f64, s: &ScalingSpec, y: f64) -> Result<f64> {
    let lp = prev(y);
    let f = |z: f64| {
        let g = s.dist.density(y / z).unwrap_or(0.0);
        if g == 0.0 {
            return 0.0;
        }
        g * y / (z * z) * (prev(z) - lp).exp()
    };
    let integral = integrate_tail_with(r, f, y, &factor_breaks(s, y), quad_cfg())?;
    Ok(lp + integral.ln())
}

fn iterated_log_tail(r: &Distribution, factors: &[&ScalingSpec], u: f64, nodes: usize) -> Result<f64> {
    let axis = Axis::for_risk(r, u);
    let extent = axis.extent(r, u);
    let first = factors[0];
    let mut table = Table::build(axis, extent, nodes, |y| exact_log_tail(r, first, y))?;
    let last = factors.len() - 1;
    for s in &factors[1..last] {
        let prev = |z: f64| table.log_survival(z);
        table = Table::build(axis, extent, nodes, |y| fold_point(r, &prev, s, y))?;
    }
    let prev = |z: f64| table.log_survival(z);
    fold_point(r, &prev, factors[last], u)
}

/// `P(R S₁⋯Sₙ > u)` by iterated folding.
pub fn exact_tail_iterated(m: &ProductModel, u: f64) -> Result<IteratedTail> {
    let mut u_eff = u;
    let mut rest: Vec<&ScalingSpec> = Vec::new();
    for s in &m.factors {
        match s.point_mass() {
            Some(c) => u_eff /= c,
            None => rest.push(s),
        }
    }
    let exact = |log_value: f64| IteratedTail {
        value: log_value.exp(),
        log_value,
        grid_error: 0.0,
    };
    match rest.len() {
        0 => return Ok(exact(m.r.log_survival(u_eff))),
        1 => return Ok(exact(exact_log_tail(&m.r, rest[0], u_eff)?)),
        _ => {}
    }
    // the first fold may use the risk density; later folds need factor densities
    rest.sort_by_key(|s| s.dist.has_density());
    if rest[1..].iter().any(|s| !s.dist.has_density()) {
        return Err(Error::MissingDensity("all but one factor"));
    }
    let coarse = iterated_log_tail(&m.r, &rest, u_eff, FOLD_NODES)?;
    let fine = iterated_log_tail(&m.r, &rest, u_eff, 2 * FOLD_NODES)?;
    let grid_error = (coarse - fine).exp_m1().abs();
    if !(grid_error <= FOLD_TOL) {
        return Err(Error::GridResolution(grid_error));
    }
    Ok(IteratedTail {
        value: fine.exp(),
        log_value: fine,
        grid_error,
    })
}

/// Monte Carlo estimate of `P(R S₁⋯Sₙ > u)`.
pub fn mc_tail(m: &ProductModel, u: f64, n_samples: u64, seed: u64) -> Result<MCEstimate> {
    if n_samples < 1000 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            value: n_samples as f64,
            reason: "need at least 1000 samples",
        });
    }
    Ok(mc::estimate(n_samples, seed, |rng| sample_product(m, rng) > u))
}

/// One draw of `R S₁⋯Sₙ`.
pub fn sample_product(m: &ProductModel, rng: &mut dyn RngCore) -> f64 {
    let mut x = m.r.sample(rng);
    for s in &m.factors {
        x *= s.dist.sample(rng);
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Quadrature,
    MonteCarlo { n_samples: u64, seed: u64 },
}

impl OracleMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Quadrature => "quadrature",
            Self::MonteCarlo { .. } => "montecarlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum TailEstimate {
    Quadrature(IteratedTail),
    MonteCarlo(MCEstimate),
}

impl TailEstimate {
    pub fn value(&self) -> f64 {
        match self {
            Self::Quadrature(t) => t.value,
            Self::MonteCarlo(e) => e.value,
        }
    }

    pub fn half_width(&self) -> f64 {
        match self {
            Self::Quadrature(_) => 0.0,
            Self::MonteCarlo(e) => e.half_width_95,
        }
    }
}

/// `P(Xₙ > u)` by the requested oracle.
pub fn exact_tail_nfold(m: &ProductModel, u: f64, method: OracleMethod) -> Result<TailEstimate> {
    match method {
        OracleMethod::Quadrature => exact_tail_iterated(m, u).map(TailEstimate::Quadrature),
        OracleMethod::MonteCarlo { n_samples, seed } => mc_tail(m, u, n_samples, seed).map(TailEstimate::MonteCarlo),
    }
}

/// Asymptotic formula a convergence report checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formula {
    Breiman,
    GumbelProduct,
    WeibullProduct,
}

impl Formula {
    pub fn eval(&self, m: &ProductModel, u: f64) -> Result<ApproxResult> {
        match self {
            Self::Breiman => asymptotics::breiman_tail(m, u),
            Self::GumbelProduct => asymptotics::gumbel_product_tail(m, u),
            Self::WeibullProduct => asymptotics::weibull_product_tail(m, u),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Breiman => asymptotics::BREIMAN,
            Self::GumbelProduct => asymptotics::GUMBEL_PRODUCT,
            Self::WeibullProduct => asymptotics::WEIBULL_PRODUCT,
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "breiman" => Ok(Self::Breiman),
            "gumbel" | "gumbel_product" => Ok(Self::GumbelProduct),
            "weibull" | "weibull_product" => Ok(Self::WeibullProduct),
            _ => Err(Error::Domain("unknown formula")),
        }
    }
}

/// Exact versus asymptotic tail along a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub formula_id: &'static str,
    pub method: &'static str,
    pub u_grid: Vec<f64>,
    pub exact: Vec<f64>,
    pub asympt: Vec<f64>,
    pub ratio: Vec<f64>,
    /// MC half widths of `exact` (zero for quadrature)
    pub half_width: Vec<f64>,
    pub trend_ok: bool,
    /// grid points where an evaluation failed
    pub gaps: Vec<Gap>,
}

/// A grid point a report could not fill.
#[derive(Debug, Clone, PartialEq)]
pub struct Gap {
    pub u: f64,
    pub error: Error,
}

impl Serialize for Gap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Gap", 2)?;
        st.serialize_field("u", &self.u)?;
        st.serialize_field("reason", &self.error.to_string())?;
        st.end()
    }
}

impl ConvergenceReport {
    /// `|ratio - 1|` non-increasing over the last four usable points,
    /// allowing for the MC half widths.
    fn trend(ratio: &[f64], asympt: &[f64], hw: &[f64]) -> bool {
        let pts: Vec<(f64, f64)> = (0..ratio.len())
            .filter(|&j| ratio[j].is_finite())
            .map(|j| ((ratio[j] - 1.0).abs(), hw[j] / asympt[j]))
            .collect();
        if pts.len() < 2 {
            return false;
        }
        let tail = &pts[pts.len().saturating_sub(4)..];
        tail.windows(2).all(|w| w[1].0 <= w[0].0 + w[0].1 + w[1].1)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |_| Error::Domain("failed to write CSV");
        w.write_record(["u", "exact", "asympt", "ratio", "method"]).map_err(io)?;
        for j in 0..self.u_grid.len() {
            w.write_record([
                format!("{:e}", self.u_grid[j]),
                format!("{:e}", self.exact[j]),
                format!("{:e}", self.asympt[j]),
                format!("{:e}", self.ratio[j]),
                self.method.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|_| Error::Domain("failed to write CSV"))?;
        Ok(())
    }
}

/// Fills exact, asymptotic and ratio columns for `formula` along `u_grid`.
/// With quadrature, one-factor models use the direct integral and longer
/// products the iterated fold.
pub fn convergence_report(
    m: &ProductModel,
    formula: Formula,
    u_grid: &[f64],
    method: OracleMethod,
) -> Result<ConvergenceReport> {
    check_grid(u_grid, 1)?;
    let n = u_grid.len();
    let (mut exact, mut asympt, mut ratio, mut hw) = (vec![f64::NAN; n], vec![f64::NAN; n], vec![f64::NAN; n], vec![0.0; n]);
    let mut gaps = Vec::new();
    for (j, &u) in u_grid.iter().enumerate() {
        let a = match formula.eval(m, u) {
            Ok(a) => a,
            Err(e) => {
                gaps.push(Gap { u, error: e });
                continue;
            }
        };
        asympt[j] = a.value;
        let e = match exact_tail_nfold(m, u, method) {
            Ok(e) => e,
            Err(e) => {
                gaps.push(Gap { u, error: e });
                continue;
            }
        };
        exact[j] = e.value();
        hw[j] = e.half_width();
        ratio[j] = e.value() / a.value;
    }
    let trend_ok = ConvergenceReport::trend(&ratio, &asympt, &hw);
    Ok(ConvergenceReport {
        formula_id: formula.id(),
        method: method.name(),
        u_grid: u_grid.to_vec(),
        exact,
        asympt,
        ratio,
        half_width: hw,
        trend_ok,
        gaps,
    })
}

/// Law of `R S` for a one-factor model, with survival and density from
/// quadrature. Makes mean excess and quantiles of the product available.
pub fn product_distribution(m: &ProductModel) -> Result<Distribution> {
    let s = single_factor(m)?.clone();
    Ok(Distribution::new(ProductLaw { r: m.r.clone(), s }))
}

#[derive(Debug)]
struct ProductLaw {
    r: Distribution,
    s: ScalingSpec,
}

impl Law for ProductLaw {
    fn name(&self) -> String {
        format!("{} x {}", self.r.name(), self.s.dist.name())
    }

    fn support(&self) -> (f64, f64) {
        let (a, b) = self.r.support();
        let (c, d) = self.s.dist.support();
        (a * c, b * d)
    }

    fn survival(&self, u: f64) -> f64 {
        self.log_survival(u).exp()
    }

    fn log_survival(&self, u: f64) -> f64 {
        exact_log_tail(&self.r, &self.s, u).unwrap_or(f64::NAN)
    }

    fn density(&self, u: f64) -> Option<f64> {
        exact_log_density(&self.r, &self.s, u).ok().map(f64::exp)
    }

    fn quantile(&self, p: f64) -> f64 {
        self.upper_quantile(1.0 - p)
    }

    fn upper_quantile(&self, q: f64) -> f64 {
        let target = q.ln();
        let (lo0, hi0) = self.support();
        let mut lo = lo0;
        // P(RS > y) ≤ P(R > y)
        let mut hi = self.r.upper_quantile(q).min(hi0);
        if !hi.is_finite() {
            return hi;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if !(mid > lo && mid < hi) {
                break;
            }
            if self.log_survival(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        self.r.sample(rng) * self.s.dist.sample(rng)
    }

    fn tail_class(&self) -> TailClass {
        match self.r.tail_class() {
            TailClass::Weibull { gamma, endpoint } => TailClass::Weibull {
                gamma: gamma + self.s.alpha,
                endpoint,
            },
            TailClass::Gumbel { aux, endpoint } => TailClass::Gumbel {
                aux: AuxScale::new(move |u| aux.eval(u)),
                endpoint,
            },
            frechet => frechet,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.r.breakpoints()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{make_builtin, mean_excess, Family};
    use crate::special::exp_integral_e1;

    fn exp1() -> Distribution {
        make_builtin(&Family::Exponential { rate: 1.0 }).unwrap()
    }

    fn unif() -> Distribution {
        make_builtin(&Family::Uniform01).unwrap()
    }

    fn pareto2() -> Distribution {
        make_builtin(&Family::Pareto { gamma: 2.0, scale: 1.0 }).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // P(E·U > u) = e^{-u} - u E1(u)
    fn exp_unif_tail(u: f64) -> f64 {
        (-u).exp() - u * exp_integral_e1(u)
    }

    #[test]
    fn exp_uniform_closed_form() {
        let m = ProductModel::single(exp1(), ScalingSpec::uniform()).unwrap();
        for &u in &[0.5, 5.0, 20.0, 40.0] {
            assert!(rel(exact_tail_quadrature(&m, u).unwrap(), exp_unif_tail(u)) < 1e-9, "u={u}");
        }
        // deep tail stays representable through the log form
        let l = exact_log_tail(&m.r, &m.factors[0], 1000.0).unwrap();
        assert!((l - (-1000.0 - 1000f64.ln() + (1.0 - 2.0 / 1000.0 + 6e-6 - 2.4e-8f64).ln())).abs() < 1e-6);
    }

    #[test]
    fn uniform_uniform_and_pareto_closed_forms() {
        let m = ProductModel::single(unif(), ScalingSpec::uniform()).unwrap();
        let u = 0.99_f64;
        assert!(rel(exact_tail_quadrature(&m, u).unwrap(), 1.0 - u + u * u.ln()) < 1e-9);
        let m = ProductModel::single(pareto2(), ScalingSpec::uniform()).unwrap();
        for &u in &[2.0, 10.0, 100.0] {
            assert!(rel(exact_tail_quadrature(&m, u).unwrap(), u.powi(-2) / 3.0) < 1e-10);
        }
    }

    #[test]
    fn route_b_agrees_with_route_a() {
        // Degenerate-free risk without density: wrap Exp(1) survival only
        #[derive(Debug)]
        struct NoDensity(Distribution);
        impl Law for NoDensity {
            fn name(&self) -> String {
                "exp-no-density".into()
            }
            fn support(&self) -> (f64, f64) {
                self.0.support()
            }
            fn survival(&self, u: f64) -> f64 {
                self.0.survival(u)
            }
            fn log_survival(&self, u: f64) -> f64 {
                self.0.log_survival(u)
            }
            fn quantile(&self, p: f64) -> f64 {
                self.0.quantile(p)
            }
            fn tail_class(&self) -> TailClass {
                self.0.tail_class()
            }
        }
        let r = Distribution::new(NoDensity(exp1()));
        let s = ScalingSpec::beta(2.0, 3.0).unwrap();
        let a = exact_log_tail(&exp1(), &s, 15.0).unwrap();
        let b = exact_log_tail(&r, &s, 15.0).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn densities_closed_forms() {
        let m = ProductModel::single(exp1(), ScalingSpec::uniform()).unwrap();
        assert!(rel(exact_density_quadrature(&m, 20.0).unwrap(), exp_integral_e1(20.0)) < 1e-9);
        let m = ProductModel::single(unif(), ScalingSpec::uniform()).unwrap();
        assert!(rel(exact_density_quadrature(&m, 0.5).unwrap(), 2f64.ln()) < 1e-10);
        let cfg = QuadConfig::rel(1e-9);
        let mass = crate::quad::integrate(|u| exact_density_quadrature(&m, u).unwrap_or(0.0), 0.0, 1.0, cfg).unwrap();
        assert!((mass.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn density_is_minus_derivative_of_tail() {
        for (r, u) in [(exp1(), 8.0), (pareto2(), 7.0), (unif(), 0.8)] {
            let m = ProductModel::single(r, ScalingSpec::beta(2.0, 3.0).unwrap()).unwrap();
            let h = 1e-4 * u;
            let d = (exact_tail_quadrature(&m, u - h).unwrap() - exact_tail_quadrature(&m, u + h).unwrap()) / (2.0 * h);
            assert!(rel(d, exact_density_quadrature(&m, u).unwrap()) < 1e-4);
        }
    }

    #[test]
    fn missing_density_reported() {
        let m = ProductModel::single(make_builtin(&Family::Degenerate { value: 2.0 }).unwrap(), ScalingSpec::unit())
            .unwrap();
        assert!(matches!(exact_density_quadrature(&m, 1.0), Err(Error::MissingDensity(_))));
        assert!(exact_tail_quadrature(&m, 1.0).unwrap() == 1.0);
        let two = ProductModel::new(exp1(), vec![ScalingSpec::uniform(), ScalingSpec::uniform()]).unwrap();
        assert!(exact_tail_quadrature(&two, 1.0).is_err());
    }

    #[test]
    fn iterated_reduces_to_single_fold() {
        let m = ProductModel::single(exp1(), ScalingSpec::uniform()).unwrap();
        let a = exact_tail_iterated(&m, 10.0).unwrap().value;
        assert!(rel(a, exact_tail_quadrature(&m, 10.0).unwrap()) < 1e-6);
        let m = ProductModel::new(exp1(), vec![ScalingSpec::unit(), ScalingSpec::unit()]).unwrap();
        assert_eq!(exact_tail_iterated(&m, 10.0).unwrap().value, (-10f64).exp());
        let m = ProductModel::new(exp1(), vec![ScalingSpec::degenerate(0.5).unwrap(), ScalingSpec::uniform()]).unwrap();
        let a = exact_tail_iterated(&m, 5.0).unwrap().value;
        assert!(rel(a, exp_unif_tail(10.0)) < 1e-9);
    }

    #[test]
    fn iterated_two_uniforms_closed_form() {
        // P(U V W > u) for three uniforms: 1 - u Σ_{k<3} (-ln u)^k / k!
        let m = ProductModel::new(unif(), vec![ScalingSpec::uniform(), ScalingSpec::uniform()]).unwrap();
        let u = 0.9_f64;
        let l = -u.ln();
        let exact = 1.0 - u * (1.0 + l + l * l / 2.0);
        let it = exact_tail_iterated(&m, u).unwrap();
        assert!(rel(it.value, exact) < 1e-6, "{} {}", it.value, exact);
        assert!(it.grid_error < FOLD_TOL);
    }

    #[test]
    fn iterated_exp_two_uniforms() {
        // E U V > u: density of UV is -ln t, so P = ∫₀¹ -ln(t) e^{-u/t} dt
        let u = 10.0_f64;
        let exact = crate::quad::integrate(|t: f64| -t.ln() * (-u / t).exp(), 0.0, 1.0, QuadConfig::rel(1e-13))
            .unwrap()
            .value;
        let m = ProductModel::new(exp1(), vec![ScalingSpec::uniform(), ScalingSpec::uniform()]).unwrap();
        let it = exact_tail_iterated(&m, u).unwrap();
        assert!(rel(it.value, exact) < 1e-6, "{} {}", it.value, exact);
    }

    #[test]
    fn mc_contains_closed_form_and_repeats() {
        let m = ProductModel::single(pareto2(), ScalingSpec::uniform()).unwrap();
        let a = mc_tail(&m, 10.0, 1_000_000, 42).unwrap();
        assert!(a.contains(1.0 / 300.0));
        let b = mc_tail(&m, 10.0, 1_000_000, 42).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let m = ProductModel::single(pareto2(), ScalingSpec::unit()).unwrap();
        let c = mc_tail(&m, 0.5, 10_000, 1).unwrap();
        assert_eq!((c.value, c.half_width_95), (1.0, 0.0));
        assert!(mc_tail(&m, 0.5, 10, 1).is_err());
    }

    #[test]
    fn reports() {
        let m = ProductModel::single(exp1(), ScalingSpec::uniform()).unwrap();
        let r = convergence_report(&m, Formula::GumbelProduct, &[5.0, 10.0, 20.0, 40.0], OracleMethod::Quadrature).unwrap();
        assert!(r.trend_ok);
        // (e^{-u} - u E1(u)) / (e^{-u}/u), evaluated independently
        let expect = [0.739_445_592_881_695, 0.843_666_606_021_192, 0.912_581_801_615_663, 0.953_415_872_594_278];
        for (got, want) in r.ratio.iter().zip(expect) {
            assert!(rel(*got, want) < 1e-9, "{got} vs {want}");
        }
        for j in 0..4 {
            assert!((r.ratio[j] - r.exact[j] / r.asympt[j]).abs() <= 1e-12 * r.ratio[j]);
        }
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);

        let m = ProductModel::single(unif(), ScalingSpec::uniform()).unwrap();
        let r = convergence_report(&m, Formula::WeibullProduct, &[0.9, 0.99, 0.999], OracleMethod::Quadrature).unwrap();
        for (got, want) in r.ratio.iter().zip([3.4e-2, 3.4e-3, 3.3e-4]) {
            assert!(((got - 1.0) / want - 1.0).abs() < 0.1, "{got}");
        }
        let m = ProductModel::single(pareto2(), ScalingSpec::uniform()).unwrap();
        let r = convergence_report(&m, Formula::Breiman, &[1.0, 3.0, 30.0], OracleMethod::Quadrature).unwrap();
        assert!(r.ratio.iter().all(|x| (x - 1.0).abs() < 1e-9));
        assert!(convergence_report(&m, Formula::Breiman, &[3.0, 1.0], OracleMethod::Quadrature).is_err());
    }

    #[test]
    fn report_flags_gaps() {
        let m = ProductModel::single(exp1(), ScalingSpec::uniform()).unwrap();
        let r = convergence_report(&m, Formula::GumbelProduct, &[0.5, 10.0, 20.0], OracleMethod::Quadrature).unwrap();
        assert_eq!(r.gaps.len(), 1);
        assert!(matches!(r.gaps[0].error, Error::PreAsymptotic { .. }));
        assert!(r.ratio[0].is_nan());
    }

    #[test]
    fn product_law_mean_excess_and_quantile() {
        let m = ProductModel::single(exp1(), ScalingSpec::uniform()).unwrap();
        let d = product_distribution(&m).unwrap();
        let q = d.upper_quantile(1e-6);
        assert!(rel(d.survival(q), 1e-6) < 1e-8);
        let me = mean_excess(&d, 20.0).unwrap();
        // exact: ∫_u^∞ H̄ / H̄(u) with H̄ = e^{-y} - y E1(y)
        assert!(me > 0.85 && me < 1.0);
    }
}
