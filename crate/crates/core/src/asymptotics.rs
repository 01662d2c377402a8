//! Closed-form tail approximations for `X = R · S₁ ⋯ Sₙ`.
//!
//! Each formula composes its factors in log space; the terms are summed in
//! sorted order so that the result does not depend on the order in which
//! the factors were listed.

use serde::Serialize;

use crate::dist::{Distribution, ScalingSpec, TailClass};
use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// A positive risk `R` and an ordered list of contraction factors.
#[derive(Debug, Clone)]
pub struct ProductModel {
    pub r: Distribution,
    pub factors: Vec<ScalingSpec>,
}

impl ProductModel {
    pub fn new(r: Distribution, factors: Vec<ScalingSpec>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Domain("a product model needs at least one factor"));
        }
        if r.support_lo() < 0.0 {
            // the product formulas assume F(0-) = 0
            return Err(Error::Domain("two-sided risk: product formulas need R >= 0"));
        }
        Ok(Self { r, factors })
    }

    pub fn single(r: Distribution, s: ScalingSpec) -> Result<Self> {
        Self::new(r, vec![s])
    }

    pub fn alpha_sum(&self) -> f64 {
        self.factors.iter().map(|s| s.alpha).sum()
    }

    /// Base risk whose auxiliary function the CTE asymptotics reuse.
    pub fn base(&self) -> &Distribution {
        &self.r
    }
}

/// An asymptotic approximation with its log-scale value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxResult {
    pub value: f64,
    pub log_value: f64,
    pub regime: &'static str,
    pub formula_id: &'static str,
}

impl ApproxResult {
    pub fn from_log(log_value: f64, regime: &'static str, formula_id: &'static str) -> Self {
        Self {
            value: log_value.exp(),
            log_value,
            regime,
            formula_id,
        }
    }

    /// The same approximation multiplied by `c > 0`.
    pub fn scaled(&self, c: f64, formula_id: &'static str) -> Self {
        Self::from_log(self.log_value + c.ln(), self.regime, formula_id)
    }
}

pub const BREIMAN: &str = "Breiman lemma: P(X>u) ~ E[prod S_i^gamma] P(R>u)";
pub const GUMBEL_PRODUCT: &str = "Gumbel product tail: prod Gamma(a_i+1) G_i(1-1/(u w(u))) P(R>u)";
pub const WEIBULL_PRODUCT: &str =
    "Weibull product tail: Gamma(g+1)/Gamma(g+sum a+1) prod Gamma(a_i+1) G_i(u) P(R>u)";
pub const GUMBEL_DENSITY: &str = "Gumbel product density: h(u) ~ w(u) P(X>u)";

/// Preconditions of the density results that cannot be verified
/// numerically; the caller asserts them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Conditions {
    /// some factor has a density with `y g(y)` bounded on `(0, 1)`
    pub bounded_factor_density: bool,
    /// `R` has a density regularly varying with index `-(γ+1)`, plus the
    /// small-moment condition on the factors when `γ = 0`
    pub regularly_varying_density: bool,
    /// `sup_{0<y≤c} y^p g(y) < ∞` for a factor satisfying the density
    /// version of the regular variation condition
    pub factor_density_bound: bool,
    /// `f(u + x/w(u)) / f(u) → e^{-x}`
    pub von_mises_density: bool,
    /// factor densities are stable under asymptotically unit perturbations
    /// of their argument
    pub factor_stability: bool,
}

impl Conditions {
    pub fn all() -> Self {
        Self {
            bounded_factor_density: true,
            regularly_varying_density: true,
            factor_density_bound: true,
            von_mises_density: true,
            factor_stability: true,
        }
    }
}

fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

fn wrong_class(expected: &'static str, found: &TailClass) -> Error {
    Error::WrongTailClass {
        expected,
        found: found.kind(),
    }
}

/// `F̄(u) ∏ E[Sᵢ^γ]` for `R` in the Fréchet class.
pub fn breiman_tail(m: &ProductModel, u: f64) -> Result<ApproxResult> {
    let gamma = match m.r.tail_class() {
        TailClass::Frechet { gamma } => gamma,
        other => return Err(wrong_class("Frechet", &other)),
    };
    if !(u > 0.0 && u >= m.r.support_lo()) {
        return Err(Error::OutOfRange {
            u,
            lo: m.r.support_lo(),
            hi: f64::INFINITY,
        });
    }
    let mut terms = vec![m.r.log_survival(u)];
    for s in &m.factors {
        terms.push(s.power_moment(gamma)?.ln());
    }
    Ok(ApproxResult::from_log(sorted_sum(terms), "Frechet", BREIMAN))
}

/// `η(u) = u·w(u)` for a Gumbel-class risk, refusing `η ≤ 1`.
pub fn eta(r: &Distribution, u: f64) -> Result<f64> {
    let tc = r.tail_class();
    let (aux, endpoint) = match &tc {
        TailClass::Gumbel { aux, endpoint } => (aux, *endpoint),
        other => return Err(wrong_class("Gumbel", other)),
    };
    if !(u > 0.0 && u < endpoint) {
        return Err(Error::OutOfRange {
            u,
            lo: 0.0,
            hi: endpoint,
        });
    }
    let eta = u * aux.eval(u);
    if !(eta > 1.0) {
        return Err(Error::PreAsymptotic { u, eta, bound: 1.0 });
    }
    Ok(eta)
}

/// `∏[Γ(αᵢ+1) Ḡᵢ(1 - 1/(u w(u)))] F̄(u)` for `R` in the Gumbel class.
pub fn gumbel_product_tail(m: &ProductModel, u: f64) -> Result<ApproxResult> {
    let eta = eta(&m.r, u)?;
    let mut terms = vec![m.r.log_survival(u)];
    for s in &m.factors {
        terms.push(ln_gamma(s.alpha + 1.0));
        terms.push(s.tail_at_one(1.0 / eta).ln());
    }
    Ok(ApproxResult::from_log(sorted_sum(terms), "Gumbel", GUMBEL_PRODUCT))
}

/// Weibull-class product tail at `u ∈ (0, 1)`, endpoint normalized to 1.
pub fn weibull_product_tail(m: &ProductModel, u: f64) -> Result<ApproxResult> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::OutOfRange { u, lo: 0.0, hi: 1.0 });
    }
    weibull_product_tail_at_distance(m, 1.0 - u)
}

/// [`weibull_product_tail`] at `u = 1 - delta`, without the cancellation.
pub fn weibull_product_tail_at_distance(m: &ProductModel, delta: f64) -> Result<ApproxResult> {
    let gamma = match m.r.tail_class() {
        TailClass::Weibull { gamma, endpoint } => {
            if endpoint != 1.0 {
                return Err(Error::Domain("Weibull endpoint must be 1; rescale with power_scale"));
            }
            gamma
        }
        other => return Err(wrong_class("Weibull", &other)),
    };
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::OutOfRange {
            u: 1.0 - delta,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let mut terms = vec![
        ln_gamma(gamma + 1.0),
        -ln_gamma(gamma + m.alpha_sum() + 1.0),
        m.r.survival_below_one(delta).ln(),
    ];
    for s in &m.factors {
        terms.push(ln_gamma(s.alpha + 1.0));
        terms.push(s.tail_at_one(delta).ln());
    }
    Ok(ApproxResult::from_log(sorted_sum(terms), "Weibull", WEIBULL_PRODUCT))
}

/// Limit of `u h(u) / P(X > u)` for a Fréchet-class risk: `γ`.
pub fn frechet_density_ratio(m: &ProductModel, u: f64, cond: Conditions) -> Result<f64> {
    let gamma = match m.r.tail_class() {
        TailClass::Frechet { gamma } => gamma,
        other => return Err(wrong_class("Frechet", &other)),
    };
    if !(cond.bounded_factor_density || cond.regularly_varying_density) {
        return Err(Error::NotAsserted(
            "bounded y*g(y) for some factor, or regularly varying density of R",
        ));
    }
    if !(u > 0.0) {
        return Err(Error::OutOfRange {
            u,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    Ok(gamma)
}

/// `w(u) · P̂(X > u)`, the Gumbel-class density approximation.
pub fn gumbel_density(m: &ProductModel, u: f64, cond: Conditions) -> Result<ApproxResult> {
    if !cond.factor_density_bound {
        return Err(Error::NotAsserted("power bound on the factor density near zero"));
    }
    if !m.factors.iter().any(|s| s.density_alpha_valid) {
        return Err(Error::NotAsserted("some factor density regularly varying at 1"));
    }
    if m.factors.iter().any(|s| !(s.alpha > 0.0)) {
        return Err(Error::Domain("every factor needs a positive regular variation index"));
    }
    let tail = gumbel_product_tail(m, u)?;
    let w = m.r.tail_class().aux_scale()?.eval(u);
    Ok(tail.scaled(w, GUMBEL_DENSITY))
}

/// Limit of `u h(1-u) / P(X > 1-u)` for a Weibull-class risk: `γ + Σαᵢ`.
pub fn weibull_density_ratio(m: &ProductModel) -> Result<f64> {
    let gamma = match m.r.tail_class() {
        TailClass::Weibull { gamma, .. } => gamma,
        other => return Err(wrong_class("Weibull", &other)),
    };
    if !m.factors.iter().any(|s| s.density_alpha_valid && s.alpha > 0.0) {
        return Err(Error::NotAsserted("a factor with regularly varying density and positive index"));
    }
    Ok(gamma + m.alpha_sum())
}

/// Prediction for `h(u + x/w(u)) / h(u)`; the empirical ratio has to come
/// from the density oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonMisesPrediction {
    pub predicted: f64,
    pub oracle_needed: bool,
}

pub fn vm_density_ratio_check(m: &ProductModel, u: f64, x: f64, cond: Conditions) -> Result<VonMisesPrediction> {
    if !(cond.von_mises_density && cond.factor_stability) {
        return Err(Error::NotAsserted("von Mises density of R and factor density stability"));
    }
    match m.r.tail_class() {
        TailClass::Gumbel { endpoint, .. } => {
            if !(u < endpoint) {
                return Err(Error::OutOfRange {
                    u,
                    lo: 0.0,
                    hi: endpoint,
                });
            }
        }
        other => return Err(wrong_class("Gumbel", &other)),
    }
    Ok(VonMisesPrediction {
        predicted: (-x).exp(),
        oracle_needed: true,
    })
}

/// Asymptotic CTE `u + 1/w(u)` of a Gumbel-class risk. For a product model
/// pass [`ProductModel::base`]: random contraction leaves `w` unchanged.
pub fn cte_asymptotic(d: &Distribution, u: f64) -> Result<f64> {
    let w = match d.tail_class() {
        TailClass::Gumbel { aux, .. } => aux.eval(u),
        other => return Err(wrong_class("Gumbel", &other)),
    };
    Ok(u + 1.0 / w)
}

/// `cte_asymptotic(d, q) / q` at the quantile `q` of level `p`.
pub fn cte_var_ratio(d: &Distribution, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::OutOfRange { u: p, lo: 0.0, hi: 1.0 });
    }
    cte_var_ratio_upper(d, 1.0 - p)
}

/// [`cte_var_ratio`] at level `p = 1 - tail_prob`, for levels too close to
/// 1 to represent.
pub fn cte_var_ratio_upper(d: &Distribution, tail_prob: f64) -> Result<f64> {
    if !(tail_prob > 0.0 && tail_prob < 1.0) {
        return Err(Error::OutOfRange {
            u: tail_prob,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let q = d.upper_quantile(tail_prob);
    if !(q.is_finite() && q > 0.0) {
        return Err(Error::Domain("quantile evaluation failed"));
    }
    Ok(cte_asymptotic(d, q)? / q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{make_builtin, Family};
    use crate::special::gamma_fn;
    use proptest::prelude::*;

    fn exp1() -> Distribution {
        make_builtin(&Family::Exponential { rate: 1.0 }).unwrap()
    }

    fn pareto(g: f64) -> Distribution {
        make_builtin(&Family::Pareto { gamma: g, scale: 1.0 }).unwrap()
    }

    fn unif() -> Distribution {
        make_builtin(&Family::Uniform01).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn breiman_pareto_uniform_closed_form() {
        let m = ProductModel::single(pareto(2.0), ScalingSpec::uniform()).unwrap();
        for &u in &[1.0, 2.0, 10.0, 100.0] {
            let a = breiman_tail(&m, u).unwrap();
            assert!(rel(a.value, u.powi(-2) / 3.0) < 1e-12);
        }
        let m = ProductModel::single(pareto(1.0), ScalingSpec::beta(1.0, 1.0).unwrap()).unwrap();
        assert!(rel(breiman_tail(&m, 100.0).unwrap().value, 5e-3) < 1e-12);
    }

    #[test]
    fn breiman_unit_factors_give_risk_tail() {
        let m = ProductModel::new(pareto(1.5), vec![ScalingSpec::unit(), ScalingSpec::unit()]).unwrap();
        assert!(rel(breiman_tail(&m, 7.0).unwrap().value, 7f64.powf(-1.5)) < 1e-14);
        let m = ProductModel::single(exp1(), ScalingSpec::unit()).unwrap();
        assert!(matches!(breiman_tail(&m, 7.0), Err(Error::WrongTailClass { .. })));
    }

    #[test]
    fn gumbel_exp_uniform() {
        let m = ProductModel::single(exp1(), ScalingSpec::uniform()).unwrap();
        let a = gumbel_product_tail(&m, 20.0).unwrap();
        // Γ(2) (1/20) e^{-20}
        assert!(rel(a.value, (-20f64).exp() / 20.0) < 1e-13);
        assert!(rel(a.value, 1.030_576_811_219_279e-10) < 1e-9);
    }

    #[test]
    fn gumbel_exp_beta_matches_example_constant() {
        let (al, be) = (2.0, 3.0);
        let m = ProductModel::single(exp1(), ScalingSpec::beta(al, be).unwrap()).unwrap();
        let u = 400.0_f64;
        let a = gumbel_product_tail(&m, u).unwrap();
        let expect = gamma_fn(al + be) / gamma_fn(be) * u.powf(-al) * (-u).exp();
        // Ḡ(1 - 1/u) is exact Beta, the example uses its leading term
        assert!(rel(a.value, expect) < 0.02);
    }

    #[test]
    fn gumbel_kotz_beta_example() {
        let (k, q, r, g) = (2.0, 1.0, 0.5, 0.5);
        let d = make_builtin(&Family::Kotz { k, q, r, gamma: g }).unwrap();
        let m = ProductModel::single(d, ScalingSpec::beta(1.5, 2.0).unwrap()).unwrap();
        let u = 1e8_f64;
        let a = gumbel_product_tail(&m, u).unwrap();
        let log_expect = k.ln() - 1.5 * (r * g).ln() + crate::special::ln_gamma(3.5) - crate::special::ln_gamma(2.0)
            + (q - 1.5 * g) * u.ln()
            - r * u.powf(g);
        assert!((a.log_value - log_expect).abs() < 5e-3);
    }

    #[test]
    fn gumbel_reduction_beta11() {
        let m = ProductModel::single(exp1(), ScalingSpec::beta(1.0, 1.0).unwrap()).unwrap();
        for &u in &[2.0, 5.0, 50.0] {
            let a = gumbel_product_tail(&m, u).unwrap();
            assert!(rel(a.value, (-u).exp() / u) < 1e-13);
        }
    }

    #[test]
    fn pre_asymptotic_guard() {
        let m = ProductModel::single(exp1(), ScalingSpec::uniform()).unwrap();
        assert!(matches!(gumbel_product_tail(&m, 1.0), Err(Error::PreAsymptotic { .. })));
        assert!(matches!(gumbel_product_tail(&m, 0.5), Err(Error::PreAsymptotic { .. })));
    }

    #[test]
    fn weibull_examples() {
        let m = ProductModel::single(unif(), ScalingSpec::uniform()).unwrap();
        assert!(rel(weibull_product_tail(&m, 0.99).unwrap().value, 5e-5) < 1e-9);
        let m = ProductModel::single(unif(), ScalingSpec::beta(2.0, 3.0).unwrap()).unwrap();
        let v = weibull_product_tail_at_distance(&m, 1e-3).unwrap().value;
        // 1/3 · Ḡ(0.999) · 1e-3 with the exact Beta tail Ḡ ≈ 6e-6
        assert!(rel(v, 2e-9) < 1e-2);
        let gbar = ScalingSpec::beta(2.0, 3.0).unwrap().tail_at_one(1e-3);
        assert!(rel(v, gbar * 1e-3 / 3.0) < 1e-12);
        let m = ProductModel::single(exp1(), ScalingSpec::uniform()).unwrap();
        assert!(weibull_product_tail(&m, 0.5).is_err());
        let m2 = ProductModel::single(crate::dist::power_scale(&unif(), 2.0, 1.0).unwrap(), ScalingSpec::uniform())
            .unwrap();
        assert!(matches!(weibull_product_tail(&m2, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn weibull_alpha_zero_reduces() {
        let m = ProductModel::single(unif(), ScalingSpec::unit()).unwrap();
        let a = weibull_product_tail(&m, 0.75).unwrap();
        assert!(rel(a.value, 0.25) < 1e-14);
    }

    #[test]
    fn density_ratios() {
        let c = Conditions::all();
        let m = ProductModel::single(pareto(2.0), ScalingSpec::uniform()).unwrap();
        assert_eq!(frechet_density_ratio(&m, 10.0, c).unwrap(), 2.0);
        assert!(frechet_density_ratio(&m, 10.0, Conditions::default()).is_err());
        let m = ProductModel::single(unif(), ScalingSpec::uniform()).unwrap();
        assert_eq!(weibull_density_ratio(&m).unwrap(), 2.0);
        let m = ProductModel::single(unif(), ScalingSpec::beta(2.0, 3.0).unwrap()).unwrap();
        assert_eq!(weibull_density_ratio(&m).unwrap(), 3.0);
        let m = ProductModel::single(unif(), ScalingSpec::unit()).unwrap();
        assert!(weibull_density_ratio(&m).is_err());
    }

    #[test]
    fn gumbel_density_scales_by_w() {
        let m = ProductModel::single(exp1(), ScalingSpec::uniform()).unwrap();
        let d = gumbel_density(&m, 20.0, Conditions::all()).unwrap();
        assert!(rel(d.value, 1.030_576_811_219_279e-10) < 1e-9);
        assert!(gumbel_density(&m, 20.0, Conditions::default()).is_err());
    }

    #[test]
    fn von_mises_prediction() {
        let m = ProductModel::single(exp1(), ScalingSpec::uniform()).unwrap();
        let c = Conditions::all();
        assert_eq!(vm_density_ratio_check(&m, 30.0, 0.0, c).unwrap().predicted, 1.0);
        assert!(rel(vm_density_ratio_check(&m, 30.0, 1.0, c).unwrap().predicted, 0.367_879_441_171_442_3) < 1e-15);
        assert!(rel(vm_density_ratio_check(&m, 30.0, -0.5, c).unwrap().predicted, 1.648_721_270_700_128) < 1e-15);
        assert!(vm_density_ratio_check(&m, 30.0, 1.0, Conditions::default()).is_err());
    }

    #[test]
    fn cte_values() {
        assert_eq!(cte_asymptotic(&exp1(), 10.0).unwrap(), 11.0);
        let m = ProductModel::single(exp1(), ScalingSpec::uniform()).unwrap();
        assert_eq!(cte_asymptotic(m.base(), 10.0).unwrap(), 11.0);
        let k = make_builtin(&Family::Kotz { k: 1.0, q: 0.0, r: 1.0, gamma: 1.0 }).unwrap();
        assert!((cte_asymptotic(&k, 50.0).unwrap() - 51.0).abs() < 1e-12);
        assert!(cte_asymptotic(&pareto(2.0), 10.0).is_err());
    }

    #[test]
    fn cte_var_ratios() {
        let d = exp1();
        let p = 1.0 - (-20f64).exp();
        assert!(rel(cte_var_ratio(&d, p).unwrap(), 1.05) < 1e-6);
        assert!(rel(cte_var_ratio_upper(&d, (-100f64).exp()).unwrap(), 1.01) < 1e-12);
        let rs: Vec<f64> = [10.0, 20.0, 50.0, 100.0]
            .iter()
            .map(|&u: &f64| cte_var_ratio_upper(&d, (-u).exp()).unwrap())
            .collect();
        assert!(rs.windows(2).all(|w| w[1] < w[0]));
        assert!(rs.iter().all(|&r| r > 1.0));
    }

    fn factor_pool() -> Vec<ScalingSpec> {
        vec![
            ScalingSpec::uniform(),
            ScalingSpec::beta(2.0, 3.0).unwrap(),
            ScalingSpec::beta(0.5, 1.5).unwrap(),
            ScalingSpec::arcsine(),
            ScalingSpec::unit(),
        ]
    }

    proptest! {
        #[test]
        fn factor_order_invariance(picks in proptest::collection::vec(0usize..5, 1..5), seed in 0u64..1000, u in 5.0f64..200.0) {
            let pool = factor_pool();
            let factors: Vec<ScalingSpec> = picks.iter().map(|&i| pool[i].clone()).collect();
            let mut shuffled = factors.clone();
            let n = shuffled.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let a = ProductModel::new(exp1(), factors.clone()).unwrap();
            let b = ProductModel::new(exp1(), shuffled.clone()).unwrap();
            prop_assert_eq!(gumbel_product_tail(&a, u).unwrap().log_value, gumbel_product_tail(&b, u).unwrap().log_value);
            let a = ProductModel::new(unif(), factors.clone()).unwrap();
            let b = ProductModel::new(unif(), shuffled.clone()).unwrap();
            let d = 1.0 / u;
            prop_assert_eq!(
                weibull_product_tail_at_distance(&a, d).unwrap().log_value,
                weibull_product_tail_at_distance(&b, d).unwrap().log_value
            );
            let a = ProductModel::new(pareto(1.7), factors).unwrap();
            let b = ProductModel::new(pareto(1.7), shuffled).unwrap();
            prop_assert_eq!(breiman_tail(&a, u).unwrap().log_value, breiman_tail(&b, u).unwrap().log_value);
        }

        #[test]
        fn log_space_consistency(u in 2.0f64..600.0, i in 0usize..4) {
            let m = ProductModel::single(exp1(), factor_pool()[i].clone()).unwrap();
            let a = gumbel_product_tail(&m, u).unwrap();
            if a.value >= 1e-300 {
                prop_assert!((a.log_value.exp() - a.value).abs() <= 1e-12 * a.value);
            }
            let m = ProductModel::single(pareto(2.5), factor_pool()[i].clone()).unwrap();
            let a = breiman_tail(&m, u).unwrap();
            prop_assert!((a.log_value.exp() - a.value).abs() <= 1e-12 * a.value);
        }
    }
}
