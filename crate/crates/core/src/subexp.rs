//! Numeric evidence for subexponentiality and long tails.
//!
//! Each criterion is evaluated along an increasing grid of thresholds and
//! summarized by a conservative trend verdict. A verdict is evidence about a
//! limit, never a proof.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{Distribution, TailClass};
use crate::error::{check_grid, Error, Result};
use crate::quad::{self, QuadConfig};

pub const MITRA_RESNICK: &str = "Mitra-Resnick: P(R>lambda/w(u))^2 / P(R>u) -> 0";
pub const TONY: &str = "truncated convolution: int_{lambda/w}^{u-lambda/w} P(R>u-y) dF(y) / P(R>u) -> 0";
pub const GOLDIE_RESNICK: &str = "Goldie-Resnick: w(u)/w(tu) > 1 in the limit";
pub const LONG_TAIL: &str = "long tail: P(R>u+y)/P(R>u) -> 1";
pub const CONV_SQUARE: &str = "convolution square: P(R+R*>u)/P(R>u) -> 2";
pub const DOMINATED: &str = "dominated variation: P(R>u/2)/P(R>u) * P(R>lambda/w(u)) -> 0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    TendsToZero,
    Diverges,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::TendsToZero => "tends_to_zero",
            Self::Diverges => "diverges",
            Self::Inconclusive => "inconclusive",
        }
    }
}

/// Finite-grid trend rule. `tends_to_zero` needs the last `window` values
/// strictly decreasing and the final value below `shrink` times the first;
/// `diverges` needs them strictly increasing and the final value above
/// `growth` times the first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictRule {
    pub window: usize,
    pub shrink: f64,
    pub growth: f64,
}

impl Default for VerdictRule {
    fn default() -> Self {
        Self {
            window: 4,
            shrink: 0.05,
            growth: 20.0,
        }
    }
}

impl VerdictRule {
    /// Applies the rule to log-scale magnitudes.
    pub fn judge_logs(&self, logs: &[f64]) -> Verdict {
        let logs: Vec<f64> = logs.iter().copied().filter(|l| !l.is_nan()).collect();
        if logs.len() < self.window.max(2) {
            return Verdict::Inconclusive;
        }
        let tail = &logs[logs.len() - self.window..];
        let (first, last) = (logs[0], logs[logs.len() - 1]);
        if tail.windows(2).all(|w| w[1] < w[0]) && last < first + self.shrink.ln() {
            Verdict::TendsToZero
        } else if tail.windows(2).all(|w| w[1] > w[0]) && last > first + self.growth.ln() {
            Verdict::Diverges
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn judge(&self, values: &[f64]) -> Verdict {
        let logs: Vec<f64> = values.iter().map(|v| v.abs().ln()).collect();
        self.judge_logs(&logs)
    }
}

/// A criterion evaluated along a grid. For criteria with a nonzero
/// `target` the verdict is about `|value - target|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionTrajectory {
    pub criterion_id: &'static str,
    pub u_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub log_values: Vec<f64>,
    pub target: f64,
    pub verdict: Verdict,
    /// grid points skipped because the criterion is not yet defined there
    pub skipped: Vec<f64>,
    /// the law has mass below zero and was evaluated on its positive part
    pub two_sided: bool,
}

impl CriterionTrajectory {
    pub(crate) fn new(id: &'static str, u_grid: &[f64], log_values: Vec<f64>, target: f64, rule: VerdictRule) -> Self {
        let values: Vec<f64> = log_values.iter().map(|l| l.exp()).collect();
        let skipped = u_grid
            .iter()
            .zip(&log_values)
            .filter(|(_, l)| l.is_nan())
            .map(|(&u, _)| u)
            .collect();
        let verdict = if target == 0.0 {
            rule.judge_logs(&log_values)
        } else {
            let dev: Vec<f64> = values.iter().map(|v| (v - target).abs().ln()).collect();
            rule.judge_logs(&dev)
        };
        Self {
            criterion_id: id,
            u_grid: u_grid.to_vec(),
            values,
            log_values,
            target,
            verdict,
            skipped,
            two_sided: false,
        }
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("non-empty grid")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |_| Error::Domain("failed to write CSV");
        w.write_record(["u", "value", "log_value"]).map_err(io)?;
        for j in 0..self.u_grid.len() {
            w.write_record([
                format!("{:e}", self.u_grid[j]),
                format!("{:e}", self.values[j]),
                format!("{:e}", self.log_values[j]),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|_| Error::Domain("failed to write CSV"))?;
        Ok(())
    }
}

fn aux_on_grid(d: &Distribution, u_grid: &[f64]) -> Result<Vec<f64>> {
    check_grid(u_grid, 2)?;
    let aux = match d.tail_class() {
        TailClass::Gumbel { aux, endpoint } => {
            if endpoint.is_finite() {
                return Err(Error::FiniteEndpoint("subexponential criteria"));
            }
            aux
        }
        other => {
            return Err(Error::WrongTailClass {
                expected: "Gumbel",
                found: other.kind(),
            })
        }
    };
    let w: Vec<f64> = u_grid.iter().map(|&u| aux.eval(u)).collect();
    let vanishing = w.windows(2).all(|p| p[1] <= p[0]) && w[w.len() - 1] < w[0] * (1.0 - 1e-9);
    if !vanishing {
        return Err(Error::Domain("auxiliary function does not tend to zero on the grid"));
    }
    Ok(w)
}

fn check_lambda(lambda: f64) -> Result<()> {
    crate::error::check_positive("lambda", lambda).map(|_| ())
}

fn infinite_endpoint(d: &Distribution) -> Result<()> {
    if d.support_hi().is_finite() {
        return Err(Error::FiniteEndpoint("tail criteria"));
    }
    Ok(())
}

/// `[F̄(λ/w(u))]² / F̄(u)` along the grid.
pub fn mitra_resnick_trajectory(d: &Distribution, lambda: f64, u_grid: &[f64]) -> Result<CriterionTrajectory> {
    check_lambda(lambda)?;
    let w = aux_on_grid(d, u_grid)?;
    let logs = u_grid
        .iter()
        .zip(&w)
        .map(|(&u, &wu)| {
            let lu = d.log_survival(u);
            if !lu.is_finite() {
                return Err(Error::Underflow { u });
            }
            Ok(2.0 * d.log_survival(lambda / wu) - lu)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CriterionTrajectory::new(MITRA_RESNICK, u_grid, logs, 0.0, VerdictRule::default()))
}

/// `(1/norm) ∫_a^b exp(phi(y)) dF(y)` where `phi` is a log-weight and
/// `norm = exp(log_norm)`. Uses the density when available, otherwise
/// Richardson-extrapolated Riemann–Stieltjes sums on survival differences.
fn stieltjes<P: Fn(f64) -> f64>(d: &Distribution, phi: P, a: f64, b: f64, breaks: &[f64], log_norm: f64) -> Result<f64> {
    if !(b > a) {
        return Ok(0.0);
    }
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().chain(d.breakpoints()).filter(|&x| x > a && x < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if d.has_density() {
        let f = |y: f64| match d.log_density(y) {
            Some(lf) if lf.is_finite() => (phi(y) + lf - log_norm).exp(),
            _ => 0.0,
        };
        return Ok(quad::integrate_breaks(f, &pts, QuadConfig::rel(1e-10))?.value);
    }
    let sum = |n: usize| -> f64 {
        let mut total = 0.0;
        for seg in pts.windows(2) {
            let h = (seg[1] - seg[0]) / n as f64;
            for i in 0..n {
                let (y0, y1) = (seg[0] + i as f64 * h, seg[0] + (i + 1) as f64 * h);
                let (l0, l1) = (d.log_survival(y0), d.log_survival(y1));
                if !l0.is_finite() {
                    continue;
                }
                let mass = (l0 - log_norm).exp() * -(l1 - l0).exp_m1();
                total += (phi(0.5 * (y0 + y1))).exp() * mass;
            }
        }
        total
    };
    let mut n = 64;
    let mut prev = sum(n);
    let mut prev_rich = f64::NAN;
    while n < 1 << 20 {
        n *= 2;
        let cur = sum(n);
        let rich = (4.0 * cur - prev) / 3.0;
        if (rich - prev_rich).abs() <= 1e-4 * rich.abs() {
            return Ok(rich);
        }
        prev = cur;
        prev_rich = rich;
    }
    Err(Error::Quadrature {
        estimate: prev_rich,
        error: (prev_rich - prev).abs(),
    })
}

/// `(1/F̄(u)) ∫_{λ/w(u)}^{u-λ/w(u)} F̄(u-y) dF(y)` along the grid; points
/// where the interval is empty are skipped.
pub fn tony_integral_trajectory(d: &Distribution, lambda: f64, u_grid: &[f64]) -> Result<CriterionTrajectory> {
    check_lambda(lambda)?;
    let w = aux_on_grid(d, u_grid)?;
    let logs = u_grid
        .par_iter()
        .zip(w.par_iter())
        .map(|(&u, &wu)| {
            let a = lambda / wu;
            let b = u - a;
            if !(b > a) {
                return Ok(f64::NAN);
            }
            let lu = d.log_survival(u);
            if !lu.is_finite() {
                return Err(Error::Underflow { u });
            }
            let breaks = [a + 1.0 / wu, 0.5 * u, b - 1.0 / wu];
            let v = stieltjes(d, |y| d.log_survival(u - y), a, b, &breaks, lu)?;
            Ok(v.ln())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CriterionTrajectory::new(TONY, u_grid, logs, 0.0, VerdictRule::default()))
}

/// `w(u)/w(tu)` along the grid, with the decision whether it settles above
/// `1 + margin`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldieResnick {
    pub holds: bool,
    pub margin: f64,
    pub trajectory: CriterionTrajectory,
}

pub fn goldie_resnick_check(w: &dyn Fn(f64) -> f64, t: f64, u_grid: &[f64]) -> Result<GoldieResnick> {
    if !(t > 1.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t,
            reason: "must exceed 1",
        });
    }
    check_grid(u_grid, 4)?;
    let ws: Vec<f64> = u_grid.iter().map(|&u| w(u)).collect();
    let half = &ws[ws.len() / 2..];
    if half.windows(2).any(|p| p[1] > p[0] * (1.0 + 1e-12)) {
        return Err(Error::IncreasingScale);
    }
    let logs: Vec<f64> = u_grid.iter().zip(&ws).map(|(&u, &wu)| (wu / w(t * u)).ln()).collect();
    let trajectory = CriterionTrajectory::new(GOLDIE_RESNICK, u_grid, logs, 1.0, VerdictRule::default());
    let margin = 0.1;
    let v = &trajectory.values;
    let k = v.len();
    let settled = ((v[k - 1] - v[k - 2]) / v[k - 1]).abs() < 1e-2;
    let holds = settled && v[k - 3..].iter().all(|&x| x > 1.0 + margin);
    Ok(GoldieResnick {
        holds,
        margin,
        trajectory,
    })
}

/// `F̄(u+y)/F̄(u)` along the grid; the verdict concerns `|value - 1|`.
pub fn long_tail_trajectory(d: &Distribution, y: f64, u_grid: &[f64]) -> Result<CriterionTrajectory> {
    infinite_endpoint(d)?;
    check_grid(u_grid, 2)?;
    let logs = u_grid
        .iter()
        .map(|&u| {
            let lu = d.log_survival(u);
            if !lu.is_finite() {
                return Err(Error::Underflow { u });
            }
            Ok(d.log_survival(u + y) - lu)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CriterionTrajectory::new(LONG_TAIL, u_grid, logs, 1.0, VerdictRule::default()))
}

/// `F̄^{2*}(u)/F̄(u) = 1 + (1/F̄(u)) ∫₀^u F̄(u-y) dF(y)` along the grid; the
/// verdict concerns `|value - 2|`. Mass below zero is dropped and flagged.
pub fn conv_square_ratio(d: &Distribution, u_grid: &[f64]) -> Result<CriterionTrajectory> {
    infinite_endpoint(d)?;
    check_grid(u_grid, 2)?;
    let scale_of = |u: f64| match d.tail_class() {
        TailClass::Gumbel { aux, .. } => 1.0 / aux.eval(u),
        _ => d.tail_scale(u).min(u) * 0.01,
    };
    let logs = u_grid
        .par_iter()
        .map(|&u| {
            let lu = d.log_survival(u);
            if !lu.is_finite() {
                return Err(Error::Underflow { u });
            }
            let s = scale_of(u).min(0.25 * u);
            let lo = d.support_lo().max(0.0);
            let mut breaks = vec![0.5 * u];
            for k in [1.0, 4.0, 16.0] {
                breaks.push(lo + k * s);
                breaks.push(u - k * s);
            }
            breaks.extend(d.breakpoints().into_iter().map(|b| u - b));
            let v = stieltjes(d, |y| d.log_survival(u - y), 0.0, u, &breaks, lu)?;
            Ok(v.ln_1p())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tr = CriterionTrajectory::new(CONV_SQUARE, u_grid, logs, 2.0, VerdictRule::default());
    tr.two_sided = d.support_lo() < 0.0;
    Ok(tr)
}

/// `F̄(u/2)/F̄(u) · F̄(λ/w(u))` along the grid.
pub fn dominated_variation_trajectory(d: &Distribution, lambda: f64, u_grid: &[f64]) -> Result<CriterionTrajectory> {
    check_lambda(lambda)?;
    let w = aux_on_grid(d, u_grid)?;
    let logs = u_grid
        .iter()
        .zip(&w)
        .map(|(&u, &wu)| {
            let lu = d.log_survival(u);
            if !lu.is_finite() {
                return Err(Error::Underflow { u });
            }
            Ok(d.log_survival(0.5 * u) - lu + d.log_survival(lambda / wu))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CriterionTrajectory::new(DOMINATED, u_grid, logs, 0.0, VerdictRule::default()))
}

/// `n` points spaced geometrically from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (r * i as f64).exp()).collect()
}
