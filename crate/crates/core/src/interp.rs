//! Monotone piecewise cubic Hermite interpolation (Fritsch–Carlson) on a
//! uniform grid.

#[derive(Debug, Clone)]
pub struct Pchip {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// Interpolant through `y[i]` at `x0 + i·h`. Needs at least two points.
    pub fn uniform(x0: f64, h: f64, y: Vec<f64>) -> Self {
        let n = y.len();
        assert!(n >= 2 && h > 0.0, "need two nodes and a positive step");
        let delta: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let (a, b) = (delta[i - 1], delta[i]);
            // harmonic mean keeps monotone data monotone
            d[i] = if a * b > 0.0 { 2.0 * a * b / (a + b) } else { 0.0 };
        }
        d[0] = end_slope(delta[0], delta.get(1).copied().unwrap_or(delta[0]));
        d[n - 1] = end_slope(delta[n - 2], if n > 2 { delta[n - 3] } else { delta[n - 2] });
        Self { x0, h, y, d }
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * (self.y.len() - 1) as f64
    }

    /// Value at `x`; linear extrapolation with the end slopes outside.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        let s = (x - self.x0) / self.h;
        if s <= 0.0 {
            return self.y[0] + self.d[0] * (x - self.x0);
        }
        if s >= (n - 1) as f64 {
            return self.y[n - 1] + self.d[n - 1] * (x - self.x_max());
        }
        let i = (s as usize).min(n - 2);
        let t = s - i as f64;
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (m0, m1) = (self.d[i] * self.h, self.d[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
    }
}

// three-point end slope, limited to preserve shape
fn end_slope(d0: f64, d1: f64) -> f64 {
    let s = 1.5 * d0 - 0.5 * d1;
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_nodes_and_smooth_functions() {
        let h = 0.01;
        let ys: Vec<f64> = (0..=300).map(|i| (-(i as f64 * h)).exp()).collect();
        let p = Pchip::uniform(0.0, h, ys.clone());
        assert_eq!(p.eval(0.5), ys[50]);
        let x = 1.2345_f64;
        assert!((p.eval(x) - (-x).exp()).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn monotone_data_gives_monotone_interpolant(steps in proptest::collection::vec(0.0f64..3.0, 3..30)) {
            let mut y = vec![0.0];
            for s in &steps {
                let last = *y.last().unwrap();
                y.push(last - s);
            }
            let p = Pchip::uniform(0.0, 1.0, y);
            let mut prev = f64::INFINITY;
            for k in 0..=(steps.len() * 20) {
                let v = p.eval(k as f64 / 20.0);
                prop_assert!(v <= prev + 1e-12);
                prev = v;
            }
        }
    }
}
