//! Shape-preserving piecewise cubic Hermite interpolation (Fritsch–Butland
//! slopes), with linear extrapolation along the end slopes.

use crate::error::{Error, Result};

/// How the slopes at the two outermost knots are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EndSlopes {
    /// One-sided three-point estimate, clipped to preserve shape.
    #[default]
    ThreePoint,
    /// Secant slope of the end interval.
    Secant,
}

#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>, ends: EndSlopes) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::Data(format!("pchip needs >= 2 matching knots, got {} and {}", n, y.len())));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Data("pchip abscissae must be strictly increasing".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let s: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = s[0];
            d[1] = s[0];
            return Ok(Self { x, y, d });
        }
        for i in 1..n - 1 {
            if s[i - 1] * s[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
            }
        }
        match ends {
            EndSlopes::Secant => {
                d[0] = s[0];
                d[n - 1] = s[n - 2];
            }
            EndSlopes::ThreePoint => {
                d[0] = end_slope(h[0], h[1], s[0], s[1]);
                d[n - 1] = end_slope(h[n - 2], h[n - 3], s[n - 2], s[n - 3]);
            }
        }
        Ok(Self { x, y, d })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    fn locate(&self, t: f64) -> usize {
        match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0] + self.d[0] * (t - self.x[0]);
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1] + self.d[n - 1] * (t - self.x[n - 1]);
        }
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let u = (t - self.x[i]) / h;
        let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
        let h10 = u * (1.0 - u) * (1.0 - u);
        let h01 = u * u * (3.0 - 2.0 * u);
        let h11 = u * u * (u - 1.0);
        h00 * self.y[i] + h * h10 * self.d[i] + h01 * self.y[i + 1] + h * h11 * self.d[i + 1]
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.d[0];
        }
        if t >= self.x[n - 1] {
            return self.d[n - 1];
        }
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let u = (t - self.x[i]) / h;
        let dy = self.y[i + 1] - self.y[i];
        6.0 * u * (1.0 - u) * dy / h
            + (1.0 - 4.0 * u + 3.0 * u * u) * self.d[i]
            + (3.0 * u * u - 2.0 * u) * self.d[i + 1]
    }

    /// Replaces the slope at knot `i`. Shape preservation is then up to the caller.
    pub fn with_slope(mut self, i: usize, slope: f64) -> Self {
        self.d[i] = slope;
        self
    }

    /// Slopes at the first and last knot, which are also the extrapolation slopes.
    pub fn end_slopes(&self) -> (f64, f64) {
        (self.d[0], self.d[self.d.len() - 1])
    }
}

fn end_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d.signum() != s0.signum() {
        0.0
    } else if s0.signum() != s1.signum() && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}
