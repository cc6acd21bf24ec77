//! Composite Gauss–Legendre quadrature with adaptive panel refinement and a
//! cumulative-integral table for repeated evaluation of `∫ g` up to a moving
//! limit.

use crate::error::{Error, Result};

const GL10: [(f64, f64); 10] = [
    (-0.973_906_528_517_171_7, 0.066_671_344_308_688_07),
    (-0.865_063_366_688_984_5, 0.149_451_349_150_580_36),
    (-0.679_409_568_299_024_4, 0.219_086_362_515_982),
    (-0.433_395_394_129_247_2, 0.269_266_719_309_996_5),
    (-0.148_874_338_981_631_22, 0.295_524_224_714_753),
    (0.148_874_338_981_631_22, 0.295_524_224_714_753),
    (0.433_395_394_129_247_2, 0.269_266_719_309_996_5),
    (0.679_409_568_299_024_4, 0.219_086_362_515_982),
    (0.865_063_366_688_984_5, 0.149_451_349_150_580_36),
    (0.973_906_528_517_171_7, 0.066_671_344_308_688_07),
];

/// Ten-point Gauss–Legendre rule on `[a, b]`.
#[inline]
pub fn gauss_legendre<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    if half == 0.0 {
        return 0.0;
    }
    let mid = 0.5 * (a + b);
    GL10.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Accuracy budget for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadratureSpec {
    /// Absolute error budget over the whole integration range.
    pub abs_tol: f64,
    /// Relative error budget per panel; loosen it for noisy integrands.
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Hard cap on the number of panels of one table.
    pub max_panels: usize,
    /// Improper endpoints are integrated up to `endpoint_eps` from 0 and 1.
    pub endpoint_eps: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-13, max_panels: 20_000, endpoint_eps: 1e-9 }
    }
}

fn default_rel_tol() -> f64 {
    1e-13
}

const COARSE_STEP: f64 = 0.25;
const MAX_DEPTH: usize = 40;

/// Where a [`CumulativeTable`] measures its integrals from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Start,
    End,
}

/// Signed integrals `∫_{anchor}^{x} g` with O(log n) evaluation.
///
/// Panels come from adaptive bisection of a coarse grid (plus caller-supplied
/// breakpoints where `g` is not smooth). Inside a panel the remainder is one
/// ten-point rule, so the result is continuous in `x`.
pub struct CumulativeTable<F> {
    g: F,
    nodes: Vec<f64>,
    cum: Vec<f64>,
    anchor: Anchor,
}

impl<F: Fn(f64) -> f64> CumulativeTable<F> {
    pub fn build(
        g: F,
        start: f64,
        end: f64,
        breakpoints: &[f64],
        anchor: Anchor,
        spec: &QuadratureSpec,
    ) -> Result<Self> {
        if !(end > start) {
            return Err(Error::Quadrature(format!("empty range [{start}, {end}]")));
        }
        let mut coarse = vec![start];
        let n = ((end - start) / COARSE_STEP).ceil().max(1.0) as usize;
        for i in 1..n {
            coarse.push(start + (end - start) * i as f64 / n as f64);
        }
        coarse.extend(breakpoints.iter().copied().filter(|&b| b > start && b < end));
        coarse.push(end);
        coarse.sort_by(f64::total_cmp);
        coarse.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));

        let width = end - start;
        let mut nodes = vec![start];
        let mut pieces = Vec::new();
        for w in coarse.windows(2) {
            refine(&g, w[0], w[1], width, spec, 0, &mut nodes, &mut pieces)?;
            if pieces.len() > spec.max_panels {
                return Err(Error::Quadrature(format!(
                    "more than {} panels needed on [{start}, {end}]",
                    spec.max_panels
                )));
            }
        }
        let mut cum = Vec::with_capacity(nodes.len());
        cum.push(0.0);
        let mut acc = 0.0;
        for p in &pieces {
            acc += p;
            cum.push(acc);
        }
        if anchor == Anchor::End {
            let total = acc;
            // recompute from the end so values near the anchor keep their digits
            let mut back = 0.0;
            for i in (0..pieces.len()).rev() {
                cum[i + 1] = back;
                back -= pieces[i];
            }
            cum[0] = back;
            debug_assert!((back + total).abs() <= 1e-9 * (1.0 + total.abs()));
        }
        Ok(Self { g, nodes, cum, anchor })
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn panels(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Signed integral from the anchor to `x`, with `x` clamped into range.
    pub fn integral_to(&self, x: f64) -> f64 {
        let x = x.clamp(self.start(), self.end());
        let j = match self.nodes.binary_search_by(|n| n.total_cmp(&x)) {
            Ok(i) => return self.cum[i],
            Err(i) => i - 1,
        };
        // integrate from the panel side nearer the anchor to keep small values exact
        match self.anchor {
            Anchor::Start => self.cum[j] + gauss_legendre(&self.g, self.nodes[j], x),
            Anchor::End => self.cum[j + 1] - gauss_legendre(&self.g, x, self.nodes[j + 1]),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    g: &F,
    a: f64,
    b: f64,
    width: f64,
    spec: &QuadratureSpec,
    depth: usize,
    nodes: &mut Vec<f64>,
    pieces: &mut Vec<f64>,
) -> Result<()> {
    let whole = gauss_legendre(g, a, b);
    let m = 0.5 * (a + b);
    let left = gauss_legendre(g, a, m);
    let right = gauss_legendre(g, m, b);
    if !(whole.is_finite() && left.is_finite() && right.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
    }
    let err = (left + right - whole).abs();
    let budget = (spec.abs_tol * (b - a) / width).max(spec.rel_tol * (left + right).abs());
    if pieces.len() > spec.max_panels {
        return Err(Error::Quadrature(format!("more than {} panels needed", spec.max_panels)));
    }
    if err <= budget || depth >= MAX_DEPTH {
        if depth > 0 {
            // the halves are at least as accurate as the whole
            nodes.push(m);
            pieces.push(left);
            nodes.push(b);
            pieces.push(right);
        } else {
            nodes.push(b);
            pieces.push(whole);
        }
        return Ok(());
    }
    refine(g, a, m, width, spec, depth + 1, nodes, pieces)?;
    refine(g, m, b, width, spec, depth + 1, nodes, pieces)
}
