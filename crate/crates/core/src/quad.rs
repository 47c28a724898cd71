//! Adaptive Gauss–Kronrod (7/15) quadrature for vector-valued integrands over
//! a partition of the real line, optionally including both infinite tails.

use crate::{Error, Result};
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-9, max_intervals: 20_000 }
    }
}

/// Segment of the integration domain in the mapped variable `t`.
#[derive(Debug, Clone, Copy)]
enum Map {
    /// x = t
    Finite,
    /// x = a - s (1 - t) / t, t in (0, 1]
    Lower { a: f64, s: f64 },
    /// x = a + s (1 - t) / t, t in (0, 1]
    Upper { a: f64, s: f64 },
}

impl Map {
    fn apply(self, t: f64) -> (f64, f64) {
        match self {
            Map::Finite => (t, 1.0),
            Map::Lower { a, s } => (a - s * (1.0 - t) / t, s / (t * t)),
            Map::Upper { a, s } => (a + s * (1.0 - t) / t, s / (t * t)),
        }
    }
}

struct Piece {
    lo: f64,
    hi: f64,
    map: Map,
    value: Vec<f64>,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

fn kronrod<F: Fn(f64, &mut [f64])>(f: &F, dim: usize, lo: f64, hi: f64, map: Map, buf: &mut [f64]) -> (Vec<f64>, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut k = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut eval = |t: f64, wk: f64, wg: f64, k: &mut [f64], g: &mut [f64]| {
        // the mapped tails are singular at t = 0, which Kronrod nodes never hit
        let (x, jac) = map.apply(t);
        f(x, buf);
        for d in 0..dim {
            let y = buf[d] * jac;
            k[d] += wk * y;
            g[d] += wg * y;
        }
    };
    eval(center, WGK[7], WG[3], &mut k, &mut g);
    for j in 0..7 {
        let dx = half * XGK[j];
        let wg = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
        eval(center - dx, WGK[j], wg, &mut k, &mut g);
        eval(center + dx, WGK[j], wg, &mut k, &mut g);
    }
    let mut err: f64 = 0.0;
    for d in 0..dim {
        k[d] *= half;
        g[d] *= half;
        err = err.max((k[d] - g[d]).abs());
    }
    (k, err)
}

/// Integrate `f` (writing `dim` outputs) over the real line split at
/// `breaks` (sorted). With `tails = Some(scale)` the two semi-infinite pieces
/// are included using a rational map with characteristic width `scale`.
pub fn integrate<F>(f: F, dim: usize, breaks: &[f64], tails: Option<f64>, opts: QuadOptions) -> Result<Vec<f64>>
where
    F: Fn(f64, &mut [f64]),
{
    if breaks.len() < 2 && tails.is_none() {
        return Err(Error::IntegrationDomain("need at least two break points".into()));
    }
    if breaks.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::IntegrationDomain("break points must be sorted".into()));
    }
    let mut buf = vec![0.0; dim];
    let mut heap = BinaryHeap::new();
    let push = |lo: f64, hi: f64, map: Map, heap: &mut BinaryHeap<Piece>, buf: &mut [f64]| {
        let (value, err) = kronrod(&f, dim, lo, hi, map, buf);
        heap.push(Piece { lo, hi, map, value, err });
    };
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            push(w[0], w[1], Map::Finite, &mut heap, &mut buf);
        }
    }
    if let Some(s) = tails {
        if !(s > 0.0) || breaks.is_empty() {
            return Err(Error::IntegrationDomain("tail scale must be positive with a break point".into()));
        }
        push(0.0, 1.0, Map::Lower { a: breaks[0], s }, &mut heap, &mut buf);
        push(0.0, 1.0, Map::Upper { a: *breaks.last().unwrap(), s }, &mut heap, &mut buf);
    }
    loop {
        let mut total = vec![0.0; dim];
        let mut err = 0.0;
        for p in heap.iter() {
            for d in 0..dim {
                total[d] += p.value[d];
            }
            err += p.err;
        }
        let size = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if err <= opts.abs_tol.max(opts.rel_tol * size) {
            return Ok(total);
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Numerical(format!(
                "quadrature did not reach tolerance (err {err:.3e}, size {size:.3e})"
            )));
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.lo + worst.hi);
        push(worst.lo, mid, worst.map, &mut heap, &mut buf);
        push(mid, worst.hi, worst.map, &mut heap, &mut buf);
    }
}

/// Trapezoidal integral of samples `y` on a (possibly non-uniform) grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn lorentzian_over_real_line() {
        let g = 3.0;
        let v = integrate(
            |x, out| out[0] = (g / 2.0) / (x * x + g * g / 4.0),
            1,
            &[-20.0, 0.0, 20.0],
            Some(g),
            QuadOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(v[0], PI, max_relative = 1e-9);
    }

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x, out| { out[0] = x * x; out[1] = 1.0 }, 2, &[0.0, 2.0], None, QuadOptions::default()).unwrap();
        assert_relative_eq!(v[0], 8.0 / 3.0, max_relative = 1e-13);
        assert_relative_eq!(v[1], 2.0, max_relative = 1e-13);
    }

    #[test]
    fn trapezoid_linear() {
        let x = [0.0, 0.5, 2.0];
        let y = [0.0, 0.5, 2.0];
        assert_relative_eq!(trapezoid(&x, &y), 2.0);
    }
}
