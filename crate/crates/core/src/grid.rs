//! Uniform τ-grids on `[0, 1]` with finite-difference and quadrature rules.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};

/// Values that can be sampled on a grid and combined linearly.
pub trait GridValue: Clone {
    fn scaled(&self, a: f64) -> Self;
    fn add_scaled(&mut self, a: f64, other: &Self);
    fn magnitude(&self) -> f64;
}

impl GridValue for f64 {
    fn scaled(&self, a: f64) -> Self {
        self * a
    }
    fn add_scaled(&mut self, a: f64, other: &Self) {
        *self += a * other;
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl GridValue for Complex64 {
    fn scaled(&self, a: f64) -> Self {
        self * a
    }
    fn add_scaled(&mut self, a: f64, other: &Self) {
        *self += other * a;
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl GridValue for CVec {
    fn scaled(&self, a: f64) -> Self {
        self.map(|z| z * a)
    }
    fn add_scaled(&mut self, a: f64, other: &Self) {
        self.zip_apply(other, |x, y| *x += y * a);
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl GridValue for CMat {
    fn scaled(&self, a: f64) -> Self {
        self.map(|z| z * a)
    }
    fn add_scaled(&mut self, a: f64, other: &Self) {
        self.zip_apply(other, |x, y| *x += y * a);
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

const BOUNDARY_STENCIL: usize = 7;

fn combine<T: GridValue>(weights: &[f64], values: &[T], start: usize, scale: f64) -> T {
    let mut acc = values[start].scaled(weights[0] * scale);
    for (w, v) in weights.iter().zip(&values[start..]).skip(1) {
        acc.add_scaled(w * scale, v);
    }
    acc
}

/// Finite-difference weights for the `order`-th derivative at `x0` from
/// arbitrary distinct `nodes` (Fornberg's recursion).
pub fn fd_weights(x0: f64, nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` (Newton iteration on the
/// Legendre recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Uniform grid `τ_k = k/(n−1)`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub points: usize,
}

impl Grid {
    pub fn new(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 points, got {points}"
            )));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.points - 1) as f64
    }

    pub fn tau(&self, k: usize) -> f64 {
        if k + 1 == self.points {
            1.0
        } else {
            k as f64 * self.step()
        }
    }

    pub fn taus(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.tau(k)).collect()
    }

    /// Index of the grid point equal to `tau` (within `1e-9` of the spacing).
    pub fn index_of(&self, tau: f64) -> Option<usize> {
        let x = tau / self.step();
        let k = x.round();
        if k < 0.0 || k as usize >= self.points || (x - k).abs() > 1e-9 {
            None
        } else {
            Some(k as usize)
        }
    }

    fn check<T>(&self, values: &[T]) -> Result<()> {
        if values.len() != self.points {
            return Err(Error::GridMismatch(format!(
                "{} samples on a {}-point grid",
                values.len(),
                self.points
            )));
        }
        Ok(())
    }

    /// First derivative: 5-point central stencil inside, 7-point sixth-order
    /// stencils on the four outermost points at each end (5-point on the two
    /// outermost points for grids shorter than 9).
    pub fn derivative<T: GridValue>(&self, values: &[T]) -> Result<Vec<T>> {
        self.check(values)?;
        if self.points < 5 {
            return Err(Error::InvalidInput(
                "fourth-order differentiation needs at least 5 points".into(),
            ));
        }
        let n = self.points;
        let inv_h = 1.0 / self.step();
        let central = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        let (edge, width) = if n >= 2 * BOUNDARY_STENCIL - 5 {
            (BOUNDARY_STENCIL / 2 + 1, BOUNDARY_STENCIL)
        } else {
            (2, 5)
        };
        let nodes: Vec<f64> = (0..width).map(|k| k as f64).collect();
        let mut out = Vec::with_capacity(n);
        for k in 0..edge {
            out.push(combine(&fd_weights(k as f64, &nodes, 1), values, 0, inv_h));
        }
        for k in edge..n - edge {
            out.push(combine(&central, values, k - 2, inv_h));
        }
        for k in n - edge..n {
            let x0 = (k + width - n) as f64;
            out.push(combine(&fd_weights(x0, &nodes, 1), values, n - width, inv_h));
        }
        Ok(out)
    }

    /// Same stencils at spacing `2h`, evaluated at every point where they fit;
    /// falls back to the `h` stencil near the ends.
    fn derivative_wide<T: GridValue>(&self, values: &[T], fine: &[T]) -> Vec<T> {
        let n = self.points;
        let inv_2h = 0.5 / self.step();
        let central = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        (0..n)
            .map(|k| {
                if k >= 4 && k + 4 < n {
                    let mut acc = values[k - 4].scaled(central[0] * inv_2h);
                    for (m, w) in central.iter().enumerate().skip(1) {
                        acc.add_scaled(w * inv_2h, &values[k - 4 + 2 * m]);
                    }
                    acc
                } else {
                    fine[k].clone()
                }
            })
            .collect()
    }

    /// Fourth-order derivative with one Richardson step against the `2h`
    /// stencil. Returns the refined derivative and an estimate of the error of
    /// the unrefined `h` result (max over the grid of `‖D_h − D_2h‖/15`).
    pub fn derivative_refined<T: GridValue>(&self, values: &[T]) -> Result<(Vec<T>, f64)> {
        let fine = self.derivative(values)?;
        let wide = self.derivative_wide(values, &fine);
        let mut noise = 0.0_f64;
        let refined = fine
            .iter()
            .zip(&wide)
            .map(|(f, w)| {
                let mut diff = f.clone();
                diff.add_scaled(-1.0, w);
                noise = noise.max(diff.magnitude() / 15.0);
                let mut r = f.scaled(16.0 / 15.0);
                r.add_scaled(-1.0 / 15.0, w);
                r
            })
            .collect();
        Ok((refined, noise))
    }

    /// Running integral `∫_0^{τ_k}` with a fourth-order (cubic) rule per
    /// interval.
    pub fn cumulative_integral<T: GridValue>(&self, values: &[T]) -> Result<Vec<T>> {
        self.check(values)?;
        let n = self.points;
        let h = self.step();
        let mut out = Vec::with_capacity(n);
        let mut acc = values[0].scaled(0.0);
        out.push(acc.clone());
        if n < 4 {
            for k in 0..n - 1 {
                acc.add_scaled(0.5 * h, &values[k]);
                acc.add_scaled(0.5 * h, &values[k + 1]);
                out.push(acc.clone());
            }
            return Ok(out);
        }
        let s = h / 24.0;
        for k in 0..n - 1 {
            let (start, w): (usize, [f64; 4]) = if k == 0 {
                (0, [9.0, 19.0, -5.0, 1.0])
            } else if k + 2 >= n {
                (n - 4, [1.0, -5.0, 19.0, 9.0])
            } else {
                (k - 1, [-1.0, 13.0, 13.0, -1.0])
            };
            for (m, wm) in w.iter().enumerate() {
                acc.add_scaled(wm * s, &values[start + m]);
            }
            out.push(acc.clone());
        }
        Ok(out)
    }

    /// `∫_0^1` by composite Simpson on an even number of intervals; otherwise
    /// the total of [`Grid::cumulative_integral`].
    pub fn integrate<T: GridValue>(&self, values: &[T]) -> Result<T> {
        self.check(values)?;
        let n = self.points;
        if n >= 3 && (n - 1).is_multiple_of(2) {
            let h = self.step();
            let mut acc = values[0].scaled(h / 3.0);
            acc.add_scaled(h / 3.0, &values[n - 1]);
            for (k, v) in values.iter().enumerate().take(n - 1).skip(1) {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                acc.add_scaled(w * h / 3.0, v);
            }
            Ok(acc)
        } else {
            Ok(self.cumulative_integral(values)?.pop().expect("non-empty grid"))
        }
    }
}
