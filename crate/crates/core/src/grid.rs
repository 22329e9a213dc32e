//! Tensor grids over the normal bundle and weighted wave functions.
//!
//! Nodes are stored with the normal index slowest: `idx = (k·N₁ + i₁)·N₂ + i₂`.
//! Each [`Space`] carries the quadrature weight of every node, so the inner
//! product of two [`WaveFunction`]s is `Σ ω conj(a) b`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SurfaceChart;

pub type C64 = Complex64;

/// Discretization parameters of the scaled tube `(x₁, x₂, y) ∈ T² × (−Y, Y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    pub ny: usize,
    /// Half-width `Y` of the scaled normal domain.
    pub y_half: f64,
    pub lambda: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n1: 24,
            n2: 24,
            ny: 96,
            y_half: 8.0,
            lambda: 4.0,
        }
    }
}

impl GridSpec {
    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 < 2 || self.n2 < 2 || !self.n1.is_multiple_of(2) || !self.n2.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "surface node counts must be even and >= 2, got {} x {}",
                self.n1, self.n2
            )));
        }
        if self.ny < 3 {
            return Err(Error::Parameter(format!("ny = {} < 3", self.ny)));
        }
        if !(self.y_half > 0.0) {
            return Err(Error::Parameter(format!("Y = {}", self.y_half)));
        }
        if !(self.lambda >= 1.0) {
            return Err(Error::Parameter(format!("lambda = {} < 1", self.lambda)));
        }
        Ok(())
    }

    /// Whether the unscaled grid stays within half the reach, where the
    /// metric extension is inactive.
    pub fn within_tube(&self, chart: &SurfaceChart) -> bool {
        self.y_half / self.lambda < 0.5 * chart.reach_bound()
    }

    pub fn spacing(&self, periods: [f64; 2]) -> [f64; 3] {
        [
            periods[0] / self.n1 as f64,
            periods[1] / self.n2 as f64,
            2.0 * self.y_half / (self.ny + 1) as f64,
        ]
    }

    /// Interior Dirichlet nodes `y_k = −Y + (k+1)Δy`.
    pub fn y_nodes(&self) -> Vec<f64> {
        let dy = 2.0 * self.y_half / (self.ny + 1) as f64;
        (0..self.ny)
            .map(|k| -self.y_half + (k + 1) as f64 * dy)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2 * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Node set with quadrature weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Space {
    pub n1: usize,
    pub n2: usize,
    pub ny: usize,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// Normal coordinates of the nodes in this space's own variable.
    pub y: Vec<f64>,
    /// Normal spacing (distance between consecutive `y`, also to the walls).
    pub dy: f64,
    pub weights: Vec<f64>,
}

impl Space {
    pub fn slice_len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn x(&self, i: usize) -> [f64; 2] {
        [self.x1[i / self.n2], self.x2[i % self.n2]]
    }

    pub fn same_shape(&self, other: &Space) -> bool {
        self.n1 == other.n1 && self.n2 == other.n2 && self.ny == other.ny
    }
}

/// Complex field on a [`Space`].
#[derive(Clone, Debug)]
pub struct WaveFunction {
    pub space: Arc<Space>,
    pub data: Vec<C64>,
}

impl WaveFunction {
    pub fn zeros(space: Arc<Space>) -> Self {
        let data = vec![C64::new(0.0, 0.0); space.len()];
        Self { space, data }
    }

    pub fn from_fn(space: Arc<Space>, f: impl Fn([f64; 2], f64) -> C64) -> Self {
        let nx = space.slice_len();
        let data = (0..space.len())
            .map(|idx| f(space.x(idx % nx), space.y[idx / nx]))
            .collect();
        Self { space, data }
    }

    pub fn inner(&self, other: &WaveFunction) -> C64 {
        debug_assert!(self.space.same_shape(&other.space));
        weighted_inner(&self.space.weights, &self.data, &other.data)
    }

    pub fn norm(&self) -> f64 {
        weighted_norm(&self.space.weights, &self.data)
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        for v in &mut self.data {
            *v /= n;
        }
    }

    /// `‖self − other‖` in this space's weights.
    pub fn distance(&self, other: &WaveFunction) -> f64 {
        let acc: f64 = self
            .space
            .weights
            .iter()
            .zip(self.data.iter().zip(&other.data))
            .map(|(w, (a, b))| w * (a - b).norm_sqr())
            .sum();
        acc.sqrt()
    }

    /// `φ ⊗ χ` with `φ` on a surface space (`ny = 1`) and `χ` on a normal
    /// line (`n₁ = n₂ = 1`), placed on `target`.
    pub fn tensor(
        target: Arc<Space>,
        surface: &WaveFunction,
        normal: &WaveFunction,
    ) -> Result<Self> {
        let nx = target.slice_len();
        if surface.data.len() != nx || normal.data.len() != target.ny {
            return Err(Error::Shape(format!(
                "tensor factors {} x {} do not fit grid {} x {}",
                surface.data.len(),
                normal.data.len(),
                nx,
                target.ny
            )));
        }
        let mut data = Vec::with_capacity(target.len());
        for chi in &normal.data {
            data.extend(surface.data.iter().map(|phi| phi * chi));
        }
        Ok(Self {
            space: target,
            data,
        })
    }
}

pub fn weighted_inner(w: &[f64], a: &[C64], b: &[C64]) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for ((wi, x), y) in w.iter().zip(a).zip(b) {
        re += wi * (x.re * y.re + x.im * y.im);
        im += wi * (x.re * y.im - x.im * y.re);
    }
    C64::new(re, im)
}

pub fn weighted_norm(w: &[f64], a: &[C64]) -> f64 {
    w.iter()
        .zip(a)
        .map(|(wi, x)| wi * x.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Fourier pseudospectral first-derivative matrix on `n` equispaced periodic
/// nodes of period `period`; exactly antisymmetric.
///
/// On even grids the real alternating mode lies in the kernel of any real
/// antisymmetric matrix. The momentum `i∂` is therefore represented as
/// `i D + ν P` with `P` the orthogonal projector onto that mode and `ν` its
/// wavenumber, which keeps `i∂` Hermitian and gives the mode its `ν²`
/// kinetic energy.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffMatrix {
    pub n: usize,
    data: Vec<f64>,
    nyquist: f64,
}

impl DiffMatrix {
    pub fn fourier(n: usize, period: f64) -> Self {
        let mut data = vec![0.0; n * n];
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let scale = 2.0 * std::f64::consts::PI / period;
        for j in 0..n {
            for m in (j + 1)..n {
                let d = (j as f64 - m as f64) * h / 2.0;
                let sign = if (m - j) % 2 == 0 { 1.0 } else { -1.0 };
                let v = if n.is_multiple_of(2) {
                    0.5 * sign / d.tan()
                } else {
                    0.5 * sign / d.sin()
                } * scale;
                data[j * n + m] = v;
                data[m * n + j] = -v;
            }
        }
        let nyquist = if n.is_multiple_of(2) {
            0.5 * n as f64 * scale
        } else {
            0.0
        };
        Self { n, data, nyquist }
    }

    /// Wavenumber `ν` of the alternating mode; zero on odd grids.
    pub fn nyquist(&self) -> f64 {
        self.nyquist
    }

    /// `ν P` along the slow axis of an `n × stride` block.
    pub fn nyquist_rows(&self, input: &[C64], stride: usize, out: &mut [C64]) {
        let n = self.n;
        let c = self.nyquist / n as f64;
        for col in 0..stride {
            let mut acc = C64::new(0.0, 0.0);
            for row in 0..n {
                let v = input[row * stride + col];
                if row % 2 == 0 {
                    acc += v
                } else {
                    acc -= v
                }
            }
            let acc = acc * c;
            for row in 0..n {
                out[row * stride + col] = if row % 2 == 0 { acc } else { -acc };
            }
        }
    }

    /// `ν P` along the fast axis of a `rows × n` block.
    pub fn nyquist_cols(&self, input: &[C64], rows: usize, out: &mut [C64]) {
        let n = self.n;
        let c = self.nyquist / n as f64;
        for r in 0..rows {
            let src = &input[r * n..(r + 1) * n];
            let mut acc = C64::new(0.0, 0.0);
            for (j, v) in src.iter().enumerate() {
                if j % 2 == 0 {
                    acc += v
                } else {
                    acc -= v
                }
            }
            let acc = acc * c;
            for j in 0..n {
                out[r * n + j] = if j % 2 == 0 { acc } else { -acc };
            }
        }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    /// Derivative along the slow axis of an `n × stride` row-major block.
    pub fn apply_rows(&self, input: &[C64], stride: usize, out: &mut [C64]) {
        let n = self.n;
        for row in 0..n {
            let dst = &mut out[row * stride..(row + 1) * stride];
            dst.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for m in 0..n {
                let c = self.data[row * n + m];
                if c == 0.0 {
                    continue;
                }
                let src = &input[m * stride..(m + 1) * stride];
                for (d, s) in dst.iter_mut().zip(src) {
                    d.re += c * s.re;
                    d.im += c * s.im;
                }
            }
        }
    }

    /// Derivative along the fast axis of a `rows × n` row-major block.
    pub fn apply_cols(&self, input: &[C64], rows: usize, out: &mut [C64]) {
        let n = self.n;
        for r in 0..rows {
            let src = &input[r * n..(r + 1) * n];
            for j in 0..n {
                let coeffs = &self.data[j * n..(j + 1) * n];
                let mut re = 0.0;
                let mut im = 0.0;
                for (c, s) in coeffs.iter().zip(src) {
                    re += c * s.re;
                    im += c * s.im;
                }
                out[r * n + j] = C64::new(re, im);
            }
        }
    }

    /// Real-valued version of [`apply_cols`](Self::apply_cols) and
    /// [`apply_rows`](Self::apply_rows) for coefficient fields.
    pub fn derivative_real(&self, input: &[f64], axis: usize, n1: usize, n2: usize) -> Vec<f64> {
        let mut out = vec![0.0; n1 * n2];
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let mut acc = 0.0;
                if axis == 0 {
                    for m in 0..n1 {
                        acc += self.at(i1, m) * input[m * n2 + i2];
                    }
                } else {
                    for m in 0..n2 {
                        acc += self.at(i2, m) * input[i1 * n2 + m];
                    }
                }
                out[i1 * n2 + i2] = acc;
            }
        }
        out
    }
}

/// Surface nodes of a grid: `x₁ = i p₁/N₁`, `x₂ = j p₂/N₂`.
pub fn surface_axes(spec: &GridSpec, periods: [f64; 2]) -> (Vec<f64>, Vec<f64>) {
    let x1 = (0..spec.n1)
        .map(|i| periods[0] * i as f64 / spec.n1 as f64)
        .collect();
    let x2 = (0..spec.n2)
        .map(|i| periods[1] * i as f64 / spec.n2 as f64)
        .collect();
    (x1, x2)
}
