//! Embedded-surface geometry in tube coordinates.
//!
//! A [`SurfaceChart`] is a doubly-periodic parametrization `σ(x₁, x₂)` of a
//! compact surface in three-space together with a fixed unit normal `ν`.
//! Points of the tube are addressed by `(x, y)` with `y` the signed distance
//! along `ν`. Everything downstream (tube metric, density factors, the
//! curvature potential) is derived from the first fundamental form `G_Σ` and
//! the matrix `B = [⟨σ_i, L σ_j⟩]` of the second fundamental form.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::cutoff::SmoothStep;
use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat2 = Matrix2<f64>;

/// Closure type for user-supplied parametrizations.
pub type ChartMap = Arc<dyn Fn([f64; 2]) -> Vec3 + Send + Sync>;

/// Nodes per direction of the grid every chart is validated on.
pub const VALIDATION_NODES: usize = 64;

/// Which way a user chart's normal points relative to `σ₁ × σ₂`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    AlongCross,
    AgainstCross,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::AlongCross => 1.0,
            Orientation::AgainstCross => -1.0,
        }
    }
}

/// Local differential data of the chart at one parameter point.
#[derive(Clone, Copy, Debug)]
pub struct ChartPoint {
    pub sigma: Vec3,
    /// `σ_i = ∂σ/∂x_i`.
    pub tangent: [Vec3; 2],
    /// `σ_ij`.
    pub hessian: [[Vec3; 2]; 2],
    pub normal: Vec3,
    /// `∂ν/∂x_j`.
    pub normal_deriv: [Vec3; 2],
}

#[derive(Clone)]
enum Shape {
    Flat,
    /// Surface of revolution with tube profile `r(θ) = r (1 + ε cos 2θ)`
    /// around a circle of radius `major`; `eps = 0` is the round torus.
    Revolution {
        major: f64,
        minor: f64,
        eps: f64,
    },
    Sphere {
        radius: f64,
    },
    Custom {
        map: ChartMap,
        orientation: Orientation,
    },
}

/// A validated surface chart. Immutable after construction.
#[derive(Clone)]
pub struct SurfaceChart {
    shape: Shape,
    periods: [f64; 2],
    flipped: bool,
    global: bool,
    reach: f64,
}

impl fmt::Debug for SurfaceChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.shape {
            Shape::Flat => "flat".to_string(),
            Shape::Revolution { major, minor, eps } => {
                format!("revolution(R={major}, r={minor}, eps={eps})")
            }
            Shape::Sphere { radius } => format!("sphere(R={radius})"),
            Shape::Custom { orientation, .. } => format!("custom({orientation:?})"),
        };
        f.debug_struct("SurfaceChart")
            .field("shape", &kind)
            .field("periods", &self.periods)
            .field("flipped", &self.flipped)
            .field("reach", &self.reach)
            .finish()
    }
}

/// Fundamental forms and curvatures at a point.
#[derive(Clone, Copy, Debug)]
pub struct CurvatureData {
    pub g_sigma: Mat2,
    /// Weingarten map in the coordinate basis, `G_Σ⁻¹ B`.
    pub l_mat: Mat2,
    /// Principal curvatures, ascending.
    pub kappa: [f64; 2],
    /// Gaussian curvature `det L`.
    pub s: f64,
    /// Mean curvature `½ tr L`.
    pub h: f64,
    /// Curvature potential `s − h²`.
    pub k: f64,
}

/// Tube metric evaluated at one `(x, y)`.
#[derive(Clone, Copy, Debug)]
pub struct TubeSlice {
    pub correction: Mat2,
    pub metric: Matrix3<f64>,
    pub det: f64,
}

impl TubeSlice {
    pub fn tangential(&self) -> Mat2 {
        self.metric.fixed_view::<2, 2>(0, 0).into_owned()
    }
}

/// `m_λ`, `k_λ = log m_λ` and centered-difference `y`-derivatives of `k_λ`.
#[derive(Clone, Copy, Debug)]
pub struct DensityFactors {
    pub m: f64,
    pub k: f64,
    pub dk_dy: f64,
    pub d2k_dy2: f64,
}

fn fd4_first<F: Fn(f64) -> Vec3>(f: F, h: f64) -> Vec3 {
    (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h)
}

fn symmetric_eigen2(m: &Mat2) -> (f64, f64) {
    let mid = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let half = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let rad = (half * half + m[(0, 1)] * m[(1, 0)]).max(0.0).sqrt();
    (mid - rad, mid + rad)
}

fn operator_norm2(m: &Mat2) -> f64 {
    let mtm = m.transpose() * m;
    symmetric_eigen2(&mtm).1.max(0.0).sqrt()
}

fn inverse2(m: &Mat2) -> Mat2 {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det
}

impl SurfaceChart {
    /// Flat periodic plane `σ(x) = (x₁, x₂, 0)` with periods `2π`.
    pub fn flat() -> Result<Self> {
        Self::flat_with_periods([2.0 * std::f64::consts::PI; 2])
    }

    pub fn flat_with_periods(periods: [f64; 2]) -> Result<Self> {
        Self::build(Shape::Flat, periods, true)
    }

    /// Round torus with major radius `major` and tube radius `minor`,
    /// parametrized by `x = (θ, φ)`, outward normal.
    pub fn torus(major: f64, minor: f64) -> Result<Self> {
        Self::perturbed_torus(major, minor, 0.0)
    }

    /// Torus whose tube radius varies as `r (1 + ε cos 2θ)`, `|ε| ≤ 0.2`.
    pub fn perturbed_torus(major: f64, minor: f64, eps: f64) -> Result<Self> {
        if !(minor > 0.0 && major > minor) {
            return Err(Error::Parameter(format!(
                "torus needs R > r > 0, got R = {major}, r = {minor}"
            )));
        }
        if eps.abs() > 0.2 {
            return Err(Error::Parameter(format!(
                "perturbation eps = {eps} outside [-0.2, 0.2]"
            )));
        }
        if major <= minor * (1.0 + eps.abs()) {
            return Err(Error::Parameter(
                "perturbed tube reaches the symmetry axis".into(),
            ));
        }
        let tau = 2.0 * std::f64::consts::PI;
        Self::build(Shape::Revolution { major, minor, eps }, [tau, tau], true)
    }

    /// Round sphere in polar coordinates `(θ, φ)`, outward normal.
    ///
    /// Local chart only: it is validated on the band `π/4 ≤ θ ≤ 3π/4`, is
    /// not periodic in `θ`, and is refused by operator assembly.
    pub fn sphere(radius: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::Parameter(format!("sphere radius {radius}")));
        }
        let tau = 2.0 * std::f64::consts::PI;
        Self::build(Shape::Sphere { radius }, [tau, tau], false)
    }

    /// User chart. Derivatives come from fourth-order centered differences
    /// with step `period / 10⁴`.
    pub fn custom(map: ChartMap, periods: [f64; 2], orientation: Orientation) -> Result<Self> {
        if periods.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Parameter(format!("periods {periods:?}")));
        }
        Self::build(Shape::Custom { map, orientation }, periods, true)
    }

    fn build(shape: Shape, periods: [f64; 2], global: bool) -> Result<Self> {
        let mut chart = SurfaceChart {
            shape,
            periods,
            flipped: false,
            global,
            reach: f64::INFINITY,
        };
        chart.reach = chart.validate()?;
        Ok(chart)
    }

    /// Same surface with the opposite normal.
    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        out.flipped = !out.flipped;
        out
    }

    pub fn periods(&self) -> [f64; 2] {
        self.periods
    }

    /// Whether the chart covers a compact surface periodically.
    pub fn is_global(&self) -> bool {
        self.global
    }

    /// Largest `Y₀` with `|y| ‖G_Σ⁻¹ B‖ < 1` for `|y| < Y₀` over the
    /// validation grid.
    pub fn reach_bound(&self) -> f64 {
        self.reach
    }

    /// Cutoff of the complete metric extension `G_Σ + η(y) C`: `η = 1` for
    /// `|y| ≤ reach/2`, `η = 0` for `|y| ≥ reach`.
    pub fn extension_cutoff(&self) -> Option<SmoothStep> {
        self.reach
            .is_finite()
            .then(|| SmoothStep::new(0.5 * self.reach, self.reach))
    }

    fn validation_nodes(&self) -> Vec<[f64; 2]> {
        let n = VALIDATION_NODES;
        let (lo, span) = match self.shape {
            Shape::Sphere { .. } => (0.25 * std::f64::consts::PI, 0.5 * std::f64::consts::PI),
            _ => (0.0, self.periods[0]),
        };
        let mut nodes = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let x1 = match self.shape {
                    Shape::Sphere { .. } => lo + span * i as f64 / (n - 1) as f64,
                    _ => span * i as f64 / n as f64,
                };
                nodes.push([x1, self.periods[1] * j as f64 / n as f64]);
            }
        }
        nodes
    }

    fn validate(&self) -> Result<f64> {
        let mut max_norm: f64 = 0.0;
        for x in self.validation_nodes() {
            let p = self.point(x);
            let degenerate = |detail: String| Error::DegenerateChart {
                x1: x[0],
                x2: x[1],
                detail,
            };
            let g = self.first_fundamental_form(x)?;
            if !g.iter().all(|v| v.is_finite()) {
                return Err(degenerate("non-finite metric".into()));
            }
            if (p.normal.norm() - 1.0).abs() > 1e-12 {
                return Err(degenerate(format!("|ν| = {}", p.normal.norm())));
            }
            for t in &p.tangent {
                let dot = t.dot(&p.normal);
                if dot.abs() > 1e-12 * t.norm().max(1.0) {
                    return Err(degenerate(format!("⟨σ_i, ν⟩ = {dot:.3e}")));
                }
            }
            if self.global {
                let scale = p.sigma.norm().max(1.0);
                for (axis, period) in self.periods.iter().enumerate() {
                    let mut shifted = x;
                    shifted[axis] += period;
                    let q = self.point(shifted);
                    // the flat chart is periodic up to a translation of σ
                    let sigma_gap = match self.shape {
                        Shape::Flat => 0.0,
                        _ => (q.sigma - p.sigma).norm(),
                    };
                    let gap = sigma_gap
                        .max((q.tangent[0] - p.tangent[0]).norm())
                        .max((q.tangent[1] - p.tangent[1]).norm())
                        .max((q.normal - p.normal).norm());
                    if gap > 1e-9 * scale {
                        return Err(degenerate(format!(
                            "not periodic along x{}: gap {gap:.3e}",
                            axis + 1
                        )));
                    }
                }
            }
            let b = second_form(&p);
            max_norm = max_norm.max(operator_norm2(&(inverse2(&g) * b)));
        }
        Ok(if max_norm > 0.0 {
            1.0 / max_norm
        } else {
            f64::INFINITY
        })
    }

    fn sigma(&self, x: [f64; 2]) -> Vec3 {
        match &self.shape {
            Shape::Flat => Vec3::new(x[0], x[1], 0.0),
            Shape::Revolution { major, minor, eps } => {
                let (rho, z) = revolution_profile(*major, *minor, *eps, x[0]);
                Vec3::new(rho[0] * x[1].cos(), rho[0] * x[1].sin(), z[0])
            }
            Shape::Sphere { radius } => {
                let (st, ct) = x[0].sin_cos();
                let (sp, cp) = x[1].sin_cos();
                *radius * Vec3::new(st * cp, st * sp, ct)
            }
            Shape::Custom { map, .. } => map(x),
        }
    }

    /// Differential data at `x`. Closed form for built-in shapes, finite
    /// differences for user charts.
    pub fn point(&self, x: [f64; 2]) -> ChartPoint {
        let mut p = match &self.shape {
            Shape::Flat => ChartPoint {
                sigma: self.sigma(x),
                tangent: [Vec3::x(), Vec3::y()],
                hessian: [[Vec3::zeros(); 2]; 2],
                normal: Vec3::z(),
                normal_deriv: [Vec3::zeros(); 2],
            },
            Shape::Revolution { major, minor, eps } => revolution_point(*major, *minor, *eps, x),
            Shape::Sphere { radius } => sphere_point(*radius, x),
            Shape::Custom { map, orientation } => {
                custom_point(map, self.periods, orientation.sign(), x)
            }
        };
        if self.flipped {
            p.normal = -p.normal;
            p.normal_deriv = [-p.normal_deriv[0], -p.normal_deriv[1]];
        }
        p
    }

    /// `[⟨σ_i, σ_j⟩]`.
    pub fn first_fundamental_form(&self, x: [f64; 2]) -> Result<Mat2> {
        let p = self.point(x);
        let g = first_form(&p);
        let (lo, _) = symmetric_eigen2(&g);
        let trace = g.trace();
        if !(lo > 1e-12 * trace) {
            return Err(Error::DegenerateChart {
                x1: x[0],
                x2: x[1],
                detail: format!("metric eigenvalue {lo:.3e} at trace {trace:.3e}"),
            });
        }
        Ok(g)
    }

    /// Weingarten map `L = −G_Σ⁻¹[⟨σ_i, ∂_jν⟩]` with principal, Gaussian and
    /// mean curvatures.
    pub fn shape_operator(&self, x: [f64; 2]) -> Result<CurvatureData> {
        let g = self.first_fundamental_form(x)?;
        let p = self.point(x);
        let mut b = Mat2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                b[(i, j)] = -p.tangent[i].dot(&p.normal_deriv[j]);
            }
        }
        let l_mat = inverse2(&g) * b;
        let trace = l_mat.trace();
        let s = l_mat.determinant();
        let h = 0.5 * trace;
        let half_gap = 0.5 * (l_mat[(0, 0)] - l_mat[(1, 1)]);
        let disc = half_gap * half_gap + l_mat[(0, 1)] * l_mat[(1, 0)];
        if disc < 0.0 {
            let imag = (-disc).sqrt();
            if imag > 1e-10 {
                return Err(Error::SymmetryViolation {
                    x1: x[0],
                    x2: x[1],
                    imag,
                });
            }
        }
        let rad = disc.max(0.0).sqrt();
        Ok(CurvatureData {
            g_sigma: g,
            l_mat,
            kappa: [h - rad, h + rad],
            s,
            h,
            k: s - h * h,
        })
    }

    /// `K = s − h²`.
    pub fn curvature_potential(&self, x: [f64; 2]) -> Result<f64> {
        Ok(self.shape_operator(x)?.k)
    }

    /// Correction `C`, block metric `G = blkdiag(G_Σ + C, 1)` and `det G` at
    /// `(x, y)`, straight from `C_ij = y(⟨σ_i, ∂_jν⟩ + ⟨∂_iν, σ_j⟩) + y²⟨∂_iν, ∂_jν⟩`.
    pub fn tube_metric(&self, x: [f64; 2], y: f64) -> Result<TubeSlice> {
        if y.abs() >= self.reach {
            return Err(Error::OutOfTube {
                y: y.abs(),
                reach: self.reach,
            });
        }
        let g_sigma = self.first_fundamental_form(x)?;
        let p = self.point(x);
        let mut c = Mat2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                c[(i, j)] = y
                    * (p.tangent[i].dot(&p.normal_deriv[j]) + p.normal_deriv[i].dot(&p.tangent[j]))
                    + y * y * p.normal_deriv[i].dot(&p.normal_deriv[j]);
            }
        }
        let tan = g_sigma + c;
        let mut metric = Matrix3::zeros();
        metric.fixed_view_mut::<2, 2>(0, 0).copy_from(&tan);
        metric[(2, 2)] = 1.0;
        Ok(TubeSlice {
            correction: c,
            metric,
            det: tan.determinant(),
        })
    }

    /// `m_λ(x, y) = [g(x,0)/g(x,y/λ)]^{1/4}` and `k_λ = log m_λ` from tube
    /// metric determinants; `y`-derivatives of `k_λ` by centered differences
    /// with step `10⁻⁴·reach` in the unscaled variable `y/λ`.
    pub fn density_factors(&self, x: [f64; 2], y: f64, lambda: f64) -> Result<DensityFactors> {
        let step = 1e-4 * self.reach.min(1.0e4);
        self.density_factors_with_step(x, y, lambda, step)
    }

    /// As [`density_factors`](Self::density_factors) with an explicit
    /// difference step (in `y/λ`).
    pub fn density_factors_with_step(
        &self,
        x: [f64; 2],
        y: f64,
        lambda: f64,
        step: f64,
    ) -> Result<DensityFactors> {
        let yu = y / lambda;
        if yu.abs() + step >= self.reach {
            return Err(Error::OutOfTube {
                y: yu.abs() + step,
                reach: self.reach,
            });
        }
        let g0 = self.tube_metric(x, 0.0)?.det;
        let k_of = |u: f64| -> Result<f64> { Ok(0.25 * (g0 / self.tube_metric(x, u)?.det).ln()) };
        let k0 = k_of(yu)?;
        let kp = k_of(yu + step)?;
        let km = k_of(yu - step)?;
        let d1 = (kp - km) / (2.0 * step);
        let d2 = (kp - 2.0 * k0 + km) / (step * step);
        Ok(DensityFactors {
            m: k0.exp(),
            k: k0,
            dk_dy: d1 / lambda,
            d2k_dy2: d2 / (lambda * lambda),
        })
    }

    /// Precomputed normal-bundle data at `x` for operator assembly.
    pub fn frame(&self, x: [f64; 2]) -> Result<TubeFrame> {
        let g = self.first_fundamental_form(x)?;
        let p = self.point(x);
        let b = second_form(&p);
        let g_inv = inverse2(&g);
        let l_mat = g_inv * b;
        Ok(TubeFrame {
            g,
            g_inv,
            b,
            trace: l_mat.trace(),
            det: l_mat.determinant(),
            trace_sq: (l_mat * l_mat).trace(),
        })
    }
}

fn first_form(p: &ChartPoint) -> Mat2 {
    let mut g = Mat2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            g[(i, j)] = p.tangent[i].dot(&p.tangent[j]);
        }
    }
    g
}

/// Symmetrized `B = [⟨σ_i, L σ_j⟩] = −[⟨σ_i, ∂_jν⟩]`.
fn second_form(p: &ChartPoint) -> Mat2 {
    let mut b = Mat2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            b[(i, j)] = -0.5
                * (p.tangent[i].dot(&p.normal_deriv[j]) + p.tangent[j].dot(&p.normal_deriv[i]));
        }
    }
    b
}

/// `(ρ, ρ', ρ'')` and `(z, z', z'')` of the meridian `θ ↦ (R + r(θ) cos θ, r(θ) sin θ)`.
fn revolution_profile(major: f64, minor: f64, eps: f64, theta: f64) -> ([f64; 3], [f64; 3]) {
    let (s2, c2) = (2.0 * theta).sin_cos();
    let r = minor * (1.0 + eps * c2);
    let r1 = -2.0 * minor * eps * s2;
    let r2 = -4.0 * minor * eps * c2;
    let (st, ct) = theta.sin_cos();
    let rho = [
        major + r * ct,
        r1 * ct - r * st,
        r2 * ct - 2.0 * r1 * st - r * ct,
    ];
    let z = [r * st, r1 * st + r * ct, r2 * st + 2.0 * r1 * ct - r * st];
    (rho, z)
}

fn revolution_point(major: f64, minor: f64, eps: f64, x: [f64; 2]) -> ChartPoint {
    let (rho, z) = revolution_profile(major, minor, eps, x[0]);
    let (sp, cp) = x[1].sin_cos();
    let sigma = Vec3::new(rho[0] * cp, rho[0] * sp, z[0]);
    let s_t = Vec3::new(rho[1] * cp, rho[1] * sp, z[1]);
    let s_p = Vec3::new(-rho[0] * sp, rho[0] * cp, 0.0);
    let s_tt = Vec3::new(rho[2] * cp, rho[2] * sp, z[2]);
    let s_tp = Vec3::new(-rho[1] * sp, rho[1] * cp, 0.0);
    let s_pp = Vec3::new(-rho[0] * cp, -rho[0] * sp, 0.0);

    // outward meridian normal (z', -ρ')/ℓ rotated about the axis
    let len = (rho[1] * rho[1] + z[1] * z[1]).sqrt();
    let len_t = (rho[1] * rho[2] + z[1] * z[2]) / len;
    let n_r = z[1] / len;
    let n_z = -rho[1] / len;
    let n_r_t = (z[2] * len - z[1] * len_t) / (len * len);
    let n_z_t = (-rho[2] * len + rho[1] * len_t) / (len * len);
    ChartPoint {
        sigma,
        tangent: [s_t, s_p],
        hessian: [[s_tt, s_tp], [s_tp, s_pp]],
        normal: Vec3::new(n_r * cp, n_r * sp, n_z),
        normal_deriv: [
            Vec3::new(n_r_t * cp, n_r_t * sp, n_z_t),
            Vec3::new(-n_r * sp, n_r * cp, 0.0),
        ],
    }
}

fn sphere_point(radius: f64, x: [f64; 2]) -> ChartPoint {
    let (st, ct) = x[0].sin_cos();
    let (sp, cp) = x[1].sin_cos();
    let n = Vec3::new(st * cp, st * sp, ct);
    let n_t = Vec3::new(ct * cp, ct * sp, -st);
    let n_p = Vec3::new(-st * sp, st * cp, 0.0);
    ChartPoint {
        sigma: radius * n,
        tangent: [radius * n_t, radius * n_p],
        hessian: [
            [-radius * n, radius * Vec3::new(-ct * sp, ct * cp, 0.0)],
            [
                radius * Vec3::new(-ct * sp, ct * cp, 0.0),
                radius * Vec3::new(-st * cp, -st * sp, 0.0),
            ],
        ],
        normal: n,
        normal_deriv: [n_t, n_p],
    }
}

fn custom_point(map: &ChartMap, periods: [f64; 2], sign: f64, x: [f64; 2]) -> ChartPoint {
    let h = [periods[0] * 1e-4, periods[1] * 1e-4];
    let shift = |x: [f64; 2], axis: usize, d: f64| {
        let mut out = x;
        out[axis] += d;
        out
    };
    let tangent_at = |x: [f64; 2]| -> [Vec3; 2] {
        [
            fd4_first(|d| map(shift(x, 0, d)), h[0]),
            fd4_first(|d| map(shift(x, 1, d)), h[1]),
        ]
    };
    let normal_at = |x: [f64; 2]| -> Vec3 {
        let t = tangent_at(x);
        let c = t[0].cross(&t[1]);
        sign * c / c.norm()
    };
    let tangent = tangent_at(x);
    let mut hessian = [[Vec3::zeros(); 2]; 2];
    for (i, row) in hessian.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = fd4_first(|d| tangent_at(shift(x, j, d))[i], h[j]);
        }
    }
    ChartPoint {
        sigma: map(x),
        tangent,
        hessian,
        normal: normal_at(x),
        normal_deriv: [
            fd4_first(|d| normal_at(shift(x, 0, d)), h[0]),
            fd4_first(|d| normal_at(shift(x, 1, d)), h[1]),
        ],
    }
}

/// Surface data at a point in the form the operator assembly consumes.
#[derive(Clone, Copy, Debug)]
pub struct TubeFrame {
    pub g: Mat2,
    pub g_inv: Mat2,
    /// Symmetrized `[⟨σ_i, L σ_j⟩]`.
    pub b: Mat2,
    /// `tr L`.
    pub trace: f64,
    /// `det L`.
    pub det: f64,
    /// `tr L²`.
    pub trace_sq: f64,
}

impl TubeFrame {
    /// `C(y) = −2yB + y² B G_Σ⁻¹ B`.
    pub fn correction(&self, y: f64) -> Mat2 {
        -2.0 * y * self.b + y * y * self.b * self.g_inv * self.b
    }

    /// Tangential block of the extended metric `G_Σ + η C`.
    pub fn extended_metric(&self, y: f64, eta: f64) -> Mat2 {
        self.g + eta * self.correction(y)
    }

    pub fn extended_metric_inverse(&self, y: f64, eta: f64) -> Mat2 {
        inverse2(&self.extended_metric(y, eta))
    }

    /// `P(y) = det(G_Σ + ηC)/det G_Σ = 1 + η a + η² b` and its first two
    /// `y`-derivatives, with `a = y² tr L² − 2y tr L` and
    /// `b = y² det L (y² det L − 2y tr L + 4)`.
    pub fn density_ratio_jet(&self, y: f64, eta: [f64; 3]) -> [f64; 3] {
        let (t, s, q) = (self.trace, self.det, self.trace_sq);
        let a = [y * y * q - 2.0 * y * t, 2.0 * y * q - 2.0 * t, 2.0 * q];
        let y2 = y * y;
        let b = [
            s * s * y2 * y2 - 2.0 * s * t * y2 * y + 4.0 * s * y2,
            4.0 * s * s * y2 * y - 6.0 * s * t * y2 + 8.0 * s * y,
            12.0 * s * s * y2 - 12.0 * s * t * y + 8.0 * s,
        ];
        let [e, e1, e2] = eta;
        let p = 1.0 + e * a[0] + e * e * b[0];
        let p1 = e1 * a[0] + e * a[1] + 2.0 * e * e1 * b[0] + e * e * b[1];
        let p2 = e2 * a[0]
            + 2.0 * e1 * a[1]
            + e * a[2]
            + 2.0 * e1 * e1 * b[0]
            + 2.0 * e * e2 * b[0]
            + 4.0 * e * e1 * b[1]
            + e * e * b[2];
        [p, p1, p2]
    }

    /// `k(y) = −¼ log P(y)` with its first two derivatives, i.e. the
    /// unscaled log density factor `k_λ(x, y) = k(y/λ)`.
    pub fn log_density_jet(&self, y: f64, eta: [f64; 3]) -> [f64; 3] {
        let [p, p1, p2] = self.density_ratio_jet(y, eta);
        [
            -0.25 * p.ln(),
            -0.25 * p1 / p,
            -0.25 * (p2 * p - p1 * p1) / (p * p),
        ]
    }
}

/// Outcome of a log–log order fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrderFit {
    Slope(f64),
    IdenticallyZero,
}

impl OrderFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            OrderFit::Slope(s) => Some(*s),
            OrderFit::IdenticallyZero => None,
        }
    }

    /// True when the fitted slope is within `tol` of `claimed`. An
    /// identically vanishing remainder satisfies any order.
    pub fn certifies(&self, claimed: f64, tol: f64) -> bool {
        match self {
            OrderFit::Slope(s) => (s - claimed).abs() <= tol,
            OrderFit::IdenticallyZero => true,
        }
    }
}

/// Ladder length used by [`expansion_order_fit`].
pub const LADDER_STEPS: usize = 7;

/// Least-squares slope of `log|f(y_k)|` against `log y_k` on
/// `y_k = y₀ 2^{-k}`, `k = 0..6`.
pub fn expansion_order_fit<F: Fn(f64) -> f64>(sampler: F, y0: f64) -> OrderFit {
    let samples: Vec<(f64, f64)> = (0..LADDER_STEPS)
        .map(|k| {
            let y = y0 * 0.5f64.powi(k as i32);
            (y, sampler(y))
        })
        .collect();
    if samples.iter().all(|(_, v)| v.abs() < 1e-14) {
        return OrderFit::IdenticallyZero;
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, v)| v.abs() > 0.0)
        .map(|(y, v)| (y.ln(), v.abs().ln()))
        .collect();
    OrderFit::Slope(crate::fit::least_squares(&pts).slope)
}
