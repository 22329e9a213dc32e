//! Magnetic, electric and confining potentials in tube coordinates.
//!
//! Every potential is a real function of `(x, y)` where `y` is the unscaled
//! normal coordinate. The magnetic potential is a covector with components
//! `(A₁, A₂, A₃)` in the `(dx₁, dx₂, dy)` basis.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{expansion_order_fit, OrderFit, SurfaceChart};

/// A real function on the tube.
pub trait ScalarField: Send + Sync + fmt::Debug {
    fn value(&self, x: [f64; 2], y: f64) -> f64;

    /// `(∂_{x₁} f, ∂_{x₂} f)`; fourth-order differences unless overridden.
    fn grad_x(&self, x: [f64; 2], y: f64) -> [f64; 2] {
        let h = 1e-4;
        let d = |axis: usize| {
            let at = |s: f64| {
                let mut p = x;
                p[axis] += s;
                self.value(p, y)
            };
            (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
        };
        [d(0), d(1)]
    }

    /// `∂_y^n f(x, 0)` for `n = 0..=4`, when known in closed form.
    fn normal_jet(&self, _x: [f64; 2]) -> Option<[f64; 5]> {
        None
    }
}

/// Built-in closed-form fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Library {
    Zero,
    Constant(f64),
    /// `a sin x₂`
    SinX2(f64),
    /// `v₀ cos x₁`
    CosX1(f64),
    /// `y²`
    Y2,
    /// `y² + y⁴`
    Y2PlusY4,
    /// `y² + amp · y⁶ (1 + ½ cos x₁)`
    Y2PlusSextic(f64),
    /// `y⁴` (degenerate normal Hessian)
    Y4,
    /// `y² + sin(x₁) y³` (tangential derivative only cubic in `y`)
    Y2PlusSinY3,
}

impl ScalarField for Library {
    fn value(&self, x: [f64; 2], y: f64) -> f64 {
        let y2 = y * y;
        match *self {
            Library::Zero => 0.0,
            Library::Constant(c) => c,
            Library::SinX2(a) => a * x[1].sin(),
            Library::CosX1(v) => v * x[0].cos(),
            Library::Y2 => y2,
            Library::Y2PlusY4 => y2 + y2 * y2,
            Library::Y2PlusSextic(amp) => y2 + amp * y2 * y2 * y2 * (1.0 + 0.5 * x[0].cos()),
            Library::Y4 => y2 * y2,
            Library::Y2PlusSinY3 => y2 + x[0].sin() * y2 * y,
        }
    }

    fn grad_x(&self, x: [f64; 2], y: f64) -> [f64; 2] {
        let y2 = y * y;
        match *self {
            Library::SinX2(a) => [0.0, a * x[1].cos()],
            Library::CosX1(v) => [-v * x[0].sin(), 0.0],
            Library::Y2PlusSextic(amp) => [-0.5 * amp * y2 * y2 * y2 * x[0].sin(), 0.0],
            Library::Y2PlusSinY3 => [x[0].cos() * y2 * y, 0.0],
            _ => [0.0, 0.0],
        }
    }

    fn normal_jet(&self, x: [f64; 2]) -> Option<[f64; 5]> {
        let v0 = self.value(x, 0.0);
        Some(match *self {
            Library::Zero | Library::Constant(_) | Library::SinX2(_) | Library::CosX1(_) => {
                [v0, 0.0, 0.0, 0.0, 0.0]
            }
            Library::Y2 | Library::Y2PlusSextic(_) => [0.0, 0.0, 2.0, 0.0, 0.0],
            Library::Y2PlusY4 => [0.0, 0.0, 2.0, 0.0, 24.0],
            Library::Y4 => [0.0, 0.0, 0.0, 0.0, 24.0],
            Library::Y2PlusSinY3 => [0.0, 0.0, 2.0, 6.0 * x[0].sin(), 0.0],
        })
    }
}

type FieldFn = dyn Fn([f64; 2], f64) -> f64 + Send + Sync;

/// User-defined field from a closure; derivatives by differencing.
#[derive(Clone)]
pub struct FnField {
    label: String,
    f: Arc<FieldFn>,
}

impl FnField {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn([f64; 2], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnField({})", self.label)
    }
}

impl ScalarField for FnField {
    fn value(&self, x: [f64; 2], y: f64) -> f64 {
        (self.f)(x, y)
    }
}

pub type Field = Arc<dyn ScalarField>;

pub fn field(lib: Library) -> Field {
    Arc::new(lib)
}

/// Magnetic, electric and confining potentials.
#[derive(Clone, Debug)]
pub struct PotentialSet {
    pub a: [Field; 3],
    pub v: Field,
    pub w: Field,
}

impl PotentialSet {
    pub fn new(a: [Field; 3], v: Field, w: Field) -> Self {
        Self { a, v, w }
    }

    /// `A = 0`, `V = 0`, `W = y²`.
    pub fn harmonic() -> Self {
        Self::new(
            [
                field(Library::Zero),
                field(Library::Zero),
                field(Library::Zero),
            ],
            field(Library::Zero),
            field(Library::Y2),
        )
    }

    /// Same set with `A₃` replaced.
    pub fn with_normal_component(&self, a3: Field) -> Self {
        let mut out = self.clone();
        out.a[2] = a3;
        out
    }

    pub fn tangential(&self, x: [f64; 2], y: f64) -> [f64; 2] {
        [self.a[0].value(x, y), self.a[1].value(x, y)]
    }
}

/// Composite Simpson's rule on `[0, upper]` with `panels` (even) panels.
fn simpson<F: Fn(f64) -> f64>(f: &F, upper: f64, panels: usize) -> f64 {
    let h = upper / panels as f64;
    let mut acc = f(0.0) + f(upper);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

/// `∫₀^upper f` by composite Simpson, doubling the panel count until the
/// Richardson estimate `|S₂ₙ − Sₙ|/15` drops below `10⁻¹⁰ (1 + |S₂ₙ|)`.
pub fn integrate_from_zero<F: Fn(f64) -> f64>(f: F, upper: f64, panel_width: f64) -> Result<f64> {
    if upper == 0.0 {
        return Ok(0.0);
    }
    let mut panels = ((upper.abs() / panel_width).ceil() as usize).max(2);
    panels += panels % 2;
    let mut coarse = simpson(&f, upper, panels);
    let mut estimate = f64::INFINITY;
    for _ in 0..16 {
        panels *= 2;
        let fine = simpson(&f, upper, panels);
        estimate = (fine - coarse).abs() / 15.0;
        if estimate <= 1e-10 * (1.0 + fine.abs()) {
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(Error::Integration {
        estimate,
        tolerance: 1e-10 * (1.0 + coarse.abs()),
    })
}

/// Gauge function `γ(x, y) = ∫₀^y A₃(x, s) ds` and the gauged tangential
/// potential `A_H′ = A_H − ∫₀^y ∂_x A₃ ds`.
#[derive(Clone, Debug)]
pub struct Gauge {
    pots: PotentialSet,
    panel_width: f64,
}

/// Build the gauge for `pots`; quadrature panels are no wider than
/// `panel_width` (the normal grid spacing).
pub fn gauge_transform(pots: &PotentialSet, panel_width: f64) -> Gauge {
    Gauge {
        pots: pots.clone(),
        panel_width,
    }
}

impl Gauge {
    pub fn gamma(&self, x: [f64; 2], y: f64) -> Result<f64> {
        let a3 = &self.pots.a[2];
        integrate_from_zero(|s| a3.value(x, s), y, self.panel_width)
    }

    pub fn tangential(&self, x: [f64; 2], y: f64) -> Result<[f64; 2]> {
        let a3 = &self.pots.a[2];
        let base = self.pots.tangential(x, y);
        let mut out = [0.0; 2];
        for (j, slot) in out.iter_mut().enumerate() {
            let drift = integrate_from_zero(|s| a3.grad_x(x, s)[j], y, self.panel_width)?;
            *slot = base[j] - drift;
        }
        Ok(out)
    }

    /// Normal component of `A − ∂γ`, with `∂_y γ` from a fourth-order
    /// difference of the quadrature.
    pub fn residual_normal_component(&self, x: [f64; 2], y: f64, step: f64) -> Result<f64> {
        let g = |s: f64| self.gamma(x, y + s);
        let dgamma =
            (-g(2.0 * step)? + 8.0 * g(step)? - 8.0 * g(-step)? + g(-2.0 * step)?) / (12.0 * step);
        Ok(self.pots.a[2].value(x, y) - dgamma)
    }

    pub fn potentials(&self) -> &PotentialSet {
        &self.pots
    }
}

/// Fornberg finite-difference weights for derivatives `0..=max_order` at
/// `0` on the nodes `offsets`.
fn fornberg(offsets: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = offsets.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// `∂_y^n f(x, 0)` for `n = 0..=4` by sixth-order centered differences.
pub fn normal_jet_by_differences(f: &dyn ScalarField, x: [f64; 2], step: f64) -> [f64; 5] {
    let mut out = [f.value(x, 0.0), 0.0, 0.0, 0.0, 0.0];
    for (order, slot) in out.iter_mut().enumerate().skip(1) {
        let half = if order <= 2 { 3 } else { 4 };
        let offsets: Vec<f64> = (-half..=half).map(|k| k as f64).collect();
        let w = &fornberg(&offsets, order)[order];
        let acc: f64 = offsets
            .iter()
            .zip(w)
            .map(|(o, wk)| wk * f.value(x, o * step))
            .sum();
        *slot = acc / step.powi(order as i32);
    }
    out
}

/// Normal Taylor data of `W` at one surface point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaylorCoefficients {
    /// `∂_y²W(x, 0)`.
    pub w: f64,
    /// `∂_y³W(x, 0) / 6`.
    pub f1: f64,
    /// `∂_y⁴W(x, 0) / 24`.
    pub f2: f64,
}

impl TaylorCoefficients {
    /// `F_λ(x, y) = λ⁻¹ f₁ y³ + λ⁻² f₂ y⁴`.
    pub fn f_lambda(&self, y: f64, lambda: f64) -> f64 {
        let y3 = y * y * y;
        self.f1 * y3 / lambda + self.f2 * y3 * y / (lambda * lambda)
    }

    /// `½ w y² + F_λ`.
    pub fn model(&self, y: f64, lambda: f64) -> f64 {
        0.5 * self.w * y * y + self.f_lambda(y, lambda)
    }
}

/// Normal Taylor data of the confining potential.
#[derive(Clone, Debug)]
pub struct NormalTaylor {
    w: Field,
    step: f64,
}

impl NormalTaylor {
    pub fn at(&self, x: [f64; 2]) -> TaylorCoefficients {
        let jet = self
            .w
            .normal_jet(x)
            .unwrap_or_else(|| normal_jet_by_differences(self.w.as_ref(), x, self.step));
        TaylorCoefficients {
            w: jet[2],
            f1: jet[3] / 6.0,
            f2: jet[4] / 24.0,
        }
    }
}

/// Extract `(w, f₁, f₂)` from `W`; fails when `w ≤ 0` at any of the
/// `nodes[0] × nodes[1]` surface sample points.
pub fn normal_taylor(
    pots: &PotentialSet,
    chart: &SurfaceChart,
    nodes: [usize; 2],
) -> Result<NormalTaylor> {
    let nt = NormalTaylor {
        w: pots.w.clone(),
        step: 1e-3 * chart.reach_bound().min(1.0),
    };
    for x in surface_nodes(chart, nodes) {
        let c = nt.at(x);
        if !(c.w > 0.0) {
            return Err(Error::Hypothesis {
                which: "ii",
                detail: format!(
                    "normal Hessian w = {} at x = ({:.4}, {:.4})",
                    c.w, x[0], x[1]
                ),
            });
        }
    }
    Ok(nt)
}

pub(crate) fn surface_nodes(chart: &SurfaceChart, nodes: [usize; 2]) -> Vec<[f64; 2]> {
    let p = chart.periods();
    let mut out = Vec::with_capacity(nodes[0] * nodes[1]);
    for i in 0..nodes[0] {
        for j in 0..nodes[1] {
            out.push([
                p[0] * i as f64 / nodes[0] as f64,
                p[1] * j as f64 / nodes[1] as f64,
            ]);
        }
    }
    out
}

/// Sampling used by [`hypothesis_audit`].
#[derive(Clone, Copy, Debug)]
pub struct AuditGrid {
    pub nodes: [usize; 2],
    /// Number of normal samples on `(−y_max, y_max)`.
    pub ny: usize,
    /// Largest unscaled `|y|` the computation will touch.
    pub y_max: f64,
}

/// Checks of the confinement hypotheses on a grid. Failures are report
/// entries, not errors.
#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    /// Largest `κ` with `W ≥ κ y²` on the grid.
    pub kappa: f64,
    pub max_w_at_surface: f64,
    pub max_dyw_at_surface: f64,
    pub min_w: f64,
    /// Fitted `y`-order of `max_x |∂_x W|`; `None` when it vanishes.
    pub dxw_order: Option<f64>,
    pub quadratic_bound: bool,
    pub surface_minimum: bool,
    pub tangential_flatness: bool,
}

impl AuditReport {
    pub fn pass(&self) -> bool {
        self.quadratic_bound && self.surface_minimum && self.tangential_flatness
    }

    /// Roman numerals of the violated hypotheses.
    pub fn violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.quadratic_bound {
            out.push("i");
        }
        if !self.surface_minimum {
            out.push("ii");
        }
        if !self.tangential_flatness {
            out.push("iii");
        }
        out
    }

    /// `{kappa, min_w, dxW_order, pass}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kappa": self.kappa,
            "min_w": self.min_w,
            "dxW_order": self.dxw_order,
            "pass": self.pass(),
        })
    }
}

/// Minimum fitted order of `max_x |∂_x W(x, y)|` in `y`.
pub const TANGENTIAL_ORDER_THRESHOLD: f64 = 4.5;

pub fn hypothesis_audit(
    pots: &PotentialSet,
    chart: &SurfaceChart,
    grid: &AuditGrid,
) -> AuditReport {
    let xs = surface_nodes(chart, grid.nodes);
    let w = &pots.w;
    let nt = NormalTaylor {
        w: w.clone(),
        step: 1e-3 * chart.reach_bound().min(1.0),
    };

    let mut kappa = f64::INFINITY;
    let dy = 2.0 * grid.y_max / (grid.ny + 1) as f64;
    for x in &xs {
        for k in 0..grid.ny {
            let y = -grid.y_max + (k + 1) as f64 * dy;
            if y.abs() < 1e-300 {
                continue;
            }
            kappa = kappa.min(w.value(*x, y) / (y * y));
        }
    }

    let mut max_w0: f64 = 0.0;
    let mut max_dw0: f64 = 0.0;
    let mut min_w = f64::INFINITY;
    for x in &xs {
        let jet = w
            .normal_jet(*x)
            .unwrap_or_else(|| normal_jet_by_differences(w.as_ref(), *x, nt.step));
        max_w0 = max_w0.max(jet[0].abs());
        max_dw0 = max_dw0.max(jet[1].abs());
        min_w = min_w.min(jet[2]);
    }

    let y0 = grid.y_max.min(0.5 * chart.reach_bound());
    let fit = expansion_order_fit(
        |y| {
            xs.iter()
                .flat_map(|x| {
                    let p = w.grad_x(*x, y);
                    let m = w.grad_x(*x, -y);
                    [p[0].abs(), p[1].abs(), m[0].abs(), m[1].abs()]
                })
                .fold(0.0, f64::max)
        },
        y0,
    );
    let dxw_order = fit.slope();
    AuditReport {
        kappa,
        max_w_at_surface: max_w0,
        max_dyw_at_surface: max_dw0,
        min_w,
        dxw_order,
        quadratic_bound: kappa > 0.0,
        surface_minimum: max_w0 <= 1e-10 && max_dw0 <= 1e-10 && min_w > 0.0,
        tangential_flatness: match fit {
            OrderFit::IdenticallyZero => true,
            OrderFit::Slope(s) => s >= TANGENTIAL_ORDER_THRESHOLD,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus() -> SurfaceChart {
        SurfaceChart::torus(2.0, 1.0).unwrap()
    }

    fn audit_grid() -> AuditGrid {
        AuditGrid {
            nodes: [12, 12],
            ny: 40,
            y_max: 0.5,
        }
    }

    fn with_w(w: Field) -> PotentialSet {
        let mut p = PotentialSet::harmonic();
        p.w = w;
        p
    }

    #[test]
    fn constant_normal_component_gauges_linearly() {
        let pots = PotentialSet::harmonic().with_normal_component(field(Library::Constant(0.7)));
        let g = gauge_transform(&pots, 0.05);
        for y in [-0.4, 0.0, 0.13, 0.5] {
            assert!((g.gamma([1.0, 2.0], y).unwrap() - 0.7 * y).abs() < 1e-14);
            assert_eq!(g.tangential([1.0, 2.0], y).unwrap(), [0.0, 0.0]);
        }
    }

    #[test]
    fn zero_potential_has_zero_gauge() {
        let g = gauge_transform(&PotentialSet::harmonic(), 0.1);
        assert_eq!(g.gamma([0.3, 0.3], 0.4).unwrap(), 0.0);
        assert_eq!(g.tangential([0.3, 0.3], 0.4).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn linear_normal_component_matches_closed_form() {
        // A₃ = c(x) y with c = cos x₁ + 0.5 sin x₂, A_H = (sin x₂, 0)
        let a3 = FnField::new("c(x) y", |x, y| (x[0].cos() + 0.5 * x[1].sin()) * y);
        let pots = PotentialSet::new(
            [
                field(Library::SinX2(1.0)),
                field(Library::Zero),
                Arc::new(a3),
            ],
            field(Library::Zero),
            field(Library::Y2),
        );
        let g = gauge_transform(&pots, 0.02);
        for &(x, y) in &[
            ([0.4f64, 1.1f64], 0.3),
            ([2.0, 5.0], -0.45),
            ([1.0, 0.0], 0.0),
        ] {
            let c = x[0].cos() + 0.5 * x[1].sin();
            let dc = [-x[0].sin(), 0.5 * x[1].cos()];
            assert!((g.gamma(x, y).unwrap() - c * y * y / 2.0).abs() <= 1e-10);
            let t = g.tangential(x, y).unwrap();
            assert!((t[0] - (x[1].sin() - dc[0] * y * y / 2.0)).abs() <= 1e-10);
            assert!((t[1] - (-dc[1] * y * y / 2.0)).abs() <= 1e-10);
            assert!(g.residual_normal_component(x, y, 1e-3).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn taylor_coefficients_of_library() {
        let chart = torus();
        let cases = [
            (Library::Y2, [2.0, 0.0, 0.0]),
            (Library::Y2PlusY4, [2.0, 0.0, 1.0]),
            (Library::Y2PlusSextic(0.1), [2.0, 0.0, 0.0]),
        ];
        for (lib, expect) in cases {
            let nt = normal_taylor(&with_w(field(lib)), &chart, [8, 8]).unwrap();
            let c = nt.at([0.7, 0.2]);
            assert_eq!([c.w, c.f1, c.f2], expect, "{lib:?}");
        }
    }

    #[test]
    fn taylor_by_differences() {
        let w = FnField::new("y2+y3sin+y4", |x, y| {
            y * y + x[1].sin() * y.powi(3) + 0.25 * y.powi(4) + 0.3 * y.powi(6)
        });
        let chart = torus();
        let nt = normal_taylor(&with_w(Arc::new(w)), &chart, [6, 6]).unwrap();
        let c = nt.at([0.0, 1.0]);
        assert!((c.w - 2.0).abs() < 1e-8);
        assert!((c.f1 - 1.0f64.sin()).abs() < 1e-6);
        assert!((c.f2 - 0.25).abs() < 1e-3);
    }

    #[test]
    fn degenerate_hessian_is_rejected() {
        let err = normal_taylor(&with_w(field(Library::Y4)), &torus(), [4, 4]).unwrap_err();
        assert!(matches!(err, Error::Hypothesis { which: "ii", .. }));
    }

    #[test]
    fn scaled_quartic_model_is_exact() {
        let nt = normal_taylor(&with_w(field(Library::Y2PlusY4)), &torus(), [4, 4]).unwrap();
        let c = nt.at([0.0, 0.0]);
        for lambda in [2.0, 8.0, 32.0] {
            for y in [-3.0, -0.5, 0.1, 2.0] {
                let w_l = Library::Y2PlusY4.value([0.0, 0.0], y / lambda);
                let diff = lambda * lambda * w_l - c.model(y, lambda);
                assert!(diff.abs() <= 1e-14 * (1.0 + y.powi(4)), "{diff}");
            }
        }
    }

    #[test]
    fn f_lambda_scaling() {
        let c = TaylorCoefficients {
            w: 2.0,
            f1: 0.75,
            f2: 1.25,
        };
        let y = 1.3;
        let cubic = |l: f64| TaylorCoefficients { f2: 0.0, ..c }.f_lambda(y, l);
        let quartic = |l: f64| TaylorCoefficients { f1: 0.0, ..c }.f_lambda(y, l);
        assert_eq!(cubic(8.0), 0.5 * cubic(4.0));
        assert_eq!(quartic(8.0), 0.25 * quartic(4.0));
    }

    #[test]
    fn audit_harmonic_passes() {
        let r = hypothesis_audit(&PotentialSet::harmonic(), &torus(), &audit_grid());
        assert!(r.pass());
        assert!((r.kappa - 1.0).abs() < 1e-14);
        assert_eq!(r.dxw_order, None);
        assert_eq!(r.to_json()["pass"], serde_json::json!(true));
    }

    #[test]
    fn audit_quartic_fails_second_hypothesis() {
        let r = hypothesis_audit(&with_w(field(Library::Y4)), &torus(), &audit_grid());
        assert!(!r.pass());
        assert_eq!(r.violations(), vec!["ii"]);
        assert_eq!(r.min_w, 0.0);
    }

    #[test]
    fn audit_cubic_tangential_fails_third_hypothesis() {
        let r = hypothesis_audit(
            &with_w(field(Library::Y2PlusSinY3)),
            &torus(),
            &audit_grid(),
        );
        assert_eq!(r.violations(), vec!["iii"]);
        assert!((r.dxw_order.unwrap() - 3.0).abs() < 0.05);
    }

    #[test]
    fn audit_sextic_passes() {
        let r = hypothesis_audit(
            &with_w(field(Library::Y2PlusSextic(0.1))),
            &torus(),
            &audit_grid(),
        );
        assert!(r.pass(), "{r:?}");
        assert!((r.dxw_order.unwrap() - 6.0).abs() < 0.05);
    }

    #[test]
    fn fornberg_second_derivative_weights() {
        let w = fornberg(&[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
    }
}
