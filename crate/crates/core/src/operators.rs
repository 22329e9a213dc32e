//! Hermitian discretizations of the tube Hamiltonians.
//!
//! Every operator is the Riesz representative of a sesquilinear form in
//! the node-weighted inner product of its [`Space`]: the tangential part
//! `Σ ω (D+A)ψ̄ · M (D+A)φ` uses exactly antisymmetric Fourier matrices,
//! the normal part is a sum over links between neighbouring `y` nodes with
//! Dirichlet walls, and scalar terms are diagonal. With `D = i∂` this
//! gives
//!
//! ```text
//! (Hψ)_n = ω_n⁻¹ Σ_j (i∂_j + A_j)[ω M_jl (i∂_l + A_l) ψ]_n
//!        + c/Δ² ω_n⁻¹ Σ_links ω_link (ψ_n − e^{∓iθ} ψ_neighbour)
//!        + S_n ψ_n.
//! ```

use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::cutoff::SmoothStep;
use crate::error::{Error, Result};
use crate::fields::{
    gauge_transform, hypothesis_audit, AuditGrid, AuditReport, Gauge, PotentialSet,
};
use crate::geometry::{Mat2, SurfaceChart, TubeFrame};
use crate::grid::{surface_axes, weighted_norm, DiffMatrix, GridSpec, Space, WaveFunction, C64};
use crate::krylov::{lowest_eigenpairs, EigenOptions, LinearOperator};

/// Largest oscillator ground-state mass allowed in the outer tenth of the
/// normal domain.
pub const TAIL_MASS_LIMIT: f64 = 1e-8;

/// Order of the normal difference stencil; tangential derivatives are
/// spectral.
pub const Y_STENCIL_ORDER: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    LLambda,
    L0,
    HSigma,
    HO,
    HUnscaled,
    BPlus,
}

impl OperatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            OperatorKind::LLambda => "L_lambda",
            OperatorKind::L0 => "L0",
            OperatorKind::HSigma => "H_Sigma",
            OperatorKind::HO => "H_O",
            OperatorKind::HUnscaled => "H_unscaled",
            OperatorKind::BPlus => "B_plus",
        }
    }
}

/// Tangential coefficients, either per node or shared by all `y` slices.
#[derive(Clone, Debug)]
struct XKinetic {
    /// `(M₁₁, M₁₂, M₂₂)`.
    minv: Vec<[f64; 3]>,
    a: Vec<[f64; 2]>,
    per_slice: bool,
}

#[derive(Clone, Debug)]
struct YKinetic {
    scale: f64,
    /// Link weights `ω_{k+½}` for `k = −1..ny−1`, slice-major; `None` when
    /// the node weight does not depend on `y`.
    links: Option<Vec<f64>>,
    /// `e^{−iθ_k}` on interior links `k → k+1`.
    phases: Option<Vec<C64>>,
}

/// Immutable Hermitian action on a [`Space`].
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub kind: OperatorKind,
    pub lambda: f64,
    space: Arc<Space>,
    d1: Arc<DiffMatrix>,
    d2: Arc<DiffMatrix>,
    x_part: Option<XKinetic>,
    y_part: Option<YKinetic>,
    potential: Option<Vec<f64>>,
    sandwich: Option<Vec<f64>>,
    shift: f64,
}

impl LinearOperator for DiscreteOperator {
    fn weights(&self) -> &[f64] {
        &self.space.weights
    }

    fn apply(&self, input: &[C64], out: &mut [C64]) {
        let nx = self.space.slice_len();
        let staged: Option<Vec<C64>> = self.sandwich.as_ref().map(|eta| {
            input
                .iter()
                .enumerate()
                .map(|(idx, v)| v * eta[idx / nx])
                .collect()
        });
        let src: &[C64] = staged.as_deref().unwrap_or(input);
        out.par_chunks_mut(nx)
            .enumerate()
            .for_each(|(k, slab)| self.apply_slab(src, k, slab));
        if let Some(eta) = &self.sandwich {
            for (idx, v) in out.iter_mut().enumerate() {
                *v *= eta[idx / nx];
            }
        }
        if self.shift != 0.0 {
            for (o, v) in out.iter_mut().zip(input) {
                *o += v * self.shift;
            }
        }
    }
}

impl DiscreteOperator {
    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.len()
    }

    pub fn apply_to(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        if !self.space.same_shape(&psi.space) {
            return Err(Error::Shape(format!(
                "{} acts on {}x{}x{}, state lives on {}x{}x{}",
                self.kind.label(),
                self.space.n1,
                self.space.n2,
                self.space.ny,
                psi.space.n1,
                psi.space.n2,
                psi.space.ny
            )));
        }
        let mut out = WaveFunction::zeros(self.space.clone());
        self.apply(&psi.data, &mut out.data);
        Ok(out)
    }

    /// The scalar multiplication part `S`, if any.
    pub fn scalar_part(&self) -> Option<&[f64]> {
        self.potential.as_deref()
    }

    fn apply_slab(&self, src: &[C64], k: usize, out: &mut [C64]) {
        let sp = &self.space;
        let nx = sp.slice_len();
        let base = k * nx;
        let psi = &src[base..base + nx];
        let w = &sp.weights[base..base + nx];
        match &self.x_part {
            Some(xk) => self.tangential(xk, psi, w, if xk.per_slice { 0 } else { base }, out),
            None => out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0)),
        }
        if let Some(yk) = &self.y_part {
            let inv = yk.scale / (sp.dy * sp.dy);
            let below = (k > 0).then(|| &src[base - nx..base]);
            let above = (k + 1 < sp.ny).then(|| &src[base + nx..base + 2 * nx]);
            match &yk.links {
                None => {
                    for i in 0..nx {
                        let mut acc = psi[i] * 2.0;
                        if let Some(a) = above {
                            acc -= match &yk.phases {
                                Some(ph) => ph[base + i] * a[i],
                                None => a[i],
                            };
                        }
                        if let Some(b) = below {
                            acc -= match &yk.phases {
                                Some(ph) => ph[base - nx + i].conj() * b[i],
                                None => b[i],
                            };
                        }
                        out[i] += acc * inv;
                    }
                }
                Some(links) => {
                    let lo = &links[base..base + nx];
                    let hi = &links[base + nx..base + 2 * nx];
                    for i in 0..nx {
                        let mut acc = psi[i] * (lo[i] + hi[i]);
                        if let Some(a) = above {
                            let t = match &yk.phases {
                                Some(ph) => ph[base + i] * a[i],
                                None => a[i],
                            };
                            acc -= t * hi[i];
                        }
                        if let Some(b) = below {
                            let t = match &yk.phases {
                                Some(ph) => ph[base - nx + i].conj() * b[i],
                                None => b[i],
                            };
                            acc -= t * lo[i];
                        }
                        out[i] += acc * (inv / w[i]);
                    }
                }
            }
        }
        if let Some(pot) = &self.potential {
            for i in 0..nx {
                out[i] += psi[i] * pot[base + i];
            }
        }
    }

    fn tangential(
        &self,
        xk: &XKinetic,
        psi: &[C64],
        w: &[f64],
        coeff_base: usize,
        out: &mut [C64],
    ) {
        let sp = &self.space;
        let (n1, n2) = (sp.n1, sp.n2);
        let nx = n1 * n2;
        let zero = C64::new(0.0, 0.0);
        let nyq = self.d1.nyquist() != 0.0 || self.d2.nyquist() != 0.0;
        let mut u1 = vec![zero; nx];
        let mut u2 = vec![zero; nx];
        let mut q1 = vec![zero; if nyq { nx } else { 0 }];
        let mut q2 = vec![zero; if nyq { nx } else { 0 }];
        self.d1.apply_rows(psi, n2, &mut u1);
        self.d2.apply_cols(psi, n1, &mut u2);
        if nyq {
            self.d1.nyquist_rows(psi, n2, &mut q1);
            self.d2.nyquist_cols(psi, n1, &mut q2);
        }
        let i_unit = C64::new(0.0, 1.0);
        for idx in 0..nx {
            let [m11, m12, m22] = xk.minv[coeff_base + idx];
            let [a1, a2] = xk.a[coeff_base + idx];
            let mut p1 = i_unit * u1[idx] + psi[idx] * a1;
            let mut p2 = i_unit * u2[idx] + psi[idx] * a2;
            if nyq {
                p1 += q1[idx];
                p2 += q2[idx];
            }
            u1[idx] = (p1 * m11 + p2 * m12) * w[idx];
            u2[idx] = (p1 * m12 + p2 * m22) * w[idx];
        }
        let mut v1 = vec![zero; nx];
        let mut v2 = vec![zero; nx];
        self.d1.apply_rows(&u1, n2, &mut v1);
        self.d2.apply_cols(&u2, n1, &mut v2);
        if nyq {
            self.d1.nyquist_rows(&u1, n2, &mut q1);
            self.d2.nyquist_cols(&u2, n1, &mut q2);
        }
        for idx in 0..nx {
            let [a1, a2] = xk.a[coeff_base + idx];
            let mut r = i_unit * (v1[idx] + v2[idx]) + u1[idx] * a1 + u2[idx] * a2;
            if nyq {
                r += q1[idx] + q2[idx];
            }
            out[idx] = r / w[idx];
        }
    }

    /// Matrix of the action in the node basis, as `(row, col, value)` with
    /// exact zeros dropped. A unit vector in slab `k` only reaches slabs
    /// `k − 1 ..= k + 1`, so each column costs three slab applications.
    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let n = self.dim();
        let nx = self.space.slice_len();
        let ny = self.space.ny;
        let zero = C64::new(0.0, 0.0);
        let mut e = vec![zero; n];
        let mut slab = vec![zero; nx];
        let mut out = Vec::new();
        let eta = |k: usize| self.sandwich.as_ref().map_or(1.0, |s| s[k]);
        for j in 0..n {
            let k = j / nx;
            e[j] = C64::new(eta(k), 0.0);
            for kk in k.saturating_sub(1)..(k + 2).min(ny) {
                self.apply_slab(&e, kk, &mut slab);
                for (i, v) in slab.iter().enumerate() {
                    let row = kk * nx + i;
                    let mut v = v * eta(kk);
                    if row == j {
                        v += self.shift;
                    }
                    if v != zero {
                        out.push((row, j, v));
                    }
                }
            }
            e[j] = zero;
        }
        out
    }

    /// Sparse dump: header `rows cols nnz`, then `i j re im`, 0-based.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        let t = self.triplets();
        writeln!(w, "{} {} {}", self.dim(), self.dim(), t.len())?;
        for (i, j, v) in t {
            writeln!(w, "{i} {j} {:e} {:e}", v.re, v.im)?;
        }
        Ok(())
    }
}

/// Per-node surface quantities shared by the assemblies.
#[derive(Clone, Debug)]
pub struct SurfaceData {
    pub x: Vec<[f64; 2]>,
    pub frames: Vec<TubeFrame>,
    pub sqrt_g: Vec<f64>,
    pub curvature: Vec<f64>,
}

pub fn surface_data(chart: &SurfaceChart, spec: &GridSpec) -> Result<SurfaceData> {
    let (x1, x2) = surface_axes(spec, chart.periods());
    let mut x = Vec::with_capacity(spec.n1 * spec.n2);
    for a in &x1 {
        for b in &x2 {
            x.push([*a, *b]);
        }
    }
    let frames = x
        .iter()
        .map(|p| chart.frame(*p))
        .collect::<Result<Vec<_>>>()?;
    let sqrt_g = frames.iter().map(|f| f.g.determinant().sqrt()).collect();
    let curvature = x
        .iter()
        .map(|p| chart.curvature_potential(*p))
        .collect::<Result<Vec<_>>>()?;
    Ok(SurfaceData {
        x,
        frames,
        sqrt_g,
        curvature,
    })
}

fn require_global(chart: &SurfaceChart) -> Result<()> {
    if chart.is_global() {
        Ok(())
    } else {
        Err(Error::Parameter(
            "operator assembly needs a single global doubly periodic chart".into(),
        ))
    }
}

fn diff_pair(chart: &SurfaceChart, spec: &GridSpec) -> (Arc<DiffMatrix>, Arc<DiffMatrix>) {
    let p = chart.periods();
    (
        Arc::new(DiffMatrix::fourier(spec.n1, p[0])),
        Arc::new(DiffMatrix::fourier(spec.n2, p[1])),
    )
}

fn pack(m: &Mat2) -> [f64; 3] {
    [m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]]
}

fn eta_jet(chart: &SurfaceChart, y: f64) -> [f64; 3] {
    chart
        .extension_cutoff()
        .map_or([1.0, 0.0, 0.0], |c| c.jet(y))
}

/// Scaled space: nodes `y_k`, weights `√g_Σ(x) Δ₁Δ₂Δ_y`.
pub fn scaled_space(chart: &SurfaceChart, spec: &GridSpec, surf: &SurfaceData) -> Arc<Space> {
    let [d1, d2, dy] = spec.spacing(chart.periods());
    let (x1, x2) = surface_axes(spec, chart.periods());
    let y = spec.y_nodes();
    let cell = d1 * d2 * dy;
    let mut weights = Vec::with_capacity(spec.len());
    for _ in 0..spec.ny {
        weights.extend(surf.sqrt_g.iter().map(|s| s * cell));
    }
    Arc::new(Space {
        n1: spec.n1,
        n2: spec.n2,
        ny: spec.ny,
        x1,
        x2,
        y,
        dy,
        weights,
    })
}

/// Unscaled space: nodes `y′_k = y_k/λ`, weights `√g(x, y′) Δ₁Δ₂Δ_y/λ`.
pub fn unscaled_space(
    chart: &SurfaceChart,
    spec: &GridSpec,
    surf: &SurfaceData,
) -> Result<Arc<Space>> {
    let [d1, d2, dy] = spec.spacing(chart.periods());
    let (x1, x2) = surface_axes(spec, chart.periods());
    let lambda = spec.lambda;
    let y: Vec<f64> = spec.y_nodes().iter().map(|v| v / lambda).collect();
    let cell = d1 * d2 * dy / lambda;
    let mut weights = Vec::with_capacity(spec.len());
    for &yp in &y {
        let eta = eta_jet(chart, yp);
        for (f, s) in surf.frames.iter().zip(&surf.sqrt_g) {
            let p = f.density_ratio_jet(yp, eta)[0];
            if !(p > 0.0) {
                return Err(Error::OutOfTube {
                    y: yp,
                    reach: chart.reach_bound(),
                });
            }
            weights.push(s * p.sqrt() * cell);
        }
    }
    Ok(Arc::new(Space {
        n1: spec.n1,
        n2: spec.n2,
        ny: spec.ny,
        x1,
        x2,
        y,
        dy: dy / lambda,
        weights,
    }))
}

/// Surface grid (`ny = 1`, `y = 0`) with weights `√g_Σ Δ₁Δ₂`.
pub fn surface_space(chart: &SurfaceChart, spec: &GridSpec, surf: &SurfaceData) -> Arc<Space> {
    let [d1, d2, _] = spec.spacing(chart.periods());
    let (x1, x2) = surface_axes(spec, chart.periods());
    Arc::new(Space {
        n1: spec.n1,
        n2: spec.n2,
        ny: 1,
        x1,
        x2,
        y: vec![0.0],
        dy: 1.0,
        weights: surf.sqrt_g.iter().map(|s| s * d1 * d2).collect(),
    })
}

/// Normal line (`n₁ = n₂ = 1`) with weights `Δ_y`.
pub fn normal_space(spec: &GridSpec) -> Arc<Space> {
    let dy = 2.0 * spec.y_half / (spec.ny + 1) as f64;
    Arc::new(Space {
        n1: 1,
        n2: 1,
        ny: spec.ny,
        x1: vec![0.0],
        x2: vec![0.0],
        y: spec.y_nodes(),
        dy,
        weights: vec![dy; spec.ny],
    })
}

/// `−∂²_y + U(y)` on a normal line.
pub fn line_operator(space: Arc<Space>, potential: Vec<f64>, lambda: f64) -> DiscreteOperator {
    let one = Arc::new(DiffMatrix::fourier(1, 1.0));
    DiscreteOperator {
        kind: OperatorKind::HO,
        lambda,
        space,
        d1: one.clone(),
        d2: one,
        x_part: None,
        y_part: Some(YKinetic {
            scale: 1.0,
            links: None,
            phases: None,
        }),
        potential: Some(potential),
        sandwich: None,
        shift: 0.0,
    }
}

/// Multiplication by a real function on `space`.
pub fn multiplication_operator(
    space: Arc<Space>,
    values: Vec<f64>,
    kind: OperatorKind,
    lambda: f64,
) -> DiscreteOperator {
    let one = Arc::new(DiffMatrix::fourier(1, 1.0));
    DiscreteOperator {
        kind,
        lambda,
        space,
        d1: one.clone(),
        d2: one,
        x_part: None,
        y_part: None,
        potential: Some(values),
        sandwich: None,
        shift: 0.0,
    }
}

/// Ground state of the λ-free limit oscillator `−∂² + ½ w̄ y²`, with `w̄`
/// the surface average of `∂²_y W(x, 0)`, on the normal line of `spec`.
pub fn limit_ground_state(
    pots: &PotentialSet,
    chart: &SurfaceChart,
    spec: &GridSpec,
) -> Result<WaveFunction> {
    let taylor = crate::fields::normal_taylor(pots, chart, [spec.n1, spec.n2])?;
    let surf = surface_data(chart, spec)?;
    let mean_w = surf.x.iter().map(|x| taylor.at(*x).w).sum::<f64>() / surf.x.len() as f64;
    let line = normal_space(spec);
    let pot = line.y.iter().map(|y| 0.5 * mean_w * y * y).collect();
    let op = line_operator(line.clone(), pot, 1.0);
    line_ground_state(&op)
}

fn line_ground_state(op: &DiscreteOperator) -> Result<WaveFunction> {
    let pair = lowest_eigenpairs(op, 1, &EigenOptions::default())?.remove(0);
    let mut chi = WaveFunction {
        space: op.space.clone(),
        data: pair.vector,
    };
    // Fix the global phase so that the state is real and positive at its peak.
    let peak = chi
        .data
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(C64::new(1.0, 0.0));
    let phase = peak.conj() / peak.norm();
    chi.data.iter_mut().for_each(|v| *v *= phase);
    chi.normalize();
    Ok(chi)
}

/// Fraction of `‖χ‖²` carried by nodes within `Y/10` of the walls.
pub fn wall_tail_mass(chi: &WaveFunction) -> f64 {
    let sp = &chi.space;
    let y_half = sp.y.last().map_or(0.0, |v| v + sp.dy);
    let total: f64 = chi.norm().powi(2);
    let tail: f64 =
        sp.y.iter()
            .zip(&chi.data)
            .zip(&sp.weights)
            .filter(|((y, _), _)| y.abs() > 0.9 * y_half)
            .map(|((_, v), w)| w * v.norm_sqr())
            .sum();
    tail / total
}

/// Confinement audit on the sampling a grid will touch.
pub fn grid_audit(pots: &PotentialSet, chart: &SurfaceChart, spec: &GridSpec) -> AuditReport {
    hypothesis_audit(
        pots,
        chart,
        &AuditGrid {
            nodes: [spec.n1, spec.n2],
            ny: spec.ny,
            y_max: spec.y_half / spec.lambda,
        },
    )
}

/// `Err(Hypothesis)` naming the first violated hypothesis.
pub fn audit_verdict(report: &AuditReport) -> Result<()> {
    match report.violations().first() {
        None => Ok(()),
        Some(which) => Err(Error::Hypothesis {
            which,
            detail: format!(
                "confinement audit failed (kappa = {:.3e}, min w = {:.3e}, dxW order = {:?})",
                report.kappa, report.min_w, report.dxw_order
            ),
        }),
    }
}

fn audit_gate(pots: &PotentialSet, chart: &SurfaceChart, spec: &GridSpec) -> Result<()> {
    audit_verdict(&grid_audit(pots, chart, spec))
}

/// The effective operators `H_Σ`, `H_O` (at the reference node `x = 0`)
/// and `L₀ = H_Σ ⊗ 1 + λ² 1 ⊗ H_O` on the full grid.
#[derive(Clone, Debug)]
pub struct EffectiveParts {
    pub h_sigma: DiscreteOperator,
    pub h_o: DiscreteOperator,
    pub l0: DiscreteOperator,
    /// `λ² H_O(x)` fibrewise on the full grid, without the surface part.
    pub normal_full: DiscreteOperator,
    /// `H_Σ ⊗ 1` on the full grid.
    pub surface_full: DiscreteOperator,
    /// Whether `W` is identical at every surface node (exact Kronecker sum).
    pub separable: bool,
}

pub fn assemble_l0(
    chart: &SurfaceChart,
    pots: &PotentialSet,
    spec: &GridSpec,
) -> Result<EffectiveParts> {
    spec.validate()?;
    require_global(chart)?;
    audit_gate(pots, chart, spec)?;
    let chi = limit_ground_state(pots, chart, spec)?;
    let tail = wall_tail_mass(&chi);
    if tail > TAIL_MASS_LIMIT {
        return Err(Error::DomainTooSmall {
            tail,
            limit: TAIL_MASS_LIMIT,
        });
    }
    let lambda = spec.lambda;
    let surf = surface_data(chart, spec)?;
    let (d1, d2) = diff_pair(chart, spec);
    let nx = spec.n1 * spec.n2;
    let minv: Vec<[f64; 3]> = surf.frames.iter().map(|f| pack(&f.g_inv)).collect();
    let a: Vec<[f64; 2]> = surf.x.iter().map(|x| pots.tangential(*x, 0.0)).collect();
    let surface_pot: Vec<f64> = surf
        .x
        .iter()
        .zip(&surf.curvature)
        .map(|(x, k)| pots.v.value(*x, 0.0) + k)
        .collect();
    let x_part = XKinetic {
        minv,
        a,
        per_slice: true,
    };

    let h_sigma = DiscreteOperator {
        kind: OperatorKind::HSigma,
        lambda,
        space: surface_space(chart, spec, &surf),
        d1: d1.clone(),
        d2: d2.clone(),
        x_part: Some(x_part.clone()),
        y_part: None,
        potential: Some(surface_pot.clone()),
        sandwich: None,
        shift: 0.0,
    };

    let y = spec.y_nodes();
    let confining = |x: [f64; 2], yk: f64| lambda * lambda * pots.w.value(x, yk / lambda);
    let line = normal_space(spec);
    let h_o = line_operator(
        line,
        y.iter().map(|&yk| confining([0.0, 0.0], yk)).collect(),
        lambda,
    );

    let mut separable = true;
    let mut full_w = Vec::with_capacity(spec.len());
    for &yk in &y {
        let reference = confining(surf.x[0], yk);
        for x in &surf.x {
            let v = confining(*x, yk);
            separable &= v == reference;
            full_w.push(lambda * lambda * v);
        }
    }
    let l0_pot: Vec<f64> = (0..spec.len())
        .map(|idx| surface_pot[idx % nx] + full_w[idx])
        .collect();
    let space = scaled_space(chart, spec, &surf);
    let y_part = YKinetic {
        scale: lambda * lambda,
        links: None,
        phases: None,
    };
    let l0 = DiscreteOperator {
        kind: OperatorKind::L0,
        lambda,
        space: space.clone(),
        d1: d1.clone(),
        d2: d2.clone(),
        x_part: Some(x_part.clone()),
        y_part: Some(y_part.clone()),
        potential: Some(l0_pot),
        sandwich: None,
        shift: 0.0,
    };
    let normal_full = DiscreteOperator {
        kind: OperatorKind::HO,
        lambda,
        space: space.clone(),
        d1: d1.clone(),
        d2: d2.clone(),
        x_part: None,
        y_part: Some(y_part),
        potential: Some(full_w),
        sandwich: None,
        shift: 0.0,
    };
    let surface_full = DiscreteOperator {
        kind: OperatorKind::HSigma,
        lambda,
        space,
        d1,
        d2,
        x_part: Some(x_part),
        y_part: None,
        potential: Some((0..spec.len()).map(|idx| surface_pot[idx % nx]).collect()),
        sandwich: None,
        shift: 0.0,
    };
    Ok(EffectiveParts {
        h_sigma,
        h_o,
        l0,
        normal_full,
        surface_full,
        separable,
    })
}

/// Gauge used by the assemblies: quadrature panels no wider than the
/// unscaled normal spacing.
pub fn grid_gauge(pots: &PotentialSet, spec: &GridSpec) -> Gauge {
    let dy = 2.0 * spec.y_half / (spec.ny + 1) as f64;
    gauge_transform(pots, dy / spec.lambda)
}

/// Scaled, gauged and density-conjugated tube Hamiltonian `L_λ`.
pub fn assemble_l_lambda(
    chart: &SurfaceChart,
    pots: &PotentialSet,
    spec: &GridSpec,
) -> Result<DiscreteOperator> {
    spec.validate()?;
    require_global(chart)?;
    audit_gate(pots, chart, spec)?;
    let lambda = spec.lambda;
    let surf = surface_data(chart, spec)?;
    let (d1, d2) = diff_pair(chart, spec);
    let gauge = grid_gauge(pots, spec);
    let (n1, n2) = (spec.n1, spec.n2);
    let nx = n1 * n2;
    let y = spec.y_nodes();
    let mut minv = Vec::with_capacity(spec.len());
    let mut a = Vec::with_capacity(spec.len());
    let mut potential = Vec::with_capacity(spec.len());
    for &yk in &y {
        let yp = yk / lambda;
        let eta = eta_jet(chart, yp);
        let mut k_slice = Vec::with_capacity(nx);
        let mut y_scalar = Vec::with_capacity(nx);
        let mut m_slice = Vec::with_capacity(nx);
        for f in &surf.frames {
            let g = f.extended_metric(yp, eta[0]);
            if !(g.determinant() > 0.0 && g[(0, 0)] > 0.0) {
                return Err(Error::OutOfTube {
                    y: yp,
                    reach: chart.reach_bound(),
                });
            }
            let m = pack(&f.extended_metric_inverse(yp, eta[0]));
            let [k, k1, k2] = f.log_density_jet(yp, eta);
            k_slice.push(k);
            y_scalar.push(k1 * k1 - k2);
            m_slice.push(m);
        }
        let dk1 = d1.derivative_real(&k_slice, 0, n1, n2);
        let dk2 = d2.derivative_real(&k_slice, 1, n1, n2);
        let mut q1 = Vec::with_capacity(nx);
        let mut q2 = Vec::with_capacity(nx);
        let mut quad = Vec::with_capacity(nx);
        for i in 0..nx {
            let [m11, m12, m22] = m_slice[i];
            let f1 = m11 * dk1[i] + m12 * dk2[i];
            let f2 = m12 * dk1[i] + m22 * dk2[i];
            quad.push(dk1[i] * f1 + dk2[i] * f2);
            q1.push(surf.sqrt_g[i] * f1);
            q2.push(surf.sqrt_g[i] * f2);
        }
        let div1 = d1.derivative_real(&q1, 0, n1, n2);
        let div2 = d2.derivative_real(&q2, 1, n1, n2);
        for i in 0..nx {
            let x = surf.x[i];
            let divergence = -(div1[i] + div2[i]) / surf.sqrt_g[i];
            let confining = lambda * lambda * (lambda * lambda * pots.w.value(x, yp));
            potential.push(pots.v.value(x, yp) + quad[i] + divergence + y_scalar[i] + confining);
            minv.push(m_slice[i]);
            a.push(gauge.tangential(x, yp)?);
        }
    }
    Ok(DiscreteOperator {
        kind: OperatorKind::LLambda,
        lambda,
        space: scaled_space(chart, spec, &surf),
        d1,
        d2,
        x_part: Some(XKinetic {
            minv,
            a,
            per_slice: false,
        }),
        y_part: Some(YKinetic {
            scale: lambda * lambda,
            links: None,
            phases: None,
        }),
        potential: Some(potential),
        sandwich: None,
        shift: 0.0,
    })
}

/// Tube Hamiltonian `H_λ` in unscaled coordinates `(x, y′)`, `|y′| < Y/λ`,
/// Hermitian in the `√g(x, y′)` weights; the normal component of `A`
/// enters through Peierls phases on the `y` links.
pub fn assemble_h_unscaled(
    chart: &SurfaceChart,
    pots: &PotentialSet,
    spec: &GridSpec,
) -> Result<DiscreteOperator> {
    spec.validate()?;
    require_global(chart)?;
    let lambda = spec.lambda;
    let surf = surface_data(chart, spec)?;
    let space = unscaled_space(chart, spec, &surf)?;
    let (d1, d2) = diff_pair(chart, spec);
    let gauge = grid_gauge(pots, spec);
    let nx = spec.n1 * spec.n2;
    let ny = spec.ny;
    let [c1, c2, _] = spec.spacing(chart.periods());
    let cell = c1 * c2 * space.dy;
    let mut minv = Vec::with_capacity(spec.len());
    let mut a = Vec::with_capacity(spec.len());
    let mut potential = Vec::with_capacity(spec.len());
    for &yp in &space.y {
        let eta = eta_jet(chart, yp);
        for (f, x) in surf.frames.iter().zip(&surf.x) {
            let g = f.extended_metric(yp, eta[0]);
            if !(g.determinant() > 0.0 && g[(0, 0)] > 0.0) {
                return Err(Error::OutOfTube {
                    y: yp,
                    reach: chart.reach_bound(),
                });
            }
            minv.push(pack(&f.extended_metric_inverse(yp, eta[0])));
            a.push(pots.tangential(*x, yp));
            potential.push(pots.v.value(*x, yp) + lambda.powi(4) * pots.w.value(*x, yp));
        }
    }
    let mut links = Vec::with_capacity((ny + 1) * nx);
    for h in 0..=ny {
        let yh = space.y[0] + (h as f64 - 0.5) * space.dy;
        let eta = eta_jet(chart, yh);
        for (f, s) in surf.frames.iter().zip(&surf.sqrt_g) {
            let p = f.density_ratio_jet(yh, eta)[0];
            links.push(s * p.max(0.0).sqrt() * cell);
        }
    }
    let mut gamma = Vec::with_capacity(spec.len());
    for &yp in &space.y {
        for x in &surf.x {
            gamma.push(gauge.gamma(*x, yp)?);
        }
    }
    let phases: Vec<C64> = (0..(ny - 1) * nx)
        .map(|idx| C64::from_polar(1.0, -(gamma[idx + nx] - gamma[idx])))
        .collect();
    let trivial = phases.iter().all(|p| *p == C64::new(1.0, 0.0));
    Ok(DiscreteOperator {
        kind: OperatorKind::HUnscaled,
        lambda,
        space,
        d1,
        d2,
        x_part: Some(XKinetic {
            minv,
            a,
            per_slice: false,
        }),
        y_part: Some(YKinetic {
            scale: 1.0,
            links: Some(links),
            phases: (!trivial).then_some(phases),
        }),
        potential: Some(potential),
        sandwich: None,
        shift: 0.0,
    })
}

/// Node-wise factor of `S_γ U_λ`: `e^{iγ(x, y/λ)} √λ P(x, y/λ)^{-1/4}`.
pub fn transform_factors(chart: &SurfaceChart, gauge: &Gauge, spec: &GridSpec) -> Result<Vec<C64>> {
    let surf = surface_data(chart, spec)?;
    let lambda = spec.lambda;
    let mut out = Vec::with_capacity(spec.len());
    for yk in spec.y_nodes() {
        let yp = yk / lambda;
        let eta = eta_jet(chart, yp);
        for (f, x) in surf.frames.iter().zip(&surf.x) {
            let p = f.density_ratio_jet(yp, eta)[0];
            let gamma = gauge.gamma(*x, yp)?;
            out.push(C64::from_polar(lambda.sqrt() * p.powf(-0.25), gamma));
        }
    }
    Ok(out)
}

fn check_matched(scaled: &Space, unscaled: &Space, lambda: f64) -> Result<()> {
    let aligned = scaled.same_shape(unscaled)
        && scaled
            .y
            .iter()
            .zip(&unscaled.y)
            .all(|(a, b)| (a / lambda - b).abs() <= 1e-12 * (1.0 + a.abs()));
    if aligned {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "scaled grid {}x{}x{} is not index-matched with unscaled grid {}x{}x{} at lambda = {lambda}",
            scaled.n1, scaled.n2, scaled.ny, unscaled.n1, unscaled.n2, unscaled.ny
        )))
    }
}

/// `S_γ U_λ ψ` on the unscaled space.
pub fn apply_transforms(
    psi: &WaveFunction,
    chart: &SurfaceChart,
    gauge: &Gauge,
    spec: &GridSpec,
    unscaled: &Arc<Space>,
) -> Result<WaveFunction> {
    check_matched(&psi.space, unscaled, spec.lambda)?;
    let factors = transform_factors(chart, gauge, spec)?;
    Ok(WaveFunction {
        space: unscaled.clone(),
        data: psi.data.iter().zip(&factors).map(|(v, f)| v * f).collect(),
    })
}

/// `(S_γ U_λ)⁻¹ φ` on the scaled space.
pub fn invert_transforms(
    phi: &WaveFunction,
    chart: &SurfaceChart,
    gauge: &Gauge,
    spec: &GridSpec,
    scaled: &Arc<Space>,
) -> Result<WaveFunction> {
    check_matched(scaled, &phi.space, spec.lambda)?;
    let factors = transform_factors(chart, gauge, spec)?;
    Ok(WaveFunction {
        space: scaled.clone(),
        data: phi.data.iter().zip(&factors).map(|(v, f)| v / f).collect(),
    })
}

/// `Q_λ ψ = L_λ ψ − L₀ ψ`.
pub fn remainder_q(
    l_lambda: &DiscreteOperator,
    l0: &DiscreteOperator,
    psi: &WaveFunction,
) -> Result<WaveFunction> {
    if !l_lambda.space.same_shape(&l0.space) {
        return Err(Error::Shape(
            "L_lambda and L0 live on different grids".into(),
        ));
    }
    let mut out = l_lambda.apply_to(psi)?;
    let base = l0.apply_to(psi)?;
    for (o, b) in out.data.iter_mut().zip(&base.data) {
        *o -= b;
    }
    Ok(out)
}

/// Cutoff `η₁` of the tangential kinetic diagnostic: one for
/// `|y| ≤ 0.8 Y`, zero for `|y| ≥ 0.95 Y`.
pub fn b_plus_cutoff(spec: &GridSpec) -> SmoothStep {
    SmoothStep::new(0.8 * spec.y_half, 0.95 * spec.y_half)
}

/// `B₊ = η₁ D_x* G_Σ⁻¹ D_x η₁ + 1` on the scaled space.
pub fn assemble_b_plus(
    chart: &SurfaceChart,
    spec: &GridSpec,
    cutoff: SmoothStep,
) -> Result<DiscreteOperator> {
    spec.validate()?;
    require_global(chart)?;
    let surf = surface_data(chart, spec)?;
    let (d1, d2) = diff_pair(chart, spec);
    let nx = spec.n1 * spec.n2;
    Ok(DiscreteOperator {
        kind: OperatorKind::BPlus,
        lambda: spec.lambda,
        space: scaled_space(chart, spec, &surf),
        d1,
        d2,
        x_part: Some(XKinetic {
            minv: surf.frames.iter().map(|f| pack(&f.g_inv)).collect(),
            a: vec![[0.0, 0.0]; nx],
            per_slice: true,
        }),
        y_part: None,
        potential: None,
        sandwich: Some(spec.y_nodes().iter().map(|y| cutoff.value(*y)).collect()),
        shift: 1.0,
    })
}

/// `‖φ‖` in the weights of `space` for raw data.
pub fn norm_on(space: &Space, data: &[C64]) -> f64 {
    weighted_norm(&space.weights, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{field, Library};
    use crate::krylov::{hermiticity_defect, seeded_vector};

    fn small() -> GridSpec {
        GridSpec {
            n1: 8,
            n2: 8,
            ny: 24,
            y_half: 8.0,
            lambda: 4.0,
        }
    }

    fn magnetic() -> PotentialSet {
        PotentialSet::new(
            [
                field(Library::SinX2(0.3)),
                field(Library::Zero),
                field(Library::Constant(0.5)),
            ],
            field(Library::CosX1(0.2)),
            field(Library::Y2),
        )
    }

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn every_operator_is_hermitian() {
        let chart = SurfaceChart::torus(2.0, 1.0).unwrap();
        let pots = magnetic();
        let spec = small();
        let parts = assemble_l0(&chart, &pots, &spec).unwrap();
        let ops = [
            parts.h_sigma,
            parts.h_o,
            parts.l0,
            assemble_l_lambda(&chart, &pots, &spec).unwrap(),
            assemble_h_unscaled(&chart, &pots, &spec).unwrap(),
            assemble_b_plus(&chart, &spec, b_plus_cutoff(&spec)).unwrap(),
        ];
        for op in &ops {
            let d = hermiticity_defect(op, 20, 11);
            assert!(d < 1e-11, "{}: {d:e}", op.kind.label());
        }
    }

    #[test]
    fn flat_chart_collapse() {
        let chart = SurfaceChart::flat().unwrap();
        let pots = magnetic();
        let spec = small();
        let parts = assemble_l0(&chart, &pots, &spec).unwrap();
        let ll = assemble_l_lambda(&chart, &pots, &spec).unwrap();
        let hu = assemble_h_unscaled(&chart, &pots, &spec).unwrap();
        let gauge = grid_gauge(&pots, &spec);
        let psi = WaveFunction {
            space: parts.l0.space().clone(),
            data: seeded_vector(spec.len(), 5),
        };
        let a = parts.l0.apply_to(&psi).unwrap();
        let b = ll.apply_to(&psi).unwrap();
        let up = apply_transforms(&psi, &chart, &gauge, &spec, hu.space()).unwrap();
        let c = invert_transforms(
            &hu.apply_to(&up).unwrap(),
            &chart,
            &gauge,
            &spec,
            parts.l0.space(),
        )
        .unwrap();
        let scale = a.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert_eq!(parts.l0.scalar_part(), ll.scalar_part());
        assert!(max_diff(&a.data, &b.data) <= 1e-12 * scale);
        assert!(max_diff(&a.data, &c.data) <= 1e-12 * scale);
        let q = remainder_q(&ll, &parts.l0, &psi).unwrap();
        assert!(q.data.iter().all(|v| v.norm() <= 1e-13 * scale));
    }

    #[test]
    fn l0_is_gauge_invariant_entrywise() {
        let chart = SurfaceChart::torus(2.0, 1.0).unwrap();
        let spec = small();
        let p1 = magnetic();
        let p2 = p1.with_normal_component(field(Library::Constant(5.5)));
        let p3 = p1.with_normal_component(Arc::new(crate::fields::FnField::new("a3", |x, y| {
            x[0].sin() * y + 0.2 * y * y
        })));
        let a = assemble_l0(&chart, &p1, &spec).unwrap();
        let psi = seeded_vector(spec.len(), 9);
        let mut ra = vec![C64::new(0.0, 0.0); psi.len()];
        a.l0.apply(&psi, &mut ra);
        for p in [p2, p3] {
            let b = assemble_l0(&chart, &p, &spec).unwrap();
            let mut rb = vec![C64::new(0.0, 0.0); psi.len()];
            b.l0.apply(&psi, &mut rb);
            assert_eq!(ra, rb);
            assert_eq!(a.h_sigma.triplets(), b.h_sigma.triplets());
        }
    }

    #[test]
    fn kronecker_structure_for_separable_confinement() {
        let chart = SurfaceChart::torus(2.0, 1.0).unwrap();
        let pots = magnetic();
        let spec = small();
        let parts = assemble_l0(&chart, &pots, &spec).unwrap();
        assert!(parts.separable);
        let sx = parts.h_sigma.space().clone();
        let sy = parts.h_o.space().clone();
        let phi = WaveFunction::from_fn(sx, |x, _| {
            C64::new((x[0].cos() + x[1].sin()).exp(), x[1].cos())
        });
        let chi = WaveFunction::from_fn(sy, |_, y| {
            C64::new((-0.5 * y * y).exp() * (1.0 + 0.1 * y), 0.0)
        });
        let psi = WaveFunction::tensor(parts.l0.space().clone(), &phi, &chi).unwrap();
        let full = parts.l0.apply_to(&psi).unwrap();
        let hphi = parts.h_sigma.apply_to(&phi).unwrap();
        let hchi = parts.h_o.apply_to(&chi).unwrap();
        let a = WaveFunction::tensor(parts.l0.space().clone(), &hphi, &chi).unwrap();
        let b = WaveFunction::tensor(parts.l0.space().clone(), &phi, &hchi).unwrap();
        let l2 = spec.lambda * spec.lambda;
        let scale = full.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = full
            .data
            .iter()
            .zip(a.data.iter().zip(&b.data))
            .map(|(f, (x, y))| (f - x - y * l2).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-12 * scale, "{err:e}");
    }

    #[test]
    fn oscillator_levels_converge_at_second_order() {
        let chart = SurfaceChart::flat().unwrap();
        let pots = PotentialSet::harmonic();
        let levels = |ny: usize| -> Vec<f64> {
            let spec = GridSpec { ny, ..small() };
            let parts = assemble_l0(&chart, &pots, &spec).unwrap();
            lowest_eigenpairs(&parts.h_o, 3, &EigenOptions::default())
                .unwrap()
                .iter()
                .map(|p| p.value)
                .collect()
        };
        let coarse = levels(96);
        let fine = levels(192);
        for (i, exact) in [1.0, 3.0, 5.0].iter().enumerate() {
            let ratio = (coarse[i] - exact) / (fine[i] - exact);
            assert!((3.5..=4.5).contains(&ratio), "level {i}: ratio {ratio}");
        }
    }

    #[test]
    fn plane_waves_under_b_plus() {
        let chart = SurfaceChart::flat().unwrap();
        let spec = small();
        let b = assemble_b_plus(&chart, &spec, b_plus_cutoff(&spec)).unwrap();
        for k in [[0.0, 0.0], [1.0, 0.0], [2.0, -3.0]] {
            let psi = WaveFunction::from_fn(b.space().clone(), |x, y| {
                C64::from_polar((-y * y).exp(), k[0] * x[0] + k[1] * x[1])
            });
            let val = b.expectation(&psi.data).re / psi.norm().powi(2);
            let expect = 1.0 + k[0] * k[0] + k[1] * k[1];
            assert!((val - expect).abs() < 1e-10 * expect, "{k:?}: {val}");
        }
    }

    #[test]
    fn unscaled_oscillator_and_positivity() {
        let chart = SurfaceChart::flat().unwrap();
        let pots = PotentialSet::harmonic();
        let spec = GridSpec {
            n1: 4,
            n2: 4,
            ny: 160,
            y_half: 8.0,
            lambda: 3.0,
        };
        let hu = assemble_h_unscaled(&chart, &pots, &spec).unwrap();
        let ground = lowest_eigenpairs(&hu, 1, &EigenOptions::default()).unwrap()[0].value;
        assert!((ground / 9.0 - 1.0).abs() < 2e-3, "{ground}");
        let torus = SurfaceChart::torus(2.0, 1.0).unwrap();
        let hu = assemble_h_unscaled(
            &torus,
            &magnetic().with_normal_component(field(Library::Zero)),
            &small(),
        )
        .unwrap();
        for seed in 0..5 {
            let v = seeded_vector(hu.dim(), seed);
            let _ = hu.expectation(&v);
        }
        let pos = assemble_h_unscaled(&torus, &PotentialSet::harmonic(), &small()).unwrap();
        for seed in 0..5 {
            let v = seeded_vector(pos.dim(), seed);
            assert!(pos.expectation(&v).re >= 0.0);
        }
    }

    #[test]
    fn transforms_are_isometries() {
        let chart = SurfaceChart::torus(2.0, 1.0).unwrap();
        let pots = magnetic();
        for lambda in [1.0, 4.0, 16.0] {
            let spec = GridSpec { lambda, ..small() };
            let surf = surface_data(&chart, &spec).unwrap();
            let scaled = scaled_space(&chart, &spec, &surf);
            let unscaled = unscaled_space(&chart, &spec, &surf).unwrap();
            let psi = WaveFunction {
                space: scaled,
                data: seeded_vector(spec.len(), 2),
            };
            let gauge = grid_gauge(&pots, &spec);
            let up = apply_transforms(&psi, &chart, &gauge, &spec, &unscaled).unwrap();
            assert!((up.norm() - psi.norm()).abs() <= 1e-12 * psi.norm());
        }
        let flat = SurfaceChart::flat().unwrap();
        let spec = GridSpec {
            lambda: 1.0,
            ..small()
        };
        let surf = surface_data(&flat, &spec).unwrap();
        let psi = WaveFunction {
            space: scaled_space(&flat, &spec, &surf),
            data: seeded_vector(spec.len(), 4),
        };
        let gauge = grid_gauge(&PotentialSet::harmonic(), &spec);
        let up = apply_transforms(
            &psi,
            &flat,
            &gauge,
            &spec,
            &unscaled_space(&flat, &spec, &surf).unwrap(),
        )
        .unwrap();
        assert_eq!(up.data, psi.data);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let chart = SurfaceChart::torus(2.0, 1.0).unwrap();
        let spec = small();
        let other = GridSpec { ny: 26, ..spec };
        let surf = surface_data(&chart, &spec).unwrap();
        let surf2 = surface_data(&chart, &other).unwrap();
        let psi = WaveFunction::zeros(scaled_space(&chart, &spec, &surf));
        let gauge = grid_gauge(&PotentialSet::harmonic(), &spec);
        let target = unscaled_space(&chart, &other, &surf2).unwrap();
        assert!(matches!(
            apply_transforms(&psi, &chart, &gauge, &spec, &target),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn narrow_domain_and_failed_audit_are_refused() {
        let chart = SurfaceChart::torus(2.0, 1.0).unwrap();
        let spec = GridSpec {
            y_half: 2.0,
            ..small()
        };
        assert!(matches!(
            assemble_l0(&chart, &PotentialSet::harmonic(), &spec),
            Err(Error::DomainTooSmall { .. })
        ));
        let quartic = PotentialSet::harmonic().with_normal_component(field(Library::Zero));
        let quartic = PotentialSet::new(quartic.a.clone(), quartic.v.clone(), field(Library::Y4));
        assert!(matches!(
            assemble_l0(&chart, &quartic, &small()),
            Err(Error::Hypothesis { which: "ii", .. })
        ));
        let sphere = SurfaceChart::sphere(1.0).unwrap();
        assert!(assemble_l_lambda(&sphere, &PotentialSet::harmonic(), &small()).is_err());
    }

    #[test]
    fn triplet_dump_format() {
        let chart = SurfaceChart::flat().unwrap();
        let spec = GridSpec {
            n1: 2,
            n2: 2,
            ny: 3,
            y_half: 8.0,
            lambda: 1.0,
        };
        let parts = assemble_l0(
            &chart,
            &PotentialSet::harmonic(),
            &GridSpec { ny: 30, ..spec },
        )
        .unwrap();
        let mut buf = Vec::new();
        parts.h_sigma.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header: Vec<usize> = lines
            .next()
            .unwrap()
            .split(' ')
            .map(|t| t.parse().unwrap())
            .collect();
        assert_eq!(header[0], 4);
        assert_eq!(header[2], lines.count());
    }

    #[test]
    fn triplets_match_columnwise_application() {
        let chart = SurfaceChart::torus(2.0, 1.0).unwrap();
        let spec = GridSpec {
            n1: 4,
            n2: 6,
            ny: 8,
            y_half: 8.0,
            lambda: 4.0,
        };
        let ll = assemble_l_lambda(&chart, &magnetic(), &spec).unwrap();
        let bp = assemble_b_plus(&chart, &spec, b_plus_cutoff(&spec)).unwrap();
        for op in [&ll, &bp] {
            let n = op.dim();
            let mut dense = vec![C64::new(0.0, 0.0); n * n];
            for (i, j, v) in op.triplets() {
                dense[i * n + j] = v;
            }
            let mut e = vec![C64::new(0.0, 0.0); n];
            let mut col = vec![C64::new(0.0, 0.0); n];
            for j in 0..n {
                e[j] = C64::new(1.0, 0.0);
                op.apply(&e, &mut col);
                e[j] = C64::new(0.0, 0.0);
                for i in 0..n {
                    assert!(
                        (col[i] - dense[i * n + j]).norm() <= 1e-12 * (1.0 + col[i].norm()),
                        "{i} {j}"
                    );
                }
            }
        }
    }
}
