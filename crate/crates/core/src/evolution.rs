//! Time propagation, the λ-ladder convergence experiment, the
//! factorization check and confinement diagnostics.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::PotentialSet;
use crate::fit::{log_log, LineFit};
use crate::geometry::SurfaceChart;
use crate::grid::{GridSpec, WaveFunction, C64};
use crate::krylov::{KrylovExp, LinearOperator};
use crate::operators::{
    assemble_b_plus, assemble_l0, assemble_l_lambda, b_plus_cutoff, limit_ground_state,
    surface_data, surface_space, DiscreteOperator,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PropagatorConfig {
    pub dt: f64,
    /// Final time; negative values propagate backwards.
    pub t_final: f64,
    pub krylov_dim: usize,
    pub step_tol: f64,
    /// Record every `sample_stride`-th step.
    pub sample_stride: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 200.0,
            t_final: 1.0,
            krylov_dim: 30,
            step_tol: 1e-10,
            sample_stride: 1,
        }
    }
}

impl PropagatorConfig {
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) {
            return Err(Error::Parameter(format!(
                "dt = {} must be positive",
                self.dt
            )));
        }
        if !(self.step_tol > 0.0 && self.step_tol < 1e-6) {
            return Err(Error::Parameter(format!(
                "step_tol = {} outside (0, 1e-6)",
                self.step_tol
            )));
        }
        if self.krylov_dim < 2 || self.sample_stride == 0 {
            return Err(Error::Parameter(
                "krylov_dim >= 2 and sample_stride >= 1 required".into(),
            ));
        }
        let ratio = self.t_final.abs() / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Parameter(format!(
                "T = {} is not an integer multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(n as usize)
    }

    fn integrator(&self) -> KrylovExp {
        KrylovExp {
            krylov_dim: self.krylov_dim,
            step_tol: self.step_tol,
        }
    }

    fn signed_dt(&self) -> f64 {
        self.dt * self.t_final.signum()
    }
}

/// Per-sample record of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub norm: f64,
    pub energy: f64,
    pub leak_mass: Option<f64>,
    pub b: Option<f64>,
    pub confinement: Option<f64>,
}

/// Operators and parameters evaluated at each sample.
#[derive(Clone, Copy, Debug, Default)]
pub struct DiagnosticSet<'a> {
    /// `(ε, λ)` for the leak mass beyond `|y/λ| > ε`.
    pub leak: Option<(f64, f64)>,
    pub b_plus: Option<&'a DiscreteOperator>,
    /// Multiplier `λ² W(x, y/λ)` per node.
    pub confining: Option<&'a [f64]>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// States at the sample times when requested.
    pub states: Vec<WaveFunction>,
    pub matvecs: usize,
}

impl Trajectory {
    pub fn max_norm_drift(&self) -> f64 {
        let n0 = self.samples.first().map_or(1.0, |s| s.norm);
        self.samples
            .iter()
            .map(|s| (s.norm - n0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|E(t) − E(0)| / max(|E(0)|, 1e-300)`.
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.samples.first().map_or(0.0, |s| s.energy);
        self.samples
            .iter()
            .map(|s| (s.energy - e0).abs() / e0.abs().max(1e-300))
            .fold(0.0, f64::max)
    }
}

/// Leak mass `Σ_{|y/λ| > ε} |ψ|² ω`.
pub fn leak_mass(psi: &WaveFunction, lambda: f64, eps: f64) -> Result<f64> {
    let sp = &psi.space;
    let y_half = sp.y.last().map_or(0.0, |v| v + sp.dy);
    if !(eps > 0.0 && eps < y_half / lambda) {
        return Err(Error::Parameter(format!(
            "leak threshold eps = {eps} outside (0, Y/lambda) = (0, {})",
            y_half / lambda
        )));
    }
    let nx = sp.slice_len();
    Ok(psi
        .data
        .iter()
        .zip(&sp.weights)
        .enumerate()
        .filter(|(idx, _)| (sp.y[idx / nx] / lambda).abs() > eps)
        .map(|(_, (v, w))| w * v.norm_sqr())
        .sum())
}

fn multiplier_expectation(psi: &WaveFunction, m: &[f64]) -> f64 {
    psi.data
        .iter()
        .zip(&psi.space.weights)
        .zip(m)
        .map(|((v, w), f)| w * f * v.norm_sqr())
        .sum()
}

fn record(
    op: &DiscreteOperator,
    psi: &WaveFunction,
    t: f64,
    diag: &DiagnosticSet,
) -> Result<Sample> {
    Ok(Sample {
        t,
        norm: psi.norm(),
        energy: op.expectation(&psi.data).re,
        leak_mass: diag
            .leak
            .map(|(eps, l)| leak_mass(psi, l, eps))
            .transpose()?,
        b: diag.b_plus.map(|b| b.expectation(&psi.data).re),
        confinement: diag.confining.map(|m| multiplier_expectation(psi, m)),
    })
}

/// `ψ(t) = exp(−itH)ψ₀` on `t = 0, dt, …, T` with diagnostics at every
/// `sample_stride`-th step (and at `T`).
pub fn propagate(
    op: &DiscreteOperator,
    psi0: &WaveFunction,
    cfg: &PropagatorConfig,
    diag: &DiagnosticSet,
    keep_states: bool,
) -> Result<Trajectory> {
    let n = cfg.steps()?;
    let integrator = cfg.integrator();
    let dt = cfg.signed_dt();
    let mut psi = psi0.clone();
    let mut traj = Trajectory {
        samples: vec![record(op, &psi, 0.0, diag)?],
        states: if keep_states {
            vec![psi.clone()]
        } else {
            Vec::new()
        },
        matvecs: 0,
    };
    for step in 1..=n {
        let t0 = (step - 1) as f64 * dt;
        let stats = integrator.advance(op, &mut psi.data, dt, t0)?;
        traj.matvecs += stats.matvecs;
        if step % cfg.sample_stride == 0 || step == n {
            let t = step as f64 * dt;
            traj.samples.push(record(op, &psi, t, diag)?);
            if keep_states {
                traj.states.push(psi.clone());
            }
        }
    }
    Ok(traj)
}

/// Smooth surface profile of the initial state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Profile {
    /// `exp(cos x₁ + cos x₂)` on `2π`-periodic coordinates, rescaled to
    /// the chart periods.
    VonMises,
}

/// `ψ₀ = φ ⊗ χ₀` with `φ` the normalized profile and `χ₀` the ground state
/// of the λ-free limit oscillator.
pub fn initial_state(
    chart: &SurfaceChart,
    pots: &PotentialSet,
    spec: &GridSpec,
    profile: Profile,
) -> Result<WaveFunction> {
    let surf = surface_data(chart, spec)?;
    let sx = surface_space(chart, spec, &surf);
    let p = chart.periods();
    let tau = 2.0 * std::f64::consts::PI;
    let mut phi = match profile {
        Profile::VonMises => WaveFunction::from_fn(sx, |x, _| {
            C64::new(
                ((tau * x[0] / p[0]).cos() + (tau * x[1] / p[1]).cos()).exp(),
                0.0,
            )
        }),
    };
    phi.normalize();
    let chi = limit_ground_state(pots, chart, spec)?;
    let full = crate::operators::scaled_space(chart, spec, &surf);
    let mut psi = WaveFunction::tensor(full, &phi, &chi)?;
    psi.normalize();
    Ok(psi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub lambda: f64,
    pub sup_diff: f64,
    pub arg_t: f64,
    pub norm_drift: f64,
    pub energy_drift: f64,
    /// At `t = T`; `NaN` when `ε ≥ Y/λ`.
    pub leak_mass: f64,
    pub sup_b: f64,
    pub sup_confine: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub slope: f64,
    pub band: f64,
    pub residual: f64,
    /// Non-fatal findings, such as a non-monotone difference sequence.
    pub flags: Vec<String>,
}

/// Noise floor below which differences are not compared for monotonicity.
pub const DIFF_NOISE_FLOOR: f64 = 1e-10;

impl ConvergenceTable {
    fn from_rows(rows: Vec<ConvergenceRow>) -> Self {
        let mut flags = Vec::new();
        for w in rows.windows(2) {
            if w[1].sup_diff > w[0].sup_diff && w[1].sup_diff > DIFF_NOISE_FLOOR {
                flags.push(format!(
                    "sup_diff increases from lambda = {} to lambda = {}",
                    w[0].lambda, w[1].lambda
                ));
            }
        }
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.sup_diff > 0.0)
            .map(|r| (r.lambda, r.sup_diff))
            .collect();
        let fit = (pts.len() >= 3).then(|| log_log(&pts));
        Self {
            rows,
            slope: fit.map_or(f64::NAN, |f| f.slope),
            band: fit.map_or(f64::NAN, |f| f.band),
            residual: fit.map_or(f64::NAN, |f| f.residual),
            flags,
        }
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].sup_diff < w[0].sup_diff)
    }

    /// Fit of `leak_mass` against `λ` over the rows where it is defined.
    pub fn leak_fit(&self) -> Option<LineFit> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.leak_mass.is_finite() && r.leak_mass > 0.0)
            .map(|r| (r.lambda, r.leak_mass))
            .collect();
        (pts.len() >= 2).then(|| log_log(&pts))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "lambda,sup_diff,arg_t,norm_drift,energy_drift,leak_mass,sup_b,sup_confine\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.12e},{:.6},{:.6e},{:.6e},{:.12e},{:.12e},{:.12e}",
                r.lambda,
                r.sup_diff,
                r.arg_t,
                r.norm_drift,
                r.energy_drift,
                r.leak_mass,
                r.sup_b,
                r.sup_confine
            );
        }
        let _ = writeln!(out, "#slope={:.6},band={:.6}", self.slope, self.band);
        out
    }
}

/// Parameters of [`convergence_experiment`] beyond the geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub propagator: PropagatorConfig,
    pub profile: Profile,
    /// Leak threshold in units of the reach (`ε = leak_fraction · reach`).
    pub leak_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            propagator: PropagatorConfig::default(),
            profile: Profile::VonMises,
            leak_fraction: 0.3,
        }
    }
}

/// One rung of the ladder: lockstep propagation under `L_λ` and `L₀`.
fn ladder_rung(
    chart: &SurfaceChart,
    pots: &PotentialSet,
    cfg: &ExperimentConfig,
    lambda: f64,
) -> Result<ConvergenceRow> {
    let spec = cfg.grid.with_lambda(lambda);
    let ll = assemble_l_lambda(chart, pots, &spec)?;
    let parts = assemble_l0(chart, pots, &spec)?;
    let l0 = &parts.l0;
    let b_plus = assemble_b_plus(chart, &spec, b_plus_cutoff(&spec))?;
    let confining = confining_multiplier(chart, pots, &spec)?;
    let psi0 = initial_state(chart, pots, &spec, cfg.profile)?;
    let eps = cfg.leak_fraction * chart.reach_bound();
    let leak_defined = eps > 0.0 && eps < spec.y_half / lambda;
    let diag = DiagnosticSet {
        leak: leak_defined.then_some((eps, lambda)),
        b_plus: Some(&b_plus),
        confining: Some(&confining),
    };
    let plain = DiagnosticSet::default();
    let pc = &cfg.propagator;
    let n = pc.steps()?;
    let integrator = pc.integrator();
    let dt = pc.signed_dt();
    let mut a = psi0.clone();
    let mut b = psi0.clone();
    let mut rec_a = vec![record(&ll, &a, 0.0, &diag)?];
    let mut rec_b = vec![record(l0, &b, 0.0, &plain)?];
    let mut sup = (a.distance(&b), 0.0);
    for step in 1..=n {
        let t0 = (step - 1) as f64 * dt;
        integrator.advance(&ll, &mut a.data, dt, t0)?;
        integrator.advance(l0, &mut b.data, dt, t0)?;
        if step % pc.sample_stride == 0 || step == n {
            let t = step as f64 * dt;
            rec_a.push(record(&ll, &a, t, &diag)?);
            rec_b.push(record(l0, &b, t, &plain)?);
            let d = a.distance(&b);
            if d > sup.0 {
                sup = (d, t);
            }
        }
    }
    let ta = Trajectory {
        samples: rec_a,
        states: Vec::new(),
        matvecs: 0,
    };
    let tb = Trajectory {
        samples: rec_b,
        states: Vec::new(),
        matvecs: 0,
    };
    let last = ta.samples.last().expect("trajectory has samples");
    Ok(ConvergenceRow {
        lambda,
        sup_diff: sup.0,
        arg_t: sup.1,
        norm_drift: ta.max_norm_drift().max(tb.max_norm_drift()),
        energy_drift: ta.max_energy_drift().max(tb.max_energy_drift()),
        leak_mass: last.leak_mass.unwrap_or(f64::NAN),
        sup_b: ta
            .samples
            .iter()
            .filter_map(|s| s.b)
            .fold(f64::NEG_INFINITY, f64::max),
        sup_confine: ta
            .samples
            .iter()
            .filter_map(|s| s.confinement)
            .fold(f64::NEG_INFINITY, f64::max),
    })
}

/// `λ² W(x, y/λ)` on the scaled grid.
pub fn confining_multiplier(
    chart: &SurfaceChart,
    pots: &PotentialSet,
    spec: &GridSpec,
) -> Result<Vec<f64>> {
    let surf = surface_data(chart, spec)?;
    let l = spec.lambda;
    Ok(spec
        .y_nodes()
        .iter()
        .flat_map(|y| surf.x.iter().map(move |x| (*x, *y)))
        .map(|(x, y)| l * l * pots.w.value(x, y / l))
        .collect())
}

/// Sup-in-time distance between `exp(−itL_λ)ψ₀` and `exp(−itL₀)ψ₀` over
/// the λ ladder, with a log–log slope fit. Rungs run concurrently.
pub fn convergence_experiment(
    chart: &SurfaceChart,
    pots: &PotentialSet,
    lambdas: &[f64],
    cfg: &ExperimentConfig,
) -> Result<ConvergenceTable> {
    if lambdas.is_empty() {
        return Err(Error::Parameter("empty lambda ladder".into()));
    }
    let rows = lambdas
        .par_iter()
        .map(|&l| ladder_rung(chart, pots, cfg, l))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable::from_rows(rows))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FactorizationReport {
    pub lambda: f64,
    pub max_deviation: f64,
    pub arg_t: f64,
    /// `true` when `W` is the same at every surface node; otherwise the
    /// comparison is against the fibrewise product `e^{−itH_Σ}e^{−itλ²H_O(x)}`
    /// and measures the commutator.
    pub separable: bool,
}

/// Max over samples of `‖e^{−itL₀}(φ⊗χ) − (e^{−itH_Σ}φ)⊗(e^{−itλ²H_O}χ)‖`.
pub fn factorization_check(
    chart: &SurfaceChart,
    pots: &PotentialSet,
    spec: &GridSpec,
    phi: &WaveFunction,
    chi: &WaveFunction,
    cfg: &PropagatorConfig,
) -> Result<FactorizationReport> {
    let parts = assemble_l0(chart, pots, spec)?;
    let full_space = parts.l0.space().clone();
    let n = cfg.steps()?;
    let integrator = cfg.integrator();
    let dt = cfg.signed_dt();
    let l2 = spec.lambda * spec.lambda;
    let mut whole = WaveFunction::tensor(full_space.clone(), phi, chi)?;
    let mut worst = (0.0_f64, 0.0);
    if parts.separable {
        let mut p = phi.clone();
        let mut c = chi.clone();
        for step in 1..=n {
            let t0 = (step - 1) as f64 * dt;
            integrator.advance(&parts.l0, &mut whole.data, dt, t0)?;
            integrator.advance(&parts.h_sigma, &mut p.data, dt, t0)?;
            integrator.advance(&parts.h_o, &mut c.data, l2 * dt, l2 * t0)?;
            if step % cfg.sample_stride == 0 || step == n {
                let prod = WaveFunction::tensor(full_space.clone(), &p, &c)?;
                let d = whole.distance(&prod);
                if d > worst.0 {
                    worst = (d, step as f64 * dt);
                }
            }
        }
    } else {
        let mut normal = whole.clone();
        for step in 1..=n {
            let t0 = (step - 1) as f64 * dt;
            integrator.advance(&parts.l0, &mut whole.data, dt, t0)?;
            integrator.advance(&parts.normal_full, &mut normal.data, dt, t0)?;
            if step % cfg.sample_stride == 0 || step == n {
                let t = step as f64 * dt;
                let mut prod = normal.clone();
                integrator.advance(&parts.surface_full, &mut prod.data, t, 0.0)?;
                let d = whole.distance(&prod);
                if d > worst.0 {
                    worst = (d, t);
                }
            }
        }
    }
    Ok(FactorizationReport {
        lambda: spec.lambda,
        max_deviation: worst.0,
        arg_t: worst.1,
        separable: parts.separable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{field, Library};
    use crate::krylov::seeded_vector;
    use crate::operators::{line_operator, multiplication_operator, normal_space, OperatorKind};

    #[test]
    fn config_validation() {
        assert_eq!(PropagatorConfig::default().steps().unwrap(), 200);
        let bad = PropagatorConfig {
            dt: 0.3,
            ..PropagatorConfig::default()
        };
        assert!(bad.steps().is_err());
        let loose = PropagatorConfig {
            step_tol: 1e-3,
            ..PropagatorConfig::default()
        };
        assert!(loose.steps().is_err());
    }

    #[test]
    fn oscillator_ground_state_only_acquires_a_phase() {
        let spec = GridSpec {
            ny: 120,
            ..GridSpec::default()
        };
        let line = normal_space(&spec);
        let op = line_operator(line.clone(), line.y.iter().map(|y| y * y).collect(), 1.0);
        let ground = crate::krylov::lowest_eigenpairs(&op, 1, &Default::default())
            .unwrap()
            .remove(0);
        let psi0 = WaveFunction {
            space: line,
            data: ground.vector,
        };
        let cfg = PropagatorConfig {
            dt: 0.05,
            t_final: 2.0,
            ..PropagatorConfig::default()
        };
        let traj = propagate(&op, &psi0, &cfg, &DiagnosticSet::default(), true).unwrap();
        for (s, st) in traj.samples.iter().zip(&traj.states) {
            let overlap = psi0.inner(st);
            assert!((overlap.norm() - 1.0).abs() < 1e-9);
            let expect = C64::from_polar(1.0, -ground.value * s.t);
            assert!((overlap - expect).norm() < 1e-8);
        }
    }

    #[test]
    fn zero_operator_is_identity() {
        let spec = GridSpec {
            ny: 40,
            ..GridSpec::default()
        };
        let line = normal_space(&spec);
        let zero = multiplication_operator(line.clone(), vec![0.0; 40], OperatorKind::HO, 1.0);
        let psi0 = WaveFunction {
            space: line,
            data: seeded_vector(40, 1),
        };
        let cfg = PropagatorConfig {
            dt: 0.1,
            t_final: 0.5,
            ..Default::default()
        };
        let traj = propagate(&zero, &psi0, &cfg, &DiagnosticSet::default(), true).unwrap();
        for st in &traj.states {
            assert_eq!(st.data, psi0.data);
        }
    }

    #[test]
    fn backward_propagation_returns_the_start() {
        let spec = GridSpec {
            ny: 60,
            ..GridSpec::default()
        };
        let line = normal_space(&spec);
        let op = line_operator(line.clone(), line.y.iter().map(|y| y * y).collect(), 1.0);
        let psi0 = WaveFunction {
            space: line,
            data: seeded_vector(60, 1),
        };
        let fwd = PropagatorConfig {
            dt: 0.1,
            t_final: 0.5,
            ..Default::default()
        };
        let traj = propagate(&op, &psi0, &fwd, &DiagnosticSet::default(), true).unwrap();
        let back = PropagatorConfig {
            t_final: -0.5,
            ..fwd
        };
        let ret = propagate(
            &op,
            traj.states.last().unwrap(),
            &back,
            &DiagnosticSet::default(),
            true,
        )
        .unwrap();
        assert!(ret.states.last().unwrap().distance(&psi0) < 1e-7 * psi0.norm());
        assert!(traj.max_norm_drift() < 1e-8 * psi0.norm());
        assert!(traj.max_energy_drift() < 1e-8);
    }

    #[test]
    fn leak_mass_contract() {
        let chart = SurfaceChart::flat().unwrap();
        let spec = GridSpec {
            n1: 4,
            n2: 4,
            ny: 40,
            y_half: 8.0,
            lambda: 4.0,
        };
        let psi =
            initial_state(&chart, &PotentialSet::harmonic(), &spec, Profile::VonMises).unwrap();
        assert!(leak_mass(&psi, 4.0, 3.0).is_err());
        assert!(leak_mass(&psi, 4.0, 0.0).is_err());
        let inside = leak_mass(&psi, 4.0, 0.1).unwrap();
        assert!(inside > 0.3 && inside < 1.0, "{inside}");
        assert!(leak_mass(&psi, 4.0, 1.5).unwrap() < 1e-12);
    }

    #[test]
    fn factorization_is_exact_for_separable_confinement() {
        let chart = SurfaceChart::torus(2.0, 1.0).unwrap();
        let pots = PotentialSet::new(
            [
                field(Library::SinX2(0.3)),
                field(Library::Zero),
                field(Library::Zero),
            ],
            field(Library::CosX1(0.2)),
            field(Library::Y2),
        );
        let spec = GridSpec {
            n1: 8,
            n2: 8,
            ny: 32,
            y_half: 8.0,
            lambda: 8.0,
        };
        let surf = surface_data(&chart, &spec).unwrap();
        let mut phi = WaveFunction::from_fn(surface_space(&chart, &spec, &surf), |x, _| {
            C64::new((x[0].cos() + x[1].cos()).exp(), 0.0)
        });
        phi.normalize();
        let mut chi = WaveFunction::from_fn(normal_space(&spec), |_, y| {
            C64::new((-(y - 0.5).powi(2)).exp(), 0.0)
        });
        chi.normalize();
        let cfg = PropagatorConfig {
            dt: 0.05,
            t_final: 1.0,
            ..Default::default()
        };
        let rep = factorization_check(&chart, &pots, &spec, &phi, &chi, &cfg).unwrap();
        assert!(rep.separable);
        assert!(rep.max_deviation <= 1e-8, "{:e}", rep.max_deviation);
    }

    #[test]
    fn flat_chart_ladder_sits_at_noise_floor() {
        let chart = SurfaceChart::flat().unwrap();
        let pots = PotentialSet::new(
            [
                field(Library::SinX2(0.3)),
                field(Library::Zero),
                field(Library::Constant(0.5)),
            ],
            field(Library::CosX1(0.2)),
            field(Library::Y2),
        );
        let cfg = ExperimentConfig {
            grid: GridSpec {
                n1: 8,
                n2: 8,
                ny: 32,
                y_half: 8.0,
                lambda: 4.0,
            },
            propagator: PropagatorConfig {
                dt: 0.05,
                t_final: 0.5,
                ..Default::default()
            },
            ..Default::default()
        };
        let table = convergence_experiment(&chart, &pots, &[4.0, 8.0], &cfg).unwrap();
        for r in &table.rows {
            assert!(r.sup_diff <= DIFF_NOISE_FLOOR, "{r:?}");
        }
        let csv = table.to_csv();
        assert!(csv.starts_with(
            "lambda,sup_diff,arg_t,norm_drift,energy_drift,leak_mass,sup_b,sup_confine\n"
        ));
        assert!(csv
            .trim_end()
            .lines()
            .last()
            .unwrap()
            .starts_with("#slope="));
    }
}
