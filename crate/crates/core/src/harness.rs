//! Configuration-driven experiment runner behind the `qdyn` binary.
//!
//! A run is a JSON document with `surface`, `potentials`, `grid`, `run` and
//! an optional `output` block. Fields are written as `name` or
//! `name:argument`, for example `"y2"` or `"sin_x2:0.3"`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::evolution::{
    confining_multiplier, convergence_experiment, initial_state, leak_mass, propagate,
    DiagnosticSet, ExperimentConfig, Profile, PropagatorConfig,
};
use crate::fields::{field, Library, PotentialSet};
use crate::geometry::SurfaceChart;
use crate::grid::{surface_axes, GridSpec};
use crate::krylov::{lowest_eigenpairs, EigenOptions};
use crate::operators::{
    assemble_b_plus, assemble_l0, assemble_l_lambda, audit_verdict, b_plus_cutoff, grid_audit,
    grid_gauge,
};

/// Environment variable that overrides the output directory of a config.
pub const OUT_DIR_ENV: &str = "QDYN_OUT";
pub const DEFAULT_OUT_DIR: &str = "qdyn-out";
pub const DEFAULT_SEED: u64 = 42;
pub const MAX_SPECTRUM_K: usize = 12;
/// Largest residual accepted for a reported eigenpair.
pub const SPECTRUM_RESIDUAL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    GeometryAudit,
    GaugeCheck,
    Spectrum,
    Evolve,
    Converge,
    HypothesisAudit,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::GeometryAudit,
        Command::GaugeCheck,
        Command::Spectrum,
        Command::Evolve,
        Command::Converge,
        Command::HypothesisAudit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::GeometryAudit => "geometry-audit",
            Command::GaugeCheck => "gauge-check",
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Converge => "converge",
            Command::HypothesisAudit => "hypothesis-audit",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
                Error::Config(format!(
                    "unknown command '{s}' (expected one of {})",
                    known.join(", ")
                ))
            })
    }
}

/// A field from the built-in library in its textual form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSpec(pub Library);

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Library::Zero => f.write_str("zero"),
            Library::Constant(c) => write!(f, "const:{c:?}"),
            Library::SinX2(a) => write!(f, "sin_x2:{a:?}"),
            Library::CosX1(a) => write!(f, "cos_x1:{a:?}"),
            Library::Y2 => f.write_str("y2"),
            Library::Y2PlusY4 => f.write_str("y2+y4"),
            Library::Y2PlusSextic(a) => write!(f, "y2+sextic:{a:?}"),
            Library::Y4 => f.write_str("y4"),
            Library::Y2PlusSinY3 => f.write_str("y2+sin_x1*y3"),
        }
    }
}

impl FromStr for FieldSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s, None),
        };
        let number = || -> Result<f64> {
            let a = arg.ok_or_else(|| {
                Error::Config(format!(
                    "field '{name}' needs an argument, as in '{name}:0.5'"
                ))
            })?;
            a.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config(format!("field '{s}': '{a}' is not a finite number")))
        };
        let bare = |lib: Library| -> Result<Library> {
            match arg {
                None => Ok(lib),
                Some(_) => Err(Error::Config(format!("field '{name}' takes no argument"))),
            }
        };
        let lib = match name {
            "zero" => bare(Library::Zero)?,
            "const" => Library::Constant(number()?),
            "sin_x2" => Library::SinX2(number()?),
            "cos_x1" => Library::CosX1(number()?),
            "y2" => bare(Library::Y2)?,
            "y2+y4" => bare(Library::Y2PlusY4)?,
            "y2+sextic" => Library::Y2PlusSextic(number()?),
            "y4" => bare(Library::Y4)?,
            "y2+sin_x1*y3" => bare(Library::Y2PlusSinY3)?,
            _ => return Err(Error::Config(format!("unknown field '{s}'"))),
        };
        Ok(FieldSpec(lib))
    }
}

impl Serialize for FieldSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FieldSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceConfig {
    Flat {
        #[serde(default = "two_pi_periods")]
        periods: [f64; 2],
    },
    Torus {
        #[serde(rename = "R")]
        major: f64,
        r: f64,
    },
    PerturbedTorus {
        #[serde(rename = "R")]
        major: f64,
        r: f64,
        eps: f64,
    },
    Sphere {
        radius: f64,
    },
}

fn two_pi_periods() -> [f64; 2] {
    [std::f64::consts::TAU; 2]
}

impl SurfaceConfig {
    pub fn chart(&self) -> Result<SurfaceChart> {
        match *self {
            SurfaceConfig::Flat { periods } => SurfaceChart::flat_with_periods(periods),
            SurfaceConfig::Torus { major, r } => SurfaceChart::torus(major, r),
            SurfaceConfig::PerturbedTorus { major, r, eps } => {
                SurfaceChart::perturbed_torus(major, r, eps)
            }
            SurfaceConfig::Sphere { radius } => SurfaceChart::sphere(radius),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialConfig {
    #[serde(rename = "W")]
    pub w: FieldSpec,
    #[serde(rename = "A", default = "zero_vector_potential")]
    pub a: [FieldSpec; 3],
    #[serde(rename = "V", default = "zero_field")]
    pub v: FieldSpec,
}

fn zero_field() -> FieldSpec {
    FieldSpec(Library::Zero)
}

fn zero_vector_potential() -> [FieldSpec; 3] {
    [zero_field(); 3]
}

impl PotentialConfig {
    pub fn potentials(&self) -> PotentialSet {
        PotentialSet::new(
            [field(self.a[0].0), field(self.a[1].0), field(self.a[2].0)],
            field(self.v.0),
            field(self.w.0),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    #[serde(rename = "N1")]
    pub n1: usize,
    #[serde(rename = "N2")]
    pub n2: usize,
    #[serde(rename = "Ny")]
    pub ny: usize,
    #[serde(rename = "Y")]
    pub y_half: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            n1: g.n1,
            n2: g.n2,
            ny: g.ny,
            y_half: g.y_half,
        }
    }
}

impl GridConfig {
    pub fn spec(&self, lambda: f64) -> GridSpec {
        GridSpec {
            n1: self.n1,
            n2: self.n2,
            ny: self.ny,
            y_half: self.y_half,
            lambda,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumOperator {
    #[serde(rename = "H_Sigma")]
    HSigma,
    #[serde(rename = "H_O")]
    HO,
    #[serde(rename = "L0")]
    L0,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub operator: SpectrumOperator,
    pub k: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            operator: SpectrumOperator::HO,
            k: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunBlock {
    pub lambdas: Vec<f64>,
    #[serde(rename = "T", default = "default_t")]
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
    #[serde(default = "default_step_tol")]
    pub step_tol: f64,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    /// Leak threshold as a fraction of the reach bound.
    #[serde(default = "default_leak_fraction")]
    pub leak_fraction: f64,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
}

fn default_t() -> f64 {
    PropagatorConfig::default().t_final
}
fn default_dt() -> f64 {
    PropagatorConfig::default().dt
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_krylov_dim() -> usize {
    PropagatorConfig::default().krylov_dim
}
fn default_step_tol() -> f64 {
    PropagatorConfig::default().step_tol
}
fn default_stride() -> usize {
    PropagatorConfig::default().sample_stride
}
fn default_leak_fraction() -> f64 {
    ExperimentConfig::default().leak_fraction
}

impl RunBlock {
    pub fn propagator(&self) -> PropagatorConfig {
        PropagatorConfig {
            dt: self.dt,
            t_final: self.t_final,
            krylov_dim: self.krylov_dim,
            step_tol: self.step_tol,
            sample_stride: self.sample_stride,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub surface: SurfaceConfig,
    pub potentials: PotentialConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub run: RunBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

struct Section {
    path: &'static str,
    required: &'static [&'static str],
    optional: &'static [&'static str],
}

const TOP: Section = Section {
    path: "",
    required: &["surface", "potentials", "run"],
    optional: &["grid", "output"],
};
const POTENTIALS: Section = Section {
    path: "potentials",
    required: &["W"],
    optional: &["A", "V"],
};
const GRID: Section = Section {
    path: "grid",
    required: &[],
    optional: &["N1", "N2", "Ny", "Y"],
};
const RUN: Section = Section {
    path: "run",
    required: &["lambdas"],
    optional: &[
        "T",
        "dt",
        "seed",
        "krylov_dim",
        "step_tol",
        "sample_stride",
        "leak_fraction",
        "spectrum",
    ],
};
const SPECTRUM: Section = Section {
    path: "run.spectrum",
    required: &["operator", "k"],
    optional: &[],
};

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

/// Appends missing and unknown keys of one object to the two lists.
fn check_section(
    value: &Value,
    sec: &Section,
    missing: &mut Vec<String>,
    unknown: &mut Vec<String>,
) -> Result<()> {
    let Some(map) = value.as_object() else {
        let name = if sec.path.is_empty() {
            "config"
        } else {
            sec.path
        };
        return Err(Error::Config(format!("'{name}' must be a JSON object")));
    };
    for key in sec.required {
        if !map.contains_key(*key) {
            missing.push(qualified(sec.path, key));
        }
    }
    for key in map.keys() {
        if !sec.required.contains(&key.as_str()) && !sec.optional.contains(&key.as_str()) {
            unknown.push(qualified(sec.path, key));
        }
    }
    Ok(())
}

fn surface_keys(kind: &str) -> Option<(&'static [&'static str], &'static [&'static str])> {
    match kind {
        "flat" => Some((&[], &["periods"])),
        "torus" => Some((&["R", "r"], &[])),
        "perturbed_torus" => Some((&["R", "r", "eps"], &[])),
        "sphere" => Some((&["radius"], &[])),
        _ => None,
    }
}

/// Reports every missing and unknown key at once.
fn check_keys(doc: &Value) -> Result<()> {
    let mut missing = Vec::new();
    let mut unknown = Vec::new();
    check_section(doc, &TOP, &mut missing, &mut unknown)?;
    if let Some(surface) = doc.get("surface") {
        let map = surface
            .as_object()
            .ok_or_else(|| Error::Config("'surface' must be a JSON object".into()))?;
        match map.get("kind").map(|k| k.as_str()) {
            None => missing.push("surface.kind".into()),
            Some(None) => return Err(Error::Config("surface.kind must be a string".into())),
            Some(Some(kind)) => {
                let (required, optional) = surface_keys(kind).ok_or_else(|| {
                    Error::Config(format!(
                        "surface.kind: unknown surface '{kind}' (expected flat, torus, perturbed_torus or sphere)"
                    ))
                })?;
                for key in required {
                    if !map.contains_key(*key) {
                        missing.push(format!("surface.{key}"));
                    }
                }
                for key in map.keys() {
                    if key != "kind"
                        && !required.contains(&key.as_str())
                        && !optional.contains(&key.as_str())
                    {
                        unknown.push(format!("surface.{key}"));
                    }
                }
            }
        }
    } else {
        missing.push("surface.kind".into());
    }
    match doc.get("potentials") {
        Some(p) => check_section(p, &POTENTIALS, &mut missing, &mut unknown)?,
        None => missing.push("potentials.W".into()),
    }
    if let Some(g) = doc.get("grid") {
        check_section(g, &GRID, &mut missing, &mut unknown)?;
    }
    match doc.get("run") {
        Some(r) => {
            check_section(r, &RUN, &mut missing, &mut unknown)?;
            if let Some(s) = r.get("spectrum") {
                check_section(s, &SPECTRUM, &mut missing, &mut unknown)?;
            }
        }
        None => missing.push("run.lambdas".into()),
    }
    let mut problems = Vec::new();
    if !missing.is_empty() {
        problems.push(format!("missing required keys: {}", missing.join(", ")));
    }
    if !unknown.is_empty() {
        problems.push(format!("unknown keys: {}", unknown.join(", ")));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(problems.join("; ")))
    }
}

fn out_of_range(key: &str, detail: impl fmt::Display) -> Error {
    Error::Config(format!("{key}: {detail}"))
}

impl RunConfig {
    /// Parses and validates a JSON document.
    pub fn parse(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        check_keys(&doc)?;
        let cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Range checks beyond what the types enforce.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(out_of_range(
                    key,
                    format!("{v} must be finite and positive"),
                ))
            }
        };
        match self.surface {
            SurfaceConfig::Flat { periods } => {
                positive("surface.periods[0]", periods[0])?;
                positive("surface.periods[1]", periods[1])?;
            }
            SurfaceConfig::Torus { major, r } => {
                positive("surface.R", major)?;
                positive("surface.r", r)?;
                if r >= major {
                    return Err(out_of_range(
                        "surface.r",
                        format!("{r} must be below R = {major}"),
                    ));
                }
            }
            SurfaceConfig::PerturbedTorus { major, r, eps } => {
                positive("surface.R", major)?;
                positive("surface.r", r)?;
                if !(eps.is_finite() && eps.abs() < 1.0) {
                    return Err(out_of_range(
                        "surface.eps",
                        format!("{eps} must lie in (-1, 1)"),
                    ));
                }
            }
            SurfaceConfig::Sphere { radius } => positive("surface.radius", radius)?,
        }
        if self.run.lambdas.is_empty() {
            return Err(out_of_range("run.lambdas", "at least one value required"));
        }
        for (i, &l) in self.run.lambdas.iter().enumerate() {
            if !(l.is_finite() && l >= 1.0) {
                return Err(out_of_range(
                    &format!("run.lambdas[{i}]"),
                    format!("{l} must be finite and >= 1"),
                ));
            }
        }
        if !self.run.t_final.is_finite() {
            return Err(out_of_range("run.T", "must be finite"));
        }
        positive("run.dt", self.run.dt)?;
        if !(self.run.leak_fraction > 0.0 && self.run.leak_fraction < 1.0) {
            return Err(out_of_range(
                "run.leak_fraction",
                format!("{} must lie in (0, 1)", self.run.leak_fraction),
            ));
        }
        let k = self.run.spectrum.k;
        if !(1..=MAX_SPECTRUM_K).contains(&k) {
            return Err(out_of_range(
                "run.spectrum.k",
                format!("{k} must lie in 1..={MAX_SPECTRUM_K}"),
            ));
        }
        self.run
            .propagator()
            .steps()
            .map_err(|e| out_of_range("run", e))?;
        self.grid
            .spec(self.run.lambdas[0])
            .validate()
            .map_err(|e| out_of_range("grid", e))?;
        Ok(())
    }

    /// Fully populated form with every default written out.
    pub fn canonical(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn canonical_string(&self) -> String {
        serde_json::to_string_pretty(&self.canonical()).expect("config serializes")
    }

    fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            grid: self.grid.spec(self.run.lambdas[0]),
            propagator: self.run.propagator(),
            profile: Profile::VonMises,
            leak_fraction: self.run.leak_fraction,
        }
    }
}

/// One output file of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    pub contents: String,
}

#[derive(Clone, Debug)]
pub struct ResultBundle {
    pub command: Command,
    pub seed: u64,
    pub config: Value,
    pub tables: Vec<Table>,
    /// Named checks derived from the tables.
    pub flags: BTreeMap<String, bool>,
    pub slope: Option<f64>,
    pub wall_seconds: f64,
    /// Violated hypotheses for the audit command, as roman numerals.
    pub audit_failures: Vec<&'static str>,
}

impl ResultBundle {
    pub fn pass(&self) -> bool {
        self.flags.values().all(|&f| f)
    }

    pub fn table(&self, file: &str) -> Option<&str> {
        self.tables
            .iter()
            .find(|t| t.file == file)
            .map(|t| t.contents.as_str())
    }

    /// Process exit status: `2` when the audit command found violations.
    pub fn exit_code(&self) -> i32 {
        if self.audit_failures.is_empty() {
            0
        } else {
            2
        }
    }

    pub fn summary(&self) -> Value {
        let mut s = json!({
            "command": self.command.name(),
            "pass": self.pass(),
            "seed": self.seed,
            "flags": self.flags,
            "tables": self.tables.iter().map(|t| t.file.clone()).collect::<Vec<_>>(),
            "wall_seconds": self.wall_seconds,
            "config": self.config,
        });
        if let Some(slope) = self.slope {
            s["slope"] = json!(slope);
        }
        s
    }
}

/// Exit status for a failed run: `2` for a hypothesis violation, else `1`.
pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Hypothesis { .. } => 2,
        _ => 1,
    }
}

/// Runs one command. Audit-gated commands fail with `Error::Hypothesis`.
pub fn run(command: Command, cfg: &RunConfig, seed: Option<u64>) -> Result<ResultBundle> {
    let start = Instant::now();
    let seed = seed.unwrap_or(cfg.run.seed);
    let mut effective = cfg.clone();
    effective.run.seed = seed;
    let chart = cfg.surface.chart()?;
    let pots = cfg.potentials.potentials();
    let mut bundle = ResultBundle {
        command,
        seed,
        config: effective.canonical(),
        tables: Vec::new(),
        flags: BTreeMap::new(),
        slope: None,
        wall_seconds: 0.0,
        audit_failures: Vec::new(),
    };
    match command {
        Command::GeometryAudit => geometry_audit(&chart, cfg, &mut bundle)?,
        Command::GaugeCheck => gauge_check(&chart, cfg, &mut bundle)?,
        Command::Spectrum => spectrum(&chart, &pots, cfg, seed, &mut bundle)?,
        Command::Evolve => evolve(&chart, &pots, cfg, &mut bundle)?,
        Command::Converge => converge(&chart, &pots, cfg, &mut bundle)?,
        Command::HypothesisAudit => audit(&chart, &pots, cfg, &mut bundle),
    }
    bundle.wall_seconds = start.elapsed().as_secs_f64();
    Ok(bundle)
}

fn geometry_audit(chart: &SurfaceChart, cfg: &RunConfig, bundle: &mut ResultBundle) -> Result<()> {
    let spec = cfg.grid.spec(cfg.run.lambdas[0]);
    let p = chart.periods();
    let (x1s, x2s) = if chart.is_global() {
        surface_axes(&spec, p)
    } else {
        // open charts are sampled at cell centres to stay off the boundary
        let centres =
            |n: usize, len: f64| (0..n).map(|i| (i as f64 + 0.5) * len / n as f64).collect();
        (centres(spec.n1, p[0]), centres(spec.n2, p[1]))
    };
    let mut csv = String::from("x1,x2,kappa1,kappa2,s,h,K\n");
    let mut k_gap: f64 = 0.0;
    let mut trace_gap: f64 = 0.0;
    for &x1 in &x1s {
        for &x2 in &x2s {
            let c = chart.shape_operator([x1, x2])?;
            let [k1, k2] = c.kappa;
            k_gap = k_gap.max((c.k + 0.25 * (k1 - k2).powi(2)).abs());
            let l = c.l_mat;
            let tr = l.trace();
            trace_gap = trace_gap.max((tr * tr - (l * l).trace() - 2.0 * l.determinant()).abs());
            let _ = writeln!(
                csv,
                "{x1:.12e},{x2:.12e},{k1:.12e},{k2:.12e},{:.12e},{:.12e},{:.12e}",
                c.s, c.h, c.k
            );
        }
    }
    bundle.tables.push(Table {
        file: "geometry.csv".into(),
        contents: csv,
    });
    bundle
        .flags
        .insert("curvature_potential_identity".into(), k_gap <= 1e-10);
    bundle
        .flags
        .insert("trace_identity".into(), trace_gap <= 1e-12);
    Ok(())
}

fn gauge_check(chart: &SurfaceChart, cfg: &RunConfig, bundle: &mut ResultBundle) -> Result<()> {
    let spec = cfg.grid.spec(cfg.run.lambdas[0]);
    let pots = cfg.potentials.potentials();
    let reference = assemble_l0(chart, &pots, &spec)?.l0.triplets();
    let variants: [(&str, Library); 3] = [
        ("zero", Library::Zero),
        ("const:1.7", Library::Constant(1.7)),
        ("sin_x2:0.9", Library::SinX2(0.9)),
    ];
    let nodes = surface_axes(&spec, chart.periods());
    let y_max = spec.y_half / spec.lambda;
    let mut csv = String::from("A3,max_entry_diff,max_residual_normal\n");
    let mut identical = true;
    let mut worst_residual: f64 = 0.0;
    for (label, lib) in variants {
        let p = pots.with_normal_component(field(lib));
        let triplets = assemble_l0(chart, &p, &spec)?.l0.triplets();
        let diff = if triplets.len() == reference.len()
            && triplets
                .iter()
                .zip(&reference)
                .all(|(a, b)| a.0 == b.0 && a.1 == b.1)
        {
            triplets
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a.2 - b.2).norm())
                .fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        identical &= diff == 0.0;
        let gauge = grid_gauge(&p, &spec);
        let mut residual: f64 = 0.0;
        for &x1 in nodes.0.iter().step_by(4) {
            for &x2 in nodes.1.iter().step_by(4) {
                for j in 1..=4 {
                    let y = y_max * j as f64 / 5.0;
                    for yy in [y, -y] {
                        residual = residual.max(
                            gauge
                                .residual_normal_component([x1, x2], yy, 1e-4 * y_max)?
                                .abs(),
                        );
                    }
                }
            }
        }
        worst_residual = worst_residual.max(residual);
        let _ = writeln!(csv, "{label},{diff:.6e},{residual:.6e}");
    }
    bundle.tables.push(Table {
        file: "gauge.csv".into(),
        contents: csv,
    });
    bundle.flags.insert("entry_identical".into(), identical);
    bundle
        .flags
        .insert("normal_component_removed".into(), worst_residual <= 1e-6);
    Ok(())
}

fn spectrum(
    chart: &SurfaceChart,
    pots: &PotentialSet,
    cfg: &RunConfig,
    seed: u64,
    bundle: &mut ResultBundle,
) -> Result<()> {
    let spec = cfg.grid.spec(cfg.run.lambdas[0]);
    let parts = assemble_l0(chart, pots, &spec)?;
    let sc = cfg.run.spectrum;
    let op = match sc.operator {
        SpectrumOperator::HSigma => &parts.h_sigma,
        SpectrumOperator::HO => &parts.h_o,
        SpectrumOperator::L0 => &parts.l0,
    };
    let opts = EigenOptions {
        seed,
        ..EigenOptions::default()
    };
    let pairs = lowest_eigenpairs(op, sc.k, &opts)?;
    let mut csv = String::from("index,eigenvalue,residual\n");
    for (i, p) in pairs.iter().enumerate() {
        let _ = writeln!(csv, "{i},{:.12e},{:.3e}", p.value, p.residual);
    }
    bundle.tables.push(Table {
        file: "spectrum.csv".into(),
        contents: csv,
    });
    bundle.flags.insert(
        "residuals".into(),
        pairs.iter().all(|p| p.residual <= SPECTRUM_RESIDUAL),
    );
    bundle.flags.insert(
        "ascending".into(),
        pairs.windows(2).all(|w| w[0].value <= w[1].value),
    );
    Ok(())
}

fn require_audit(chart: &SurfaceChart, pots: &PotentialSet, spec: &GridSpec) -> Result<()> {
    audit_verdict(&grid_audit(pots, chart, spec))
}

fn evolve(
    chart: &SurfaceChart,
    pots: &PotentialSet,
    cfg: &RunConfig,
    bundle: &mut ResultBundle,
) -> Result<()> {
    let lambda = cfg.run.lambdas[0];
    let spec = cfg.grid.spec(lambda);
    require_audit(chart, pots, &spec)?;
    let ll = assemble_l_lambda(chart, pots, &spec)?;
    let b_plus = assemble_b_plus(chart, &spec, b_plus_cutoff(&spec))?;
    let confining = confining_multiplier(chart, pots, &spec)?;
    let psi0 = initial_state(chart, pots, &spec, Profile::VonMises)?;
    let eps = cfg.run.leak_fraction * chart.reach_bound();
    let leak = leak_mass(&psi0, lambda, eps).ok().map(|_| (eps, lambda));
    let diag = DiagnosticSet {
        leak,
        b_plus: Some(&b_plus),
        confining: Some(&confining),
    };
    let traj = propagate(&ll, &psi0, &cfg.run.propagator(), &diag, false)?;
    let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
    let mut csv = String::from("t,norm,energy,leak_mass,b,confinement\n");
    for s in &traj.samples {
        let _ = writeln!(
            csv,
            "{:.6},{:.15e},{:.15e},{:.12e},{:.12e},{:.12e}",
            s.t,
            s.norm,
            s.energy,
            opt(s.leak_mass),
            opt(s.b),
            opt(s.confinement)
        );
    }
    bundle.tables.push(Table {
        file: "trajectory.csv".into(),
        contents: csv,
    });
    bundle
        .flags
        .insert("norm_conserved".into(), traj.max_norm_drift() <= 1e-8);
    bundle
        .flags
        .insert("energy_conserved".into(), traj.max_energy_drift() <= 1e-8);
    Ok(())
}

/// Ratio of the largest to the smallest value.
fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    hi / lo
}

fn converge(
    chart: &SurfaceChart,
    pots: &PotentialSet,
    cfg: &RunConfig,
    bundle: &mut ResultBundle,
) -> Result<()> {
    for &lambda in &cfg.run.lambdas {
        require_audit(chart, pots, &cfg.grid.spec(lambda))?;
    }
    let table = convergence_experiment(chart, pots, &cfg.run.lambdas, &cfg.experiment())?;
    bundle.tables.push(Table {
        file: "convergence.csv".into(),
        contents: table.to_csv(),
    });
    bundle.slope = table.slope.is_finite().then_some(table.slope);
    bundle
        .flags
        .insert("strictly_decreasing".into(), table.strictly_decreasing());
    bundle.flags.insert("rate".into(), table.slope <= -0.5);
    if let Some(fit) = table.leak_fit() {
        bundle.flags.insert("leak_rate".into(), fit.slope <= -1.5);
    }
    bundle.flags.insert(
        "b_uniform".into(),
        spread(table.rows.iter().map(|r| r.sup_b)) <= 4.0,
    );
    bundle.flags.insert(
        "confinement_uniform".into(),
        spread(table.rows.iter().map(|r| r.sup_confine)) <= 4.0,
    );
    Ok(())
}

fn audit(chart: &SurfaceChart, pots: &PotentialSet, cfg: &RunConfig, bundle: &mut ResultBundle) {
    let mut reports = Vec::new();
    for &lambda in &cfg.run.lambdas {
        let report = grid_audit(pots, chart, &cfg.grid.spec(lambda));
        for v in report.violations() {
            if !bundle.audit_failures.contains(&v) {
                bundle.audit_failures.push(v);
            }
        }
        let mut entry = report.to_json();
        entry["lambda"] = json!(lambda);
        entry["violations"] = json!(report.violations());
        reports.push(entry);
    }
    bundle.audit_failures.sort_unstable();
    for (numeral, key) in [
        ("i", "hypothesis_i"),
        ("ii", "hypothesis_ii"),
        ("iii", "hypothesis_iii"),
    ] {
        bundle
            .flags
            .insert(key.into(), !bundle.audit_failures.contains(&numeral));
    }
    let doc = json!({ "audits": reports, "violations": bundle.audit_failures });
    bundle.tables.push(Table {
        file: "audit.json".into(),
        contents: serde_json::to_string_pretty(&doc).expect("audit serializes") + "\n",
    });
}

/// Output directory: explicit flag, then the environment override, then
/// the config, then the default.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV) {
        return PathBuf::from(p);
    }
    cfg.output
        .as_deref()
        .map_or_else(|| PathBuf::from(DEFAULT_OUT_DIR), PathBuf::from)
}

/// Writes every table and `summary.json` into `dir`. Refuses to replace
/// existing files unless `overwrite` is set; nothing is written then.
pub fn emit(bundle: &ResultBundle, dir: &Path, overwrite: bool) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(PathBuf, String)> = bundle
        .tables
        .iter()
        .map(|t| (dir.join(&t.file), t.contents.clone()))
        .collect();
    let summary =
        serde_json::to_string_pretty(&bundle.summary()).expect("summary serializes") + "\n";
    files.push((dir.join("summary.json"), summary));
    if !overwrite {
        if let Some((path, _)) = files.iter().find(|(p, _)| p.exists()) {
            return Err(Error::io(
                path,
                std::io::Error::new(
                    std::io::ErrorKind::AlreadyExists,
                    "refusing to overwrite existing output (pass --overwrite)",
                ),
            ));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(files.len());
    for (path, contents) in files {
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "surface": {"kind": "torus", "R": 2, "r": 1},
        "potentials": {"W": "y2"},
        "run": {"lambdas": [4, 8]}
    }"#;

    #[test]
    fn empty_config_lists_required_keys() {
        let err = RunConfig::parse("{}").unwrap_err().to_string();
        for key in ["surface.kind", "potentials.W", "run.lambdas"] {
            assert!(err.contains(key), "{err}");
        }
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = MINIMAL.replace("\"lambdas\"", "\"bogus\": 1, \"lambdas\"");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("run.bogus"), "{err}");
        let text = MINIMAL.replace("\"r\": 1", "\"r\": 1, \"radius\": 3");
        assert!(RunConfig::parse(&text)
            .unwrap_err()
            .to_string()
            .contains("surface.radius"));
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = RunConfig::parse("{\n  \"surface\": ,\n}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn ranges_are_enforced() {
        let bad_k = MINIMAL.replace(
            "[4, 8]",
            "[4, 8], \"spectrum\": {\"operator\": \"H_O\", \"k\": 13}",
        );
        assert!(RunConfig::parse(&bad_k)
            .unwrap_err()
            .to_string()
            .contains("run.spectrum.k"));
        let bad_lambda = MINIMAL.replace("[4, 8]", "[0.5]");
        assert!(RunConfig::parse(&bad_lambda)
            .unwrap_err()
            .to_string()
            .contains("run.lambdas[0]"));
        let bad_dt = MINIMAL.replace("[4, 8]", "[4], \"dt\": 0.3");
        assert!(RunConfig::parse(&bad_dt).is_err());
    }

    #[test]
    fn canonical_echo_round_trips() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.run.seed, 42);
        assert_eq!(cfg.grid, GridConfig::default());
        let text = cfg.canonical_string();
        let again = RunConfig::parse(&text).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.canonical_string(), text);
    }

    #[test]
    fn field_strings_round_trip() {
        for lib in [
            Library::Zero,
            Library::Constant(0.5),
            Library::SinX2(0.3),
            Library::CosX1(-0.2),
            Library::Y2,
            Library::Y2PlusY4,
            Library::Y2PlusSextic(0.1),
            Library::Y4,
            Library::Y2PlusSinY3,
        ] {
            let text = FieldSpec(lib).to_string();
            assert_eq!(text.parse::<FieldSpec>().unwrap(), FieldSpec(lib), "{text}");
        }
        assert!("y2:1".parse::<FieldSpec>().is_err());
        assert!("const".parse::<FieldSpec>().is_err());
        assert!("cubic".parse::<FieldSpec>().is_err());
    }

    #[test]
    fn commands_parse_by_name() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("plot".parse::<Command>().is_err());
    }

    #[test]
    fn emit_refuses_to_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = ResultBundle {
            command: Command::GeometryAudit,
            seed: 42,
            config: json!({}),
            tables: Vec::new(),
            flags: BTreeMap::new(),
            slope: None,
            wall_seconds: 0.0,
            audit_failures: Vec::new(),
        };
        let written = emit(&bundle, dir.path(), false).unwrap();
        assert_eq!(written, vec![dir.path().join("summary.json")]);
        let summary: Value =
            serde_json::from_str(&fs::read_to_string(&written[0]).unwrap()).unwrap();
        assert_eq!(summary["tables"], json!([]));
        assert!(summary.get("slope").is_none());
        assert!(emit(&bundle, dir.path(), false).is_err());
        assert!(emit(&bundle, dir.path(), true).is_ok());
    }

    #[test]
    fn geometry_audit_on_a_torus() {
        let cfg = RunConfig::parse(&MINIMAL.replace("[4, 8]", "[4]")).unwrap();
        let b = run(Command::GeometryAudit, &cfg, None).unwrap();
        assert!(b.pass(), "{:?}", b.flags);
        let csv = b.table("geometry.csv").unwrap();
        assert_eq!(csv.lines().next(), Some("x1,x2,kappa1,kappa2,s,h,K"));
        assert_eq!(csv.lines().count(), 1 + 24 * 24);
    }

    #[test]
    fn degenerate_confinement_is_an_audit_failure() {
        let cfg = RunConfig::parse(&MINIMAL.replace("\"y2\"", "\"y4\"")).unwrap();
        let err = run(Command::Converge, &cfg, None).unwrap_err();
        assert_eq!(error_exit_code(&err), 2);
        assert!(err.to_string().contains("hypothesis (ii)"), "{err}");
        let b = run(Command::HypothesisAudit, &cfg, None).unwrap();
        assert_eq!(b.exit_code(), 2);
        assert_eq!(b.audit_failures, vec!["ii"]);
    }
}
