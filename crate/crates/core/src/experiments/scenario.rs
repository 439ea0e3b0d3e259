//! Scenario files.
//!
//! A scenario is a TOML document. Quantities carry their unit in the key:
//! `_len` for lengths, `_time` for times, `_speed` for speeds and `_per_time`
//! for rates. All of them are in the same nondimensional units as the model.
//! The schema is versioned through `schema_version`; see
//! `docs/scenario-schema.md` for the full key list.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use serde::{Deserialize, Serialize};

use crate::asymptotics::{default_trace_intervals, NoiseConvention};
use crate::error::{Error, Result};
use crate::field::{AnalyticSource, CubicPulseSource, Domain, PowerGrowthSource, SourceModel};
use crate::inversion::KernelScaling;
use crate::quadrature::AngularInterpolation;
use crate::vec3::{self, Point3};

pub const SCHEMA_VERSION: u32 = 1;

/// What a scenario computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Residuals of the Newtonian eigensystem on a point lattice.
    EigensystemTable,
    /// Partial sums of the closed-form spectral series.
    SpectralSums,
    /// Solver field against the truncated expansion at one observer.
    ForwardComparison,
    /// Source reconstruction from single-receiver traces on a lattice.
    SourceRecovery,
    /// Reconstruction error of `V` against the truncation `N`.
    TruncationSweep,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::EigensystemTable,
        ScenarioKind::SpectralSums,
        ScenarioKind::ForwardComparison,
        ScenarioKind::SourceRecovery,
        ScenarioKind::TruncationSweep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::EigensystemTable => "eigensystem-table",
            ScenarioKind::SpectralSums => "spectral-sums",
            ScenarioKind::ForwardComparison => "forward-comparison",
            ScenarioKind::SourceRecovery => "source-recovery",
            ScenarioKind::TruncationSweep => "truncation-sweep",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ScenarioKind::EigensystemTable => "eigenpair residuals |u - N u / lambda| for l <= 1, j <= 6",
            ScenarioKind::SpectralSums => "partial sums of avg^2/lambda and (n-1/2)^2 avg^2",
            ScenarioKind::ForwardComparison => "W from the volume-integral solver against W_N",
            ScenarioKind::SourceRecovery => "V, V_tt and J recovered from noisy single-point traces",
            ScenarioKind::TruncationSweep => "error of the recovered V against the truncation N",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Medium {
    pub c0_speed: f64,
}

impl Default for Medium {
    fn default() -> Self {
        Medium { c0_speed: 1.0 }
    }
}

/// Support of a user-defined source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Ball { center_len: Point3, radius_len: f64 },
    Box { lo_len: Point3, hi_len: Point3 },
}

impl From<DomainSpec> for Domain {
    fn from(d: DomainSpec) -> Domain {
        match d {
            DomainSpec::Ball { center_len, radius_len } => Domain::Ball {
                center: center_len,
                radius: radius_len,
            },
            DomainSpec::Box { lo_len, hi_len } => Domain::Box {
                lo: lo_len,
                hi: hi_len,
            },
        }
    }
}

/// The incident field `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    /// `tᵖ(e^{|x|²} + 3x₂ + x₃)` on the unit ball.
    PowerGrowth { p: u32 },
    /// The compactly supported pulse on the cube `(−0.25, 0.25)³`.
    CubicPulse { duration_time: f64 },
    /// Expressions in `x1, x2, x3, t` (evalexpr syntax, e.g. `math::sin(t)`).
    /// `v_tt` and `laplacian` are needed only where `J` is scored.
    Expression {
        v: String,
        #[serde(default)]
        v_tt: Option<String>,
        #[serde(default)]
        laplacian: Option<String>,
        domain: DomainSpec,
        #[serde(default)]
        support_end_time: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropletSpec {
    /// One run per radius.
    pub radii_len: Vec<f64>,
    pub riesz_b_per_time: f64,
    /// Droplet centre for single-position scenarios.
    #[serde(default)]
    pub center_len: Point3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    pub x_star_len: Point3,
    /// Start `T̃` of the window `[T̃, T̃ + 2π/b]`.
    pub t_start_time: f64,
    /// Must equal `2π/b` when given.
    #[serde(default)]
    pub duration_time: Option<f64>,
    /// Sampling intervals of the trace; defaults to `max(64, 8N)`.
    #[serde(default)]
    pub intervals: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LseSpec {
    pub q: usize,
    pub dt_time: f64,
    pub n_r: usize,
    pub n_s: usize,
    pub n0: usize,
    #[serde(default)]
    pub angular_interpolation: AngularInterpolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionSpec {
    /// Truncations compared or used to simulate.
    pub terms: Vec<usize>,
    /// Quadrature step for the memory integrals.
    #[serde(default = "default_integration_step")]
    pub integration_step_time: f64,
}

fn default_integration_step() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSpec {
    pub x_len: Point3,
    pub t_from_time: f64,
    pub t_to_time: f64,
    pub samples: usize,
    /// Errors against `W_N` are measured from this time on.
    #[serde(default)]
    pub compare_from_time: Option<f64>,
    /// Time at which the partial sums `W_1, …, W_N` are reported.
    #[serde(default)]
    pub partial_sum_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverySpec {
    pub n_terms: usize,
    pub lattice_lo_len: Point3,
    pub lattice_hi_len: Point3,
    /// Lattice spacing; also the mollifier step.
    pub spacing_len: f64,
    pub eval_time: f64,
    /// Plane `x₁ = slice_x1_len` on which errors are scored.
    #[serde(default)]
    pub slice_x1_len: f64,
    /// Mollifier radius; chosen from the noise level when absent.
    #[serde(default)]
    pub epsilon_time: Option<f64>,
    /// Bound `M₂` on `|V″|` for the automatic radius.
    #[serde(default)]
    pub m2_bound: Option<f64>,
    #[serde(default)]
    pub kernel_scaling: KernelScaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpecConfig {
    pub convention: NoiseConvention,
    pub level: f64,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigensystemSpec {
    pub radius_len: f64,
    pub n_r: usize,
    pub n_s: usize,
    #[serde(default = "default_points_per_axis")]
    pub points_per_axis: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff_len: f64,
    #[serde(default = "default_l_max")]
    pub l_max: u32,
    #[serde(default = "default_j_max")]
    pub j_max: usize,
}

fn default_points_per_axis() -> usize {
    20
}
fn default_cutoff() -> f64 {
    0.95
}
fn default_l_max() -> u32 {
    1
}
fn default_j_max() -> usize {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSpec {
    pub radius_len: f64,
    pub terms: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub terms: Vec<usize>,
    /// Terms used to simulate the trace.
    pub simulation_terms: usize,
    /// Points on `[0, 2π/b]` where the error is measured.
    #[serde(default = "default_sweep_points")]
    pub eval_points: usize,
}

fn default_sweep_points() -> usize {
    401
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Defaults to `out/<name>`; overridden by `DROPLET_OUTPUT_DIR`.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Also write every measurement trace (source recovery writes only the
    /// trace at the lattice centre otherwise).
    #[serde(default)]
    pub all_traces: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub medium: Medium,
    #[serde(default)]
    pub source: Option<SourceSpec>,
    #[serde(default)]
    pub droplet: Option<DropletSpec>,
    #[serde(default)]
    pub measurement: Option<MeasurementSpec>,
    #[serde(default)]
    pub lse: Option<LseSpec>,
    #[serde(default)]
    pub expansion: Option<ExpansionSpec>,
    #[serde(default)]
    pub observation: Option<ObservationSpec>,
    #[serde(default)]
    pub recovery: Option<RecoverySpec>,
    #[serde(default)]
    pub noise: Option<NoiseSpecConfig>,
    #[serde(default)]
    pub eigensystem: Option<EigensystemSpec>,
    #[serde(default)]
    pub spectral: Option<SpectralSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn require<'a, T>(section: &'a Option<T>, name: &str, kind: ScenarioKind) -> Result<&'a T> {
    section
        .as_ref()
        .ok_or_else(|| config(format!("[{name}] is required for kind = \"{}\"", kind.as_str())))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite_point(name: &str, p: Point3) -> Result<()> {
    if p.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(config(format!("{name} has non-finite components: {p:?}")))
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| config(e.to_string()))?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
        Scenario::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| config(e.to_string()))
    }

    pub fn source_model(&self) -> Result<Arc<dyn SourceModel>> {
        let spec = require(&self.source, "source", self.kind)?;
        build_source(spec, self.medium.c0_speed)
    }

    /// Window length `2π/b`.
    pub fn window_duration(&self) -> Result<f64> {
        let d = require(&self.droplet, "droplet", self.kind)?;
        Ok(2.0 * PI / d.riesz_b_per_time)
    }

    /// Trace sampling intervals for truncation `n_terms`.
    pub fn trace_intervals(&self, n_terms: usize) -> usize {
        self.measurement
            .as_ref()
            .and_then(|m| m.intervals)
            .unwrap_or_else(|| default_trace_intervals(n_terms))
    }

    /// Checks everything that can be checked without running, and returns
    /// non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            return Err(config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.name.trim().is_empty() {
            return Err(config("name must not be empty"));
        }
        if self.name.contains(['/', '\\']) {
            return Err(config("name must not contain path separators"));
        }
        positive("medium.c0_speed", self.medium.c0_speed)?;
        match self.kind {
            ScenarioKind::EigensystemTable => {
                let e = require(&self.eigensystem, "eigensystem", self.kind)?;
                positive("eigensystem.radius_len", e.radius_len)?;
                positive("eigensystem.cutoff_len", e.cutoff_len)?;
                if e.n_r == 0 || e.n_s == 0 || e.points_per_axis < 2 || e.j_max == 0 {
                    return Err(config("eigensystem needs n_r, n_s, j_max >= 1 and points_per_axis >= 2"));
                }
            }
            ScenarioKind::SpectralSums => {
                let s = require(&self.spectral, "spectral", self.kind)?;
                positive("spectral.radius_len", s.radius_len)?;
                if s.terms.is_empty() || s.terms.contains(&0) {
                    return Err(config("spectral.terms must be a non-empty list of positive integers"));
                }
            }
            ScenarioKind::ForwardComparison => {
                let model = self.source_model()?;
                let d = self.validate_droplet()?;
                let lse = require(&self.lse, "lse", self.kind)?;
                validate_lse(lse)?;
                let ex = self.validate_expansion()?;
                let obs = require(&self.observation, "observation", self.kind)?;
                finite_point("observation.x_len", obs.x_len)?;
                if !(obs.t_to_time > obs.t_from_time) || obs.samples < 2 {
                    return Err(config("observation needs t_to_time > t_from_time and samples >= 2"));
                }
                for &a in &d.radii_len {
                    if vec3::dist(obs.x_len, d.center_len) <= a {
                        return Err(config(format!(
                            "observer {:?} lies inside the droplet of radius {a}",
                            obs.x_len
                        )));
                    }
                }
                if ex.terms.iter().any(|&n| n == 0) {
                    return Err(config("expansion.terms must be positive"));
                }
                if !model.domain().contains(d.center_len) {
                    warnings.push(format!(
                        "droplet centre {:?} lies outside the source support",
                        d.center_len
                    ));
                }
            }
            ScenarioKind::SourceRecovery => {
                let model = self.source_model()?;
                let d = self.validate_droplet()?;
                if d.radii_len.len() != 1 {
                    return Err(config("source recovery takes exactly one radius in droplet.radii_len"));
                }
                let r = require(&self.recovery, "recovery", self.kind)?;
                if r.n_terms == 0 {
                    return Err(config("recovery.n_terms must be positive"));
                }
                positive("recovery.spacing_len", r.spacing_len)?;
                finite_point("recovery.lattice_lo_len", r.lattice_lo_len)?;
                finite_point("recovery.lattice_hi_len", r.lattice_hi_len)?;
                if let Some(eps) = r.epsilon_time {
                    positive("recovery.epsilon_time", eps)?;
                }
                if let Some(m2) = r.m2_bound {
                    positive("recovery.m2_bound", m2)?;
                }
                self.validate_noise()?;
                self.validate_expansion()?;
                let corners = lattice_corners(r.lattice_lo_len, r.lattice_hi_len);
                self.validate_window(model.as_ref(), &corners, &mut warnings)?;
                let window = self.window_duration()?;
                if !(0.0..=window).contains(&r.eval_time) {
                    return Err(config(format!(
                        "recovery.eval_time {} lies outside the reconstruction window [0, {window}]",
                        r.eval_time
                    )));
                }
            }
            ScenarioKind::TruncationSweep => {
                let model = self.source_model()?;
                let d = self.validate_droplet()?;
                let s = require(&self.sweep, "sweep", self.kind)?;
                if s.terms.is_empty() || s.terms.contains(&0) || s.simulation_terms == 0 {
                    return Err(config("sweep.terms and sweep.simulation_terms must be positive"));
                }
                if s.eval_points < 2 {
                    return Err(config("sweep.eval_points must be at least 2"));
                }
                self.validate_expansion()?;
                self.validate_noise()?;
                self.validate_window(model.as_ref(), &[d.center_len], &mut warnings)?;
            }
        }
        Ok(warnings)
    }

    fn validate_droplet(&self) -> Result<&DropletSpec> {
        let d = require(&self.droplet, "droplet", self.kind)?;
        if d.radii_len.is_empty() {
            return Err(config("droplet.radii_len must not be empty"));
        }
        for &a in &d.radii_len {
            positive("droplet.radii_len entries", a)?;
        }
        positive("droplet.riesz_b_per_time", d.riesz_b_per_time)?;
        finite_point("droplet.center_len", d.center_len)?;
        Ok(d)
    }

    fn validate_expansion(&self) -> Result<&ExpansionSpec> {
        let ex = require(&self.expansion, "expansion", self.kind)?;
        positive("expansion.integration_step_time", ex.integration_step_time)?;
        Ok(ex)
    }

    fn validate_noise(&self) -> Result<()> {
        if let Some(n) = &self.noise {
            if !(n.level >= 0.0 && n.level.is_finite()) {
                return Err(config(format!("noise.level must be >= 0, got {}", n.level)));
            }
            if n.seeds.is_empty() {
                return Err(config("noise.seeds must list at least one seed"));
            }
        }
        Ok(())
    }

    /// `T̃ > T_J + |x* − z|/c₀` for every droplet position `z` in `points`
    /// (the corners suffice for a box of positions).
    fn validate_window(
        &self,
        model: &dyn SourceModel,
        points: &[Point3],
        warnings: &mut Vec<String>,
    ) -> Result<()> {
        let m = require(&self.measurement, "measurement", self.kind)?;
        finite_point("measurement.x_star_len", m.x_star_len)?;
        let window = self.window_duration()?;
        if let Some(dur) = m.duration_time {
            if (dur - window).abs() > 1e-12 * window {
                return Err(config(format!(
                    "measurement.duration_time = {dur} must equal 2π/b = {window}"
                )));
            }
        }
        if m.intervals.is_some_and(|n| n < 2) {
            return Err(config("measurement.intervals must be at least 2"));
        }
        let t_j = model.support_end().ok_or_else(|| {
            config(format!(
                "{} has no finite support end, so no measurement window is admissible",
                model.name()
            ))
        })?;
        let c0 = model.c0();
        let far = points
            .iter()
            .map(|&z| vec3::dist(m.x_star_len, z))
            .fold(0.0, f64::max);
        let needed = t_j + far / c0;
        if !(m.t_start_time > needed) {
            return Err(config(format!(
                "window start T̃ = {} must exceed T_J + max|x* − z|/c0 = {t_j} + {far}/{c0} = {needed}",
                m.t_start_time
            )));
        }
        if t_j > window {
            warnings.push(format!(
                "V is supported up to t = {t_j}, beyond the reconstruction window [0, {window}]"
            ));
        }
        Ok(())
    }
}

fn validate_lse(lse: &LseSpec) -> Result<()> {
    positive("lse.dt_time", lse.dt_time)?;
    if lse.q == 0 || lse.n_r == 0 || lse.n_s == 0 || lse.n0 == 0 {
        return Err(config("lse.q, lse.n_r, lse.n_s and lse.n0 must be positive"));
    }
    Ok(())
}

fn lattice_corners(lo: Point3, hi: Point3) -> Vec<Point3> {
    (0..8)
        .map(|m| std::array::from_fn(|i| if m >> i & 1 == 1 { hi[i] } else { lo[i] }))
        .collect()
}

type ExprFn = Arc<dyn Fn(Point3, f64) -> f64 + Send + Sync>;

fn compile(expr: &str, what: &str) -> Result<ExprFn> {
    let node: Node<DefaultNumericTypes> =
        build_operator_tree(expr).map_err(|e| config(format!("source.{what}: {e}")))?;
    let eval = move |x: Point3, t: f64| -> std::result::Result<f64, String> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        for (name, v) in [("x1", x[0]), ("x2", x[1]), ("x3", x[2]), ("t", t)] {
            ctx.set_value(name.into(), Value::Float(v)).map_err(|e| e.to_string())?;
        }
        node.eval_number_with_context(&ctx).map_err(|e| e.to_string())
    };
    // surface unknown identifiers and type errors at load time
    eval([0.1, 0.2, 0.3], 0.5).map_err(|e| config(format!("source.{what} = \"{expr}\": {e}")))?;
    Ok(Arc::new(move |x, t| eval(x, t).unwrap_or(f64::NAN)))
}

/// Builds the source model named by `spec`.
pub fn build_source(spec: &SourceSpec, c0: f64) -> Result<Arc<dyn SourceModel>> {
    Ok(match spec {
        SourceSpec::PowerGrowth { p } => Arc::new(PowerGrowthSource::new(*p, c0).map_err(to_config)?),
        SourceSpec::CubicPulse { duration_time } => {
            Arc::new(CubicPulseSource::new(*duration_time, c0).map_err(to_config)?)
        }
        SourceSpec::Expression {
            v,
            v_tt,
            laplacian,
            domain,
            support_end_time,
        } => {
            if let Some(t) = support_end_time {
                positive("source.support_end_time", *t)?;
            }
            let f = compile(v, "v")?;
            let causal: ExprFn = Arc::new(move |x, t| if t < 0.0 { 0.0 } else { f(x, t) });
            Arc::new(AnalyticSource {
                v: causal,
                v_tt: v_tt.as_deref().map(|e| compile(e, "v_tt")).transpose()?,
                laplacian: laplacian.as_deref().map(|e| compile(e, "laplacian")).transpose()?,
                domain: (*domain).into(),
                c0,
                support_end: *support_end_time,
                label: format!("expression V = {v}"),
            })
        }
    })
}

fn to_config(e: Error) -> Error {
    match e {
        Error::InvalidArgument(msg) => Error::Config(msg),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RECOVERY: &str = r#"
schema_version = 1
name = "recovery"
kind = "source-recovery"

[source]
model = "cubic-pulse"
duration_time = 1.0

[droplet]
radii_len = [1e-3]
riesz_b_per_time = 6.283185307179586

[measurement]
x_star_len = [1.2, 0.0, 0.0]
t_start_time = 3.1

[expansion]
terms = [20]

[recovery]
n_terms = 20
lattice_lo_len = [-0.12, -0.25, -0.25]
lattice_hi_len = [0.12, 0.25, 0.25]
spacing_len = 0.01
eval_time = 0.8
epsilon_time = 0.07

[noise]
convention = "relative"
level = 1e-3
seeds = [0, 1]
"#;

    #[test]
    fn parses_and_validates() {
        let s = Scenario::from_toml_str(RECOVERY).unwrap();
        assert_eq!(s.kind, ScenarioKind::SourceRecovery);
        assert!(s.validate().unwrap().is_empty());
        assert_eq!(s.trace_intervals(20), 160);
        let again = Scenario::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn early_window_is_rejected_with_the_inequality() {
        let text = RECOVERY.replace("t_start_time = 3.1", "t_start_time = 2.0");
        let err = Scenario::from_toml_str(&text).unwrap().validate().unwrap_err();
        assert!(err.is_config_error());
        assert!(err.to_string().contains("T_J + max|x* − z|/c0"), "{err}");
    }

    #[test]
    fn rejects_unknown_keys_versions_and_missing_sections() {
        let text = RECOVERY.replace("spacing_len", "spacing");
        assert!(Scenario::from_toml_str(&text).is_err());
        let text = RECOVERY.replace("schema_version = 1", "schema_version = 9");
        assert!(Scenario::from_toml_str(&text).unwrap().validate().is_err());
        let text = RECOVERY.replace("[recovery]", "[unused]");
        assert!(Scenario::from_toml_str(&text).is_err());
        let text = RECOVERY.replace("duration_time = 1.0", "duration_time = 1.0\n").replace(
            "t_start_time = 3.1",
            "t_start_time = 3.1\nduration_time = 2.0",
        );
        assert!(Scenario::from_toml_str(&text).unwrap().validate().is_err());
    }

    #[test]
    fn long_sources_warn() {
        let text = RECOVERY
            .replace("duration_time = 1.0", "duration_time = 1.5")
            .replace("t_start_time = 3.1", "t_start_time = 3.6");
        let warnings = Scenario::from_toml_str(&text).unwrap().validate().unwrap();
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn expression_sources_compile_and_fail_early() {
        let spec = SourceSpec::Expression {
            v: "t * x2".into(),
            v_tt: Some("0.0".into()),
            laplacian: Some("0.0".into()),
            domain: DomainSpec::Ball {
                center_len: [0.0; 3],
                radius_len: 1.0,
            },
            support_end_time: Some(1.0),
        };
        let m = build_source(&spec, 1.0).unwrap();
        assert_eq!(m.value([0.0, 2.0, 0.0], 0.5), 1.0);
        assert_eq!(m.value([0.0, 2.0, 0.0], -0.5), 0.0);
        assert_eq!(m.source([0.0, 2.0, 0.0], 0.5), 0.0);
        let bad = SourceSpec::Expression {
            v: "t * y".into(),
            v_tt: None,
            laplacian: None,
            domain: DomainSpec::Ball {
                center_len: [0.0; 3],
                radius_len: 1.0,
            },
            support_end_time: None,
        };
        assert!(build_source(&bad, 1.0).err().unwrap().is_config_error());
    }
}
