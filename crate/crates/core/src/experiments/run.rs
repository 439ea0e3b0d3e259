//! Scenario execution and run reports.
//!
//! Every run writes `report.json` (deterministic for a fixed scenario) and
//! `timing.json` (wall-clock seconds per stage) into its output directory,
//! plus the CSV data files listed in the report.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{synthesize_measurement, ExpansionEvaluator, MeasurementTrace, NoiseConvention};
use crate::error::{Error, Result};
use crate::experiments::noise::add_noise;
use crate::experiments::recovery::{
    plane_index, plane_values, reconstruction_times, recover_and_score, synthesize_traces, CleanTraces,
    NoiseSpec, RecoveryParams, SliceErrors,
};
use crate::experiments::scenario::{Scenario, ScenarioKind, SCHEMA_VERSION};
use crate::field::SourceModel;
use crate::forward::{exterior_horizon, scattered_field, solve_lse};
use crate::inversion::{
    choose_truncation, relative_l2_error, riesz_coefficients, select_epsilon, KernelScaling, Lattice,
    Mollifier, ReconstructedField, SourceReconstruction, Truncation,
};
use crate::output::{write_columns, write_csv, write_json};
use crate::quadrature::BallQuadrature;
use crate::spectrum::{
    modes_l0, spectral_mass_partial_sum, validate_eigensystem, validation_lattice, write_residuals_csv,
    Droplet, EigenMode, EigenResidual,
};
use crate::spline::build_spline_basis;
use crate::vec3::{self, Point3};

/// Environment variable that replaces the output root.
pub const OUTPUT_DIR_ENV: &str = "DROPLET_OUTPUT_DIR";

/// Relative size below which the field counts as zero before first arrival.
pub const CAUSALITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub name: String,
    pub kind: ScenarioKind,
    /// The scenario exactly as run.
    pub scenario: Scenario,
    pub warnings: Vec<String>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub results: RunResults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RunResults {
    EigensystemTable(EigensystemResults),
    SpectralSums(SpectralResults),
    ForwardComparison(ForwardResults),
    SourceRecovery(RecoveryResults),
    TruncationSweep(SweepResults),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigensystemResults {
    pub radius: f64,
    pub n_r: usize,
    pub n_s: usize,
    pub points: usize,
    pub residuals: Vec<EigenResidual>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralRow {
    pub n: usize,
    /// `Σ avg²/λ`.
    pub mass: f64,
    /// `mass / 4πa`.
    pub mass_fraction: f64,
    /// `Σ (n − 1/2)²(∫_B e)²` on the unit ball.
    pub weighted: f64,
    /// `|weighted − 4/π| / (4/π)`.
    pub weighted_relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResults {
    pub radius: f64,
    pub rows: Vec<SpectralRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationComparison {
    pub n: usize,
    /// `max |W_N|` over all samples.
    pub max_abs: f64,
    /// `max |W_LSE − W_N|` over samples with `t ≥ compare_from`.
    pub max_error: f64,
    /// `max_error / max |W_N|`.
    pub relative_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausalityCheck {
    /// `|x − z|/c₀ − a/c₀`: nothing may arrive earlier.
    pub cutoff_time: f64,
    pub samples_checked: usize,
    /// Largest `|W_LSE|` and `|W_N|` before the cutoff.
    pub max_lse: f64,
    pub max_expansion: f64,
    /// Field scale the tolerance is relative to.
    pub scale: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardRun {
    pub radius: f64,
    pub c1: f64,
    pub chi1: f64,
    pub kappa: f64,
    /// `|x − z|/c₀`.
    pub arrival_time: f64,
    pub max_abs_lse: f64,
    pub comparisons: Vec<TruncationComparison>,
    pub causality: CausalityCheck,
    /// `W_1, …, W_N` at the requested time, with `W_LSE` there.
    pub partial_sums: Option<PartialSums>,
    pub data_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialSums {
    pub time: f64,
    pub lse: f64,
    pub values: Vec<f64>,
}

/// Quantities compared between two consecutive radii `a_i > a_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusPair {
    pub a_large: f64,
    pub a_small: f64,
    pub n: usize,
    /// `log(err_i/err_j) / log(a_i/a_j)` for `max |W_LSE − W_N|`.
    pub error_slope: f64,
    /// `max |W_N|(a_i) / max |W_N|(a_j)`.
    pub amplitude_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardResults {
    pub observer: Point3,
    pub compare_from: f64,
    pub runs: Vec<ForwardRun>,
    pub pairs: Vec<RadiusPair>,
    pub causality_passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeInfo {
    pub origin: Point3,
    pub spacing: f64,
    pub dims: [usize; 3],
    pub points: usize,
}

impl From<Lattice> for LatticeInfo {
    fn from(l: Lattice) -> Self {
        LatticeInfo {
            origin: l.origin,
            spacing: l.spacing,
            dims: l.dims,
            points: l.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierInfo {
    pub epsilon: f64,
    pub dtau: f64,
    pub n_t: usize,
    pub scaling: KernelScaling,
    pub first_moment: f64,
    /// How `epsilon` was chosen.
    pub selected_from_noise: bool,
    /// Lattice points lost at each end of every axis and of the time grid.
    pub shrink_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedErrors {
    pub seed: u64,
    pub errors: SliceErrors,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanErrors {
    pub v: f64,
    pub v_tt: f64,
    pub source: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResults {
    pub radius: f64,
    pub riesz_b: f64,
    pub n_terms: usize,
    pub trace_intervals: usize,
    pub eval_time: f64,
    pub slice_x1: f64,
    pub lattice: LatticeInfo,
    /// Lattice on which `V_tt`, `ΔV` and `J` are available.
    pub shrunk_lattice: LatticeInfo,
    pub mollifier: MollifierInfo,
    pub noise_convention: Option<NoiseConvention>,
    pub noise_level: f64,
    pub noiseless: SliceErrors,
    pub seeds: Vec<SeedErrors>,
    /// Mean over seeds (the noiseless errors when no noise is configured).
    pub mean: MeanErrors,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    /// Relative L² error of `V_N` against `V` in percent, mean over seeds.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    pub radius: f64,
    pub center: Point3,
    pub simulation_terms: usize,
    /// Absolute noise level `δ` used for the prediction.
    pub delta: f64,
    pub prediction: Truncation,
    pub rows: Vec<SweepRow>,
    pub best_n: usize,
    /// Errors decrease strictly with `N` over the whole sweep.
    pub monotone: bool,
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stages: Vec<(String, f64)>,
    pub total: f64,
}

impl Timing {
    fn record(&mut self, stage: impl Into<String>, since: Instant) {
        self.stages.push((stage.into(), since.elapsed().as_secs_f64()));
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub timing: Timing,
    pub dir: PathBuf,
}

/// Output directory: `$DROPLET_OUTPUT_DIR/<name>` when the variable is set,
/// else `output.dir`, else `out/<name>`.
pub fn output_dir(scenario: &Scenario) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(&scenario.name),
        _ => scenario
            .output
            .dir
            .clone()
            .unwrap_or_else(|| Path::new("out").join(&scenario.name)),
    }
}

/// Validates and runs `scenario`, writing everything under `dir`.
pub fn run_scenario(scenario: &Scenario, dir: &Path) -> Result<RunOutput> {
    let started = Instant::now();
    let warnings = scenario.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut timing = Timing::default();
    let mut outputs = Vec::new();
    let results = match scenario.kind {
        ScenarioKind::EigensystemTable => run_eigensystem(scenario, dir, &mut outputs, &mut timing)?,
        ScenarioKind::SpectralSums => run_spectral(scenario, dir, &mut outputs)?,
        ScenarioKind::ForwardComparison => run_forward(scenario, dir, &mut outputs, &mut timing)?,
        ScenarioKind::SourceRecovery => run_recovery(scenario, dir, &mut outputs, &mut timing)?,
        ScenarioKind::TruncationSweep => run_sweep(scenario, dir, &mut outputs, &mut timing)?,
    };
    outputs.push("report.json".into());
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        name: scenario.name.clone(),
        kind: scenario.kind,
        scenario: scenario.clone(),
        warnings,
        outputs,
        results,
    };
    write_json(&dir.join("report.json"), &report)?;
    timing.total = started.elapsed().as_secs_f64();
    write_json(&dir.join("timing.json"), &timing)?;
    Ok(RunOutput {
        report,
        timing,
        dir: dir.to_path_buf(),
    })
}

fn run_eigensystem(
    scenario: &Scenario,
    dir: &Path,
    outputs: &mut Vec<String>,
    timing: &mut Timing,
) -> Result<RunResults> {
    let spec = scenario.eigensystem.as_ref().expect("validated");
    let t = Instant::now();
    let rule = BallQuadrature::new(spec.n_r, spec.n_s)?;
    let mut modes = Vec::new();
    for l in 0..=spec.l_max {
        for m in 0..=l as i32 {
            for j in 1..=spec.j_max {
                modes.push(EigenMode::new(l, m, j, spec.radius_len)?);
            }
        }
    }
    let points: Vec<Point3> = validation_lattice(spec.points_per_axis, spec.cutoff_len)
        .into_iter()
        .map(|p| vec3::scale(spec.radius_len, p))
        .collect();
    let residuals = validate_eigensystem(&modes, &points, &rule)?;
    timing.record("residuals", t);
    write_residuals_csv(&dir.join("residuals.csv"), &residuals)?;
    outputs.push("residuals.csv".into());
    Ok(RunResults::EigensystemTable(EigensystemResults {
        radius: spec.radius_len,
        n_r: spec.n_r,
        n_s: spec.n_s,
        points: points.len(),
        residuals,
    }))
}

fn run_spectral(scenario: &Scenario, dir: &Path, outputs: &mut Vec<String>) -> Result<RunResults> {
    let spec = scenario.spectral.as_ref().expect("validated");
    let a = spec.radius_len;
    let target = 4.0 / PI;
    let max_n = *spec.terms.iter().max().expect("validated");
    let droplet = Droplet::new([0.0; 3], a, 1.0, 1.0)?;
    let modes = modes_l0(&droplet, max_n)?;
    let rows = spec
        .terms
        .iter()
        .map(|&n| {
            let mass = spectral_mass_partial_sum(a, n)?;
            let weighted: f64 = modes[..n].iter().map(EigenMode::scaled_unit_average).sum();
            Ok(SpectralRow {
                n,
                mass,
                mass_fraction: mass / (4.0 * PI * a),
                weighted,
                weighted_relative_gap: (weighted - target).abs() / target,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.mass.to_string(),
                r.mass_fraction.to_string(),
                r.weighted.to_string(),
                r.weighted_relative_gap.to_string(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("spectral_sums.csv"),
        &["n", "mass", "mass_fraction", "weighted", "weighted_relative_gap"],
        &table,
    )?;
    outputs.push("spectral_sums.csv".into());
    Ok(RunResults::SpectralSums(SpectralResults { radius: a, rows }))
}

fn radius_tag(a: f64) -> String {
    format!("{a:e}").replace('.', "p")
}

fn run_forward(
    scenario: &Scenario,
    dir: &Path,
    outputs: &mut Vec<String>,
    timing: &mut Timing,
) -> Result<RunResults> {
    let model = scenario.source_model()?;
    let d = scenario.droplet.as_ref().expect("validated");
    let lse = scenario.lse.as_ref().expect("validated");
    let ex = scenario.expansion.as_ref().expect("validated");
    let obs = scenario.observation.as_ref().expect("validated");
    let c0 = scenario.medium.c0_speed;
    let x = obs.x_len;
    let compare_from = obs.compare_from_time.unwrap_or(obs.t_from_time);
    let rule = Arc::new(BallQuadrature::new(lse.n_r, lse.n_s)?);
    let splines = build_spline_basis(lse.q, lse.dt_time)?;
    let n_max = *ex.terms.iter().max().expect("validated");
    let times: Vec<f64> = (0..obs.samples)
        .map(|k| obs.t_from_time + (obs.t_to_time - obs.t_from_time) * k as f64 / (obs.samples - 1) as f64)
        .collect();

    let mut runs = Vec::new();
    for &a in &d.radii_len {
        let droplet = Droplet::new(d.center_len, a, d.riesz_b_per_time, c0)?;
        let nearest = (vec3::dist(x, droplet.center) - a).max(0.0);
        let horizon = obs.t_to_time - nearest / c0 + 2.0 * lse.dt_time;
        let t = Instant::now();
        let history = solve_lse(
            model.as_ref(),
            &droplet,
            rule.clone(),
            &splines,
            horizon,
            lse.n0,
            lse.angular_interpolation,
        )?;
        timing.record(format!("lse a={a}"), t);
        if exterior_horizon(&history, x) < obs.t_to_time {
            return Err(Error::invalid("solver horizon does not reach the last observation time"));
        }
        let t = Instant::now();
        let lse_values = times
            .par_iter()
            .map(|&t| scattered_field(&history, x, t))
            .collect::<Result<Vec<_>>>()?;
        let modes = modes_l0(&droplet, n_max)?;
        let eval = ExpansionEvaluator::new(&modes, &droplet, model.as_ref(), x, ex.integration_step_time)?;
        let expansions: Vec<Vec<f64>> = ex
            .terms
            .iter()
            .map(|&n| times.par_iter().map(|&t| eval.w_n(t, n)).collect())
            .collect();
        timing.record(format!("expansion a={a}"), t);

        let max_abs_lse = lse_values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let comparisons: Vec<TruncationComparison> = ex
            .terms
            .iter()
            .zip(&expansions)
            .map(|(&n, w)| {
                let max_abs = w.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
                let max_error = times
                    .iter()
                    .zip(lse_values.iter().zip(w))
                    .filter(|(&t, _)| t >= compare_from)
                    .fold(0.0, |m: f64, (_, (l, w))| m.max((l - w).abs()));
                TruncationComparison {
                    n,
                    max_abs,
                    max_error,
                    relative_error: max_error / max_abs,
                }
            })
            .collect();

        let arrival = vec3::dist(x, droplet.center) / c0;
        let cutoff = arrival - a / c0;
        let early: Vec<usize> = (0..times.len()).filter(|&k| times[k] < cutoff).collect();
        let pre = |v: &[f64]| early.iter().fold(0.0, |m: f64, &k| m.max(v[k].abs()));
        let max_expansion = expansions.iter().map(|w| pre(w)).fold(0.0, f64::max);
        let max_lse = pre(&lse_values);
        let scale = comparisons
            .iter()
            .map(|c| c.max_abs)
            .fold(max_abs_lse, f64::max);
        let causality = CausalityCheck {
            cutoff_time: cutoff,
            samples_checked: early.len(),
            max_lse,
            max_expansion,
            scale,
            passed: max_lse.max(max_expansion) <= CAUSALITY_TOLERANCE * scale,
        };

        let partial_sums = match obs.partial_sum_time {
            Some(ts) => Some(PartialSums {
                time: ts,
                lse: scattered_field(&history, x, ts)?,
                values: (1..=n_max).map(|n| eval.w_n(ts, n)).collect(),
            }),
            None => None,
        };

        let file = format!("forward_a{}.csv", radius_tag(a));
        let incident: Vec<f64> = times.iter().map(|&t| if t < 0.0 { 0.0 } else { model.value(x, t) }).collect();
        let names: Vec<String> = ex.terms.iter().map(|n| format!("W_{n}")).collect();
        let mut header = vec!["t", "V", "W_LSE"];
        header.extend(names.iter().map(String::as_str));
        let mut columns: Vec<&[f64]> = vec![&times, &incident, &lse_values];
        columns.extend(expansions.iter().map(Vec::as_slice));
        write_columns(&dir.join(&file), &header, &columns)?;
        outputs.push(file.clone());

        runs.push(ForwardRun {
            radius: a,
            c1: droplet.c1(),
            chi1: droplet.chi1(),
            kappa: droplet.chi1() * a * a / (c0 * c0),
            arrival_time: arrival,
            max_abs_lse,
            comparisons,
            causality,
            partial_sums,
            data_file: file,
        });
    }

    let mut pairs = Vec::new();
    for w in runs.windows(2) {
        let (big, small) = if w[0].radius > w[1].radius { (&w[0], &w[1]) } else { (&w[1], &w[0]) };
        let ratio = (big.radius / small.radius).ln();
        for (cb, cs) in big.comparisons.iter().zip(&small.comparisons) {
            pairs.push(RadiusPair {
                a_large: big.radius,
                a_small: small.radius,
                n: cb.n,
                error_slope: (cb.max_error / cs.max_error).ln() / ratio,
                amplitude_ratio: cb.max_abs / cs.max_abs,
            });
        }
    }
    let causality_passed = runs.iter().all(|r| r.causality.passed);
    Ok(RunResults::ForwardComparison(ForwardResults {
        observer: x,
        compare_from,
        runs,
        pairs,
        causality_passed,
    }))
}

/// Recovery parameters with a placeholder mollifier.
fn recovery_params(scenario: &Scenario) -> Result<RecoveryParams> {
    let d = scenario.droplet.as_ref().expect("validated");
    let m = scenario.measurement.as_ref().expect("validated");
    let ex = scenario.expansion.as_ref().expect("validated");
    let r = scenario.recovery.as_ref().expect("validated");
    let lattice = Lattice::from_bounds(r.lattice_lo_len, r.lattice_hi_len, r.spacing_len)
        .map_err(|e| Error::Config(format!("recovery lattice: {e}")))?;
    let n_sim = ex.terms.iter().copied().max().unwrap_or(r.n_terms).max(r.n_terms);
    Ok(RecoveryParams {
        radius: d.radii_len[0],
        riesz_b: d.riesz_b_per_time,
        x_star: m.x_star_len,
        t_start: m.t_start_time,
        n_terms: n_sim,
        trace_intervals: scenario.trace_intervals(n_sim),
        integration_step: ex.integration_step_time,
        lattice,
        eval_time: r.eval_time,
        mollifier: Mollifier::with_scaling(1, r.spacing_len, r.kernel_scaling)?,
    })
}

/// Mollifier radius from the noise level when none is configured: `δ_f` is
/// the absolute level, or the relative level times `max |V_N|`; `M₂` is the
/// configured bound or the largest second difference of the noiseless `V_N`
/// at the lattice centre.
fn automatic_epsilon(scenario: &Scenario, clean: &CleanTraces, params: &RecoveryParams) -> Result<f64> {
    let r = scenario.recovery.as_ref().expect("validated");
    let h = r.spacing_len;
    let centre = params.lattice.index(
        params.lattice.dims[0] / 2,
        params.lattice.dims[1] / 2,
        params.lattice.dims[2] / 2,
    );
    let z = params.lattice.points()[centre];
    let droplet = Droplet::new(z, params.radius, params.riesz_b, scenario.medium.c0_speed)?;
    let coeffs = riesz_coefficients(&clean.traces[centre], &droplet, &clean.modes, r.n_terms)?;
    let window = 2.0 * PI / params.riesz_b;
    let steps = (window / h).floor() as usize;
    let v: Vec<f64> = (0..=steps).map(|k| coeffs.evaluate(k as f64 * h)).collect();
    let m2 = match r.m2_bound {
        Some(m2) => m2,
        None => v
            .windows(3)
            .map(|w| (w[0] - 2.0 * w[1] + w[2]).abs() / (h * h))
            .fold(0.0, f64::max),
    };
    let delta_f = match &scenario.noise {
        Some(n) => match n.convention {
            NoiseConvention::Absolute => n.level,
            NoiseConvention::Relative => n.level * v.iter().fold(0.0, |m: f64, x| m.max(x.abs())),
        },
        None => 0.0,
    };
    if !(m2 > 0.0) {
        return Err(Error::Config("cannot choose epsilon: V_N has no curvature; set recovery.epsilon_time".into()));
    }
    let eps = select_epsilon(delta_f, m2)?;
    Ok((eps / h).ceil().max(2.0) * h)
}

fn write_slices(
    dir: &Path,
    tag: &str,
    model: &dyn SourceModel,
    field: &ReconstructedField,
    rec: &SourceReconstruction,
    x1: f64,
    outputs: &mut Vec<String>,
) -> Result<()> {
    let mid = field.n_times / 2;
    let t = field.time(mid);
    let (pts, v) = plane_values(&field.lattice, &field.values, field.n_times, plane_index(&field.lattice, x1)?, mid);
    let x2: Vec<f64> = pts.iter().map(|p| p[1]).collect();
    let x3: Vec<f64> = pts.iter().map(|p| p[2]).collect();
    let exact: Vec<f64> = pts.iter().map(|&p| model.value(p, t)).collect();
    let file = format!("slice_v_{tag}.csv");
    write_columns(&dir.join(&file), &["x2", "x3", "V", "V_exact"], &[&x2, &x3, &v, &exact])?;
    outputs.push(file);

    let plane = plane_index(&rec.lattice, x1)?;
    let m = rec.n_times / 2;
    let (pts, v_tt) = plane_values(&rec.lattice, &rec.v_tt, rec.n_times, plane, m);
    let (_, lap) = plane_values(&rec.lattice, &rec.laplacian, rec.n_times, plane, m);
    let (_, j) = plane_values(&rec.lattice, &rec.source, rec.n_times, plane, m);
    let x2: Vec<f64> = pts.iter().map(|p| p[1]).collect();
    let x3: Vec<f64> = pts.iter().map(|p| p[2]).collect();
    let tt_exact: Vec<f64> = pts
        .iter()
        .map(|&p| model.second_time_derivative(p, t).unwrap_or(f64::NAN))
        .collect();
    let j_exact: Vec<f64> = pts.iter().map(|&p| model.source(p, t)).collect();
    let file = format!("slice_source_{tag}.csv");
    write_columns(
        &dir.join(&file),
        &["x2", "x3", "V_tt", "V_tt_exact", "laplacian", "J", "J_exact"],
        &[&x2, &x3, &v_tt, &tt_exact, &lap, &j, &j_exact],
    )?;
    outputs.push(file);
    Ok(())
}

fn run_recovery(
    scenario: &Scenario,
    dir: &Path,
    outputs: &mut Vec<String>,
    timing: &mut Timing,
) -> Result<RunResults> {
    let model = scenario.source_model()?;
    let r = scenario.recovery.as_ref().expect("validated");
    let mut params = recovery_params(scenario)?;
    let t = Instant::now();
    let clean = synthesize_traces(model.as_ref(), &params)?;
    timing.record("synthesize traces", t);
    params.n_terms = r.n_terms;

    let (epsilon, selected) = match r.epsilon_time {
        Some(eps) => (eps, false),
        None => (automatic_epsilon(scenario, &clean, &params)?, true),
    };
    params.mollifier = Mollifier::from_epsilon(epsilon, r.spacing_len, r.kernel_scaling)
        .map_err(|e| Error::Config(format!("recovery.epsilon_time: {e}")))?;
    let margin = params.mollifier.second_derivative_margin();
    let shrunk = params
        .lattice
        .shrink(margin)
        .map_err(|e| Error::Config(format!("recovery lattice after mollifier shrinkage: {e}")))?;
    let (t0, n_times) = reconstruction_times(&params);
    let window = 2.0 * PI / params.riesz_b;
    if t0 < 0.0 || t0 + (n_times - 1) as f64 * r.spacing_len > window {
        return Err(Error::Config(format!(
            "eval_time {} ± {} leaves the reconstruction window [0, {window}]",
            r.eval_time,
            margin as f64 * r.spacing_len
        )));
    }

    let centre = params.lattice.index(
        params.lattice.dims[0] / 2,
        params.lattice.dims[1] / 2,
        params.lattice.dims[2] / 2,
    );
    clean.traces[centre].write_csv(&dir.join("trace_center.csv"))?;
    outputs.push("trace_center.csv".into());
    if scenario.output.all_traces {
        for (i, trace) in clean.traces.iter().enumerate() {
            let file = format!("traces/trace_{i:05}.csv");
            trace.write_csv(&dir.join(&file))?;
            outputs.push(file);
        }
    }

    let t = Instant::now();
    let (field, rec, noiseless) = recover_and_score(model.as_ref(), &clean, &params, None, r.slice_x1_len)?;
    timing.record("noiseless reconstruction", t);
    write_slices(dir, "noiseless", model.as_ref(), &field, &rec, r.slice_x1_len, outputs)?;

    let mut seeds = Vec::new();
    if let Some(n) = &scenario.noise {
        for &seed in &n.seeds {
            let t = Instant::now();
            let spec = NoiseSpec {
                convention: n.convention,
                level: n.level,
                seed,
            };
            let (field, rec, errors) =
                recover_and_score(model.as_ref(), &clean, &params, Some(spec), r.slice_x1_len)?;
            timing.record(format!("reconstruction seed {seed}"), t);
            write_slices(dir, &format!("seed{seed}"), model.as_ref(), &field, &rec, r.slice_x1_len, outputs)?;
            seeds.push(SeedErrors { seed, errors });
        }
    }
    let mean = if seeds.is_empty() {
        MeanErrors {
            v: noiseless.v,
            v_tt: noiseless.v_tt,
            source: noiseless.source,
        }
    } else {
        let k = seeds.len() as f64;
        MeanErrors {
            v: seeds.iter().map(|s| s.errors.v).sum::<f64>() / k,
            v_tt: seeds.iter().map(|s| s.errors.v_tt).sum::<f64>() / k,
            source: seeds.iter().map(|s| s.errors.source).sum::<f64>() / k,
        }
    };

    let m = &params.mollifier;
    Ok(RunResults::SourceRecovery(RecoveryResults {
        radius: params.radius,
        riesz_b: params.riesz_b,
        n_terms: params.n_terms,
        trace_intervals: params.trace_intervals,
        eval_time: params.eval_time,
        slice_x1: r.slice_x1_len,
        lattice: params.lattice.into(),
        shrunk_lattice: shrunk.into(),
        mollifier: MollifierInfo {
            epsilon: m.epsilon(),
            dtau: m.dtau(),
            n_t: m.n_t(),
            scaling: m.scaling(),
            first_moment: m.first_moment(),
            selected_from_noise: selected,
            shrink_points: margin,
        },
        noise_convention: scenario.noise.as_ref().map(|n| n.convention),
        noise_level: scenario.noise.as_ref().map_or(0.0, |n| n.level),
        noiseless,
        seeds,
        mean,
    }))
}

fn run_sweep(
    scenario: &Scenario,
    dir: &Path,
    outputs: &mut Vec<String>,
    timing: &mut Timing,
) -> Result<RunResults> {
    let model = scenario.source_model()?;
    let d = scenario.droplet.as_ref().expect("validated");
    let m = scenario.measurement.as_ref().expect("validated");
    let ex = scenario.expansion.as_ref().expect("validated");
    let s = scenario.sweep.as_ref().expect("validated");
    let a = d.radii_len[0];
    let droplet = Droplet::new(d.center_len, a, d.riesz_b_per_time, scenario.medium.c0_speed)?;
    let n_modes = s.simulation_terms.max(*s.terms.iter().max().expect("validated"));
    let modes = modes_l0(&droplet, n_modes)?;
    let t = Instant::now();
    let clean = synthesize_measurement(
        &modes,
        &droplet,
        model.as_ref(),
        m.x_star_len,
        m.t_start_time,
        scenario.trace_intervals(s.simulation_terms),
        s.simulation_terms,
        ex.integration_step_time,
    )?;
    timing.record("synthesize trace", t);
    clean.write_csv(&dir.join("trace.csv"))?;
    outputs.push("trace.csv".into());

    let window = 2.0 * PI / d.riesz_b_per_time;
    let eval_t: Vec<f64> = (0..s.eval_points)
        .map(|k| window * k as f64 / (s.eval_points - 1) as f64)
        .collect();
    let exact: Vec<f64> = eval_t.iter().map(|&t| model.value(droplet.center, t)).collect();
    let traces: Vec<MeasurementTrace> = match &scenario.noise {
        Some(n) => n
            .seeds
            .iter()
            .map(|&seed| add_noise(&clean, n.convention, n.level, seed, 0))
            .collect::<Result<_>>()?,
        None => vec![clean.clone()],
    };
    let t = Instant::now();
    let rows = s
        .terms
        .iter()
        .map(|&n| {
            let mut total = 0.0;
            for trace in &traces {
                let c = riesz_coefficients(trace, &droplet, &modes, n)?;
                let rec: Vec<f64> = eval_t.iter().map(|&t| c.evaluate(t)).collect();
                total += relative_l2_error(&rec, &exact)?;
            }
            Ok(SweepRow {
                n,
                error: total / traces.len() as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    timing.record("sweep", t);

    let delta = match &scenario.noise {
        Some(n) => match n.convention {
            NoiseConvention::Absolute => n.level,
            NoiseConvention::Relative => n.level * clean.samples.iter().fold(0.0, |m: f64, u| m.max(u.abs())),
        },
        None => 0.0,
    };
    let prediction = choose_truncation(delta, a)?;
    let best_n = rows
        .iter()
        .min_by(|x, y| x.error.total_cmp(&y.error))
        .map(|r| r.n)
        .expect("validated");
    let mut sorted = rows.clone();
    sorted.sort_by_key(|r| r.n);
    let monotone = sorted.windows(2).all(|w| w[1].error < w[0].error);
    let table: Vec<Vec<String>> = rows.iter().map(|r| vec![r.n.to_string(), r.error.to_string()]).collect();
    write_csv(&dir.join("truncation_sweep.csv"), &["n", "relative_l2_percent"], &table)?;
    outputs.push("truncation_sweep.csv".into());
    Ok(RunResults::TruncationSweep(SweepResults {
        radius: a,
        center: d.center_len,
        simulation_terms: s.simulation_terms,
        delta,
        prediction,
        rows,
        best_n,
        monotone,
    }))
}
