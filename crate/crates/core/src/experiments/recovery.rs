//! Source recovery from single-receiver traces over a lattice of droplet
//! positions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{synthesize_measurement, MeasurementTrace, NoiseConvention};
use crate::error::{Error, Result};
use crate::experiments::noise::add_noise;
use crate::field::SourceModel;
use crate::inversion::{
    assemble_source, relative_l2_error, riesz_coefficients, Lattice, Mollifier, ReconstructedField,
    SourceReconstruction,
};
use crate::spectrum::{modes_l0, Droplet, EigenMode};
use crate::vec3::Point3;

/// Everything but the noise draw.
#[derive(Debug, Clone)]
pub struct RecoveryParams {
    pub radius: f64,
    pub riesz_b: f64,
    pub x_star: Point3,
    pub t_start: f64,
    /// Terms used both to simulate the trace and to invert it.
    pub n_terms: usize,
    pub trace_intervals: usize,
    /// Quadrature step for the memory integrals of the simulated trace.
    pub integration_step: f64,
    pub lattice: Lattice,
    pub eval_time: f64,
    pub mollifier: Mollifier,
}

/// Noise applied to every trace; position `i` uses ChaCha stream `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub convention: NoiseConvention,
    pub level: f64,
    pub seed: u64,
}

/// Noiseless traces, one per lattice point, in lattice order.
#[derive(Debug, Clone)]
pub struct CleanTraces {
    pub modes: Vec<EigenMode>,
    pub traces: Vec<MeasurementTrace>,
}

fn droplet_at(params: &RecoveryParams, z: Point3, c0: f64) -> Result<Droplet> {
    Droplet::new(z, params.radius, params.riesz_b, c0)
}

/// Simulates `U(x*, ·)` on the measurement window for every lattice point.
pub fn synthesize_traces(model: &dyn SourceModel, params: &RecoveryParams) -> Result<CleanTraces> {
    let c0 = model.c0();
    let modes = modes_l0(&droplet_at(params, [0.0; 3], c0)?, params.n_terms)?;
    let traces = params
        .lattice
        .points()
        .into_par_iter()
        .map(|z| {
            let d = droplet_at(params, z, c0)?;
            synthesize_measurement(
                &modes,
                &d,
                model,
                params.x_star,
                params.t_start,
                params.trace_intervals,
                params.n_terms,
                params.integration_step,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CleanTraces { modes, traces })
}

/// Time grid of the reconstruction: `eval_time ± 2n_tΔτ`.
pub fn reconstruction_times(params: &RecoveryParams) -> (f64, usize) {
    let margin = params.mollifier.second_derivative_margin();
    let t0 = params.eval_time - margin as f64 * params.mollifier.dtau();
    (t0, 2 * margin + 1)
}

/// `V_N` on the lattice and the time grid around `eval_time`, after
/// optionally corrupting each trace.
pub fn reconstruct_field(
    clean: &CleanTraces,
    params: &RecoveryParams,
    c0: f64,
    noise: Option<NoiseSpec>,
) -> Result<ReconstructedField> {
    if clean.traces.len() != params.lattice.len() {
        return Err(Error::invalid("trace count does not match the lattice"));
    }
    let (t0, n_times) = reconstruction_times(params);
    let dt = params.mollifier.dtau();
    let window = 2.0 * std::f64::consts::PI / params.riesz_b;
    if t0 < 0.0 || t0 + (n_times - 1) as f64 * dt > window {
        return Err(Error::OutsideDomain(format!(
            "reconstruction times [{t0}, {}] leave the window [0, {window}]",
            t0 + (n_times - 1) as f64 * dt
        )));
    }
    let points = params.lattice.points();
    let rows = clean
        .traces
        .par_iter()
        .zip(points.par_iter())
        .enumerate()
        .map(|(i, (trace, &z))| {
            let noisy;
            let trace = match noise {
                Some(n) => {
                    noisy = add_noise(trace, n.convention, n.level, n.seed, i as u64)?;
                    &noisy
                }
                None => trace,
            };
            let d = droplet_at(params, z, c0)?;
            let coeffs = riesz_coefficients(trace, &d, &clean.modes, params.n_terms)?;
            Ok((0..n_times).map(|m| coeffs.evaluate(t0 + m as f64 * dt)).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    ReconstructedField::new(params.lattice, t0, dt, n_times, params.n_terms, rows.concat())
}

/// Relative L² errors in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceErrors {
    pub v: f64,
    pub v_tt: f64,
    pub source: f64,
    /// Points compared for `V` and for `V_tt`, `J`.
    pub v_points: usize,
    pub derivative_points: usize,
}

/// Index of the lattice plane `x₁ = x1` along the first axis.
pub fn plane_index(lattice: &Lattice, x1: f64) -> Result<usize> {
    let k = (x1 - lattice.origin[0]) / lattice.spacing;
    let i = k.round();
    if (k - i).abs() > 1e-9 || i < 0.0 || i as usize >= lattice.dims[0] {
        return Err(Error::invalid(format!("x₁ = {x1} is not a lattice plane")));
    }
    Ok(i as usize)
}

/// Values of one `x₁` plane at one time index, with the plane's points.
pub fn plane_values(
    lattice: &Lattice,
    values: &[f64],
    n_times: usize,
    plane: usize,
    m: usize,
) -> (Vec<Point3>, Vec<f64>) {
    let mut pts = Vec::with_capacity(lattice.dims[1] * lattice.dims[2]);
    let mut out = Vec::with_capacity(pts.capacity());
    for j in 0..lattice.dims[1] {
        for k in 0..lattice.dims[2] {
            pts.push(lattice.point(plane, j, k));
            out.push(values[lattice.index(plane, j, k) * n_times + m]);
        }
    }
    (pts, out)
}

/// Compares the reconstruction on the plane `x₁ = x1` at `eval_time` against
/// the model's closed forms.
pub fn slice_errors(
    model: &dyn SourceModel,
    field: &ReconstructedField,
    rec: &SourceReconstruction,
    x1: f64,
) -> Result<SliceErrors> {
    let t = rec.time(rec.n_times / 2);
    let mid = field.n_times / 2;
    if (field.time(mid) - t).abs() > 1e-9 {
        return Err(Error::invalid("field and reconstruction are not centred on the same time"));
    }
    let (pts, v) = plane_values(&field.lattice, &field.values, field.n_times, plane_index(&field.lattice, x1)?, mid);
    let exact_v: Vec<f64> = pts.iter().map(|&p| model.value(p, t)).collect();
    let plane = plane_index(&rec.lattice, x1)?;
    let m = rec.n_times / 2;
    let (pts, v_tt) = plane_values(&rec.lattice, &rec.v_tt, rec.n_times, plane, m);
    let (_, j) = plane_values(&rec.lattice, &rec.source, rec.n_times, plane, m);
    let missing = || Error::invalid(format!("{} has no closed-form derivatives", model.name()));
    let exact_tt = pts
        .iter()
        .map(|&p| model.second_time_derivative(p, t).ok_or_else(missing))
        .collect::<Result<Vec<_>>>()?;
    let exact_j: Vec<f64> = pts.iter().map(|&p| model.source(p, t)).collect();
    Ok(SliceErrors {
        v: relative_l2_error(&v, &exact_v)?,
        v_tt: relative_l2_error(&v_tt, &exact_tt)?,
        source: relative_l2_error(&j, &exact_j)?,
        v_points: exact_v.len(),
        derivative_points: exact_j.len(),
    })
}

/// One full noisy reconstruction and its slice errors.
pub fn recover_and_score(
    model: &dyn SourceModel,
    clean: &CleanTraces,
    params: &RecoveryParams,
    noise: Option<NoiseSpec>,
    x1: f64,
) -> Result<(ReconstructedField, SourceReconstruction, SliceErrors)> {
    let field = reconstruct_field(clean, params, model.c0(), noise)?;
    let rec = assemble_source(&field, model.c0(), &params.mollifier)?;
    let errors = slice_errors(model, &field, &rec, x1)?;
    Ok((field, rec, errors))
}
