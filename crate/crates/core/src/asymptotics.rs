//! The droplet expansion `W_N` and synthetic measurements built from it.
//!
//! With `R = |x − z|`, `τ = t − R/c₀` and the radial modes of the droplet,
//!
//! ```text
//! ξₙ = −avgₙ² / (4πRλₙ) · V(z, τ),
//! ζₙ =  αₙ ∫₀^τ sin(ωₙ(τ − u)) V(z, u) du,     αₙ = ωₙ avgₙ² / (4πRλₙ),
//! ```
//!
//! and `W_N = Σ_{n≤N} (ξₙ + ζₙ)`. For radial modes `αₙ = 2c₁/((n − 1/2)πR)`.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SourceModel;
use crate::output::write_columns;
use crate::spectrum::{Droplet, EigenMode};
use crate::vec3::{self, Point3};

/// The two parts of one expansion term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTerm {
    pub n: usize,
    /// Instantaneous term `ξₙ`.
    pub xi: f64,
    /// Memory term `ζₙ`.
    pub zeta: f64,
}

impl ExpansionTerm {
    pub fn total(&self) -> f64 {
        self.xi + self.zeta
    }
}

pub(crate) fn mode_omega(mode: &EigenMode, droplet: &Droplet) -> f64 {
    mode.omega
        .unwrap_or_else(|| droplet.c1() / mode.lambda.sqrt())
}

/// `αₙ = ωₙ avgₙ² / (4πRλₙ)`.
pub fn memory_amplitude(mode: &EigenMode, droplet: &Droplet, distance: f64) -> f64 {
    mode_omega(mode, droplet) * mode.avg * mode.avg / (4.0 * PI * distance * mode.lambda)
}

/// Weight of the instantaneous term, `avgₙ² / (4πRλₙ)`.
pub fn instantaneous_amplitude(mode: &EigenMode, distance: f64) -> f64 {
    mode.avg * mode.avg / (4.0 * PI * distance * mode.lambda)
}

/// Composite Simpson nodes and weights on `[0, end]` with step at most `h`.
fn simpson(end: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
    if end <= 0.0 {
        return (vec![0.0], vec![0.0]);
    }
    let mut n = (end / h).ceil() as usize;
    n = n.max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let step = end / n as f64;
    let nodes = (0..=n).map(|k| k as f64 * step).collect();
    let weights = (0..=n)
        .map(|k| {
            let c = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * step / 3.0
        })
        .collect();
    (nodes, weights)
}

/// Evaluates the expansion at one receiver for a fixed droplet and mode set.
///
/// The memory integrals use composite Simpson with step
/// `min(dt, 2π/(8ω_max))`. Once `τ` passes the end of the time support of
/// `V(z, ·)`, the integrals reduce to the fixed moments
/// `∫ cos(ωu)V du` and `∫ sin(ωu)V du`, computed once.
pub struct ExpansionEvaluator<'a> {
    model: &'a dyn SourceModel,
    droplet: Droplet,
    x: Point3,
    distance: f64,
    omega: Vec<f64>,
    inst: Vec<f64>,
    alpha: Vec<f64>,
    step: f64,
    moments: Option<(f64, Vec<f64>, Vec<f64>)>,
}

impl<'a> ExpansionEvaluator<'a> {
    pub fn new(
        modes: &[EigenMode],
        droplet: &Droplet,
        model: &'a dyn SourceModel,
        x: Point3,
        dt: f64,
    ) -> Result<Self> {
        let distance = vec3::dist(x, droplet.center);
        if !(distance > 0.0) {
            return Err(Error::OutsideDomain("receiver coincides with the droplet centre".into()));
        }
        if modes.is_empty() {
            return Err(Error::invalid("expansion needs at least one mode"));
        }
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("quadrature step must be positive, got {dt}")));
        }
        let omega: Vec<f64> = modes.iter().map(|m| mode_omega(m, droplet)).collect();
        let omega_max = omega.iter().cloned().fold(0.0, f64::max);
        let step = dt.min(2.0 * PI / (8.0 * omega_max));
        let inst = modes.iter().map(|m| instantaneous_amplitude(m, distance)).collect();
        let alpha = modes.iter().map(|m| memory_amplitude(m, droplet, distance)).collect();
        let z = droplet.center;
        let moments = model.support_end().map(|end| {
            let (u, w) = simpson(end, step);
            let v: Vec<f64> = u.iter().map(|&s| model.value(z, s)).collect();
            let cos_m = omega
                .iter()
                .map(|&om| (0..u.len()).map(|k| w[k] * (om * u[k]).cos() * v[k]).sum())
                .collect();
            let sin_m = omega
                .iter()
                .map(|&om| (0..u.len()).map(|k| w[k] * (om * u[k]).sin() * v[k]).sum())
                .collect();
            (end, cos_m, sin_m)
        });
        Ok(ExpansionEvaluator {
            model,
            droplet: *droplet,
            x,
            distance,
            omega,
            inst,
            alpha,
            step,
            moments,
        })
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn receiver(&self) -> Point3 {
        self.x
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Terms `n = 1..=N` at time `t`.
    pub fn terms(&self, t: f64, n_terms: usize) -> Vec<ExpansionTerm> {
        let n_terms = n_terms.min(self.omega.len());
        let tau = t - self.distance / self.droplet.c0;
        if tau <= 0.0 {
            return (1..=n_terms)
                .map(|n| ExpansionTerm { n, xi: 0.0, zeta: 0.0 })
                .collect();
        }
        let z = self.droplet.center;
        let v_now = self.model.value(z, tau);
        match &self.moments {
            Some((end, cos_m, sin_m)) if tau >= *end => (0..n_terms)
                .map(|k| {
                    let (s, c) = (self.omega[k] * tau).sin_cos();
                    ExpansionTerm {
                        n: k + 1,
                        xi: -self.inst[k] * v_now,
                        zeta: self.alpha[k] * (s * cos_m[k] - c * sin_m[k]),
                    }
                })
                .collect(),
            _ => {
                let (u, w) = simpson(tau, self.step);
                let v: Vec<f64> = u.iter().map(|&s| self.model.value(z, s)).collect();
                (0..n_terms)
                    .map(|k| {
                        let om = self.omega[k];
                        let integral: f64 = (0..u.len())
                            .map(|i| w[i] * (om * (tau - u[i])).sin() * v[i])
                            .sum();
                        ExpansionTerm {
                            n: k + 1,
                            xi: -self.inst[k] * v_now,
                            zeta: self.alpha[k] * integral,
                        }
                    })
                    .collect()
            }
        }
    }

    /// `W_N(x, t)`, summed in order `n = 1..=N`.
    pub fn w_n(&self, t: f64, n_terms: usize) -> f64 {
        self.terms(t, n_terms).iter().map(|term| term.total()).sum()
    }
}

/// One expansion term at `(x, t)`; `dt` bounds the memory-integral step.
pub fn expansion_term(
    mode: &EigenMode,
    droplet: &Droplet,
    model: &dyn SourceModel,
    x: Point3,
    t: f64,
    dt: f64,
) -> Result<ExpansionTerm> {
    let eval = ExpansionEvaluator::new(std::slice::from_ref(mode), droplet, model, x, dt)?;
    let mut term = eval.terms(t, 1)[0];
    term.n = mode.j;
    Ok(term)
}

/// `W_N(x, t) = Σ_{n≤N} (ξₙ + ζₙ)`.
pub fn expansion_w_n(
    modes: &[EigenMode],
    droplet: &Droplet,
    model: &dyn SourceModel,
    x: Point3,
    t: f64,
    n_terms: usize,
    dt: f64,
) -> Result<f64> {
    if n_terms > modes.len() {
        return Err(Error::invalid(format!(
            "truncation N = {n_terms} exceeds the {} available modes",
            modes.len()
        )));
    }
    Ok(ExpansionEvaluator::new(&modes[..n_terms.max(1)], droplet, model, x, dt)?.w_n(t, n_terms))
}

/// How noise was applied to a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseConvention {
    /// `U(1 + δ̄η)`.
    Relative,
    /// `U + δη`.
    Absolute,
}

/// Noise metadata attached to a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseInfo {
    pub convention: NoiseConvention,
    pub level: f64,
    pub seed: u64,
}

/// Uniform samples of `U(x*, t)` on `[T̃, T̃ + 2π/b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementTrace {
    pub x_star: Point3,
    pub t_start: f64,
    pub duration: f64,
    /// `samples[k] = U(x*, t_start + k·duration/(len−1))`.
    pub samples: Vec<f64>,
    pub noise: Option<NoiseInfo>,
}

impl MeasurementTrace {
    pub fn new(x_star: Point3, t_start: f64, duration: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::invalid("a trace needs at least three samples"));
        }
        if !(duration > 0.0) {
            return Err(Error::invalid(format!("trace duration must be positive, got {duration}")));
        }
        Ok(MeasurementTrace {
            x_star,
            t_start,
            duration,
            samples,
            noise: None,
        })
    }

    pub fn step(&self) -> f64 {
        self.duration / (self.samples.len() - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.samples.len()).map(|k| self.t_start + k as f64 * h).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_columns(path, &["t", "U"], &[&self.times(), &self.samples])
    }
}

/// Default number of sampling intervals in the window, `max(64, 8N)`.
pub fn default_trace_intervals(n_terms: usize) -> usize {
    64.max(8 * n_terms)
}

/// Checks `T̃ > T_end + |x* − z|/c₀`, the window condition of the inversion.
pub fn check_window(model: &dyn SourceModel, droplet: &Droplet, x_star: Point3, t_start: f64) -> Result<()> {
    let end = model.support_end().ok_or_else(|| {
        Error::invalid("the source has no finite time support, so no measurement window is admissible")
    })?;
    let arrival = end + vec3::dist(x_star, droplet.center) / droplet.c0;
    if !(t_start > arrival) {
        return Err(Error::invalid(format!(
            "window start T~ = {t_start} must exceed T_end + |x* - z|/c0 = {arrival}"
        )));
    }
    Ok(())
}

/// `U = V + W_N` at `x*` on the window `[T̃, T̃ + 2π/b]` with `intervals`
/// uniform steps.
pub fn synthesize_measurement(
    modes: &[EigenMode],
    droplet: &Droplet,
    model: &dyn SourceModel,
    x_star: Point3,
    t_start: f64,
    intervals: usize,
    n_terms: usize,
    dt: f64,
) -> Result<MeasurementTrace> {
    check_window(model, droplet, x_star, t_start)?;
    if n_terms == 0 || n_terms > modes.len() {
        return Err(Error::invalid(format!(
            "truncation N = {n_terms} must be in 1..={}",
            modes.len()
        )));
    }
    if intervals < 2 {
        return Err(Error::invalid("a trace needs at least two intervals"));
    }
    let duration = 2.0 * PI / droplet.riesz_b;
    let eval = ExpansionEvaluator::new(&modes[..n_terms], droplet, model, x_star, dt)?;
    let h = duration / intervals as f64;
    let samples = (0..=intervals)
        .map(|k| {
            let t = t_start + k as f64 * h;
            model.value(x_star, t) + eval.w_n(t, n_terms)
        })
        .collect();
    MeasurementTrace::new(x_star, t_start, duration, samples)
}
