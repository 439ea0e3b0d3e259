//! Recovery of `V(z, ·)` from a single-point trace, mollified differentiation,
//! and assembly of the source `J = c₀⁻² V_tt − ΔV` on a lattice of droplet
//! positions.
//!
//! On the window `[T̃, T̃ + 2π/b]` the measured field is a finite combination
//! of `sin(ωₙ·)` and `cos(ωₙ·)` with `ωₙ = b(n − 1/2)`. With `θ = T̃ − |x*−z|/c₀`,
//!
//! ```text
//! Aₙ =  b/(παₙ) ∫₀^{2π/b} sin(ωₙ(s − π/b)) U(T̃ + s) ds
//! Bₙ = −b/(παₙ) ∫₀^{2π/b} cos(ωₙ(s − π/b)) U(T̃ + s) ds
//! Cₙ = cos(ωₙθ)Aₙ − sin(ωₙθ)Bₙ,   Dₙ = sin(ωₙθ)Aₙ + cos(ωₙθ)Bₙ
//! V_N(z, t) = Σ_{n≤N} (b/π)[Cₙ cos(ωₙ(t − π/b)) + Dₙ sin(ωₙ(t − π/b))].
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{memory_amplitude, mode_omega, MeasurementTrace};
use crate::error::{Error, Result};
use crate::spectrum::{Droplet, EigenMode};
use crate::vec3::{self, Point3};

/// Coefficients of the truncated Riesz expansion for one droplet position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RieszCoefficients {
    /// Riesz parameter `b`.
    pub riesz_b: f64,
    pub omega: Vec<f64>,
    pub alpha: Vec<f64>,
    pub a_n: Vec<f64>,
    pub b_n: Vec<f64>,
    pub c_n: Vec<f64>,
    pub d_n: Vec<f64>,
}

impl RieszCoefficients {
    pub fn len(&self) -> usize {
        self.c_n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c_n.is_empty()
    }

    /// `V_N(t)`, without the range check of [`reconstruct_v`].
    pub fn evaluate(&self, t: f64) -> f64 {
        let shift = t - PI / self.riesz_b;
        let mut acc = 0.0;
        for n in 0..self.len() {
            let (s, c) = (self.omega[n] * shift).sin_cos();
            acc += self.c_n[n] * c + self.d_n[n] * s;
        }
        self.riesz_b / PI * acc
    }
}

fn trapezoid_weights(len: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; len];
    w[0] *= 0.5;
    w[len - 1] *= 0.5;
    w
}

fn check_duration(trace: &MeasurementTrace, riesz_b: f64) -> Result<()> {
    let expected = 2.0 * PI / riesz_b;
    if (trace.duration - expected).abs() > 1e-12 * expected {
        return Err(Error::invalid(format!(
            "trace duration {} does not match the Riesz window 2π/b = {expected}",
            trace.duration
        )));
    }
    Ok(())
}

/// `Aₙ, Bₙ, Cₙ, Dₙ` for `n ≤ N` from a trace, by the trapezoid rule at the
/// trace's own sampling.
///
/// The integrands are periodic over the window, so the rule is exact for
/// every frequency the trace resolves.
pub fn riesz_coefficients(
    trace: &MeasurementTrace,
    droplet: &Droplet,
    modes: &[EigenMode],
    n_terms: usize,
) -> Result<RieszCoefficients> {
    check_duration(trace, droplet.riesz_b)?;
    if n_terms == 0 || n_terms > modes.len() {
        return Err(Error::invalid(format!(
            "truncation N = {n_terms} must be in 1..={}",
            modes.len()
        )));
    }
    let b = droplet.riesz_b;
    let distance = vec3::dist(trace.x_star, droplet.center);
    if !(distance > 0.0) {
        return Err(Error::invalid("receiver coincides with the droplet centre"));
    }
    let theta = trace.t_start - distance / droplet.c0;
    let h = trace.step();
    let w = trapezoid_weights(trace.samples.len(), h);
    let mut out = RieszCoefficients {
        riesz_b: b,
        omega: Vec::with_capacity(n_terms),
        alpha: Vec::with_capacity(n_terms),
        a_n: Vec::with_capacity(n_terms),
        b_n: Vec::with_capacity(n_terms),
        c_n: Vec::with_capacity(n_terms),
        d_n: Vec::with_capacity(n_terms),
    };
    for mode in &modes[..n_terms] {
        let omega = mode_omega(mode, droplet);
        let alpha = memory_amplitude(mode, droplet, distance);
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(Error::invalid(format!(
                "mode {} has no coupling to the far field (alpha = {alpha})",
                mode.j
            )));
        }
        let (mut is, mut ic) = (0.0, 0.0);
        for (k, (&u, &wk)) in trace.samples.iter().zip(&w).enumerate() {
            let (s, c) = (omega * (k as f64 * h - PI / b)).sin_cos();
            is += wk * s * u;
            ic += wk * c * u;
        }
        let scale = b / (PI * alpha);
        let a = scale * is;
        let bb = -scale * ic;
        let (s, c) = (omega * theta).sin_cos();
        out.omega.push(omega);
        out.alpha.push(alpha);
        out.a_n.push(a);
        out.b_n.push(bb);
        out.c_n.push(c * a - s * bb);
        out.d_n.push(s * a + c * bb);
    }
    Ok(out)
}

/// `Cₙ = ∫ cos(ωₙ(s − π/b)) v(s) ds` and `Dₙ = ∫ sin(ωₙ(s − π/b)) v(s) ds`
/// over `[0, 2π/b]` by the trapezoid rule with `intervals` steps.
pub fn direct_coefficients(
    v: impl Fn(f64) -> f64,
    riesz_b: f64,
    n_terms: usize,
    intervals: usize,
) -> Result<RieszCoefficients> {
    if !(riesz_b > 0.0) {
        return Err(Error::invalid("Riesz parameter b must be positive"));
    }
    if n_terms == 0 || intervals < 2 {
        return Err(Error::invalid("need N >= 1 and at least two intervals"));
    }
    let h = 2.0 * PI / riesz_b / intervals as f64;
    let samples: Vec<f64> = (0..=intervals).map(|k| v(k as f64 * h)).collect();
    let w = trapezoid_weights(samples.len(), h);
    let omega: Vec<f64> = (1..=n_terms).map(|n| riesz_b * (n as f64 - 0.5)).collect();
    let project = |f: fn(f64) -> f64, om: f64| -> f64 {
        samples
            .iter()
            .zip(&w)
            .enumerate()
            .map(|(k, (&u, &wk))| wk * f(om * (k as f64 * h - PI / riesz_b)) * u)
            .sum()
    };
    let c_n: Vec<f64> = omega.iter().map(|&om| project(f64::cos, om)).collect();
    let d_n: Vec<f64> = omega.iter().map(|&om| project(f64::sin, om)).collect();
    Ok(RieszCoefficients {
        riesz_b,
        alpha: vec![f64::NAN; n_terms],
        a_n: c_n.clone(),
        b_n: d_n.clone(),
        omega,
        c_n,
        d_n,
    })
}

/// `V_N(z, t)` for `t ∈ [0, 2π/b]`.
pub fn reconstruct_v(coeffs: &RieszCoefficients, t: f64) -> Result<f64> {
    let end = 2.0 * PI / coeffs.riesz_b;
    if !(-1e-12 * end..=end * (1.0 + 1e-12)).contains(&t) {
        return Err(Error::OutsideDomain(format!(
            "reconstruction time {t} outside the window [0, {end}]"
        )));
    }
    Ok(coeffs.evaluate(t))
}

/// A truncation choice and the error order it predicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub n: usize,
    /// `(δ/a + a)^{2/3}`.
    pub predicted_error: f64,
}

/// `N = max(1, round((δ/a + a)^{−1/6}))` for absolute noise `δ` and radius `a`.
pub fn choose_truncation(delta: f64, a: f64) -> Result<Truncation> {
    if !(delta >= 0.0) || !(a > 0.0) {
        return Err(Error::invalid(format!(
            "truncation choice needs delta >= 0 and a > 0, got ({delta}, {a})"
        )));
    }
    let x = delta / a + a;
    Ok(Truncation {
        n: (x.powf(-1.0 / 6.0).round() as usize).max(1),
        predicted_error: x.powf(2.0 / 3.0),
    })
}

/// `∫ e^{1/(x²−1)} dx` over `(−1, 1)`.
pub const BUMP_MASS: f64 = 0.443_993_816_168_079_3;

/// The unnormalized bump `e^{1/(x²−1)}` on `|x| < 1`.
pub fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 / (x * x - 1.0)).exp()
    }
}

fn bump_derivative(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        let d = x * x - 1.0;
        -2.0 * x / (d * d) * bump(x)
    }
}

/// `ε = (2δ_f / (3M₂√π))^{1/2}`, the radius balancing noise against
/// smoothing for noise level `δ_f` and `|f″| ≤ M₂`.
pub fn select_epsilon(delta_f: f64, m2: f64) -> Result<f64> {
    if !(delta_f >= 0.0) || !(m2 > 0.0) {
        return Err(Error::invalid(format!(
            "epsilon selection needs delta_f >= 0 and M2 > 0, got ({delta_f}, {m2})"
        )));
    }
    Ok((2.0 * delta_f / (3.0 * m2 * PI.sqrt())).sqrt())
}

/// Discrete mollified differentiation on a uniform grid with
/// `ε = (n_t + 1)Δτ`.
///
/// The derivative is `f′(xᵢ) ≈ Σ_{|l|≤n_t} f(xᵢ − lΔτ) η′_ε(lΔτ) Δτ`, the
/// trapezoid rule on `(−ε, ε)`. The second derivative applies the same
/// kernel twice.
#[derive(Debug, Clone, PartialEq)]
pub struct Mollifier {
    n_t: usize,
    dtau: f64,
    scaling: KernelScaling,
    first: Vec<f64>,
    second: Vec<f64>,
}

/// How the discrete derivative kernel is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelScaling {
    /// Plain trapezoid weights. Their first moment is 1 only up to the
    /// quadrature error, about 3% for `n_t = 6`.
    #[default]
    Trapezoid,
    /// Weights rescaled to unit first moment, so affine data are
    /// differentiated exactly and quadratics get the exact second derivative.
    UnitMoment,
}

impl Mollifier {
    pub fn new(n_t: usize, dtau: f64) -> Result<Self> {
        Mollifier::with_scaling(n_t, dtau, KernelScaling::default())
    }

    pub fn with_scaling(n_t: usize, dtau: f64, scaling: KernelScaling) -> Result<Self> {
        if n_t == 0 {
            return Err(Error::invalid("mollifier needs n_t >= 1"));
        }
        if !(dtau > 0.0) {
            return Err(Error::invalid(format!("mollifier step must be positive, got {dtau}")));
        }
        let eps = (n_t + 1) as f64 * dtau;
        let mut first: Vec<f64> = (-(n_t as i64)..=n_t as i64)
            .map(|l| {
                let y = l as f64 * dtau;
                bump_derivative(y / eps) / (BUMP_MASS * eps * eps) * dtau
            })
            .collect();
        if scaling == KernelScaling::UnitMoment {
            let moment: f64 = first
                .iter()
                .enumerate()
                .map(|(i, k)| -((i as f64) - n_t as f64) * dtau * k)
                .sum();
            for k in &mut first {
                *k /= moment;
            }
        }
        let mut second = vec![0.0; 4 * n_t + 1];
        for (i, &ki) in first.iter().enumerate() {
            for (j, &kj) in first.iter().enumerate() {
                second[i + j] += ki * kj;
            }
        }
        Ok(Mollifier {
            n_t,
            dtau,
            scaling,
            first,
            second,
        })
    }

    /// Builds the mollifier for radius `eps`, which must be a multiple
    /// `(n_t + 1)Δτ` of the step.
    pub fn from_epsilon(eps: f64, dtau: f64, scaling: KernelScaling) -> Result<Self> {
        let ratio = eps / dtau;
        let k = ratio.round();
        if !(k >= 2.0) || (ratio - k).abs() > 1e-9 * k {
            return Err(Error::invalid(format!(
                "epsilon {eps} must be (n_t + 1)·dtau with n_t >= 1 for dtau = {dtau}"
            )));
        }
        Mollifier::with_scaling(k as usize - 1, dtau, scaling)
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn scaling(&self) -> KernelScaling {
        self.scaling
    }

    /// `Σ (−lΔτ) kₗ`, the derivative the kernel assigns to `f(t) = t`.
    pub fn first_moment(&self) -> f64 {
        self.first
            .iter()
            .enumerate()
            .map(|(i, k)| -((i as f64) - self.n_t as f64) * self.dtau * k)
            .sum()
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    pub fn epsilon(&self) -> f64 {
        (self.n_t + 1) as f64 * self.dtau
    }

    /// Samples lost at each end by the second derivative.
    pub fn second_derivative_margin(&self) -> usize {
        2 * self.n_t
    }

    /// Trapezoid weights `η_ε(lΔτ)Δτ` of the smoothing kernel, `|l| ≤ n_t`,
    /// rescaled to unit discrete mass.
    pub fn smoothing_weights(&self) -> Vec<f64> {
        let eps = self.epsilon();
        let mut w: Vec<f64> = (-(self.n_t as i64)..=self.n_t as i64)
            .map(|l| bump(l as f64 * self.dtau / eps) / (BUMP_MASS * eps) * self.dtau)
            .collect();
        let mass: f64 = w.iter().sum();
        for v in &mut w {
            *v /= mass;
        }
        w
    }

    /// Smooths on the interior `n_t..len−n_t`.
    pub fn smooth(&self, samples: &[f64]) -> Result<Vec<f64>> {
        Self::convolve(samples, &self.smoothing_weights())
    }

    fn convolve(samples: &[f64], kernel: &[f64]) -> Result<Vec<f64>> {
        let half = kernel.len() / 2;
        if samples.len() <= 2 * half {
            return Err(Error::invalid(format!(
                "{} samples cannot support a mollifier window of {} points",
                samples.len(),
                kernel.len()
            )));
        }
        Ok((half..samples.len() - half)
            .map(|i| {
                // f(xᵢ − lΔτ) pairs kernel index half + l with sample i − l
                kernel
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * samples[i + half - k])
                    .sum()
            })
            .collect())
    }

    /// First derivative on the interior `n_t..len−n_t`.
    pub fn derivative(&self, samples: &[f64]) -> Result<Vec<f64>> {
        Self::convolve(samples, &self.first)
    }

    /// Second derivative on the interior `2n_t..len−2n_t`.
    pub fn second_derivative(&self, samples: &[f64]) -> Result<Vec<f64>> {
        Self::convolve(samples, &self.second)
    }

    /// Second derivative at a single index, reading `value(i ± k)`.
    pub fn second_derivative_at(&self, value: impl Fn(usize) -> f64, i: usize) -> f64 {
        let half = 2 * self.n_t;
        self.second
            .iter()
            .enumerate()
            .map(|(k, w)| w * value(i + half - k))
            .sum()
    }
}

/// A uniform axis-aligned lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub origin: Point3,
    pub spacing: f64,
    pub dims: [usize; 3],
}

impl Lattice {
    /// The lattice with `spacing` covering `[lo, hi]` per axis; the bounds
    /// must be multiples of the spacing apart.
    pub fn from_bounds(lo: Point3, hi: Point3, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::invalid("lattice spacing must be positive"));
        }
        let mut dims = [0; 3];
        for i in 0..3 {
            let steps = (hi[i] - lo[i]) / spacing;
            let k = steps.round();
            if !(k >= 0.0) || (steps - k).abs() > 1e-9 * k.max(1.0) {
                return Err(Error::invalid(format!(
                    "axis {i}: [{}, {}] is not a whole number of steps {spacing}",
                    lo[i], hi[i]
                )));
            }
            dims[i] = k as usize + 1;
        }
        Ok(Lattice {
            origin: lo,
            spacing,
            dims,
        })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Point3 {
        [
            self.origin[0] + i as f64 * self.spacing,
            self.origin[1] + j as f64 * self.spacing,
            self.origin[2] + k as f64 * self.spacing,
        ]
    }

    pub fn points(&self) -> Vec<Point3> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.dims[0] {
            for j in 0..self.dims[1] {
                for k in 0..self.dims[2] {
                    out.push(self.point(i, j, k));
                }
            }
        }
        out
    }

    /// The lattice with `margin` points removed at both ends of every axis.
    pub fn shrink(&self, margin: usize) -> Result<Lattice> {
        let mut dims = [0; 3];
        for i in 0..3 {
            if self.dims[i] <= 2 * margin {
                return Err(Error::invalid(format!(
                    "lattice axis {i} with {} points is too small for a margin of {margin}",
                    self.dims[i]
                )));
            }
            dims[i] = self.dims[i] - 2 * margin;
        }
        let off = margin as f64 * self.spacing;
        Ok(Lattice {
            origin: [self.origin[0] + off, self.origin[1] + off, self.origin[2] + off],
            spacing: self.spacing,
            dims,
        })
    }
}

/// `V_N` on a lattice of droplet positions and a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedField {
    pub lattice: Lattice,
    /// `t_m = t0 + m·dt`.
    pub t0: f64,
    pub dt: f64,
    pub n_times: usize,
    pub n_terms: usize,
    /// `[point][time]`.
    pub values: Vec<f64>,
}

impl ReconstructedField {
    pub fn new(
        lattice: Lattice,
        t0: f64,
        dt: f64,
        n_times: usize,
        n_terms: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != lattice.len() * n_times {
            return Err(Error::invalid(format!(
                "expected {} values, got {}",
                lattice.len() * n_times,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite reconstructed value at index {bad}")));
        }
        Ok(ReconstructedField {
            lattice,
            t0,
            dt,
            n_times,
            n_terms,
            values,
        })
    }

    pub fn time(&self, m: usize) -> f64 {
        self.t0 + m as f64 * self.dt
    }

    pub fn at(&self, point: usize, m: usize) -> f64 {
        self.values[point * self.n_times + m]
    }
}

/// `V`, `V_tt`, `ΔV` and `J` on the shrunken lattice and time range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceReconstruction {
    pub lattice: Lattice,
    pub t0: f64,
    pub dt: f64,
    pub n_times: usize,
    /// All `[point][time]`.
    pub v: Vec<f64>,
    pub v_tt: Vec<f64>,
    pub laplacian: Vec<f64>,
    pub source: Vec<f64>,
}

impl SourceReconstruction {
    pub fn time(&self, m: usize) -> f64 {
        self.t0 + m as f64 * self.dt
    }
}

/// `J ≈ c₀⁻² ∂_t²V_N − ΔV_N`, with every second derivative mollified.
///
/// Requires the lattice spacing to equal the mollifier step. The output
/// loses `2n_t` points at each end of every axis and of the time range.
pub fn assemble_source(
    field: &ReconstructedField,
    c0: f64,
    mollifier: &Mollifier,
) -> Result<SourceReconstruction> {
    let h = mollifier.dtau();
    if (field.lattice.spacing - h).abs() > 1e-12 * h || (field.dt - h).abs() > 1e-12 * h {
        return Err(Error::invalid(format!(
            "lattice spacing {} and time step {} must both equal the mollifier step {h}",
            field.lattice.spacing, field.dt
        )));
    }
    if !(c0 > 0.0) {
        return Err(Error::invalid("c0 must be positive"));
    }
    let margin = mollifier.second_derivative_margin();
    let inner = field.lattice.shrink(margin)?;
    if field.n_times <= 2 * margin {
        return Err(Error::invalid(format!(
            "{} time samples are too few for a margin of {margin}",
            field.n_times
        )));
    }
    let n_times = field.n_times - 2 * margin;
    let lat = field.lattice;
    let mut out = SourceReconstruction {
        lattice: inner,
        t0: field.time(margin),
        dt: h,
        n_times,
        v: Vec::with_capacity(inner.len() * n_times),
        v_tt: Vec::with_capacity(inner.len() * n_times),
        laplacian: Vec::with_capacity(inner.len() * n_times),
        source: Vec::with_capacity(inner.len() * n_times),
    };
    for i in 0..inner.dims[0] {
        for j in 0..inner.dims[1] {
            for k in 0..inner.dims[2] {
                let (gi, gj, gk) = (i + margin, j + margin, k + margin);
                let p = lat.index(gi, gj, gk);
                for m in 0..n_times {
                    let gm = m + margin;
                    let v = field.at(p, gm);
                    let v_tt = mollifier.second_derivative_at(|q| field.at(p, q), gm);
                    let lap = mollifier.second_derivative_at(|q| field.at(lat.index(q, gj, gk), gm), gi)
                        + mollifier.second_derivative_at(|q| field.at(lat.index(gi, q, gk), gm), gj)
                        + mollifier.second_derivative_at(|q| field.at(lat.index(gi, gj, q), gm), gk);
                    out.v.push(v);
                    out.v_tt.push(v_tt);
                    out.laplacian.push(lap);
                    out.source.push(v_tt / (c0 * c0) - lap);
                }
            }
        }
    }
    Ok(out)
}

/// `100·‖rec − exact‖₂ / ‖exact‖₂`.
pub fn relative_l2_error(reconstructed: &[f64], exact: &[f64]) -> Result<f64> {
    if reconstructed.len() != exact.len() {
        return Err(Error::invalid(format!(
            "grids differ: {} vs {} samples",
            reconstructed.len(),
            exact.len()
        )));
    }
    let num: f64 = reconstructed.iter().zip(exact).map(|(r, e)| (r - e) * (r - e)).sum();
    let den: f64 = exact.iter().map(|e| e * e).sum();
    if !(den > 0.0) {
        return Err(Error::invalid("exact field has zero norm"));
    }
    Ok(100.0 * (num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::synthesize_measurement;
    use crate::field::{AnalyticSource, Domain};
    use crate::spectrum::modes_l0;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::sync::Arc;

    #[test]
    fn alpha_closed_form() {
        let d = Droplet::new([0.0; 3], 1e-3, 2.0 * PI, 1.0).unwrap();
        let modes = modes_l0(&d, 6).unwrap();
        let x = [1.2, 0.0, 0.0];
        let trace = MeasurementTrace::new(x, 3.1, 1.0, vec![0.0; 65]).unwrap();
        let c = riesz_coefficients(&trace, &d, &modes, 6).unwrap();
        for (n, &alpha) in c.alpha.iter().enumerate() {
            let expect = 2.0 * d.c1() / ((n as f64 + 0.5) * PI * 1.2);
            assert_relative_eq!(alpha, expect, max_relative = 1e-13);
        }
        assert!(c.c_n.iter().chain(&c.d_n).all(|&v| v == 0.0));
        for n in 0..6 {
            let lhs = c.c_n[n].powi(2) + c.d_n[n].powi(2);
            let rhs = c.a_n[n].powi(2) + c.b_n[n].powi(2);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn orthogonality_round_trip() {
        let b = 2.0 * PI;
        let w1 = b * 0.5;
        let w2 = b * 1.5;
        let cos1 = move |s: f64| (w1 * (s - PI / b)).cos();
        let c = direct_coefficients(cos1, b, 8, 400).unwrap();
        assert_abs_diff_eq!(c.c_n[0], PI / b, epsilon = 1e-12);
        for n in 1..8 {
            assert_abs_diff_eq!(c.c_n[n], 0.0, epsilon = 1e-12);
        }
        for s in (0..=50).map(|k| k as f64 / 50.0) {
            assert_abs_diff_eq!(reconstruct_v(&c, s).unwrap(), cos1(s), epsilon = 1e-10);
        }
        let sin2 = move |s: f64| (w2 * (s - PI / b)).sin();
        let c = direct_coefficients(sin2, b, 8, 400).unwrap();
        assert_abs_diff_eq!(c.d_n[1], PI / b, epsilon = 1e-12);
        for s in (0..=50).map(|k| k as f64 / 50.0) {
            assert_abs_diff_eq!(reconstruct_v(&c, s).unwrap(), sin2(s), epsilon = 1e-10);
        }
        assert!(reconstruct_v(&c, 1.5).is_err());
    }

    #[test]
    fn noiseless_trace_recovers_direct_coefficients() {
        let pulse = |t: f64| if (0.0..1.0).contains(&t) { 10.0 * t.sin().powi(3) * (2.0 * (t - 1.0)).sin().powi(2) } else { 0.0 };
        let model = AnalyticSource {
            v: Arc::new(move |_, t| pulse(t)),
            v_tt: None,
            laplacian: None,
            domain: Domain::Ball { center: [0.0; 3], radius: 0.25 },
            c0: 1.0,
            support_end: Some(1.0),
            label: "pulse".into(),
        };
        let d = Droplet::new([0.05, -0.1, 0.0], 1e-3, 2.0 * PI, 1.0).unwrap();
        let modes = modes_l0(&d, 20).unwrap();
        let x = [1.2, 0.0, 0.0];
        let trace = synthesize_measurement(&modes, &d, &model, x, 3.1, 160, 20, 1e-3).unwrap();
        let got = riesz_coefficients(&trace, &d, &modes, 20).unwrap();
        let want = direct_coefficients(pulse, 2.0 * PI, 20, 20000).unwrap();
        for n in 0..20 {
            assert_abs_diff_eq!(got.c_n[n], want.c_n[n], epsilon = 1e-6);
            assert_abs_diff_eq!(got.d_n[n], want.d_n[n], epsilon = 1e-6);
        }
    }

    #[test]
    fn truncation_rule() {
        let t = choose_truncation(0.0, 1e-3).unwrap();
        assert_eq!(t.n, 3);
        let a: f64 = 1e-4;
        let t = choose_truncation(a * a, a).unwrap();
        assert_eq!(t.n, ((2.0 * a).powf(-1.0 / 6.0)).round() as usize);
        assert_relative_eq!(t.predicted_error, (2.0 * a).powf(2.0 / 3.0), max_relative = 1e-12);
        assert_eq!(choose_truncation(0.0, 50.0).unwrap().n, 1);
        assert!(choose_truncation(-1.0, 1.0).is_err());
    }

    #[test]
    fn bump_mass_and_epsilon() {
        let n = 200_000;
        let h = 2.0 / n as f64;
        let mass: f64 = (0..=n).map(|k| bump(-1.0 + k as f64 * h) * h).sum();
        assert_abs_diff_eq!(mass, BUMP_MASS, epsilon = 1e-12);
        let m = Mollifier::new(7, 0.01).unwrap();
        let w = m.smoothing_weights();
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(w.iter().all(|&v| v > 0.0));
        let flat = m.smooth(&[2.5; 30]).unwrap();
        assert!(flat.iter().all(|v| (v - 2.5).abs() < 1e-12));
        assert_abs_diff_eq!(select_epsilon(1e-4, 1.0).unwrap(), 6.13e-3, epsilon = 1e-5);
    }

    #[test]
    fn trapezoid_kernel_moment_converges() {
        let coarse = Mollifier::from_epsilon(0.07, 0.01, KernelScaling::Trapezoid).unwrap();
        assert_abs_diff_eq!(coarse.first_moment(), 1.031_125_929_911_518, epsilon = 1e-12);
        let fine = Mollifier::new(20, 0.01).unwrap();
        assert_abs_diff_eq!(fine.first_moment(), 1.0, epsilon = 1e-4);
        let t: Vec<f64> = (0..120).map(|k| k as f64 * 0.01).collect();
        let quad: Vec<f64> = t.iter().map(|&x| x * x).collect();
        for v in fine.second_derivative(&quad).unwrap() {
            assert_abs_diff_eq!(v, 2.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn mollified_derivatives_of_polynomials() {
        let m = Mollifier::from_epsilon(0.07, 0.01, KernelScaling::UnitMoment).unwrap();
        assert_eq!(m.n_t(), 6);
        let t: Vec<f64> = (0..60).map(|k| k as f64 * 0.01).collect();
        let lin: Vec<f64> = t.iter().map(|&x| 3.0 * x - 1.0).collect();
        for d in m.derivative(&lin).unwrap() {
            assert_abs_diff_eq!(d, 3.0, epsilon = 1e-12);
        }
        let quad: Vec<f64> = t.iter().map(|&x| x * x).collect();
        let d2 = m.second_derivative(&quad).unwrap();
        assert_eq!(d2.len(), 60 - 24);
        for v in d2 {
            assert_abs_diff_eq!(v, 2.0, epsilon = 1e-9);
        }
        assert!(m.second_derivative(&quad[..20]).is_err());
        assert!(Mollifier::from_epsilon(0.075, 0.01, KernelScaling::UnitMoment).is_err());
    }

    #[test]
    fn source_of_harmonic_linear_field_vanishes() {
        let lat = Lattice::from_bounds([-0.1; 3], [0.1; 3], 0.01).unwrap();
        let m = Mollifier::with_scaling(2, 0.01, KernelScaling::UnitMoment).unwrap();
        let n_times = 12;
        let mut values = Vec::new();
        for p in lat.points() {
            for q in 0..n_times {
                let t = 0.5 + q as f64 * 0.01;
                values.push(t * p[1]);
            }
        }
        let field = ReconstructedField::new(lat, 0.5, 0.01, n_times, 20, values).unwrap();
        let rec = assemble_source(&field, 1.0, &m).unwrap();
        assert_eq!(rec.lattice.dims, [13, 13, 13]);
        assert_eq!(rec.n_times, 4);
        assert!(rec.source.iter().all(|j| j.abs() < 1e-9));
    }

    #[test]
    fn relative_error_metric() {
        let e = [1.0, -2.0, 3.0];
        assert_eq!(relative_l2_error(&e, &e).unwrap(), 0.0);
        let r: Vec<f64> = e.iter().map(|v| 1.01 * v).collect();
        assert_abs_diff_eq!(relative_l2_error(&r, &e).unwrap(), 1.0, epsilon = 1e-12);
        assert!(relative_l2_error(&r, &[0.0; 3]).is_err());
        assert!(relative_l2_error(&r[..2], &e).is_err());
    }
}
