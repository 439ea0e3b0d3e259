//! Space-time fields and source models.
//!
//! A source model describes the incident field `V` generated in the
//! homogeneous medium by a source `J = c₀⁻² V_tt − ΔV`. Either `V` is given in
//! closed form (and `J` follows by differentiation), or `J` is given and `V` is
//! its retarded volume potential `∫_Ω J(y, t − |x−y|/c₀) / (4π|x−y|) dy`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{Ball, BallQuadrature, PolarRule};
use crate::vec3::{self, Point3};

/// Anything that can be sampled at a point and a time.
pub trait SpaceTimeField: Send + Sync {
    fn value(&self, x: Point3, t: f64) -> f64;
}

impl<F: Fn(Point3, f64) -> f64 + Send + Sync> SpaceTimeField for F {
    fn value(&self, x: Point3, t: f64) -> f64 {
        self(x, t)
    }
}

/// Support of the source in space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Ball { center: Point3, radius: f64 },
    Box { lo: Point3, hi: Point3 },
}

impl Domain {
    pub fn contains(&self, x: Point3) -> bool {
        match *self {
            Domain::Ball { center, radius } => vec3::dist(x, center) < radius,
            Domain::Box { lo, hi } => (0..3).all(|i| x[i] > lo[i] && x[i] < hi[i]),
        }
    }

    /// `max_{y ∈ Ω̄} |z − y|`.
    pub fn max_distance(&self, z: Point3) -> f64 {
        match *self {
            Domain::Ball { center, radius } => vec3::dist(z, center) + radius,
            Domain::Box { lo, hi } => {
                let far: Point3 = std::array::from_fn(|i| {
                    if (z[i] - lo[i]).abs() > (z[i] - hi[i]).abs() {
                        lo[i]
                    } else {
                        hi[i]
                    }
                });
                vec3::dist(z, far)
            }
        }
    }

    /// Distance from `x` to the closest point of `Ω̄` (zero inside).
    pub fn distance_from(&self, x: Point3) -> f64 {
        match *self {
            Domain::Ball { center, radius } => (vec3::dist(x, center) - radius).max(0.0),
            Domain::Box { lo, hi } => {
                let d: Point3 = std::array::from_fn(|i| (lo[i] - x[i]).max(x[i] - hi[i]).max(0.0));
                vec3::norm(d)
            }
        }
    }
}

/// A source and the incident field it radiates.
pub trait SourceModel: SpaceTimeField {
    /// Background wave speed.
    fn c0(&self) -> f64;

    /// Spatial support `Ω` of the source.
    fn domain(&self) -> Domain;

    /// The source `J(x, t)`.
    fn source(&self, x: Point3, t: f64) -> f64;

    /// `∂_t² V`, when known in closed form.
    fn second_time_derivative(&self, _x: Point3, _t: f64) -> Option<f64> {
        None
    }

    /// `ΔV`, when known in closed form.
    fn laplacian(&self, _x: Point3, _t: f64) -> Option<f64> {
        None
    }

    /// Time after which `V(z, ·)` vanishes at points `z ∈ Ω`, if it does.
    fn support_end(&self) -> Option<f64>;

    fn name(&self) -> String;
}

/// The incident field `V(x, t)`, zero for `t < 0`.
pub fn incident_field(model: &dyn SourceModel, x: Point3, t: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else {
        model.value(x, t)
    }
}

/// `V = t^p (e^{|x|²} + 3x₂ + x₃) H(t)` on the unit ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerGrowthSource {
    pub p: u32,
    pub c0: f64,
}

impl PowerGrowthSource {
    pub fn new(p: u32, c0: f64) -> Result<Self> {
        if p < 2 {
            return Err(Error::invalid(format!("power p must be at least 2, got {p}")));
        }
        if !(c0 > 0.0) {
            return Err(Error::invalid(format!("c0 must be positive, got {c0}")));
        }
        Ok(PowerGrowthSource { p, c0 })
    }

    fn spatial(x: Point3) -> f64 {
        vec3::dot(x, x).exp() + 3.0 * x[1] + x[2]
    }

    fn spatial_laplacian(x: Point3) -> f64 {
        let r2 = vec3::dot(x, x);
        (6.0 + 4.0 * r2) * r2.exp()
    }
}

impl SpaceTimeField for PowerGrowthSource {
    fn value(&self, x: Point3, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        t.powi(self.p as i32) * Self::spatial(x)
    }
}

impl SourceModel for PowerGrowthSource {
    fn c0(&self) -> f64 {
        self.c0
    }

    fn domain(&self) -> Domain {
        Domain::Ball {
            center: [0.0; 3],
            radius: 1.0,
        }
    }

    fn source(&self, x: Point3, t: f64) -> f64 {
        let vtt = self.second_time_derivative(x, t).unwrap_or(0.0);
        let lap = self.laplacian(x, t).unwrap_or(0.0);
        vtt / (self.c0 * self.c0) - lap
    }

    fn second_time_derivative(&self, x: Point3, t: f64) -> Option<f64> {
        if t <= 0.0 {
            return Some(0.0);
        }
        let p = self.p as i32;
        Some((p * (p - 1)) as f64 * t.powi(p - 2) * Self::spatial(x))
    }

    fn laplacian(&self, x: Point3, t: f64) -> Option<f64> {
        if t <= 0.0 {
            return Some(0.0);
        }
        Some(t.powi(self.p as i32) * Self::spatial_laplacian(x))
    }

    fn support_end(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> String {
        format!("power-growth p={}", self.p)
    }
}

/// Pulse `V = 10 sin³t sin²(2(t−T)) (0.16 − r²)(e^{0.16−r²} + 2x₂ + x₃)` on
/// `(0, T)`, zero afterwards, on the cube `(−0.25, 0.25)³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicPulseSource {
    pub duration: f64,
    pub c0: f64,
}

impl CubicPulseSource {
    pub fn new(duration: f64, c0: f64) -> Result<Self> {
        if !(duration > 0.0) || !(c0 > 0.0) {
            return Err(Error::invalid("pulse duration and c0 must be positive"));
        }
        Ok(CubicPulseSource { duration, c0 })
    }

    /// `(τ, τ″)` of the temporal factor.
    fn temporal(&self, t: f64) -> (f64, f64) {
        if t <= 0.0 || t >= self.duration {
            return (0.0, 0.0);
        }
        let (s, c) = t.sin_cos();
        let a = s * s * s;
        let a1 = 3.0 * s * s * c;
        let a2 = 6.0 * s * c * c - 3.0 * s * s * s;
        let u = 2.0 * (t - self.duration);
        let b = u.sin().powi(2);
        let b1 = (2.0 * u).sin() * 2.0;
        let b2 = 8.0 * (2.0 * u).cos();
        (10.0 * a * b, 10.0 * (a2 * b + 2.0 * a1 * b1 + a * b2))
    }

    /// `(S, ΔS)` of the spatial factor.
    fn spatial(x: Point3) -> (f64, f64) {
        let r2 = vec3::dot(x, x);
        let h = 0.16 - r2;
        let e = h.exp();
        let l = 2.0 * x[1] + x[2];
        let f = e + l;
        let lap = -6.0 * f + 8.0 * r2 * e - 4.0 * l + h * e * (4.0 * r2 - 6.0);
        (h * f, lap)
    }
}

impl SpaceTimeField for CubicPulseSource {
    fn value(&self, x: Point3, t: f64) -> f64 {
        self.temporal(t).0 * Self::spatial(x).0
    }
}

impl SourceModel for CubicPulseSource {
    fn c0(&self) -> f64 {
        self.c0
    }

    fn domain(&self) -> Domain {
        Domain::Box {
            lo: [-0.25; 3],
            hi: [0.25; 3],
        }
    }

    fn source(&self, x: Point3, t: f64) -> f64 {
        let (tv, tvv) = self.temporal(t);
        let (s, lap) = Self::spatial(x);
        tvv * s / (self.c0 * self.c0) - tv * lap
    }

    fn second_time_derivative(&self, x: Point3, t: f64) -> Option<f64> {
        Some(self.temporal(t).1 * Self::spatial(x).0)
    }

    fn laplacian(&self, x: Point3, t: f64) -> Option<f64> {
        Some(self.temporal(t).0 * Self::spatial(x).1)
    }

    fn support_end(&self) -> Option<f64> {
        Some(self.duration)
    }

    fn name(&self) -> String {
        format!("cubic-pulse T={}", self.duration)
    }
}

type FieldFn = Arc<dyn Fn(Point3, f64) -> f64 + Send + Sync>;

/// A user-supplied closed-form `V`, optionally with its derivatives.
#[derive(Clone)]
pub struct AnalyticSource {
    pub v: FieldFn,
    pub v_tt: Option<FieldFn>,
    pub laplacian: Option<FieldFn>,
    pub domain: Domain,
    pub c0: f64,
    pub support_end: Option<f64>,
    pub label: String,
}

impl fmt::Debug for AnalyticSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticSource")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("c0", &self.c0)
            .finish_non_exhaustive()
    }
}

impl SpaceTimeField for AnalyticSource {
    fn value(&self, x: Point3, t: f64) -> f64 {
        (self.v)(x, t)
    }
}

impl SourceModel for AnalyticSource {
    fn c0(&self) -> f64 {
        self.c0
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    /// `c₀⁻² V_tt − ΔV`; zero when either derivative is missing.
    fn source(&self, x: Point3, t: f64) -> f64 {
        match (&self.v_tt, &self.laplacian) {
            (Some(vtt), Some(lap)) => vtt(x, t) / (self.c0 * self.c0) - lap(x, t),
            _ => 0.0,
        }
    }

    fn second_time_derivative(&self, x: Point3, t: f64) -> Option<f64> {
        self.v_tt.as_ref().map(|f| f(x, t))
    }

    fn laplacian(&self, x: Point3, t: f64) -> Option<f64> {
        self.laplacian.as_ref().map(|f| f(x, t))
    }

    fn support_end(&self) -> Option<f64> {
        self.support_end
    }

    fn name(&self) -> String {
        self.label.clone()
    }
}

/// `V` as the retarded volume potential of a source `J` supported in a ball.
#[derive(Clone)]
pub struct RetardedPotentialSource {
    j: FieldFn,
    omega: Ball,
    c0: f64,
    rule: Arc<BallQuadrature>,
    source_end: Option<f64>,
}

impl fmt::Debug for RetardedPotentialSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RetardedPotentialSource")
            .field("omega", &self.omega)
            .field("c0", &self.c0)
            .finish_non_exhaustive()
    }
}

impl RetardedPotentialSource {
    /// `source_end` is the time `T` after which `J` vanishes, if any.
    pub fn new(
        j: impl Fn(Point3, f64) -> f64 + Send + Sync + 'static,
        omega: Ball,
        c0: f64,
        rule: BallQuadrature,
        source_end: Option<f64>,
    ) -> Result<Self> {
        if !(c0 > 0.0) {
            return Err(Error::invalid(format!("c0 must be positive, got {c0}")));
        }
        Ok(RetardedPotentialSource {
            j: Arc::new(j),
            omega,
            c0,
            rule: Arc::new(rule),
            source_end,
        })
    }

    /// Only spherical source supports can be integrated.
    pub fn for_domain(
        j: impl Fn(Point3, f64) -> f64 + Send + Sync + 'static,
        domain: Domain,
        c0: f64,
        rule: BallQuadrature,
        source_end: Option<f64>,
    ) -> Result<Self> {
        match domain {
            Domain::Ball { center, radius } => {
                Self::new(j, Ball::new(center, radius)?, c0, rule, source_end)
            }
            Domain::Box { .. } => Err(Error::invalid(
                "the retarded potential is only implemented for spherical source supports",
            )),
        }
    }
}

impl SpaceTimeField for RetardedPotentialSource {
    fn value(&self, x: Point3, t: f64) -> f64 {
        let j = &self.j;
        let c0 = self.c0;
        if self.omega.contains(x) {
            // polar rule centred at x absorbs the 1/|x−y| singularity
            match PolarRule::new(&self.rule, &self.omega, x) {
                Ok(polar) => polar
                    .points()
                    .map(|p| p.weight * j(p.y, t - p.distance / c0))
                    .sum(),
                Err(_) => 0.0,
            }
        } else {
            let a = self.omega.radius;
            let a3 = a * a * a;
            self.rule
                .nodes()
                .iter()
                .map(|n| {
                    let y = self.omega.map_from_unit(n.cartesian);
                    let d = vec3::dist(x, y);
                    a3 * n.weight * j(y, t - d / c0) / (4.0 * PI * d)
                })
                .sum()
        }
    }
}

impl SourceModel for RetardedPotentialSource {
    fn c0(&self) -> f64 {
        self.c0
    }

    fn domain(&self) -> Domain {
        Domain::Ball {
            center: self.omega.center,
            radius: self.omega.radius,
        }
    }

    fn source(&self, x: Point3, t: f64) -> f64 {
        (self.j)(x, t)
    }

    /// `V(z, ·)` vanishes once the last signal from `Ω` has passed:
    /// `T + 2R/c₀` bounds the travel across the support.
    fn support_end(&self) -> Option<f64> {
        self.source_end
            .map(|t| t + 2.0 * self.omega.radius / self.c0)
    }

    fn name(&self) -> String {
        "retarded potential".into()
    }
}

/// Scales another field by a constant.
pub struct ScaledField<'a> {
    pub inner: &'a dyn SpaceTimeField,
    pub factor: f64,
}

impl SpaceTimeField for ScaledField<'_> {
    fn value(&self, x: Point3, t: f64) -> f64 {
        self.factor * self.inner.value(x, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn fd_laplacian(f: impl Fn(Point3) -> f64, x: Point3) -> f64 {
        let h = 1e-3;
        (0..3)
            .map(|i| {
                let mut p = x;
                let mut m = x;
                p[i] += h;
                m[i] -= h;
                (f(p) - 2.0 * f(x) + f(m)) / (h * h)
            })
            .sum()
    }

    #[test]
    fn power_growth_values() {
        let s = PowerGrowthSource::new(3, 1.0).unwrap();
        let x = [0.3, 0.4, 0.5];
        assert_abs_diff_eq!(s.value(x, 1.0), 0.5f64.exp() + 1.2 + 0.5, epsilon = 1e-15);
        assert_eq!(incident_field(&s, x, -0.5), 0.0);
        assert_eq!(s.value(x, 0.0), 0.0);
        let lap = s.laplacian(x, 1.3).unwrap();
        assert_relative_eq!(lap, fd_laplacian(|y| s.value(y, 1.3), x), max_relative = 1e-5);
    }

    #[test]
    fn cubic_pulse_derivatives_match_finite_differences() {
        let s = CubicPulseSource::new(1.0, 1.0).unwrap();
        for &(x, t) in &[([0.0, 0.1, -0.2], 0.8), ([0.05, -0.2, 0.13], 0.37), ([0.1, 0.2, 0.2], 0.55)] {
            let lap = s.laplacian(x, t).unwrap();
            assert_relative_eq!(lap, fd_laplacian(|y| s.value(y, t), x), max_relative = 1e-5);
            let h = 1e-4;
            let fd = (s.value(x, t + h) - 2.0 * s.value(x, t) + s.value(x, t - h)) / (h * h);
            assert_relative_eq!(s.second_time_derivative(x, t).unwrap(), fd, max_relative = 1e-5);
            let j = s.source(x, t);
            assert_abs_diff_eq!(j, s.second_time_derivative(x, t).unwrap() - lap, epsilon = 1e-12);
        }
        assert_eq!(s.value([0.0; 3], 1.2), 0.0);
        assert_eq!(s.support_end(), Some(1.0));
    }

    #[test]
    fn domain_distances() {
        let cube = Domain::Box {
            lo: [-0.25; 3],
            hi: [0.25; 3],
        };
        assert_abs_diff_eq!(cube.max_distance([0.0; 3]), 0.25 * 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(cube.distance_from([1.2, 0.0, 0.0]), 0.95, epsilon = 1e-12);
        assert!(cube.contains([0.1, 0.2, -0.2]));
        let ball = Domain::Ball {
            center: [0.0; 3],
            radius: 1.0,
        };
        assert_abs_diff_eq!(ball.max_distance([-0.2, 0.0, 0.0]), 1.2, epsilon = 1e-15);
    }

    /// `V = φ(x) ψ(t)` with `φ` vanishing to high order on the unit sphere is
    /// the causal solution for its own `J`, so the potential must reproduce it.
    #[test]
    fn retarded_potential_reproduces_manufactured_field() {
        let phi = |x: Point3| (1.0 - vec3::dot(x, x)).max(0.0).powi(5);
        // Δ of (1−r²)^5 = −30(1−r²)^4 + 80 r² (1−r²)^3
        let lap_phi = |x: Point3| {
            let r2 = vec3::dot(x, x);
            let u = (1.0 - r2).max(0.0);
            -30.0 * u.powi(4) + 80.0 * r2 * u.powi(3)
        };
        let psi = |t: f64| if t > 0.0 { t.powi(4) * (-t).exp() } else { 0.0 };
        let psi_tt = |t: f64| {
            if t > 0.0 {
                (12.0 * t * t - 8.0 * t.powi(3) + t.powi(4)) * (-t).exp()
            } else {
                0.0
            }
        };
        let j = move |x: Point3, t: f64| phi(x) * psi_tt(t) - lap_phi(x) * psi(t);
        let rule = BallQuadrature::new(30, 24).unwrap();
        let model = RetardedPotentialSource::new(j, Ball::UNIT, 1.0, rule, None).unwrap();
        for &(x, t) in &[([0.2, -0.1, 0.3], 2.0), ([0.0, 0.0, 0.0], 1.5), ([0.6, 0.0, 0.0], 3.0)] {
            let expect = phi(x) * psi(t);
            assert_abs_diff_eq!(model.value(x, t), expect, epsilon = 1e-6);
        }
        // outside the support the manufactured V is zero
        assert_abs_diff_eq!(model.value([1.5, 0.0, 0.0], 2.5), 0.0, epsilon = 1e-6);
        assert!(RetardedPotentialSource::for_domain(
            |_, _| 0.0,
            Domain::Box { lo: [0.0; 3], hi: [1.0; 3] },
            1.0,
            BallQuadrature::new(2, 2).unwrap(),
            None
        )
        .is_err());
    }
}
