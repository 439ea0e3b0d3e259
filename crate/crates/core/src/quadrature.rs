//! Quadrature and interpolation on the unit ball.
//!
//! The ball rule is the tensor product of an `N_r`-point Gauss–Legendre rule in
//! the radius (mapped to `[0, 1]`) with the Gauss-trapezoidal rule on the sphere:
//! Gauss–Legendre in `cos θ` and the uniform trapezoid rule in `φ`. It has
//! `2 N_r N_s²` nodes, ordered radius-major, then polar angle, then azimuth.
//!
//! Weakly singular volume potentials `∫_D f(y) / (4π|x−y|) dy` are computed in
//! polar coordinates centred at `x`, where the Jacobian `r² sinθ` cancels the
//! kernel and the integrand becomes regular ([`PolarRule`]).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{harmonic_count, real_harmonics};
use crate::vec3::{self, Point3};

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule1D {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    interval: (f64, f64),
}

impl QuadratureRule1D {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Affine image of the rule on `[lo, hi]`.
    pub fn mapped(&self, lo: f64, hi: f64) -> QuadratureRule1D {
        let (a, b) = self.interval;
        let s = (hi - lo) / (b - a);
        QuadratureRule1D {
            nodes: self.nodes.iter().map(|&x| lo + (x - a) * s).collect(),
            weights: self.weights.iter().map(|&w| w * s).collect(),
            interval: (lo, hi),
        }
    }
}

/// Legendre polynomials `(P_n(x), P_{n-1}(x))` by the three-term recurrence.
pub fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`, nodes ascending.
///
/// Roots come from Newton iteration on `P_n` started at the Chebyshev-like
/// guesses `cos(π(i − 1/4)/(n + 1/2))`; weights are
/// `2(1 − x²) / (n P_{n−1}(x))²`.
pub fn gauss_legendre_rule(n: usize) -> Result<QuadratureRule1D> {
    if n == 0 {
        return Err(Error::invalid("Gauss-Legendre rule needs at least one node"));
    }
    let nf = n as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (PI * (i as f64 - 0.25) / (nf + 0.5)).cos();
        let mut converged = false;
        for _ in 0..100 {
            let (p, p_prev) = legendre_pair(n, x);
            let dp = nf * (x * p - p_prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence(format!(
                "Legendre root {i} of degree {n}"
            )));
        }
        let (_, p_prev) = legendre_pair(n, x);
        let w = 2.0 * (1.0 - x * x) / (nf * p_prev).powi(2);
        nodes.push(x);
        weights.push(w);
    }
    nodes.reverse();
    weights.reverse();
    Ok(QuadratureRule1D {
        nodes,
        weights,
        interval: (-1.0, 1.0),
    })
}

/// A ball `{ y : |y − center| < radius }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: Point3,
    pub radius: f64,
}

impl Ball {
    pub const UNIT: Ball = Ball {
        center: [0.0; 3],
        radius: 1.0,
    };

    pub fn new(center: Point3, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Ball { center, radius })
    }

    /// Image of a unit-ball point, `center + radius · x`.
    pub fn map_from_unit(&self, x: Point3) -> Point3 {
        vec3::add(self.center, vec3::scale(self.radius, x))
    }

    pub fn contains(&self, x: Point3) -> bool {
        vec3::dist(x, self.center) < self.radius
    }
}

/// Distance from an interior point `x` (relative to the ball centre) to the
/// sphere `|y| = a` along direction `(sinθ cosφ, sinθ sinφ, cosθ)`.
pub fn boundary_distance(x: Point3, theta: f64, phi: f64, a: f64) -> Result<f64> {
    let r2 = vec3::dot(x, x);
    if !(a > 0.0) || r2 >= a * a {
        return Err(Error::OutsideDomain(format!(
            "boundary distance needs |x| < a, got |x| = {}, a = {a}",
            r2.sqrt()
        )));
    }
    Ok(boundary_distance_along(x, vec3::direction(theta, phi), a * a - r2))
}

/// `r_b = sqrt(C² + k) − C` with `C = x·d` and `k = a² − |x|²`, in the
/// cancellation-free form when `C > 0`.
#[inline]
pub(crate) fn boundary_distance_along(x: Point3, d: Point3, k: f64) -> f64 {
    let c = vec3::dot(x, d);
    let root = (c * c + k).sqrt();
    if c > 0.0 {
        k / (root + c)
    } else {
        root - c
    }
}

/// One node of the ball rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallNode {
    /// Radius `r′ ∈ (0, 1)`.
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
    pub cartesian: Point3,
    /// Volume weight `r′² η_ι (π/N_s) α̃_j`.
    pub weight: f64,
}

/// A direction of the sphere rule with its surface weight `(π/N_s) α̃_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereNode {
    pub theta: f64,
    pub phi: f64,
    pub direction: Point3,
    pub weight: f64,
}

/// Gauss-trapezoidal product rule on the unit ball.
#[derive(Debug, Clone)]
pub struct BallQuadrature {
    n_r: usize,
    n_s: usize,
    radial: QuadratureRule1D,
    polar: QuadratureRule1D,
    sphere: Vec<SphereNode>,
    nodes: Vec<BallNode>,
    // ascending θ values and the j index each corresponds to
    theta_ascending: Vec<f64>,
    // [lm][jk] = w_jk Y_lm(d_jk) for degrees below N_s
    synthesis: Vec<f64>,
}

impl BallQuadrature {
    pub fn new(n_r: usize, n_s: usize) -> Result<Self> {
        if n_r == 0 || n_s == 0 {
            return Err(Error::invalid(format!(
                "ball quadrature needs N_r, N_s >= 1, got ({n_r}, {n_s})"
            )));
        }
        let radial = gauss_legendre_rule(n_r)?.mapped(0.0, 1.0);
        let polar = gauss_legendre_rule(n_s)?;
        let n_phi = 2 * n_s;
        let mut sphere = Vec::with_capacity(n_s * n_phi);
        for (&beta, &alpha) in polar.nodes().iter().zip(polar.weights()) {
            let theta = beta.acos();
            for k in 0..n_phi {
                let phi = PI * k as f64 / n_s as f64;
                sphere.push(SphereNode {
                    theta,
                    phi,
                    direction: vec3::direction(theta, phi),
                    weight: PI / n_s as f64 * alpha,
                });
            }
        }
        let mut nodes = Vec::with_capacity(n_r * sphere.len());
        for (&r, &eta) in radial.nodes().iter().zip(radial.weights()) {
            for s in &sphere {
                nodes.push(BallNode {
                    r,
                    theta: s.theta,
                    phi: s.phi,
                    cartesian: vec3::scale(r, s.direction),
                    weight: r * r * eta * s.weight,
                });
            }
        }
        let theta_ascending = polar.nodes().iter().rev().map(|b| b.acos()).collect();
        let degree = n_s - 1;
        let count = harmonic_count(degree);
        let mut synthesis = vec![0.0; count * sphere.len()];
        let mut y = vec![0.0; count];
        for (jk, node) in sphere.iter().enumerate() {
            real_harmonics(degree, node.direction, &mut y);
            for (lm, &v) in y.iter().enumerate() {
                synthesis[lm * sphere.len() + jk] = node.weight * v;
            }
        }
        Ok(BallQuadrature {
            n_r,
            n_s,
            radial,
            polar,
            sphere,
            nodes,
            theta_ascending,
            synthesis,
        })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    /// Number of azimuthal nodes, `2 N_s`.
    pub fn n_phi(&self) -> usize {
        2 * self.n_s
    }

    /// Total node count `N̄ = 2 N_r N_s²`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[BallNode] {
        &self.nodes
    }

    pub fn sphere(&self) -> &[SphereNode] {
        &self.sphere
    }

    /// Radial rule on `[0, 1]` (nodes `r_ι`, weights `η_ι`).
    pub fn radial(&self) -> &QuadratureRule1D {
        &self.radial
    }

    /// Gauss–Legendre rule in `cos θ` (nodes `β̃_j`, weights `α̃_j`).
    pub fn polar(&self) -> &QuadratureRule1D {
        &self.polar
    }

    /// Flat index of node `(ι, j, k)`.
    #[inline]
    pub fn index(&self, iota: usize, j: usize, k: usize) -> usize {
        (iota * self.n_s + j) * self.n_phi() + k
    }

    /// `∫_B f dV` over the unit ball.
    pub fn integrate(&self, f: impl Fn(Point3) -> f64) -> f64 {
        self.nodes.iter().map(|n| n.weight * f(n.cartesian)).sum()
    }

    /// `∫_{S²} f dS` with the Gauss-trapezoidal sphere rule.
    pub fn integrate_sphere(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.sphere.iter().map(|s| s.weight * f(s.theta, s.phi)).sum()
    }

    /// Lagrange stencil of half-width `n0` for a point given in unit-ball
    /// spherical coordinates `(r′, θ, φ)`.
    pub fn stencil(&self, r: f64, theta: f64, phi: f64, n0: usize) -> Result<InterpolationStencil> {
        let axes = self.stencil_axes(r, theta, phi, n0)?;
        let w = 2 * n0 + 1;
        let mut members = Vec::with_capacity(w * w * w);
        let mut weights = Vec::with_capacity(w * w * w);
        axes.for_each(|idx, weight| {
            members.push(idx);
            weights.push(weight);
        });
        Ok(InterpolationStencil {
            half_width: n0,
            members,
            weights,
        })
    }

    pub(crate) fn check_half_width(&self, n0: usize) -> Result<()> {
        if 2 * n0 + 1 > self.n_r.min(self.n_s) {
            return Err(Error::invalid(format!(
                "interpolation stencil 2n0+1 = {} exceeds min(N_r, N_s) = {}",
                2 * n0 + 1,
                self.n_r.min(self.n_s)
            )));
        }
        Ok(())
    }

    /// Per-axis windows and Lagrange factors; the tensor product is the stencil.
    pub(crate) fn stencil_axes(&self, r: f64, theta: f64, phi: f64, n0: usize) -> Result<StencilAxes> {
        self.check_half_width(n0)?;
        if !(0.0..=1.0 + 1e-12).contains(&r) {
            return Err(Error::OutsideDomain(format!(
                "interpolation point r' = {r} outside the unit ball"
            )));
        }
        let w = 2 * n0 + 1;
        let mut axes = StencilAxes::new(w);

        // radius
        let rn = self.radial.nodes();
        let start = window_start(rn, r, w);
        for t in 0..w {
            axes.r_idx[t] = start + t;
        }
        lagrange_weights(&rn[start..start + w], r, &mut axes.r_w[..w]);

        // polar angle; ascending θ index i corresponds to j = n_s − 1 − i
        let th = &self.theta_ascending;
        let start = window_start(th, theta, w);
        for t in 0..w {
            axes.t_idx[t] = self.n_s - 1 - (start + t);
        }
        lagrange_weights(&th[start..start + w], theta, &mut axes.t_w[..w]);

        // azimuth, periodic
        let n_phi = self.n_phi() as i64;
        let dphi = PI / self.n_s as f64;
        let nearest = (phi / dphi).round() as i64;
        let mut phi_nodes = [0.0; MAX_WIDTH];
        for t in 0..w {
            let k = nearest - n0 as i64 + t as i64;
            phi_nodes[t] = k as f64 * dphi;
            axes.p_idx[t] = k.rem_euclid(n_phi) as usize;
        }
        lagrange_weights(&phi_nodes[..w], phi, &mut axes.p_w[..w]);
        axes.stride_r = self.n_s * self.n_phi();
        axes.stride_t = self.n_phi();
        Ok(axes)
    }
}

impl BallQuadrature {
    /// Spherical-harmonic hyperinterpolation weights at direction `d`.
    ///
    /// `out[jk] = w_jk Σ_{l<N_s} (2l+1)/(4π) P_l(d·d_jk)`, the reproducing
    /// kernel of harmonics up to degree `N_s − 1` sampled with the sphere
    /// rule. Harmonics of that degree are reproduced exactly, since the rule
    /// integrates products up to degree `2N_s − 1`.
    pub fn harmonic_weights(&self, d: Point3, out: &mut [f64]) {
        assert_eq!(out.len(), self.sphere.len(), "one weight per sphere node");
        let degree = self.n_s - 1;
        for (o, node) in out.iter_mut().zip(&self.sphere) {
            let t = vec3::dot(d, node.direction).clamp(-1.0, 1.0);
            let (mut p0, mut p1) = (1.0, t);
            let mut sum = 1.0 + if degree >= 1 { 3.0 * t } else { 0.0 };
            for l in 2..=degree {
                let lf = l as f64;
                let p2 = ((2.0 * lf - 1.0) * t * p1 - (lf - 1.0) * p0) / lf;
                sum += (2.0 * lf + 1.0) * p2;
                p0 = p1;
                p1 = p2;
            }
            *o = node.weight * sum / (4.0 * PI);
        }
    }

    /// Degree `N_s − 1` of the harmonic interpolation.
    pub fn harmonic_degree(&self) -> usize {
        self.n_s - 1
    }

    /// Row-major `[lm][jk]` table `w_jk Y_lm(d_jk)`. Contracting harmonic
    /// values at a direction against it gives [`BallQuadrature::harmonic_weights`].
    pub fn harmonic_synthesis(&self) -> &[f64] {
        &self.synthesis
    }

    /// First radial index and Lagrange weights of the `2n₀+1` radial nodes
    /// nearest to `r`.
    pub(crate) fn radial_window(&self, r: f64, n0: usize, out: &mut [f64]) -> usize {
        let w = 2 * n0 + 1;
        let rn = self.radial.nodes();
        let start = window_start(rn, r, w);
        lagrange_weights(&rn[start..start + w], r, &mut out[..w]);
        start
    }
}

/// How the LSE assembly interpolates the unknown over directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngularInterpolation {
    /// Spherical-harmonic hyperinterpolation of degree `N_s − 1`.
    #[default]
    Harmonic,
    /// Tensor Lagrange on the `2n₀+1` nearest `θ` and `φ` nodes.
    Lagrange,
}

pub(crate) const MAX_WIDTH: usize = 15;

/// Tensor-product factors of an interpolation stencil.
#[derive(Debug, Clone)]
pub(crate) struct StencilAxes {
    width: usize,
    r_idx: [usize; MAX_WIDTH],
    t_idx: [usize; MAX_WIDTH],
    p_idx: [usize; MAX_WIDTH],
    r_w: [f64; MAX_WIDTH],
    t_w: [f64; MAX_WIDTH],
    p_w: [f64; MAX_WIDTH],
    stride_r: usize,
    stride_t: usize,
}

impl StencilAxes {
    fn new(width: usize) -> Self {
        assert!(width <= MAX_WIDTH, "stencil width {width} above {MAX_WIDTH}");
        StencilAxes {
            width,
            r_idx: [0; MAX_WIDTH],
            t_idx: [0; MAX_WIDTH],
            p_idx: [0; MAX_WIDTH],
            r_w: [0.0; MAX_WIDTH],
            t_w: [0.0; MAX_WIDTH],
            p_w: [0.0; MAX_WIDTH],
            stride_r: 0,
            stride_t: 0,
        }
    }

    #[inline]
    pub(crate) fn for_each(&self, mut f: impl FnMut(usize, f64)) {
        let w = self.width;
        for a in 0..w {
            let base_a = self.r_idx[a] * self.stride_r;
            let wa = self.r_w[a];
            for b in 0..w {
                let base_b = base_a + self.t_idx[b] * self.stride_t;
                let wab = wa * self.t_w[b];
                for c in 0..w {
                    f(base_b + self.p_idx[c], wab * self.p_w[c]);
                }
            }
        }
    }

    pub(crate) fn apply(&self, samples: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.for_each(|i, w| acc += w * samples[i]);
        acc
    }
}

/// The `(2n_0+1)³` nodes used to interpolate at one point and their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationStencil {
    pub half_width: usize,
    pub members: Vec<usize>,
    pub weights: Vec<f64>,
}

impl InterpolationStencil {
    /// Weight of node `index`; zero for nodes outside the stencil.
    pub fn weight_of(&self, index: usize) -> f64 {
        self.members
            .iter()
            .zip(&self.weights)
            .filter(|(&m, _)| m == index)
            .map(|(_, &w)| w)
            .sum()
    }

    pub fn apply(&self, samples: &[f64]) -> f64 {
        self.members
            .iter()
            .zip(&self.weights)
            .map(|(&m, &w)| w * samples[m])
            .sum()
    }
}

/// Interpolates node samples at `(r′, θ, φ)` with tensor-product Lagrange
/// polynomials over the nearest `2n_0+1` nodes per coordinate.
pub fn interpolate_ball(
    rule: &BallQuadrature,
    samples: &[f64],
    point: (f64, f64, f64),
    n0: usize,
) -> Result<f64> {
    if samples.len() != rule.len() {
        return Err(Error::invalid(format!(
            "expected {} samples, got {}",
            rule.len(),
            samples.len()
        )));
    }
    let axes = rule.stencil_axes(point.0, point.1, point.2, n0)?;
    Ok(axes.apply(samples))
}

/// Start of the `w` consecutive entries of ascending `nodes` nearest to `x`,
/// clamped to the array.
fn window_start(nodes: &[f64], x: f64, w: usize) -> usize {
    let n = nodes.len();
    let upper = nodes.partition_point(|&v| v < x);
    let nearest = if upper == 0 {
        0
    } else if upper == n {
        n - 1
    } else if x - nodes[upper - 1] <= nodes[upper] - x {
        upper - 1
    } else {
        upper
    };
    let half = w / 2;
    nearest.saturating_sub(half).min(n - w)
}

fn lagrange_weights(nodes: &[f64], x: f64, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let xi = nodes[i];
        let mut l = 1.0;
        for (k, &xk) in nodes.iter().enumerate() {
            if k != i {
                l *= (x - xk) / (xi - xk);
            }
        }
        *o = l;
    }
}

/// A quadrature point of the polar rule centred at an interior point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    /// Physical location `y = x + r′ r_b d`.
    pub y: Point3,
    /// Distance `|x − y| = r′ r_b`.
    pub distance: f64,
    /// Weight including the kernel: `Σ w f(y) ≈ ∫_D f(y)/(4π|x−y|) dy`.
    pub weight: f64,
    /// `(ι, j, k)` indices of the underlying ball-rule node.
    pub node: usize,
}

/// Polar-coordinate rule for `∫_D f(y) / (4π|x−y|) dy` centred at `x ∈ D`.
///
/// With `y = x + r′ r_b(θ, φ) d(θ, φ)`, `r′ ∈ [0, 1)`, the integrand becomes
/// `f(y) r′ r_b² sinθ / (4π)`, which the ball rule integrates without
/// singularity.
pub struct PolarRule<'a> {
    rule: &'a BallQuadrature,
    x: Point3,
    boundary: Vec<f64>,
}

impl<'a> PolarRule<'a> {
    pub fn new(rule: &'a BallQuadrature, ball: &Ball, x: Point3) -> Result<Self> {
        let rel = vec3::sub(x, ball.center);
        let k = ball.radius * ball.radius - vec3::dot(rel, rel);
        if !(k > 0.0) {
            return Err(Error::OutsideDomain(format!(
                "polar rule centre {x:?} is not strictly inside the ball of radius {}",
                ball.radius
            )));
        }
        let boundary = rule
            .sphere()
            .iter()
            .map(|s| boundary_distance_along(rel, s.direction, k))
            .collect();
        Ok(PolarRule { rule, x, boundary })
    }

    /// Boundary distances `r_b(θ_j, φ_k)` in sphere-rule order.
    pub fn boundary_distances(&self) -> &[f64] {
        &self.boundary
    }

    pub fn points(&self) -> impl Iterator<Item = PolarPoint> + '_ {
        let n_dir = self.rule.sphere().len();
        let radial = self.rule.radial();
        radial
            .nodes()
            .iter()
            .zip(radial.weights())
            .enumerate()
            .flat_map(move |(iota, (&r, &eta))| {
                self.rule
                    .sphere()
                    .iter()
                    .zip(&self.boundary)
                    .enumerate()
                    .map(move |(s, (dir, &rb))| {
                        let dist = r * rb;
                        PolarPoint {
                            y: vec3::add(self.x, vec3::scale(dist, dir.direction)),
                            distance: dist,
                            weight: eta * dir.weight * r * rb * rb / (4.0 * PI),
                            node: iota * n_dir + s,
                        }
                    })
            })
    }

    pub fn integrate(&self, f: impl Fn(Point3) -> f64) -> f64 {
        self.points().map(|p| p.weight * f(p.y)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn harmonic_weights_reproduce_low_degrees() {
        let rule = BallQuadrature::new(4, 6).unwrap();
        let mut w = vec![0.0; rule.sphere().len()];
        let f = |d: Point3| 1.0 + d[0] * d[1] - 2.0 * d[2].powi(5) + d[0].powi(3) * d[2];
        for &(theta, phi) in &[(0.2, 0.4), (1.3, 2.9), (2.8, 5.5)] {
            let d = vec3::direction(theta, phi);
            rule.harmonic_weights(d, &mut w);
            let got: f64 = rule.sphere().iter().zip(&w).map(|(s, wi)| wi * f(s.direction)).sum();
            assert_abs_diff_eq!(got, f(d), epsilon = 1e-12);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);

            let mut y = vec![0.0; harmonic_count(rule.harmonic_degree())];
            real_harmonics(rule.harmonic_degree(), d, &mut y);
            let m = w.len();
            for (jk, &wj) in w.iter().enumerate() {
                let viat: f64 = y.iter().enumerate().map(|(lm, v)| v * rule.harmonic_synthesis()[lm * m + jk]).sum();
                assert_abs_diff_eq!(viat, wj, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gauss_legendre_small_rules() {
        let r1 = gauss_legendre_rule(1).unwrap();
        assert_eq!(r1.nodes(), &[0.0]);
        assert_abs_diff_eq!(r1.weights()[0], 2.0, epsilon = 1e-15);

        let r2 = gauss_legendre_rule(2).unwrap();
        let x = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(r2.nodes()[0], -x, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.nodes()[1], x, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.nodes()[1], 0.5773502692, epsilon = 1e-10);
        for w in r2.weights() {
            assert_abs_diff_eq!(*w, 1.0, epsilon = 1e-15);
        }
        assert!(gauss_legendre_rule(0).is_err());
    }

    #[test]
    fn gauss_legendre_exactness_and_invariants() {
        let rule = gauss_legendre_rule(15).unwrap();
        assert_abs_diff_eq!(rule.integrate(|x| x * x), 2.0 / 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(rule.weights().iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(rule.nodes().iter().all(|x| x.abs() < 1.0));
        // degree 2n-1 = 29
        assert_abs_diff_eq!(rule.integrate(|x| x.powi(28)), 2.0 / 29.0, epsilon = 1e-13);
        assert_abs_diff_eq!(rule.integrate(|x| x.powi(29)), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn ball_rule_counts_and_volume() {
        let rule = BallQuadrature::new(15, 12).unwrap();
        assert_eq!(rule.len(), 4320);
        assert_abs_diff_eq!(rule.integrate(|_| 1.0), 4.0 * PI / 3.0, epsilon = 1e-12);
        assert!(rule.nodes().iter().all(|n| n.r > 0.0 && n.r < 1.0));
        let n = rule.nodes()[rule.index(3, 5, 7)];
        assert_eq!(n.r, rule.radial().nodes()[3]);
        assert_eq!(n.phi, PI * 7.0 / 12.0);
    }

    #[test]
    fn sphere_rule_basics() {
        let rule = BallQuadrature::new(4, 6).unwrap();
        assert_abs_diff_eq!(rule.integrate_sphere(|_, _| 1.0), 4.0 * PI, epsilon = 1e-12);
        let y10 = |t: f64, _p: f64| (3.0 / (4.0 * PI)).sqrt() * t.cos();
        assert_abs_diff_eq!(rule.integrate_sphere(y10), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn boundary_distance_cases() {
        use std::f64::consts::FRAC_PI_2;
        assert_abs_diff_eq!(boundary_distance([0.0; 3], 0.3, 1.1, 2.0).unwrap(), 2.0, epsilon = 1e-15);
        let x = [0.5, 0.0, 0.0];
        assert_abs_diff_eq!(boundary_distance(x, FRAC_PI_2, 0.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(boundary_distance(x, FRAC_PI_2, PI, 1.0).unwrap(), 1.5, epsilon = 1e-15);
        assert!(boundary_distance([1.0, 0.0, 0.0], 0.1, 0.1, 1.0).is_err());
    }

    #[test]
    fn polar_rule_uniform_ball_potential() {
        let rule = BallQuadrature::new(15, 12).unwrap();
        let ball = Ball::UNIT;
        let at = |x: Point3| PolarRule::new(&rule, &ball, x).unwrap().integrate(|_| 1.0);
        assert_abs_diff_eq!(at([0.0; 3]), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(at([0.5, 0.0, 0.0]), (3.0 - 0.25) / 6.0, epsilon = 1e-8);
        assert!(PolarRule::new(&rule, &ball, [1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn stencil_cardinality_and_partition_of_unity() {
        let rule = BallQuadrature::new(9, 8).unwrap();
        let node = rule.nodes()[rule.index(4, 3, 5)];
        let st = rule.stencil(node.r, node.theta, node.phi, 2).unwrap();
        assert_eq!(st.members.len(), 125);
        let idx = rule.index(4, 3, 5);
        assert_abs_diff_eq!(st.weight_of(idx), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(st.weight_of(rule.index(0, 0, 0)), 0.0);

        let ones = vec![1.0; rule.len()];
        for &(r, t, p) in &[(0.05, 0.1, 6.2), (0.7, 2.9, 3.3), (0.99, 1.6, 0.0)] {
            let v = interpolate_ball(&rule, &ones, (r, t, p), 2).unwrap();
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
        assert!(rule.stencil(0.5, 1.0, 1.0, 5).is_err());
    }
}
