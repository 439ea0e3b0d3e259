//! Minimal helpers for points in R³.

pub type Point3 = [f64; 3];

#[inline]
pub fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(s: f64, a: Point3) -> Point3 {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: Point3, b: Point3) -> f64 {
    norm(sub(a, b))
}

/// Unit vector (sinθ cosφ, sinθ sinφ, cosθ).
#[inline]
pub fn direction(theta: f64, phi: f64) -> Point3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

/// Spherical coordinates (r, θ, φ) with φ ∈ [0, 2π). The origin maps to (0, 0, 0).
pub fn to_spherical(p: Point3) -> (f64, f64, f64) {
    let r = norm(p);
    if r == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let theta = (p[2] / r).clamp(-1.0, 1.0).acos();
    let mut phi = p[1].atan2(p[0]);
    if phi < 0.0 {
        phi += std::f64::consts::TAU;
    }
    if phi >= std::f64::consts::TAU {
        phi -= std::f64::consts::TAU;
    }
    (r, theta, phi)
}
