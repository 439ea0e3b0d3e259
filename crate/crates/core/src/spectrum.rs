//! Eigenpairs of the Newtonian operator `𝒩f(x) = ∫_D f(y)/(4π|x−y|) dy` on a
//! ball, and their numerical validation.
//!
//! On a ball of radius `a` the eigenvalues are `λ = a²/μ²` where `μ` runs over
//! the positive zeros of `J_{l−1/2}`, with eigenfunctions
//! `u = r^{−1/2} J_{l+1/2}(μr/a) Y_l^m`. Only the radial (`l = 0`) modes have a
//! nonzero average and enter the droplet expansion; for them `μ = (j − 1/2)π`
//! and everything has a closed form.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::write_csv;
use crate::quadrature::{Ball, BallQuadrature, PolarRule};
use crate::special::{bessel_half, bessel_root, spherical_harmonic, BesselOrder};
use crate::vec3::{self, Point3};

/// The injected inclusion `D = z + aB` and the medium around it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Droplet {
    pub center: Point3,
    pub radius: f64,
    /// Riesz parameter `b = c₁π/a`.
    pub riesz_b: f64,
    /// Background wave speed `c₀`.
    pub c0: f64,
}

impl Droplet {
    pub fn new(center: Point3, radius: f64, riesz_b: f64, c0: f64) -> Result<Self> {
        for (name, v) in [("radius", radius), ("Riesz parameter b", riesz_b), ("c0", c0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("droplet {name} must be positive, got {v}")));
            }
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("droplet center must be finite"));
        }
        Ok(Droplet {
            center,
            radius,
            riesz_b,
            c0,
        })
    }

    /// Interior wave speed `c₁ = ab/π`.
    pub fn c1(&self) -> f64 {
        self.radius * self.riesz_b / PI
    }

    /// Contrast `χ₁ = c₀²/c₁² − 1`.
    pub fn chi1(&self) -> f64 {
        let r = self.c0 / self.c1();
        r * r - 1.0
    }

    pub fn ball(&self) -> Ball {
        Ball {
            center: self.center,
            radius: self.radius,
        }
    }

    /// Same droplet moved to `center`.
    pub fn at(&self, center: Point3) -> Droplet {
        Droplet { center, ..*self }
    }

    /// Same droplet with radius `a`, keeping `b` (and so scaling `c₁` with `a`).
    pub fn with_radius(&self, radius: f64) -> Droplet {
        Droplet { radius, ..*self }
    }
}

/// One eigenpair `(λ, e)` of the Newtonian operator on a ball of radius `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenMode {
    pub l: u32,
    pub j: usize,
    pub m: i32,
    /// Zero `μ` of `J_{l−1/2}`.
    pub mu: f64,
    /// Eigenvalue `a²/μ²`.
    pub lambda: f64,
    /// `∫_D e dy` of the normalized eigenfunction; zero for `l ≥ 1`.
    pub avg: f64,
    /// `c₁/√λ`, known only once a droplet supplies `c₁`.
    pub omega: Option<f64>,
    /// Ball radius the mode lives on.
    pub a: f64,
}

impl EigenMode {
    /// Mode `(l, m, j)` on a ball of radius `a`.
    pub fn new(l: u32, m: i32, j: usize, a: f64) -> Result<Self> {
        if m.unsigned_abs() > l {
            return Err(Error::invalid(format!("mode order |m| = {} exceeds l = {l}", m.abs())));
        }
        if !(a > 0.0) {
            return Err(Error::invalid(format!("ball radius must be positive, got {a}")));
        }
        let mu = if l == 0 {
            if j == 0 {
                return Err(Error::invalid("radial mode index starts at 1"));
            }
            (j as f64 - 0.5) * PI
        } else {
            bessel_root(BesselOrder::minus_half(l), j)?
        };
        let avg = if l == 0 {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            sign * (8.0 * PI).sqrt() * a.powf(1.5) / (mu * mu)
        } else {
            0.0
        };
        Ok(EigenMode {
            l,
            j,
            m,
            mu,
            lambda: a * a / (mu * mu),
            avg,
            omega: None,
            a,
        })
    }

    /// `⟨u, u⟩` for the unnormalized eigenfunction [`EigenMode::raw_value`].
    ///
    /// For `l = 0` the `sin(2μ)` term vanishes exactly since `μ` is an odd
    /// multiple of `π/2`, leaving `4a²/μ`. For `l ≥ 1` the Lommel integral with
    /// `J_{l−1/2}(μ) = 0` gives `(a²/2) J_{l+1/2}(μ)²`.
    pub fn raw_norm_squared(&self) -> f64 {
        if self.l == 0 {
            4.0 * self.a * self.a / self.mu
        } else {
            let jv = bessel_half(BesselOrder::plus_half(self.l), self.mu).unwrap_or(0.0);
            0.5 * self.a * self.a * jv * jv
        }
    }

    /// Unnormalized eigenfunction at a point relative to the ball centre.
    ///
    /// `l = 0`: `sqrt(2a/(πμ)) sin(μr/a)/r`, continued by `sqrt(2μ/(πa))` at
    /// the centre. `l ≥ 1`: `r^{−1/2} J_{l+1/2}(μr/a) Y_l^m`, zero at the centre.
    pub fn raw_value(&self, x: Point3) -> f64 {
        let (r, theta, phi) = vec3::to_spherical(x);
        if r == 0.0 {
            return if self.l == 0 {
                (2.0 * self.mu / (PI * self.a)).sqrt()
            } else {
                0.0
            };
        }
        let arg = self.mu * r / self.a;
        if self.l == 0 {
            (2.0 * self.a / (PI * self.mu)).sqrt() * arg.sin() / r
        } else {
            let jv = bessel_half(BesselOrder::plus_half(self.l), arg).unwrap_or(0.0);
            let y = spherical_harmonic(self.l, self.m, theta, phi).unwrap_or(0.0);
            jv * y / r.sqrt()
        }
    }

    /// Frequency-weighted average `(n − 1/2)² (∫_B e)²` on the unit ball,
    /// equal to `8/(π³(n − 1/2)²)` for radial modes.
    pub fn scaled_unit_average(&self) -> f64 {
        let unit_avg_sq = self.avg * self.avg / self.a.powi(3);
        let k = self.mu / PI;
        k * k * unit_avg_sq
    }
}

/// The first `n` radial modes of the droplet, with `ω_j = c₁μ_j/a = b(j − 1/2)`.
pub fn modes_l0(droplet: &Droplet, n: usize) -> Result<Vec<EigenMode>> {
    if n == 0 {
        return Err(Error::invalid("need at least one eigenmode"));
    }
    let c1 = droplet.c1();
    (1..=n)
        .map(|j| {
            let mut mode = EigenMode::new(0, 0, j, droplet.radius)?;
            mode.omega = Some(c1 * mode.mu / droplet.radius);
            Ok(mode)
        })
        .collect()
}

/// Normalized eigenfunction `e = u/‖u‖` at `x`, for `x` in the closed droplet.
pub fn eigenfunction_value(mode: &EigenMode, droplet_center: Point3, x: Point3) -> Result<f64> {
    let rel = vec3::sub(x, droplet_center);
    if vec3::norm(rel) > mode.a * (1.0 + 1e-12) {
        return Err(Error::OutsideDomain(format!(
            "eigenfunction evaluated at distance {} outside the ball of radius {}",
            vec3::norm(rel),
            mode.a
        )));
    }
    Ok(mode.raw_value(rel) / mode.raw_norm_squared().sqrt())
}

/// `∫_D f(y)/(4π|x−y|) dy` by the polar rule centred at `x`.
pub fn apply_newtonian(
    f: impl Fn(Point3) -> f64,
    ball: &Ball,
    x: Point3,
    rule: &BallQuadrature,
) -> Result<f64> {
    Ok(PolarRule::new(rule, ball, x)?.integrate(f))
}

/// The validation lattice: step `2/(n − 1)` on `[−1, 1]³`, kept where
/// `|x| < cutoff` (strict).
pub fn validation_lattice(n: usize, cutoff: f64) -> Vec<Point3> {
    let coord = |k: usize| -1.0 + 2.0 * k as f64 / (n - 1) as f64;
    let mut pts = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let p = [coord(i), coord(j), coord(k)];
                if vec3::norm(p) < cutoff {
                    pts.push(p);
                }
            }
        }
    }
    pts
}

/// Lattice used for the eigensystem table: 20 points per axis, `|x| < 0.95`.
pub fn default_validation_lattice() -> Vec<Point3> {
    validation_lattice(20, 0.95)
}

/// Mean residual `|u(xᵢ) − λ⁻¹𝒩u(xᵢ)|` of one mode over a point set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenResidual {
    pub l: u32,
    pub m: i32,
    pub j: usize,
    pub err: f64,
    pub points: usize,
}

/// Residual of the unnormalized eigenfunction of each mode on a centred ball
/// of radius `mode.a`, averaged over `points`.
pub fn validate_eigensystem(
    modes: &[EigenMode],
    points: &[Point3],
    rule: &BallQuadrature,
) -> Result<Vec<EigenResidual>> {
    if points.is_empty() {
        return Err(Error::invalid("validation needs at least one point"));
    }
    modes
        .iter()
        .map(|mode| {
            let ball = Ball::new([0.0; 3], mode.a)?;
            let total: f64 = points
                .par_iter()
                .map(|&x| {
                    let nu = apply_newtonian(|y| mode.raw_value(y), &ball, x, rule)?;
                    Ok((mode.raw_value(x) - nu / mode.lambda).abs())
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .sum();
            Ok(EigenResidual {
                l: mode.l,
                m: mode.m,
                j: mode.j,
                err: total / points.len() as f64,
                points: points.len(),
            })
        })
        .collect()
}

/// Writes residuals as CSV with columns `l, m, j, err, points`.
pub fn write_residuals_csv(path: &Path, residuals: &[EigenResidual]) -> Result<()> {
    let rows: Vec<Vec<String>> = residuals
        .iter()
        .map(|r| {
            vec![
                r.l.to_string(),
                r.m.to_string(),
                r.j.to_string(),
                format!("{:e}", r.err),
                r.points.to_string(),
            ]
        })
        .collect();
    write_csv(path, &["l", "m", "j", "err", "points"], &rows)
}

/// Partial sums of `avg²/λ` over the first `n` radial modes; the series
/// converges to `4πa`.
pub fn spectral_mass_partial_sum(a: f64, n: usize) -> Result<f64> {
    let droplet = Droplet::new([0.0; 3], a, 1.0, 1.0)?;
    Ok(modes_l0(&droplet, n)?
        .iter()
        .map(|m| m.avg * m.avg / m.lambda)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn unit_droplet() -> Droplet {
        Droplet::new([0.0; 3], 1.0, PI, 1.0).unwrap()
    }

    #[test]
    fn first_radial_mode_closed_forms() {
        let m = modes_l0(&unit_droplet(), 3).unwrap();
        assert_abs_diff_eq!(m[0].lambda, 4.0 / (PI * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(m[0].lambda, 0.405285, epsilon = 1e-6);
        assert_abs_diff_eq!(m[0].avg * m[0].avg, 128.0 / PI.powi(3), epsilon = 1e-13);
        assert_abs_diff_eq!(m[0].avg * m[0].avg, 4.1281, epsilon = 1e-4);
        assert_abs_diff_eq!(m[0].scaled_unit_average(), 32.0 / PI.powi(3), epsilon = 1e-14);
        // c1 = a b / π = 1, ω = b (j − 1/2)
        assert_abs_diff_eq!(m[2].omega.unwrap(), PI * 2.5, epsilon = 1e-13);
    }

    #[test]
    fn averages_match_quadrature() {
        let rule = BallQuadrature::new(15, 12).unwrap();
        let d = Droplet::new([0.0; 3], 0.7, 3.0, 1.0).unwrap();
        for mode in modes_l0(&d, 4).unwrap() {
            let a3 = d.radius.powi(3);
            let avg = a3 * rule.integrate(|y| {
                eigenfunction_value(&mode, [0.0; 3], vec3::scale(d.radius, y)).unwrap()
            });
            assert_abs_diff_eq!(avg, mode.avg, epsilon = 1e-10);
            let norm = a3 * rule.integrate(|y| {
                eigenfunction_value(&mode, [0.0; 3], vec3::scale(d.radius, y))
                    .unwrap()
                    .powi(2)
            });
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn higher_degree_modes_normalize_and_average_to_zero() {
        let rule = BallQuadrature::new(20, 12).unwrap();
        for (l, m, j) in [(1, 0, 1), (1, 1, 2), (2, -1, 1)] {
            let mode = EigenMode::new(l, m, j, 1.0).unwrap();
            let norm = rule.integrate(|y| eigenfunction_value(&mode, [0.0; 3], y).unwrap().powi(2));
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-8);
            let avg = rule.integrate(|y| eigenfunction_value(&mode, [0.0; 3], y).unwrap());
            assert_abs_diff_eq!(avg, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn centre_value_is_the_limit() {
        let mode = EigenMode::new(0, 0, 1, 1.0).unwrap();
        let limit = mode.raw_value([0.0; 3]);
        assert_abs_diff_eq!(limit, (2.0 * mode.mu / PI).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(mode.raw_value([1e-7, 0.0, 0.0]), limit, epsilon = 1e-10);
        assert!(eigenfunction_value(&mode, [0.0; 3], [1.1, 0.0, 0.0]).is_err());
    }

    #[test]
    fn uniform_ball_potential() {
        let rule = BallQuadrature::new(15, 12).unwrap();
        let ball = Ball::UNIT;
        assert_abs_diff_eq!(apply_newtonian(|_| 1.0, &ball, [0.0; 3], &rule).unwrap(), 0.5, epsilon = 1e-8);
        let v = apply_newtonian(|_| 1.0, &ball, [0.0, 0.5, 0.0], &rule).unwrap();
        assert_abs_diff_eq!(v, (3.0 - 0.25) / 6.0, epsilon = 1e-8);
        assert!(apply_newtonian(|_| 1.0, &ball, [0.0, 0.0, 1.0], &rule).is_err());
    }

    #[test]
    fn scaling_laws_are_exact() {
        let base = EigenMode::new(0, 0, 3, 1.0).unwrap();
        for a in [0.05, 1e-3] {
            let m = EigenMode::new(0, 0, 3, a).unwrap();
            assert_relative_eq!(m.lambda, base.lambda * a * a, max_relative = 1e-14);
            assert_relative_eq!(m.avg, base.avg * a.powf(1.5), max_relative = 1e-14);
        }
    }

    #[test]
    fn spectral_mass_converges_from_below() {
        let a = 0.3;
        let sums: Vec<f64> = (1..=20).map(|n| spectral_mass_partial_sum(a, n).unwrap()).collect();
        assert!(sums.windows(2).all(|w| w[0] < w[1]));
        assert!(sums[19] < 4.0 * PI * a);
        // the missing tail is Σ_{j>20} 1/(j−1/2)² relative to π²/2
        let tail: f64 = (21..200_000).map(|j| 1.0 / (j as f64 - 0.5).powi(2)).sum();
        assert_relative_eq!(sums[19] / (4.0 * PI * a), 1.0 - tail / (PI * PI / 2.0), max_relative = 1e-5);
    }

    #[test]
    fn lattice_point_count() {
        assert_eq!(default_validation_lattice().len(), 3112);
    }

    #[test]
    fn droplet_derived_quantities() {
        let d = Droplet::new([0.0; 3], 0.05, 4.0 * PI, 1.0).unwrap();
        assert_abs_diff_eq!(d.c1(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(d.chi1(), 24.0, epsilon = 1e-12);
        assert!(Droplet::new([0.0; 3], 0.0, 1.0, 1.0).is_err());
        assert!(Droplet::new([0.0; 3], 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn low_modes_satisfy_the_eigen_equation() {
        let rule = BallQuadrature::new(15, 12).unwrap();
        let pts: Vec<Point3> = validation_lattice(8, 0.95);
        let modes = [EigenMode::new(0, 0, 1, 1.0).unwrap(), EigenMode::new(1, 1, 1, 1.0).unwrap()];
        for r in validate_eigensystem(&modes, &pts, &rule).unwrap() {
            assert!(r.err < 1e-12, "{r:?}");
        }
    }
}
