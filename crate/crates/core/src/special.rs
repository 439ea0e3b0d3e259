//! Half-integer Bessel functions, their zeros, and real spherical harmonics.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// A half-integer Bessel order `ν = k/2` with `k` odd and `k ≥ −1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BesselOrder {
    twice: i32,
}

impl BesselOrder {
    /// Order from `2ν`; must be odd and at least −1.
    pub fn from_twice(twice: i32) -> Result<Self> {
        if twice < -1 || twice % 2 == 0 {
            return Err(Error::invalid(format!(
                "Bessel order 2nu = {twice} is not an odd integer >= -1"
            )));
        }
        Ok(BesselOrder { twice })
    }

    /// `l + 1/2`.
    pub fn plus_half(l: u32) -> Self {
        BesselOrder {
            twice: 2 * l as i32 + 1,
        }
    }

    /// `l − 1/2`; requires `l ≥ 0`, giving `−1/2` at `l = 0`.
    pub fn minus_half(l: u32) -> Self {
        BesselOrder {
            twice: 2 * l as i32 - 1,
        }
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn twice(self) -> i32 {
        self.twice
    }
}

/// `J_ν(y)` for half-integer `ν` and `y > 0`.
///
/// Uses the closed forms for `ν = ±1/2` and upward recurrence. The recurrence
/// loses accuracy once `ν` exceeds `y`, so that region is summed from the
/// power series instead.
pub fn bessel_half(nu: BesselOrder, y: f64) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::OutsideDomain(format!(
            "half-integer Bessel function needs y > 0, got {y}"
        )));
    }
    let v = nu.value();
    if v > 0.5 && y < v {
        return Ok(bessel_series(v, y));
    }
    let s = (2.0 / (PI * y)).sqrt();
    let j_minus = s * y.cos();
    let j_plus = s * y.sin();
    if nu.twice == -1 {
        return Ok(j_minus);
    }
    let (mut prev, mut cur) = (j_minus, j_plus);
    let mut order = 0.5;
    while order < v {
        let next = 2.0 * order / y * cur - prev;
        prev = cur;
        cur = next;
        order += 1.0;
    }
    Ok(cur)
}

/// Power series `Σ (−1)^k (y/2)^{2k+ν} / (k! Γ(k+ν+1))`, for `ν ≥ 1/2`.
fn bessel_series(v: f64, y: f64) -> f64 {
    // Γ(ν+1) for half-integer ν from Γ(1/2) = √π
    let mut gamma = PI.sqrt();
    let mut x = 0.5;
    while x < v + 1.0 - 1e-9 {
        gamma *= x;
        x += 1.0;
    }
    let h = 0.5 * y;
    let mut term = h.powf(v) / gamma;
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= -h * h / (kf * (kf + v));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Derivative `J_ν′(y) = J_{ν−1}(y) − (ν/y) J_ν(y)` for `ν ≥ 1/2`, and
/// `J_{−1/2}′ = −J_{1/2} − J_{−1/2}/(2y)`.
pub fn bessel_half_derivative(nu: BesselOrder, y: f64) -> Result<f64> {
    let j = bessel_half(nu, y)?;
    if nu.twice == -1 {
        let jp = bessel_half(BesselOrder { twice: 1 }, y)?;
        return Ok(-jp - j / (2.0 * y));
    }
    let jm = bessel_half(BesselOrder { twice: nu.twice - 2 }, y)?;
    Ok(jm - nu.value() / y * j)
}

/// The `j`-th positive zero of `J_ν`, ascending in `j`.
///
/// Zeros are bracketed by a sign-change scan at a fraction of their
/// asymptotic spacing `π`, then refined by bisection and polished by Newton.
pub fn bessel_root(nu: BesselOrder, j: usize) -> Result<f64> {
    if j == 0 {
        return Err(Error::invalid("Bessel root index starts at 1"));
    }
    let v = nu.value();
    let f = |y: f64| bessel_half(nu, y);
    let step = 0.25;
    // J_ν has no zeros in (0, ν] for ν > 0
    let mut lo = v.max(0.0) + 1e-3;
    let mut f_lo = f(lo)?;
    let mut found = 0;
    let limit = v.max(0.0) + (j as f64 + 2.0) * PI + 10.0;
    while lo < limit {
        let hi = lo + step;
        let f_hi = f(hi)?;
        if f_lo == 0.0 {
            found += 1;
            if found == j {
                return Ok(lo);
            }
        } else if f_lo * f_hi < 0.0 {
            found += 1;
            if found == j {
                return refine_root(nu, lo, hi);
            }
        }
        lo = hi;
        f_lo = f_hi;
    }
    Err(Error::NoConvergence(format!(
        "no bracket found for zero {j} of J_{v}"
    )))
}

fn refine_root(nu: BesselOrder, mut lo: f64, mut hi: f64) -> Result<f64> {
    let f = |y: f64| bessel_half(nu, y);
    let mut f_lo = f(lo)?;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..8 {
        let dy = f(y)? / bessel_half_derivative(nu, y)?;
        let next = y - dy;
        if !(next > lo - 1e-8 && next < hi + 1e-8) {
            break;
        }
        y = next;
        if dy.abs() <= 1e-15 * y {
            break;
        }
    }
    Ok(y)
}

/// Associated Legendre function `P_l^m(x)` without the Condon–Shortley phase.
pub fn associated_legendre(l: u32, m: u32, x: f64) -> f64 {
    if m > l {
        return 0.0;
    }
    let s = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut pmm = 1.0;
    for i in 1..=m {
        pmm *= (2 * i - 1) as f64 * s;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut pm2 = pmm;
    for ll in (m + 2)..=l {
        let p = (x * (2 * ll - 1) as f64 * pm1 - (ll + m - 1) as f64 * pm2) / (ll - m) as f64;
        pm2 = pm1;
        pm1 = p;
    }
    pm1
}

/// Real orthonormal spherical harmonic `Y_l^m(θ, φ)`.
///
/// `m > 0` pairs with `cos(mφ)`, `m < 0` with `sin(|m|φ)`; no Condon–Shortley
/// phase.
pub fn spherical_harmonic(l: u32, m: i32, theta: f64, phi: f64) -> Result<f64> {
    let am = m.unsigned_abs();
    if am > l {
        return Err(Error::invalid(format!(
            "spherical harmonic order |m| = {am} exceeds degree l = {l}"
        )));
    }
    // (l−|m|)!/(l+|m|)! as a running product
    let mut ratio = 1.0;
    for k in (l - am + 1)..=(l + am) {
        ratio /= k as f64;
    }
    let norm = ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt();
    let p = associated_legendre(l, am, theta.cos());
    Ok(match m.signum() {
        0 => norm * p,
        1 => std::f64::consts::SQRT_2 * norm * p * (am as f64 * phi).cos(),
        _ => std::f64::consts::SQRT_2 * norm * p * (am as f64 * phi).sin(),
    })
}

/// Number of real harmonics of degree at most `degree`.
pub fn harmonic_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// All real orthonormal harmonics of degree `≤ degree` at the unit vector `d`.
///
/// `out[l² + l + m]` holds `Y_l^m`, with the conventions of
/// [`spherical_harmonic`]. Uses `sinᵐθ·cos(mφ) = Re (d_x + i d_y)ᵐ`, so no
/// trigonometric calls are needed.
pub fn real_harmonics(degree: usize, d: [f64; 3], out: &mut [f64]) {
    assert!(out.len() >= harmonic_count(degree), "output too short for degree {degree}");
    let z = d[2];
    let (mut re, mut im) = (1.0, 0.0);
    // (2m−1)!!, and √((2l+1)/(4π)·(l−m)!/(l+m)!) built from its l = m value
    let mut dfact = 1.0;
    for m in 0..=degree {
        if m > 0 {
            let r = re * d[0] - im * d[1];
            im = re * d[1] + im * d[0];
            re = r;
            dfact *= (2 * m - 1) as f64;
        }
        let mut ratio = 1.0;
        for k in 1..=2 * m {
            ratio /= k as f64;
        }
        let (mut q2, mut q1) = (0.0, dfact);
        for l in m..=degree {
            let q = if l == m {
                dfact
            } else if l == m + 1 {
                z * (2 * m + 1) as f64 * dfact
            } else {
                (z * (2 * l - 1) as f64 * q1 - (l + m - 1) as f64 * q2) / (l - m) as f64
            };
            if l > m {
                // (l−m)!/(l+m)! from the previous degree
                ratio *= (l - m) as f64 / (l + m) as f64;
            }
            let norm = ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt();
            let centre = l * l + l;
            if m == 0 {
                out[centre] = norm * q;
            } else {
                out[centre + m] = SQRT_2 * norm * q * re;
                out[centre - m] = SQRT_2 * norm * q * im;
            }
            if l > m {
                q2 = q1;
            }
            q1 = q;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::BallQuadrature;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const HALF: BesselOrder = BesselOrder { twice: 1 };
    const MINUS_HALF: BesselOrder = BesselOrder { twice: -1 };

    #[test]
    fn batch_harmonics_match_single() {
        let degree = 9;
        let mut out = vec![0.0; harmonic_count(degree)];
        for &(theta, phi) in &[(0.3, 1.1), (1.9, 4.0), (0.0, 0.0), (PI, 2.0), (1.2, 5.9)] {
            let d = crate::vec3::direction(theta, phi);
            real_harmonics(degree, d, &mut out);
            for l in 0..=degree as u32 {
                for m in -(l as i32)..=l as i32 {
                    let idx = (l * l + l) as usize;
                    let got = out[(idx as i64 + m as i64) as usize];
                    let want = spherical_harmonic(l, m, theta, phi).unwrap();
                    assert_abs_diff_eq!(got, want, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn closed_form_values() {
        assert_abs_diff_eq!(bessel_half(HALF, PI).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(bessel_half(MINUS_HALF, PI / 3.0).unwrap(), 0.38985, epsilon = 1e-5);
        assert!(bessel_half(HALF, 0.0).is_err());
        assert!(bessel_half(HALF, -1.0).is_err());
        assert!(BesselOrder::from_twice(2).is_err());
        assert!(BesselOrder::from_twice(-3).is_err());
    }

    #[test]
    fn three_halves_matches_series() {
        let three_halves = BesselOrder::from_twice(3).unwrap();
        let y = 5.0;
        let via_recurrence = bessel_half(HALF, y).unwrap() / y - bessel_half(MINUS_HALF, y).unwrap();
        assert_abs_diff_eq!(bessel_half(three_halves, y).unwrap(), via_recurrence, epsilon = 1e-12);
        assert_abs_diff_eq!(bessel_series(1.5, y), via_recurrence, epsilon = 1e-12);
        // small argument takes the series branch; compare with the closed form
        let y = 0.3;
        let closed = (2.0 / (PI * y)).sqrt() * (y.sin() / y - y.cos());
        assert_abs_diff_eq!(bessel_half(three_halves, y).unwrap(), closed, epsilon = 1e-15);
    }

    #[test]
    fn roots_of_the_trig_orders() {
        for j in 1..=4 {
            let r = bessel_root(MINUS_HALF, j).unwrap();
            assert_abs_diff_eq!(r, (j as f64 - 0.5) * PI, epsilon = 1e-12);
            let r = bessel_root(HALF, j).unwrap();
            assert_abs_diff_eq!(r, j as f64 * PI, epsilon = 1e-12);
        }
        assert!(bessel_root(HALF, 0).is_err());
    }

    #[test]
    fn root_residuals_and_interlacing() {
        for twice in [-1, 1, 3] {
            let nu = BesselOrder::from_twice(twice).unwrap();
            let roots: Vec<f64> = (1..=10).map(|j| bessel_root(nu, j).unwrap()).collect();
            assert!(roots.windows(2).all(|w| w[0] < w[1]));
            for &r in &roots {
                assert!(bessel_half(nu, r).unwrap().abs() <= 1e-10);
            }
        }
        let a: Vec<f64> = (1..=6).map(|j| bessel_root(HALF, j).unwrap()).collect();
        let b: Vec<f64> = (1..=6).map(|j| bessel_root(BesselOrder::plus_half(1), j).unwrap()).collect();
        for j in 0..5 {
            assert!(a[j] < b[j] && b[j] < a[j + 1]);
        }
    }

    #[test]
    fn harmonic_values_and_orthonormality() {
        assert_abs_diff_eq!(spherical_harmonic(0, 0, 0.4, 1.0).unwrap(), 0.2820948, epsilon = 1e-7);
        assert_abs_diff_eq!(spherical_harmonic(1, 0, 0.0, 0.0).unwrap(), 0.4886025, epsilon = 1e-7);
        assert!(spherical_harmonic(1, 2, 0.0, 0.0).is_err());

        let rule = BallQuadrature::new(1, 12).unwrap();
        let mut pairs = Vec::new();
        for l in 0..=4u32 {
            for m in -(l as i32)..=(l as i32) {
                pairs.push((l, m));
            }
        }
        for &(l1, m1) in &pairs {
            for &(l2, m2) in &pairs {
                let v = rule.integrate_sphere(|t, p| {
                    spherical_harmonic(l1, m1, t, p).unwrap() * spherical_harmonic(l2, m2, t, p).unwrap()
                });
                let expect = if (l1, m1) == (l2, m2) { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(v, expect, epsilon = 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn closed_forms_agree(y in 0.1f64..50.0) {
            let s = (2.0 / (PI * y)).sqrt();
            prop_assert!((bessel_half(HALF, y).unwrap() - s * y.sin()).abs() <= 1e-13);
            prop_assert!((bessel_half(MINUS_HALF, y).unwrap() - s * y.cos()).abs() <= 1e-13);
        }

        #[test]
        fn recurrence_and_series_agree_near_crossover(y in 0.5f64..8.0, l in 1u32..6) {
            let v = l as f64 + 0.5;
            let rec = bessel_half(BesselOrder::plus_half(l), y.max(v)).unwrap();
            let ser = bessel_series(v, y.max(v));
            prop_assert!((rec - ser).abs() <= 1e-12);
        }
    }
}
