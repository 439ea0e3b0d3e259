//! Convolution splines (D-splines) in the delay variable `τ ≥ 0`.
//!
//! Samples live on the knots `τ_s = sΔt`. On the interval `[τ_m, τ_{m+1}]`
//! the spline is the degree-`(4q+1)` Hermite blend that matches derivatives
//! `0..=2q` of the local Lagrange interpolant `P_m` at `τ_m` and of `P_{m+1}`
//! at `τ_{m+1}`. `P_m` interpolates on the knots `S_m = {m−q, …, m+q}`, or on
//! the one-sided set `{0, …, 2q}` when `m < q`. The resulting basis functions
//! `ω_s` are `C^{2q}`, cardinal at the knots, and reproduce polynomials of
//! degree `≤ 2q`.
//!
//! Polynomials are stored as monomial coefficients in the local variable
//! `s = (τ − τ_m)/Δt ∈ [0, 1]`.

use num_rational::BigRational as Q;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Piecewise-polynomial coefficients of one interval: the contributing knot
/// (as an offset from `m`, or absolute for start-up intervals) and its
/// polynomial in `s`.
#[derive(Debug, Clone, PartialEq)]
struct IntervalPieces {
    pieces: Vec<(i64, Vec<f64>)>,
}

/// The convolution-spline basis for order `q` and step `Δt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    q: usize,
    dt: f64,
    /// Intervals `m = 0..q`; knots are absolute indices.
    startup: Vec<IntervalPieces>,
    /// Every interval `m ≥ q`; knots are offsets from `m`.
    generic: IntervalPieces,
}

/// Builds the basis for order `q ≥ 1` and step `dt > 0`.
///
/// Coefficients are formed in exact rational arithmetic and rounded once, so
/// polynomial reproduction holds to rounding in the final evaluation only.
pub fn build_spline_basis(q: usize, dt: f64) -> Result<SplineBasis> {
    if q == 0 || q > 8 {
        return Err(Error::invalid(format!("spline order q must be in 1..=8, got {q}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("spline step must be positive, got {dt}")));
    }
    let hermite = hermite_basis(q)?;
    let stencil = |m: i64| -> Vec<i64> {
        if m < q as i64 {
            (0..=2 * q as i64).collect()
        } else {
            (m - q as i64..=m + q as i64).collect()
        }
    };
    let blend = |m: i64| -> IntervalPieces {
        let left = stencil(m);
        let right = stencil(m + 1);
        let mut knots: Vec<i64> = left.iter().chain(&right).copied().collect();
        knots.sort_unstable();
        knots.dedup();
        let pieces = knots
            .into_iter()
            .map(|k| {
                let pl = lagrange_in_s(&left, k, m);
                let pr = lagrange_in_s(&right, k, m);
                let coeffs = hermite_blend(&hermite, q, &pl, &pr)
                    .iter()
                    .map(|c| c.to_f64().unwrap_or(f64::NAN))
                    .collect();
                (k, coeffs)
            })
            .collect();
        IntervalPieces { pieces }
    };
    let startup = (0..q as i64).map(blend).collect();
    let mut generic = blend(q as i64);
    for (k, _) in &mut generic.pieces {
        *k -= q as i64;
    }
    Ok(SplineBasis {
        q,
        dt,
        startup,
        generic,
    })
}

impl SplineBasis {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Polynomial degree `4q + 1` of each piece.
    pub fn degree(&self) -> usize {
        4 * self.q + 1
    }

    /// Largest knot index any evaluation with `τ ≤ tau_max` touches.
    pub fn max_knot(&self, tau_max: f64) -> usize {
        let m = (tau_max / self.dt).floor().max(0.0) as usize;
        if m < self.q {
            2 * self.q
        } else {
            m + self.q + 1
        }
    }

    /// Samples of history needed for delays up to `tau_max`:
    /// `max(⌈tau_max/Δt⌉ + q, 2q)`. The one-sided start-up stencil reaches
    /// knot `2q` even when the delay range is short.
    pub fn history_depth(&self, tau_max: f64) -> usize {
        let nq = (tau_max / self.dt - 1e-12).ceil().max(0.0) as usize + self.q;
        nq.max(2 * self.q)
    }

    /// Nonzero weights `(s, ω_s^{(derivative)}(τ))` at delay `τ ≥ 0`.
    pub fn weights(&self, tau: f64, derivative: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(4 * self.q + 2);
        self.for_each_weight(tau, derivative, |s, w| out.push((s, w)));
        out
    }

    /// Calls `f(s, ω_s^{(derivative)}(τ))` for every knot whose spline is
    /// supported at `τ`. Negative `τ` is treated as `0`.
    pub fn for_each_weight(&self, tau: f64, derivative: usize, mut f: impl FnMut(usize, f64)) {
        let x = (tau / self.dt).max(0.0);
        let m = x.floor();
        let s = x - m;
        let m = m as i64;
        let scale = self.dt.powi(-(derivative as i32));
        let (pieces, base) = if (m as usize) < self.q {
            (&self.startup[m as usize], 0)
        } else {
            (&self.generic, m)
        };
        for (k, c) in &pieces.pieces {
            let v = poly_derivative_at(c, derivative, s);
            if v != 0.0 {
                f((base + k) as usize, v * scale);
            }
        }
    }

    /// Interpolates knot samples `g(τ_s) = samples[s]` (zero beyond the slice).
    pub fn interpolate(&self, samples: &[f64], tau: f64, derivative: usize) -> f64 {
        let mut acc = 0.0;
        self.for_each_weight(tau, derivative, |s, w| {
            if let Some(v) = samples.get(s) {
                acc += w * v;
            }
        });
        acc
    }
}

fn int(v: i64) -> Q {
    Q::from_integer(v.into())
}

/// Lagrange basis polynomial for knot `k` on `nodes`, in `s = τ/Δt − m`;
/// zero when `k` is not a node.
fn lagrange_in_s(nodes: &[i64], k: i64, m: i64) -> Vec<Q> {
    if !nodes.contains(&k) {
        return vec![Q::zero()];
    }
    let xk = k - m;
    let mut poly = vec![Q::one()];
    for &n in nodes {
        if n == k {
            continue;
        }
        let xn = n - m;
        let d = int(xk - xn);
        // multiply by (s − xn)/d
        let mut next = vec![Q::zero(); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            let c = c / &d;
            next[i] -= &c * int(xn);
            next[i + 1] += c;
        }
        poly = next;
    }
    poly
}

/// `p^{(d)}(s)` for monomial coefficients `p`.
fn poly_derivative_at(p: &[f64], d: usize, s: f64) -> f64 {
    let mut acc = 0.0;
    for i in (d..p.len()).rev() {
        acc = acc * s + p[i] * falling(i, d) as f64;
    }
    acc
}

/// Exact `p^{(d)}` at `s ∈ {0, 1}`.
fn exact_derivative_at(p: &[Q], d: usize, at_one: bool) -> Q {
    if !at_one {
        return p.get(d).map_or_else(Q::zero, |c| c * int(falling(d, d)));
    }
    p.iter()
        .enumerate()
        .skip(d)
        .fold(Q::zero(), |acc, (i, c)| acc + c * int(falling(i, d)))
}

fn falling(i: usize, d: usize) -> i64 {
    ((i - d + 1)..=i).fold(1i64, |a, k| a * k as i64)
}

/// Inverse of the two-point Hermite constraint matrix of degree `4q+1`:
/// rows `0..=2q` impose derivatives at `s = 0`, the rest at `s = 1`.
fn hermite_basis(q: usize) -> Result<Vec<Vec<Q>>> {
    let n = 4 * q + 2;
    let h = 2 * q + 1;
    let mut a: Vec<Vec<Q>> = (0..n)
        .map(|row| {
            let (d, at_one) = if row < h { (row, false) } else { (row - h, true) };
            (0..n)
                .map(|col| {
                    if col < d || (!at_one && col != d) {
                        Q::zero()
                    } else {
                        int(falling(col, d))
                    }
                })
                .collect()
        })
        .collect();
    let mut inv: Vec<Vec<Q>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect())
        .collect();
    // Gauss-Jordan elimination over the rationals
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::Singular("Hermite constraint matrix".into()))?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] = &a[col][j] / &p;
            inv[col][j] = &inv[col][j] / &p;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..n {
                let da = &f * &a[col][j];
                a[r][j] -= da;
                let di = &f * &inv[col][j];
                inv[r][j] -= di;
            }
        }
    }
    Ok(inv)
}

fn hermite_blend(inv: &[Vec<Q>], q: usize, left: &[Q], right: &[Q]) -> Vec<Q> {
    let n = 4 * q + 2;
    let h = 2 * q + 1;
    let rhs: Vec<Q> = (0..n)
        .map(|r| {
            if r < h {
                exact_derivative_at(left, r, false)
            } else {
                exact_derivative_at(right, r - h, true)
            }
        })
        .collect();
    (0..n)
        .map(|i| {
            inv[i]
                .iter()
                .zip(&rhs)
                .fold(Q::zero(), |acc, (a, b)| acc + a * b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sampled(f: impl Fn(f64) -> f64, dt: f64, n: usize) -> Vec<f64> {
        (0..n).map(|s| f(s as f64 * dt)).collect()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_spline_basis(0, 0.1).is_err());
        assert!(build_spline_basis(2, 0.0).is_err());
    }

    #[test]
    fn cardinal_at_knots() {
        for q in 1..=3 {
            let b = build_spline_basis(q, 0.1).unwrap();
            for s in 0..20 {
                let w = b.weights(s as f64 * 0.1, 0);
                let hit: Vec<_> = w.iter().filter(|(_, v)| v.abs() > 1e-12).collect();
                assert_eq!(hit.len(), 1, "q={q} s={s} {w:?}");
                assert_eq!(hit[0].0, s);
                assert_abs_diff_eq!(hit[0].1, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn reproduces_low_degree_polynomials() {
        let dt = 0.1;
        for q in 1..=3 {
            let b = build_spline_basis(q, dt).unwrap();
            for deg in 0..=2 * q {
                let f = |t: f64| (t - 0.3).powi(deg as i32) + 0.5;
                let data = sampled(f, dt, 40);
                for i in 0..200 {
                    let tau = i as f64 * 0.013;
                    let v = b.interpolate(&data, tau, 0);
                    assert!((v - f(tau)).abs() < 1e-10, "q={q} deg={deg} tau={tau} {v} {}", f(tau));
                }
            }
        }
    }

    #[test]
    fn second_derivative_of_quadratic_and_constant() {
        let dt = 0.1;
        let b = build_spline_basis(2, dt).unwrap();
        let quad = sampled(|t| t * t, dt, 50);
        let ones = vec![1.0; 50];
        for i in 0..300 {
            let tau = 0.3 + i as f64 * 0.0107;
            assert_abs_diff_eq!(b.interpolate(&quad, tau, 2), 2.0, epsilon = 1e-10);
            assert_abs_diff_eq!(b.interpolate(&ones, tau, 2), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn smooth_across_knots() {
        let b = build_spline_basis(2, 1.0).unwrap();
        // every knot function, continuity of derivatives 0..=4 at each knot
        for knot in 1..12usize {
            let tk = knot as f64;
            for j in 0..16usize {
                for d in 0..=4 {
                    let at = |tau: f64| {
                        b.weights(tau, d).iter().find(|(s, _)| *s == j).map_or(0.0, |p| p.1)
                    };
                    let left = at(tk - 1e-10);
                    let right = at(tk);
                    assert!((left - right).abs() < 1e-6, "knot {knot} basis {j} derivative {d}: {left} vs {right}");
                }
            }
        }
    }

    #[test]
    fn support_is_the_stencil_union() {
        let b = build_spline_basis(2, 0.1).unwrap();
        for m in 0..15usize {
            let tau = (m as f64 + 0.5) * 0.1;
            let allowed: Vec<usize> = if m + 1 < 2 {
                (0..=4).collect()
            } else if m < 2 {
                (0..=5).collect()
            } else {
                (m - 2..=m + 3).collect()
            };
            for (s, _) in b.weights(tau, 0) {
                assert!(allowed.contains(&s), "m={m} s={s}");
            }
            assert!(b.weights(tau, 0).len() <= 4 * 2 + 2);
        }
    }

    #[test]
    fn history_depth_covers_start_up_stencil() {
        let b = build_spline_basis(2, 0.1).unwrap();
        assert_eq!(b.history_depth(0.1), 4);
        assert_eq!(b.history_depth(1.0), 12);
        for i in 0..=100 {
            let tau = i as f64 * 0.01;
            let touched = b.weights(tau, 0).iter().map(|p| p.0).max().unwrap();
            assert!(touched <= b.history_depth(1.0));
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(tau in 0.0f64..5.0) {
            let b = build_spline_basis(2, 0.1).unwrap();
            let sum: f64 = b.weights(tau, 0).iter().map(|p| p.1).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
