//! Time-domain Lippmann–Schwinger solver for a droplet.
//!
//! Inside the droplet `D = z + aB` the total field satisfies
//!
//! ```text
//! U(x, t) + (χ₁/c₀²) ∫_D ∂_t²U(y, t − |x−y|/c₀) / (4π|x−y|) dy = V(x, t).
//! ```
//!
//! In unit-ball coordinates the volume integral is `a²` times an integral over
//! `B`. For each master node `xₙ` the integral is taken with the polar rule
//! centred at `xₙ`; the unknown at each polar point is interpolated in space
//! from the master grid and in the delay `τ = a|xₙ−y|/c₀` with the second
//! derivative of the convolution splines. This yields per-delay-level
//! matrices `K_s` and the marching scheme
//!
//! ```text
//! (I + κK₀) Uˡ = Vˡ − κ Σ_{s≥1} K_s U^{l−s},   κ = χ₁a²/c₀²,
//! ```
//!
//! whose matrix is factored once. The exterior field follows from the same
//! volume integral evaluated with the stored history.

use std::path::Path;
use std::sync::Arc;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::SourceModel;
use crate::output::write_columns;
use crate::quadrature::{AngularInterpolation, Ball, BallQuadrature, PolarRule, MAX_WIDTH};
use crate::special::{harmonic_count, real_harmonics};
use crate::spectrum::Droplet;
use crate::spline::SplineBasis;
use crate::vec3::{self, Point3};

/// The discretized droplet operator: delay-level matrices and the factored
/// step matrix `I + κK₀`.
pub struct LseOperator {
    droplet: Droplet,
    rule: Arc<BallQuadrature>,
    splines: SplineBasis,
    n0: usize,
    kappa: f64,
    levels: usize,
    /// Row-major `[n][s][i]`: contribution of node `i` at delay level `s` to row `n`.
    kernel: Vec<f64>,
    matrix: Mat<f64>,
    lu: PartialPivLu<f64>,
}

impl std::fmt::Debug for LseOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LseOperator")
            .field("droplet", &self.droplet)
            .field("nodes", &self.rule.len())
            .field("levels", &self.levels)
            .field("kappa", &self.kappa)
            .finish_non_exhaustive()
    }
}

impl LseOperator {
    /// Assembles and factors the operator for interpolation half-width `n0`.
    pub fn assemble(
        droplet: &Droplet,
        rule: Arc<BallQuadrature>,
        splines: &SplineBasis,
        n0: usize,
        angular: AngularInterpolation,
    ) -> Result<Self> {
        rule.check_half_width(n0)?;
        let n = rule.len();
        let a = droplet.radius;
        let c0 = droplet.c0;
        // the longest delay is a chord of the droplet
        let levels = splines.max_knot(2.0 * a / c0) + 1;
        let kappa = droplet.chi1() * a * a / (c0 * c0);

        let mut kernel = vec![0.0; n * levels * n];
        kernel
            .par_chunks_mut(levels * n)
            .enumerate()
            .try_for_each(|(row, block)| -> Result<()> {
                let x = rule.nodes()[row].cartesian;
                let polar = PolarRule::new(&rule, &Ball::UNIT, x)?;
                let mut omega = Vec::with_capacity(levels);
                let m = rule.sphere().len();
                let degree = rule.harmonic_degree();
                let nh = harmonic_count(degree);
                let n_r = rule.n_r();
                // harmonic coefficients per level and radius, synthesized at the end
                let mut coef = match angular {
                    AngularInterpolation::Harmonic => vec![0.0; levels * n_r * nh],
                    AngularInterpolation::Lagrange => Vec::new(),
                };
                let mut y = vec![0.0; nh];
                let mut radial = [0.0; MAX_WIDTH];
                let width = 2 * n0 + 1;
                for p in polar.points() {
                    let tau = a * p.distance / c0;
                    omega.clear();
                    splines.for_each_weight(tau, 2, |s, w| omega.push((s, w)));
                    match angular {
                        AngularInterpolation::Lagrange => {
                            let (r, theta, phi) = vec3::to_spherical(p.y);
                            let axes = rule.stencil_axes(r.min(1.0), theta, phi, n0)?;
                            axes.for_each(|idx, l| {
                                let wl = p.weight * l;
                                for &(s, w) in &omega {
                                    block[s * n + idx] += wl * w;
                                }
                            });
                        }
                        AngularInterpolation::Harmonic => {
                            let r = vec3::norm(p.y);
                            let dir = if r > 0.0 { vec3::scale(1.0 / r, p.y) } else { [0.0, 0.0, 1.0] };
                            real_harmonics(degree, dir, &mut y);
                            let start = rule.radial_window(r.min(1.0), n0, &mut radial);
                            for (t, &lr) in radial[..width].iter().enumerate() {
                                for &(s, w) in &omega {
                                    let c = p.weight * lr * w;
                                    let off = (s * n_r + start + t) * nh;
                                    for (d, &v) in coef[off..off + nh].iter_mut().zip(&y) {
                                        *d += c * v;
                                    }
                                }
                            }
                        }
                    }
                }
                if angular == AngularInterpolation::Harmonic {
                    let synth = rule.harmonic_synthesis();
                    for s in 0..levels {
                        for iota in 0..n_r {
                            let c = &coef[(s * n_r + iota) * nh..(s * n_r + iota + 1) * nh];
                            let dst = &mut block[s * n + iota * m..s * n + (iota + 1) * m];
                            for (lm, &cv) in c.iter().enumerate() {
                                if cv != 0.0 {
                                    for (d, &h) in dst.iter_mut().zip(&synth[lm * m..(lm + 1) * m]) {
                                        *d += cv * h;
                                    }
                                }
                            }
                        }
                    }
                }
                Ok(())
            })?;

        let matrix = Mat::<f64>::from_fn(n, n, |r, c| {
            let k = kappa * kernel[r * levels * n + c];
            if r == c {
                1.0 + k
            } else {
                k
            }
        });
        let lu = matrix.partial_piv_lu();
        let u = lu.U();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let d = u[(i, i)].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if !(lo > hi * 1e-13) || !lo.is_finite() {
            return Err(Error::Singular(format!(
                "droplet step matrix has pivot ratio {:e}",
                lo / hi
            )));
        }
        Ok(LseOperator {
            droplet: *droplet,
            rule,
            splines: splines.clone(),
            n0,
            kappa,
            levels,
            kernel,
            matrix,
            lu,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Number of delay levels `s = 0..levels` the kernel couples.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn interpolation_half_width(&self) -> usize {
        self.n0
    }

    /// The step matrix `I + κK₀`, shared by every time step.
    pub fn system_matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    /// Marches `l = 1..=⌊horizon/Δt⌋` with the incident field of `model`.
    pub fn solve(&self, model: &dyn SourceModel, horizon: f64) -> Result<InteriorHistory> {
        let dt = self.splines.dt();
        if !(horizon > 0.0) {
            return Err(Error::invalid(format!("time horizon must be positive, got {horizon}")));
        }
        let steps = (horizon / dt + 1e-9).floor() as usize;
        let n = self.rule.len();
        let images: Vec<Point3> = self
            .rule
            .nodes()
            .iter()
            .map(|node| self.droplet.ball().map_from_unit(node.cartesian))
            .collect();
        let incident = |t: f64| -> Vec<f64> {
            images
                .iter()
                .map(|&x| if t < 0.0 { 0.0 } else { model.value(x, t) })
                .collect()
        };
        let mut values = Vec::with_capacity((steps + 1) * n);
        values.extend(incident(0.0));
        let levels = self.levels;
        for l in 1..=steps {
            let v = incident(l as f64 * dt);
            let hist = &values;
            let rhs: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|row| {
                    let block = &self.kernel[row * levels * n..(row + 1) * levels * n];
                    let mut acc = 0.0;
                    for s in 1..levels.min(l + 1) {
                        let past = &hist[(l - s) * n..(l - s + 1) * n];
                        let k = &block[s * n..(s + 1) * n];
                        acc += k.iter().zip(past).map(|(a, b)| a * b).sum::<f64>();
                    }
                    v[row] - self.kappa * acc
                })
                .collect();
            let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
            let x = self.lu.solve(&b);
            for i in 0..n {
                let val = x[(i, 0)];
                if !val.is_finite() {
                    return Err(Error::Singular(format!("non-finite interior field at step {l}")));
                }
                values.push(val);
            }
        }
        Ok(InteriorHistory {
            droplet: self.droplet,
            rule: self.rule.clone(),
            splines: self.splines.clone(),
            steps,
            values,
        })
    }
}

/// Assembles the operator for `droplet` and marches to `horizon`.
pub fn solve_lse(
    model: &dyn SourceModel,
    droplet: &Droplet,
    rule: Arc<BallQuadrature>,
    splines: &SplineBasis,
    horizon: f64,
    n0: usize,
    angular: AngularInterpolation,
) -> Result<InteriorHistory> {
    LseOperator::assemble(droplet, rule, splines, n0, angular)?.solve(model, horizon)
}

/// The total field at every node image `z + a·xᵢ` on the time grid `lΔt`.
#[derive(Debug, Clone)]
pub struct InteriorHistory {
    droplet: Droplet,
    rule: Arc<BallQuadrature>,
    splines: SplineBasis,
    steps: usize,
    /// `[l][i]`, `l = 0..=steps`.
    values: Vec<f64>,
}

impl InteriorHistory {
    pub fn droplet(&self) -> &Droplet {
        &self.droplet
    }

    pub fn rule(&self) -> &BallQuadrature {
        &self.rule
    }

    pub fn dt(&self) -> f64 {
        self.splines.dt()
    }

    /// Index of the last time step.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|l| l as f64 * self.dt()).collect()
    }

    /// Node values at step `l`.
    pub fn step(&self, l: usize) -> &[f64] {
        let n = self.rule.len();
        &self.values[l * n..(l + 1) * n]
    }

    /// History of one node.
    pub fn node_series(&self, node: usize) -> Vec<f64> {
        let n = self.rule.len();
        (0..=self.steps).map(|l| self.values[l * n + node]).collect()
    }

    /// Writes `t, node, value` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let n = self.rule.len();
        let mut t = Vec::with_capacity(self.values.len());
        let mut node = Vec::with_capacity(self.values.len());
        for l in 0..=self.steps {
            for i in 0..n {
                t.push(l as f64 * self.dt());
                node.push(i as f64);
            }
        }
        write_columns(path, &["t", "node", "value"], &[&t, &node, &self.values])
    }
}

/// `W = U − V` at an exterior point: the retarded volume sum
/// `−(χ₁a³/c₀²) Σᵢ wᵢ ∂_t²U(𝒢(xᵢ), t − |x−𝒢(xᵢ)|/c₀) / (4π|x−𝒢(xᵢ)|)`.
///
/// The retarded time is written `t_{nᵢ} − dᵢ` with `dᵢ ∈ (0, Δt]`, and the
/// second derivative comes from the spline weights `ω_s″(dᵢ)` applied to
/// `U^{nᵢ−s}`. Field values before `t = 0` are zero.
pub fn scattered_field(history: &InteriorHistory, x: Point3, t: f64) -> Result<f64> {
    let d = history.droplet;
    if vec3::dist(x, d.center) <= d.radius {
        return Err(Error::OutsideDomain(format!(
            "exterior field requested at {x:?}, inside the droplet"
        )));
    }
    let dt = history.dt();
    let c0 = d.c0;
    let n = history.rule.len();
    let a = d.radius;
    let mut acc = 0.0;
    for (i, node) in history.rule.nodes().iter().enumerate() {
        let y = d.ball().map_from_unit(node.cartesian);
        let dist = vec3::dist(x, y);
        let retarded = t - dist / c0;
        if retarded <= 0.0 {
            continue;
        }
        let ni = (retarded / dt).floor() as usize + 1;
        if ni > history.steps {
            return Err(Error::OutsideDomain(format!(
                "retarded time {retarded} beyond the simulated horizon {}",
                history.steps as f64 * dt
            )));
        }
        let delay = ni as f64 * dt - retarded;
        let mut utt = 0.0;
        history.splines.for_each_weight(delay, 2, |s, w| {
            if s <= ni {
                utt += w * history.values[(ni - s) * n + i];
            }
        });
        acc += node.weight * utt / (4.0 * std::f64::consts::PI * dist);
    }
    Ok(-d.chi1() * a * a * a / (c0 * c0) * acc)
}

/// Total field `U = V + W` at an exterior point.
pub fn exterior_field(
    history: &InteriorHistory,
    model: &dyn SourceModel,
    x: Point3,
    t: f64,
) -> Result<f64> {
    let v = if t < 0.0 { 0.0 } else { model.value(x, t) };
    Ok(v + scattered_field(history, x, t)?)
}

/// Latest time at which the exterior field at `x` can be evaluated.
pub fn exterior_horizon(history: &InteriorHistory, x: Point3) -> f64 {
    let d = history.droplet;
    let nearest = (vec3::dist(x, d.center) - d.radius).max(0.0);
    // n_i ≤ steps needs retarded < steps·Δt
    (history.steps as f64 - 1.0) * history.dt() + nearest / d.c0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{AnalyticSource, Domain, PowerGrowthSource, SpaceTimeField};
    use crate::spline::build_spline_basis;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn small_rule() -> Arc<BallQuadrature> {
        Arc::new(BallQuadrature::new(6, 6).unwrap())
    }

    #[test]
    fn zero_contrast_leaves_the_incident_field() {
        // c1 = a b/π = c0 gives χ₁ = 0
        let a = 0.05;
        let d = Droplet::new([-0.2, 0.0, 0.0], a, PI / a, 1.0).unwrap();
        assert_abs_diff_eq!(d.chi1(), 0.0, epsilon = 1e-12);
        let model = PowerGrowthSource::new(3, 1.0).unwrap();
        let splines = build_spline_basis(2, 0.1).unwrap();
        let h = solve_lse(&model, &d, small_rule(), &splines, 1.0, 1, AngularInterpolation::Lagrange).unwrap();
        for l in 0..=h.steps() {
            let t = l as f64 * 0.1;
            for (i, node) in h.rule().nodes().iter().enumerate() {
                let x = d.ball().map_from_unit(node.cartesian);
                assert_abs_diff_eq!(h.step(l)[i], model.value(x, t), epsilon = 1e-12);
            }
        }
        let w = scattered_field(&h, [0.3, 0.4, 0.5], 0.9).unwrap();
        assert_abs_diff_eq!(w, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn linear_in_the_source_and_matrix_is_shared() {
        let d = Droplet::new([-0.2, 0.0, 0.0], 0.05, 4.0 * PI, 1.0).unwrap();
        let splines = build_spline_basis(2, 0.1).unwrap();
        let op = LseOperator::assemble(&d, small_rule(), &splines, 1, AngularInterpolation::Harmonic).unwrap();
        let base = PowerGrowthSource::new(4, 1.0).unwrap();
        let doubled = AnalyticSource {
            v: Arc::new(move |x, t| 2.0 * base.value(x, t)),
            v_tt: None,
            laplacian: None,
            domain: Domain::Ball { center: [0.0; 3], radius: 1.0 },
            c0: 1.0,
            support_end: None,
            label: "doubled".into(),
        };
        let before = op.system_matrix().clone();
        let h1 = op.solve(&base, 1.5).unwrap();
        let h2 = op.solve(&doubled, 1.5).unwrap();
        assert_eq!(&before, op.system_matrix());
        for l in 0..=h1.steps() {
            for (a, b) in h1.step(l).iter().zip(h2.step(l)) {
                assert!((2.0 * a - b).abs() <= 1e-10 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn causal_exterior_field() {
        let d = Droplet::new([-0.2, 0.0, 0.0], 0.05, 4.0 * PI, 1.0).unwrap();
        let splines = build_spline_basis(2, 0.1).unwrap();
        let model = PowerGrowthSource::new(4, 1.0).unwrap();
        let h = solve_lse(&model, &d, small_rule(), &splines, 2.0, 1, AngularInterpolation::Harmonic).unwrap();
        let x = [0.3, 0.4, 0.5];
        let arrival = (vec3::dist(x, d.center) - d.radius) / d.c0;
        for k in 0..20 {
            let t = arrival * k as f64 / 20.0;
            assert_eq!(scattered_field(&h, x, t).unwrap(), 0.0);
        }
        assert!(scattered_field(&h, x, 1.5).unwrap().abs() > 0.0);
        assert!(scattered_field(&h, d.center, 1.0).is_err());
        assert!(scattered_field(&h, x, 10.0).is_err());
        assert!(exterior_horizon(&h, x) < 2.0 + 1.0);
    }
}
