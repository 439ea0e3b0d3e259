//! Small end-to-end runs of the scenario kinds that finish in seconds.

use droplet_core::experiments::run::{run_scenario, RunResults};
use droplet_core::experiments::scenario::Scenario;

const RECOVERY: &str = r#"
schema_version = 1
name = "small-recovery"
kind = "source-recovery"

[source]
model = "cubic-pulse"
duration_time = 1.0

[droplet]
radii_len = [1e-3]
riesz_b_per_time = 6.283185307179586

[measurement]
x_star_len = [1.2, 0.0, 0.0]
t_start_time = 3.1

[expansion]
terms = [8]

[recovery]
n_terms = 8
lattice_lo_len = [-0.08, -0.08, -0.08]
lattice_hi_len = [0.08, 0.08, 0.08]
spacing_len = 0.02
eval_time = 0.5
epsilon_time = 0.04

[noise]
convention = "relative"
level = 1e-3
seeds = [7, 8]
"#;

#[test]
fn recovery_reports_are_byte_identical_across_runs() {
    let s = Scenario::from_toml_str(RECOVERY).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_scenario(&s, a.path()).unwrap();
    let second = run_scenario(&s, b.path()).unwrap();
    assert_eq!(first.report, second.report);
    for file in &first.report.outputs {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs between runs");
    }
    let RunResults::SourceRecovery(r) = &first.report.results else {
        panic!("wrong kind")
    };
    assert_eq!(r.lattice.dims, [9, 9, 9]);
    assert_eq!(r.shrunk_lattice.dims, [5, 5, 5]);
    assert_eq!(r.mollifier.shrink_points, 2);
    assert_eq!(r.seeds.len(), 2);
    assert_ne!(r.seeds[0].errors, r.seeds[1].errors);
    assert!(r.noiseless.v < 0.1, "{:?}", r.noiseless);
    assert!(r.mean.v < 1.0 && r.mean.v >= 0.0);
    assert!(first.report.outputs.iter().any(|f| f == "slice_v_seed7.csv"));
}

#[test]
fn automatic_epsilon_is_a_multiple_of_the_step() {
    let text = RECOVERY.replace("epsilon_time = 0.04\n", "").replace("seeds = [7, 8]", "seeds = [7]");
    let s = Scenario::from_toml_str(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_scenario(&s, dir.path()).unwrap();
    let RunResults::SourceRecovery(r) = &out.report.results else {
        panic!("wrong kind")
    };
    assert!(r.mollifier.selected_from_noise);
    let k = r.mollifier.epsilon / 0.02;
    assert!((k - k.round()).abs() < 1e-9 && k >= 2.0, "epsilon {}", r.mollifier.epsilon);
}

#[test]
fn expression_sources_drive_a_truncation_sweep() {
    let text = r#"
schema_version = 1
name = "expr-sweep"
kind = "truncation-sweep"

[source]
model = "expression"
v = "if(t < 1, (1 + 0.1 * x2) * math::sin(3.141592653589793 * t)^2, 0)"
support_end_time = 1.0
domain = { shape = "ball", center_len = [0.0, 0.0, 0.0], radius_len = 0.5 }

[droplet]
radii_len = [1e-3]
riesz_b_per_time = 6.283185307179586

[measurement]
x_star_len = [1.2, 0.0, 0.0]
t_start_time = 2.5

[expansion]
terms = [32]

[sweep]
terms = [2, 8, 32]
simulation_terms = 32

[noise]
convention = "absolute"
level = 1e-5
seeds = [1, 2, 3]
"#;
    let s = Scenario::from_toml_str(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_scenario(&s, dir.path()).unwrap();
    let RunResults::TruncationSweep(r) = &out.report.results else {
        panic!("wrong kind")
    };
    assert_eq!(r.rows.len(), 3);
    assert_eq!(r.delta, 1e-5);
    // noise divided by the shrinking memory amplitudes wins at large N
    assert!(r.rows[1].error < r.rows[0].error, "{:?}", r.rows);
    assert!(r.rows[2].error > r.rows[1].error, "{:?}", r.rows);
    assert!(!r.monotone);
    assert_eq!(r.best_n, 8);
    assert!(r.rows.iter().all(|row| row.error.is_finite() && row.error >= 0.0));
}
