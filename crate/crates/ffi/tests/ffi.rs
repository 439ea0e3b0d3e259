use std::ffi::{c_void, CStr, CString};
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::ptr;

use droplet_ffi::*;

extern "C" fn pulse(_user: *mut c_void, x: *const f64, t: f64) -> f64 {
    let x = unsafe { std::slice::from_raw_parts(x, 3) };
    if (0.0..1.0).contains(&t) {
        (1.0 + 0.1 * x[1]) * (PI * t).sin().powi(2)
    } else {
        0.0
    }
}

extern "C" fn scaled(user: *mut c_void, x: *const f64, t: f64) -> f64 {
    let k = unsafe { *(user as *const f64) };
    k * pulse(ptr::null_mut(), x, t)
}

fn source(field: DropletFieldFn, user: *mut c_void) -> DropletSource {
    DropletSource {
        field,
        user,
        center: [0.0; 3],
        radius: 0.5,
        support_end: 1.0,
    }
}

fn geometry() -> DropletGeometry {
    DropletGeometry {
        center: [0.05, -0.1, 0.0],
        radius: 1e-3,
        riesz_b: 2.0 * PI,
        c0: 1.0,
    }
}

fn last_error() -> String {
    let p = droplet_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn trace_round_trip_recovers_the_source_history() {
    let x_star = [1.2, 0.0, 0.0];
    let intervals = 256;
    let mut samples = vec![0.0; intervals + 1];
    let st = unsafe {
        droplet_synthesize_trace(
            geometry(),
            source(pulse, ptr::null_mut()),
            x_star.as_ptr(),
            3.1,
            intervals,
            32,
            1e-3,
            samples.as_mut_ptr(),
        )
    };
    assert_eq!(st, DropletStatus::Ok);

    let mut riesz = ptr::null_mut();
    let st = unsafe {
        droplet_riesz_new(geometry(), x_star.as_ptr(), 3.1, samples.as_ptr(), samples.len(), 16, &mut riesz)
    };
    assert_eq!(st, DropletStatus::Ok);
    let z = geometry().center;
    for t in [0.25, 0.5, 0.8] {
        let mut v = 0.0;
        assert_eq!(unsafe { droplet_riesz_evaluate(riesz, t, &mut v) }, DropletStatus::Ok);
        let exact = pulse(ptr::null_mut(), z.as_ptr(), t);
        assert!((v - exact).abs() < 2e-3 * exact.abs().max(1.0), "t={t}: {v} vs {exact}");
    }
    let mut v = 0.0;
    assert_eq!(unsafe { droplet_riesz_evaluate(riesz, 1.5, &mut v) }, DropletStatus::OutsideDomain);
    assert!(last_error().contains("1.5"));
    unsafe { droplet_riesz_free(riesz) };
}

#[test]
fn expansion_uses_the_user_pointer() {
    let x = [1.2, 0.0, 0.0];
    let times = [2.0, 2.5, 3.0];
    let eval = |k: f64| {
        let mut user = k;
        let mut h = ptr::null_mut();
        let st = unsafe {
            droplet_expansion_new(
                geometry(),
                source(scaled, &mut user as *mut f64 as *mut c_void),
                x.as_ptr(),
                8,
                1e-3,
                &mut h,
            )
        };
        assert_eq!(st, DropletStatus::Ok);
        let mut w = [0.0; 3];
        assert_eq!(
            unsafe { droplet_expansion_evaluate(h, times.as_ptr(), 3, w.as_mut_ptr()) },
            DropletStatus::Ok
        );
        unsafe { droplet_expansion_free(h) };
        w
    };
    let one = eval(1.0);
    let three = eval(3.0);
    for (a, b) in one.iter().zip(&three) {
        assert!(a.abs() > 0.0);
        assert!((3.0 * a - b).abs() <= 1e-12 * b.abs());
    }
}

#[test]
fn mollifier_reports_sizes_and_capacity() {
    let mut m = ptr::null_mut();
    let st = unsafe { droplet_mollifier_new(0.03, 0.01, DropletKernelScaling::UnitMoment, &mut m) };
    assert_eq!(st, DropletStatus::Ok);
    let f: Vec<f64> = (0..20).map(|k| (k as f64 * 0.01).powi(2)).collect();
    let mut out = vec![0.0; 20];
    let mut written = 0;
    let st = unsafe { droplet_mollifier_second_derivative(m, f.as_ptr(), f.len(), out.as_mut_ptr(), out.len(), &mut written) };
    assert_eq!(st, DropletStatus::Ok);
    assert_eq!(written, 20 - 8);
    for v in &out[..written] {
        assert!((v - 2.0).abs() < 1e-9);
    }
    let st = unsafe { droplet_mollifier_derivative(m, f.as_ptr(), f.len(), out.as_mut_ptr(), 3, &mut written) };
    assert_eq!(st, DropletStatus::InvalidArgument);
    assert_eq!(written, 0);
    unsafe { droplet_mollifier_free(m) };

    let st = unsafe { droplet_mollifier_new(0.035, 0.01, DropletKernelScaling::Trapezoid, &mut m) };
    assert_eq!(st, DropletStatus::InvalidArgument);
    assert!(m.is_null());
}

#[test]
fn scenarios_parse_validate_and_run() {
    let text = CString::new(
        "schema_version = 1\nname = \"sums\"\nkind = \"spectral-sums\"\n[spectral]\nradius_len = 1.0\nterms = [20]\n",
    )
    .unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { droplet_scenario_parse(text.as_ptr(), &mut s) }, DropletStatus::Ok);
    let mut warnings = ptr::null_mut();
    assert_eq!(unsafe { droplet_scenario_validate(s, &mut warnings) }, DropletStatus::Ok);
    assert_eq!(unsafe { CStr::from_ptr(warnings) }.to_str().unwrap(), "[]");
    unsafe { droplet_string_free(warnings) };

    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { droplet_scenario_run(s, out.as_ptr(), &mut report) }, DropletStatus::Ok);
    let json = unsafe { CStr::from_ptr(report) }.to_str().unwrap().to_owned();
    unsafe { droplet_string_free(report) };
    assert!(json.contains("\"mass_fraction\""));
    assert!(dir.path().join("report.json").exists());
    unsafe { droplet_scenario_free(s) };

    let bad = CString::new("schema_version = 1\nname = \"x\"\nkind = \"nope\"\n").unwrap();
    assert_eq!(unsafe { droplet_scenario_parse(bad.as_ptr(), &mut s) }, DropletStatus::Config);
    assert!(s.is_null());
    assert!(last_error().contains("nope"));
}

#[test]
fn null_arguments_are_rejected() {
    let mut n = 0;
    assert_eq!(unsafe { droplet_choose_truncation(0.0, 1e-3, &mut n) }, DropletStatus::Ok);
    assert_eq!(n, 3);
    assert_eq!(unsafe { droplet_choose_truncation(0.0, 1e-3, ptr::null_mut()) }, DropletStatus::NullPointer);
    assert_eq!(
        unsafe { droplet_scenario_parse(ptr::null(), &mut ptr::null_mut()) },
        DropletStatus::NullPointer
    );
    assert_eq!(unsafe { droplet_choose_truncation(0.0, 1e-3, &mut n) }, DropletStatus::Ok);
    assert!(droplet_last_error().is_null());
    let version = unsafe { CStr::from_ptr(droplet_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/droplet.h");
    assert!(header.exists());
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(out) = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .output()
        else {
            eprintln!("{compiler} not found; skipping");
            continue;
        };
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
