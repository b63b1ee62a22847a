use std::ffi::{c_char, CString};
use std::ptr;

use hexqg_ffi::*;

fn last_error() -> String {
    let mut len = 0usize;
    unsafe { hexqg_last_error(ptr::null_mut(), 0, &mut len) };
    let mut buf = vec![0u8; len + 1];
    let st = unsafe { hexqg_last_error(buf.as_mut_ptr() as *mut c_char, buf.len(), &mut len) };
    assert_eq!(st, HexqgStatus::Ok);
    String::from_utf8(buf[..len].to_vec()).unwrap()
}

fn scenario(json: &str) -> (HexqgStatus, *mut HexqgScenario) {
    let c = CString::new(json).unwrap();
    let mut sc = ptr::null_mut();
    let st = unsafe { hexqg_scenario_from_json(c.as_ptr(), &mut sc) };
    (st, sc)
}

#[test]
fn s_value_matches_the_free_closed_form() {
    let mut out = 0.0;
    let lam = 7.3f64;
    let st = unsafe { hexqg_s_value(ptr::null(), 0, lam, &mut out) };
    assert_eq!(st, HexqgStatus::Ok);
    assert!((out - lam.sqrt().sin() / lam.sqrt()).abs() < 1e-12);
}

#[test]
fn spectrum_reports_required_length_when_buffer_is_short() {
    let modes = [2.0];
    let mut len = 0;
    let mut small = [0.0; 2];
    let st = unsafe { hexqg_dirichlet_spectrum(modes.as_ptr(), 1, 4, small.as_mut_ptr(), 2, &mut len) };
    assert_eq!(st, HexqgStatus::BufferTooSmall);
    assert_eq!(len, 4);
    let mut buf = [0.0; 4];
    let st = unsafe { hexqg_dirichlet_spectrum(modes.as_ptr(), 1, 4, buf.as_mut_ptr(), 4, &mut len) };
    assert_eq!(st, HexqgStatus::Ok);
    for (n, e) in buf.iter().enumerate() {
        let want = ((n + 1) as f64 * std::f64::consts::PI).powi(2) + 2.0;
        assert!((e - want).abs() < 1e-9, "{e} vs {want}");
    }
}

#[test]
fn bad_scenarios_map_to_validation_status() {
    let (st, sc) = scenario(r#"{"domain":{"N":2},"bogus":1}"#);
    assert_eq!(st, HexqgStatus::Validation);
    assert!(sc.is_null());
    assert!(!last_error().is_empty());

    let (st, _) = scenario(r#"{"domain":{"N":2},"potentials":[{"cell":[9,9],"side":0,"modes":[0,0.1]}]}"#);
    assert_eq!(st, HexqgStatus::Validation);
}

#[test]
fn null_arguments_are_rejected() {
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { hexqg_scenario_from_json(ptr::null(), &mut sc) }, HexqgStatus::NullPointer);
    let mut n = 0usize;
    assert_eq!(unsafe { hexqg_dataset_len(ptr::null(), &mut n) }, HexqgStatus::NullPointer);
    unsafe {
        hexqg_scenario_free(ptr::null_mut());
        hexqg_dataset_free(ptr::null_mut());
        hexqg_report_free(ptr::null_mut());
    }
}

#[test]
fn free_dn_map_is_symmetric_with_reported_dimension() {
    let (st, sc) = scenario(r#"{"domain":{"N":2}}"#);
    assert_eq!(st, HexqgStatus::Ok);
    let (mut len, mut dim) = (0, 0);
    let st = unsafe { hexqg_dn_map(sc, 2.0, ptr::null_mut(), 0, &mut len, &mut dim) };
    assert_eq!(st, HexqgStatus::BufferTooSmall);
    assert_eq!(len, dim * dim);
    let mut m = vec![0.0; len];
    let st = unsafe { hexqg_dn_map(sc, 2.0, m.as_mut_ptr(), m.len(), &mut len, &mut dim) };
    assert_eq!(st, HexqgStatus::Ok);
    for i in 0..dim {
        for j in 0..dim {
            assert!((m[i * dim + j] - m[j * dim + i]).abs() < 1e-10);
        }
    }
    let mut hl = 0;
    let mut hash = [0 as c_char; 65];
    assert_eq!(unsafe { hexqg_scenario_hash(sc, hash.as_mut_ptr(), 65, &mut hl) }, HexqgStatus::Ok);
    assert_eq!(hl, 64);
    unsafe { hexqg_scenario_free(sc) };
}

#[test]
fn forward_save_load_invert_round_trip() {
    let json = r#"{
        "domain": {"N": 3},
        "potentials": [{"cell": [1, 1], "side": 0, "modes": [0, 0.3, 0, 0.1]}],
        "inverse": {"support": {"cells": [[1, 1]]}}
    }"#;
    let (st, sc) = scenario(json);
    assert_eq!(st, HexqgStatus::Ok, "{}", last_error());

    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { hexqg_forward(sc, &mut ds) }, HexqgStatus::Ok, "{}", last_error());
    let dir = std::env::temp_dir().join(format!("hexqg-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = CString::new(dir.join("d.jsonl").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { hexqg_dataset_save(ds, path.as_ptr()) }, HexqgStatus::Ok);
    let mut ds2 = ptr::null_mut();
    assert_eq!(unsafe { hexqg_dataset_load(path.as_ptr(), &mut ds2) }, HexqgStatus::Ok);
    let (mut a, mut b) = (0, 0);
    unsafe {
        hexqg_dataset_len(ds, &mut a);
        hexqg_dataset_len(ds2, &mut b);
    }
    assert!(a > 0);
    assert_eq!(a, b);

    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { hexqg_invert_dataset(ds2, &mut rep) }, HexqgStatus::Ok, "{}", last_error());
    let mut err = f64::NAN;
    unsafe { hexqg_report_max_error(rep, &mut err) };
    assert!(err < 1e-6, "max error {err}");
    let mut edges = 0;
    unsafe { hexqg_report_edge_count(rep, &mut edges) };
    assert!(edges > 0);
    let mut modes = [0.0; 8];
    let mut len = 0;
    assert_eq!(
        unsafe { hexqg_report_edge_modes(rep, 0, modes.as_mut_ptr(), 8, &mut len) },
        HexqgStatus::Ok
    );
    assert_eq!(len, 4);
    let mut jl = 0;
    unsafe { hexqg_report_json(rep, ptr::null_mut(), 0, &mut jl) };
    let mut js = vec![0u8; jl + 1];
    assert_eq!(
        unsafe { hexqg_report_json(rep, js.as_mut_ptr() as *mut c_char, js.len(), &mut jl) },
        HexqgStatus::Ok
    );
    let v: serde_json::Value = serde_json::from_slice(&js[..jl]).unwrap();
    assert_eq!(v["format"], "hexqg-report/1");

    unsafe {
        hexqg_report_free(rep);
        hexqg_dataset_free(ds);
        hexqg_dataset_free(ds2);
        hexqg_scenario_free(sc);
    }
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn header_declares_every_exported_function() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hexqg.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    for line in src.lines().filter(|l| l.contains("extern \"C\" fn ")) {
        let name = line.split("fn ").nth(1).unwrap().split('(').next().unwrap();
        assert!(h.contains(&format!("{name}(")), "{name} missing from header");
    }
}

#[test]
fn c_consumer_compiles_and_runs() {
    use std::path::Path;
    use std::process::Command;
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    // test binaries live in target/<profile>/deps; the cdylib one level up
    let exe = std::env::current_exe().unwrap();
    let libdir = exe.parent().unwrap().parent().unwrap();
    let lib = libdir.join("libhexqg_ffi.so");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C toolchain or shared library");
        return;
    }
    let out = std::env::temp_dir().join(format!("hexqg-smoke-{}", std::process::id()));
    let st = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(manifest.join("include"))
        .arg(manifest.join("c/smoke.c"))
        .arg(&lib)
        .arg("-lm")
        .arg("-o")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let run = Command::new(&out).env("LD_LIBRARY_PATH", libdir).output().unwrap();
    std::fs::remove_file(&out).ok();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
