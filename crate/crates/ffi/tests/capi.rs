use std::ffi::{c_char, CString};
use std::ptr;

use vortexdyn_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { vdn_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn closed_form(family: &str, x0: f64, beta: f64, t: f64, points: usize) -> *mut VdnField {
    let name = CString::new(family).unwrap();
    let mut f = ptr::null_mut();
    let st = unsafe { vdn_field_closed_form(name.as_ptr(), x0, beta, t, 8.0, points, &mut f) };
    assert_eq!(st, VdnStatus::Ok, "{}", last_error());
    f
}

#[test]
fn detect_tripole_at_a_generic_time() {
    let f = closed_form("tripole", 2f64.sqrt(), 0.0, 0.2 * std::f64::consts::PI, 256);
    let mut out = [VdnVortex { x: 0.0, y: 0.0, charge: 0 }; 8];
    let mut n = 0;
    let st = unsafe { vdn_detect(f, 4.0, out.as_mut_ptr(), out.len(), &mut n) };
    assert_eq!(st, VdnStatus::Ok);
    assert_eq!(n, 5);
    assert_eq!(out[..n].iter().map(|v| v.charge).sum::<i32>(), 1);

    let st = unsafe { vdn_detect(f, 4.0, out.as_mut_ptr(), 2, &mut n) };
    assert_eq!(st, VdnStatus::BufferTooSmall);
    assert_eq!(n, 5);
    unsafe { vdn_field_free(f) };
}

#[test]
fn errors_carry_codes_and_messages() {
    let name = CString::new("hexapole").unwrap();
    let mut f = ptr::null_mut();
    let st = unsafe { vdn_field_closed_form(name.as_ptr(), 1.0, 0.0, 0.0, 8.0, 64, &mut f) };
    assert_eq!(st, VdnStatus::UnknownFamily);
    assert!(f.is_null());
    assert!(last_error().contains("hexapole"));

    let dipole = CString::new("dipole").unwrap();
    let st = unsafe { vdn_field_closed_form(dipole.as_ptr(), 1.0, 0.0, 0.0, 8.0, 63, &mut f) };
    assert_eq!(st, VdnStatus::InvalidGrid);

    let st = unsafe { vdn_field_closed_form(ptr::null(), 1.0, 0.0, 0.0, 8.0, 64, &mut f) };
    assert_eq!(st, VdnStatus::NullPointer);
    let st = unsafe { vdn_field_evolve(ptr::null_mut(), 0.0, 1e-3, 1) };
    assert_eq!(st, VdnStatus::NullPointer);

    // truncation keeps the full length
    let mut small = [0 as c_char; 4];
    let n = unsafe { vdn_last_error(small.as_mut_ptr(), small.len()) };
    assert!(n > 3);
    assert_eq!(small[3], 0);

    assert!(vdn_precession_frequency(-1.0).is_nan());
    assert!((vdn_precession_frequency(1.0) - 0.965771).abs() < 1e-6);
    unsafe {
        vdn_field_free(ptr::null_mut());
        vdn_spectral_free(ptr::null_mut());
        vdn_background_free(ptr::null_mut());
    }
}

#[test]
fn values_roundtrip() {
    let f = closed_form("dipole", 0.5, 0.0, 0.3, 32);
    let n = unsafe { vdn_field_points(f) };
    assert_eq!(n, 32);
    let mut v = vec![0.0; 2 * n * n];
    assert_eq!(unsafe { vdn_field_values(f, v.as_mut_ptr(), v.len() - 1) }, VdnStatus::BufferTooSmall);
    assert_eq!(unsafe { vdn_field_values(f, v.as_mut_ptr(), v.len()) }, VdnStatus::Ok);
    let mut g = ptr::null_mut();
    assert_eq!(
        unsafe { vdn_field_from_values(8.0, n, v.as_ptr(), vdn_field_time(f), &mut g) },
        VdnStatus::Ok
    );
    let mut w = vec![0.0; 2 * n * n];
    assert_eq!(unsafe { vdn_field_values(g, w.as_mut_ptr(), w.len()) }, VdnStatus::Ok);
    assert_eq!(v, w);
    assert_eq!(unsafe { vdn_field_time(g) }, 0.3);
    unsafe {
        vdn_field_free(f);
        vdn_field_free(g);
    }
}

#[test]
fn split_step_and_basis_agree_for_the_ideal_gas() {
    let f = closed_form("dipole", 0.5, 0.0, 0.0, 64);
    let mut norm0 = 0.0;
    unsafe { vdn_field_norm(f, &mut norm0) };

    let mut s = ptr::null_mut();
    assert_eq!(unsafe { vdn_spectral_project(f, 0.0, 12, &mut s) }, VdnStatus::Ok);
    assert_eq!(unsafe { vdn_field_evolve(f, 0.0, 1e-3, 500) }, VdnStatus::Ok);
    assert!((unsafe { vdn_field_time(f) } - 0.5).abs() < 1e-12);
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { vdn_spectral_synthesize(s, 0.5, 8.0, 64, &mut g) }, VdnStatus::Ok);

    let n = 64 * 64 * 2;
    let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
    unsafe {
        vdn_field_values(f, a.as_mut_ptr(), n);
        vdn_field_values(g, b.as_mut_ptr(), n);
    }
    let h2 = (16.0f64 / 64.0).powi(2);
    let diff = (a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * h2).sqrt();
    assert!(diff < 1e-6 * norm0.max(1.0), "L2 difference {diff}");

    let (mut e, mut norm1) = (0.0, 0.0);
    unsafe {
        vdn_field_energy(f, 0.0, &mut e);
        vdn_field_norm(f, &mut norm1);
    }
    assert!((norm1 - norm0).abs() < 1e-12);
    assert!(e > 1.0);
    unsafe {
        vdn_field_free(f);
        vdn_field_free(g);
        vdn_spectral_free(s);
    }
}

#[test]
fn background_and_initial_state() {
    let mut bg = ptr::null_mut();
    assert_eq!(unsafe { vdn_background_compute(0.0, 8.0, 64, &mut bg) }, VdnStatus::Ok, "{}", last_error());
    let mut gs = ptr::null_mut();
    assert_eq!(unsafe { vdn_background_ground_state(bg, &mut gs) }, VdnStatus::Ok);
    let mut e = 0.0;
    unsafe { vdn_field_energy(gs, 0.0, &mut e) };
    assert!((e - 1.0).abs() < 1e-6, "{e}");

    let single = CString::new("single").unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { vdn_initial_state(bg, single.as_ptr(), 1.0, &mut f) }, VdnStatus::Ok);
    let mut n = 0;
    let mut out = [VdnVortex { x: 0.0, y: 0.0, charge: 0 }; 2];
    unsafe { vdn_detect(f, 4.0, out.as_mut_ptr(), 2, &mut n) };
    assert_eq!(n, 1);
    assert!((out[0].x - 1.0).abs() < 0.125 && out[0].y.abs() < 0.125);

    assert_eq!(unsafe { vdn_initial_state(bg, single.as_ptr(), 5.0, &mut f) }, VdnStatus::OutsideDisc);
    unsafe {
        vdn_field_free(f);
        vdn_field_free(gs);
        vdn_background_free(bg);
    }
}
