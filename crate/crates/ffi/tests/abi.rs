use fblab_ffi::*;
use std::ptr;

unsafe fn dist(m: &[f64]) -> *mut FblabDist {
    let mut d = ptr::null_mut();
    assert_eq!(fblab_dist_new(m.as_ptr(), m.len(), &mut d), FblabStatus::Ok);
    d
}

fn last_error() -> String {
    let mut buf = vec![0 as libc::c_char; 256];
    let n = unsafe { fblab_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn divergences_through_handles() {
    unsafe {
        let p = dist(&[0.5, 0.5]);
        let q = dist(&[0.25, 0.75]);
        let mut v = 0.0;
        assert_eq!(fblab_kl(p, q, &mut v), FblabStatus::Ok);
        let want = 0.5 * (2.0f64).ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((v - want).abs() < 1e-15);
        assert_eq!(fblab_tv(p, q, &mut v), FblabStatus::Ok);
        assert!((v - 0.25).abs() < 1e-15);
        assert_eq!(fblab_beta(0.3, p, p, &mut v), FblabStatus::Ok);
        assert_eq!(v, 0.3);
        let cost = [0.0, 1.0, 1.0, 0.0];
        assert_eq!(fblab_wasserstein(p, q, cost.as_ptr(), 1, &mut v), FblabStatus::Ok);
        assert!((v - 0.25).abs() < 1e-12);
        let r = dist(&[0.0, 1.0]);
        assert_eq!(fblab_kl(q, r, &mut v), FblabStatus::Ok);
        assert!(v.is_infinite());
        fblab_dist_free(p);
        fblab_dist_free(q);
        fblab_dist_free(r);
    }
}

#[test]
fn capacity_of_bsc() {
    unsafe {
        let w = [0.89, 0.11, 0.11, 0.89];
        let mut ch = ptr::null_mut();
        assert_eq!(fblab_dmc_new(w.as_ptr(), 2, 2, &mut ch), FblabStatus::Ok);
        let (mut c, mut v) = (0.0, 0.0);
        let mut caod = [0.0; 2];
        assert_eq!(fblab_capacity(ch, 1e-12, &mut c, &mut v, caod.as_mut_ptr(), 2), FblabStatus::Ok);
        let h = -0.11f64 * 0.11f64.ln() - 0.89 * 0.89f64.ln();
        assert!((c - (2f64.ln() - h)).abs() < 1e-9);
        assert!((caod[0] - 0.5).abs() < 1e-9);
        assert_eq!(fblab_capacity(ch, 1e-12, &mut c, ptr::null_mut(), caod.as_mut_ptr(), 3), FblabStatus::DimensionMismatch);
        fblab_channel_free(ch);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut d = ptr::null_mut();
        let bad = [0.7, 0.7];
        assert_eq!(fblab_dist_new(bad.as_ptr(), 2, &mut d), FblabStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert_eq!(fblab_dist_new(ptr::null(), 3, &mut d), FblabStatus::NullPointer);
        assert_eq!(last_error(), "null pointer");
        let mut v = 0.0;
        assert_eq!(fblab_kl(ptr::null(), ptr::null(), &mut v), FblabStatus::NullPointer);
        let p = dist(&[1.0]);
        let q = dist(&[0.5, 0.5]);
        assert_eq!(fblab_kl(p, q, &mut v), FblabStatus::DimensionMismatch);
        assert_eq!(fblab_beta(1.5, q, q, &mut v), FblabStatus::InvalidArgument);
        let w = [0.5, 0.6];
        let mut ch = ptr::null_mut();
        assert_eq!(fblab_dmc_new(w.as_ptr(), 1, 2, &mut ch), FblabStatus::InvalidArgument);
        assert_eq!(fblab_last_error(ptr::null_mut(), 0) > 0, true);
        fblab_dist_free(p);
        fblab_dist_free(q);
        fblab_dist_free(ptr::null_mut());
    }
}

#[test]
fn version_string() {
    let s = unsafe { std::ffi::CStr::from_ptr(fblab_version()) };
    assert_eq!(s.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/fblab.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build.rs");
    for f in ["fblab_kl", "fblab_tv", "fblab_beta", "fblab_wasserstein", "fblab_capacity", "fblab_last_error"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    if let Ok(out) = std::process::Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
