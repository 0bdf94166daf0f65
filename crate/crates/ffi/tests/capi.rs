use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use lccd_ffi::*;

fn last_error() -> String {
    let p = lccd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(lccd_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn divergence_calls() {
    let p = [0.5, 0.5, 0.0];
    let q = [0.0, 0.5, 0.5];
    let mut out = -1.0;
    let s = unsafe {
        lccd_divergence(
            LccdDivergenceKind::TotalVariation as u32,
            0.0,
            p.as_ptr(),
            q.as_ptr(),
            3,
            &mut out,
        )
    };
    assert_eq!(s, LccdStatus::Ok);
    assert!((out - 1.0).abs() < 1e-15);
    assert!(lccd_last_error().is_null());

    let mut w = [0.0; 2];
    let s = unsafe {
        lccd_subspace_divergence(
            LccdDivergenceKind::Hellinger as u32,
            0.0,
            p.as_ptr(),
            q.as_ptr(),
            3,
            2,
            w.as_mut_ptr(),
            2,
        )
    };
    assert_eq!(s, LccdStatus::Ok);
    // window [0.5, 0.5] vs [0, 0.5]: 1/2 (sqrt .5 - 0)^2
    assert!((w[0] - 0.25).abs() < 1e-15);

    let s = unsafe {
        lccd_subspace_divergence(
            LccdDivergenceKind::Hellinger as u32,
            0.0,
            p.as_ptr(),
            q.as_ptr(),
            3,
            2,
            w.as_mut_ptr(),
            1,
        )
    };
    assert_eq!(s, LccdStatus::BufferTooSmall);
}

#[test]
fn error_codes() {
    let p = [0.5, 0.4];
    let mut out = 0.0;
    let s = unsafe { lccd_divergence(3, 0.0, p.as_ptr(), p.as_ptr(), 2, &mut out) };
    assert_eq!(s, LccdStatus::InvalidArgument);
    assert!(last_error().contains("sum"), "{}", last_error());
    let s = unsafe { lccd_divergence(99, 0.0, p.as_ptr(), p.as_ptr(), 2, &mut out) };
    assert_eq!(s, LccdStatus::InvalidArgument);
    let s = unsafe { lccd_divergence(3, 0.0, ptr::null(), p.as_ptr(), 2, &mut out) };
    assert_eq!(s, LccdStatus::NullPointer);
    let s = unsafe {
        lccd_divergence(
            LccdDivergenceKind::Alpha as u32,
            1.0,
            p.as_ptr(),
            p.as_ptr(),
            2,
            &mut out,
        )
    };
    assert_ne!(s, LccdStatus::Ok);

    let missing = CString::new("/nonexistent/model.pca").unwrap();
    let mut pca = ptr::null_mut();
    assert_eq!(
        unsafe { lccd_pca_load(missing.as_ptr(), &mut pca) },
        LccdStatus::IoError
    );
    assert!(pca.is_null());
}

#[test]
fn extract_and_encode() {
    let mut params = std::mem::MaybeUninit::<LccdExtractorParams>::uninit();
    assert_eq!(
        unsafe { lccd_extractor_default_params(params.as_mut_ptr()) },
        LccdStatus::Ok
    );
    let mut params = unsafe { params.assume_init() };
    assert_eq!((params.grid_rows, params.bins), (50, 20));
    params.resize_width = 40;
    params.resize_height = 40;
    params.grid_rows = 8;
    params.grid_cols = 8;

    let mut ex = ptr::null_mut();
    assert_eq!(unsafe { lccd_extractor_new(&params, &mut ex) }, LccdStatus::Ok);
    let (mut sd, mut cd, mut pr, mut pc) = (0, 0, 0, 0);
    assert_eq!(
        unsafe { lccd_extractor_shape(ex, &mut sd, &mut cd, &mut pr, &mut pc) },
        LccdStatus::Ok
    );
    assert_eq!((sd, cd, pr, pc), (432, 324, 6, 6));

    let rgb: Vec<u8> = (0..40 * 40)
        .flat_map(|i| [(i % 40 * 6) as u8, (i / 40 * 6) as u8, 90])
        .collect();
    let (mut s, mut c) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(
        unsafe { lccd_extract_rgb(ex, rgb.as_ptr(), 40, 40, &mut s, &mut c) },
        LccdStatus::Ok
    );
    assert_eq!(unsafe { lccd_descriptor_set_count(s) }, 36);
    assert_eq!(unsafe { lccd_descriptor_set_dim(c) }, 324);
    let data = unsafe { std::slice::from_raw_parts(lccd_descriptor_set_data(s), 36 * 432) };
    assert!(data.iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!(data.iter().any(|&v| v > 0.0));

    // write matching models through the library and load them back over the C ABI
    let dir = tempfile::tempdir().unwrap();
    let mut comps = vec![0.0; 2 * 432];
    comps[0] = 1.0;
    comps[432 + 1] = 1.0;
    let pca = lccd::reduction::PcaModel::from_parts(vec![0.0; 432], comps, 2).unwrap();
    let gmm = lccd::encoding::GmmModel::from_parts(2, vec![0.5, 0.5], vec![0.0, 0.0, 0.1, 0.1], vec![1.0; 4]).unwrap();
    let pca_path = dir.path().join("s.pca");
    let gmm_path = dir.path().join("s.gmm");
    lccd::formats::save_pca(&pca_path, &pca).unwrap();
    lccd::formats::save_gmm(&gmm_path, &gmm).unwrap();
    let (mut hp, mut hg) = (ptr::null_mut(), ptr::null_mut());
    let cp = CString::new(pca_path.to_str().unwrap()).unwrap();
    let cg = CString::new(gmm_path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { lccd_pca_load(cp.as_ptr(), &mut hp) }, LccdStatus::Ok);
    assert_eq!(unsafe { lccd_gmm_load(cg.as_ptr(), &mut hg) }, LccdStatus::Ok);
    assert_eq!(unsafe { lccd_pca_output_dim(hp) }, 2);
    let n = unsafe { lccd_gmm_fisher_dim(hg) };
    assert_eq!(n, 8);
    let mut fv = vec![0.0; n];
    assert_eq!(
        unsafe { lccd_fisher_vector(hp, hg, s, fv.as_mut_ptr(), n) },
        LccdStatus::Ok
    );
    let norm: f64 = fv.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-12);
    // channel descriptors have the wrong dim for this PCA
    assert_eq!(
        unsafe { lccd_fisher_vector(hp, hg, c, fv.as_mut_ptr(), n) },
        LccdStatus::InvalidArgument
    );

    unsafe {
        lccd_descriptor_set_free(s);
        lccd_descriptor_set_free(c);
        lccd_pca_free(hp);
        lccd_gmm_free(hg);
        lccd_extractor_free(ex);
        lccd_extractor_free(ptr::null_mut());
    }
}

#[test]
fn invalid_params_rejected() {
    let mut params = std::mem::MaybeUninit::<LccdExtractorParams>::uninit();
    unsafe { lccd_extractor_default_params(params.as_mut_ptr()) };
    let mut params = unsafe { params.assume_init() };
    params.subspace_window = 25;
    let mut ex = ptr::null_mut();
    assert_ne!(unsafe { lccd_extractor_new(&params, &mut ex) }, LccdStatus::Ok);
    assert!(ex.is_null());
    params.subspace_window = 3;
    params.channel_pairs = 0;
    assert_eq!(
        unsafe { lccd_extractor_new(&params, &mut ex) },
        LccdStatus::InvalidConfig
    );
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/lccd.h")).unwrap();
    for name in [
        "lccd_version",
        "lccd_last_error",
        "lccd_divergence",
        "lccd_subspace_divergence",
        "lccd_extractor_new",
        "lccd_extract_file",
        "lccd_descriptor_set_data",
        "lccd_fisher_vector",
        "typedef struct LccdExtractor LccdExtractor",
        "LCCD_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles a small C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("liblccd_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "lccd.h"
int main(void) {
    double p[4] = {0.25, 0.25, 0.25, 0.25}, q[4] = {0.5, 0.5, 0.0, 0.0}, out[2];
    double h = -1.0;
    if (lccd_divergence(LCCD_DIVERGENCE_KIND_HELLINGER, 0.0, p, q, 4, &h) != LCCD_STATUS_OK) return 1;
    if (lccd_subspace_divergence(LCCD_DIVERGENCE_KIND_KL, 0.0, p, q, 4, 3, out, 2) != LCCD_STATUS_OK) return 2;
    if (lccd_divergence(LCCD_DIVERGENCE_KIND_HELLINGER, 0.0, p, q, 3, &h) == LCCD_STATUS_OK) return 3;
    if (lccd_last_error() == NULL) return 4;
    LccdExtractorParams params;
    lccd_extractor_default_params(&params);
    LccdExtractor *ex = NULL;
    if (lccd_extractor_new(&params, &ex) != LCCD_STATUS_OK) return 5;
    size_t sd = 0, cd = 0;
    lccd_extractor_shape(ex, &sd, &cd, NULL, NULL);
    lccd_extractor_free(ex);
    printf("%s %zu %zu\n", lccd_version(), sd, cd);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("capi_demo");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim(), format!("{} 432 324", env!("CARGO_PKG_VERSION")));
}
