//! C ABI over the `lccd` library.
//!
//! Objects are opaque handles created by `*_new`/`*_load`/`*_extract_*` and released
//! with the matching `*_free`. Every fallible call returns an [`LccdStatus`]; on failure
//! a description is available from [`lccd_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use lccd::colorgrid::RasterImage;
use lccd::descriptor::{extract_image, ChannelPair, DescriptorSet, ExtractionConfig};
use lccd::divergence::{subspace_into, DivergenceKind, SubspaceConfig};
use lccd::encoding::{fisher_vector, GmmModel};
use lccd::formats;
use lccd::linalg::RowMatrix;
use lccd::reduction::PcaModel;
use lccd::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LccdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    FormatError = 4,
    IoError = 5,
    ImageError = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Divergence selector for the `kind` arguments.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LccdDivergenceKind {
    Bhattacharyya = 0,
    Kl = 1,
    SymmetricKl = 2,
    Hellinger = 3,
    TotalVariation = 4,
    Pearson = 5,
    /// Uses the accompanying `alpha` argument.
    Alpha = 6,
}

/// Bit flags for [`LccdExtractorParams::channel_pairs`].
pub const LCCD_PAIR_RG: u32 = 1;
pub const LCCD_PAIR_RB: u32 = 2;
pub const LCCD_PAIR_GB: u32 = 4;

/// Extraction parameters; fill with [`lccd_extractor_default_params`] first.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LccdExtractorParams {
    pub resize_width: u32,
    pub resize_height: u32,
    pub grid_rows: u32,
    pub grid_cols: u32,
    pub bins: u32,
    pub subspace_window: u32,
    /// An [`LccdDivergenceKind`] value.
    pub divergence: u32,
    pub alpha: f64,
    /// `LCCD_PAIR_*` flags, compared in RG, RB, GB order.
    pub channel_pairs: u32,
}

/// Opaque extraction settings.
pub struct LccdExtractor {
    config: ExtractionConfig,
}

/// Opaque descriptors of one stream for one image.
pub struct LccdDescriptorSet {
    set: DescriptorSet,
}

/// Opaque PCA model.
pub struct LccdPca {
    model: PcaModel,
}

/// Opaque diagonal GMM.
pub struct LccdGmm {
    model: GmmModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: LccdStatus, msg: impl Into<String>) -> LccdStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &Error) -> LccdStatus {
    match e {
        Error::InvalidInput(_) => LccdStatus::InvalidArgument,
        Error::InvalidConfig(_) => LccdStatus::InvalidConfig,
        Error::Format { .. } | Error::Csv(_) | Error::Json(_) => LccdStatus::FormatError,
        Error::Image(_) => LccdStatus::ImageError,
        Error::Io(_) => LccdStatus::IoError,
    }
}

fn guard(f: impl FnOnce() -> Result<(), LccdStatus>) -> LccdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LccdStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(LccdStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: lccd::Result<T>) -> Result<T, LccdStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), LccdStatus> {
    if p.is_null() {
        Err(fail(LccdStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a str, LccdStatus> {
    non_null(p, "path")?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(LccdStatus::InvalidArgument, "path is not UTF-8"))
}

fn divergence_kind(kind: u32, alpha: f64) -> Result<DivergenceKind, LccdStatus> {
    let k = match kind {
        0 => DivergenceKind::Bhattacharyya,
        1 => DivergenceKind::KL,
        2 => DivergenceKind::SymmetricKL,
        3 => DivergenceKind::Hellinger,
        4 => DivergenceKind::TotalVariation,
        5 => DivergenceKind::Pearson,
        6 => DivergenceKind::Alpha(alpha),
        other => {
            return Err(fail(
                LccdStatus::InvalidArgument,
                format!("unknown divergence kind {other}"),
            ))
        }
    };
    lift(k.validate())?;
    Ok(k)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lccd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn lccd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Divergence between two probability vectors of length `len`.
///
/// # Safety
/// `p` and `q` must point to `len` readable doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn lccd_divergence(
    kind: u32,
    alpha: f64,
    p: *const f64,
    q: *const f64,
    len: usize,
    out: *mut f64,
) -> LccdStatus {
    guard(|| {
        non_null(p, "p")?;
        non_null(q, "q")?;
        non_null(out, "out")?;
        let kind = divergence_kind(kind, alpha)?;
        let p = lift(lccd::divergence::DiscreteDistribution::new(
            slice::from_raw_parts(p, len).to_vec(),
        ))?;
        let q = lift(lccd::divergence::DiscreteDistribution::new(
            slice::from_raw_parts(q, len).to_vec(),
        ))?;
        *out = lift(lccd::divergence::divergence(kind, &p, &q))?;
        Ok(())
    })
}

/// Windowed divergences: `len - window + 1` values written to `out`.
///
/// # Safety
/// `p` and `q` must point to `len` readable doubles and `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lccd_subspace_divergence(
    kind: u32,
    alpha: f64,
    p: *const f64,
    q: *const f64,
    len: usize,
    window: usize,
    out: *mut f64,
    out_len: usize,
) -> LccdStatus {
    guard(|| {
        non_null(p, "p")?;
        non_null(q, "q")?;
        non_null(out, "out")?;
        let kind = divergence_kind(kind, alpha)?;
        let cfg = lift(SubspaceConfig::new(window))?;
        let count = lift(cfg.count(len))?;
        if out_len < count {
            return Err(fail(
                LccdStatus::BufferTooSmall,
                format!("need {count} outputs, got {out_len}"),
            ));
        }
        let p = lift(lccd::divergence::DiscreteDistribution::new(
            slice::from_raw_parts(p, len).to_vec(),
        ))?;
        let q = lift(lccd::divergence::DiscreteDistribution::new(
            slice::from_raw_parts(q, len).to_vec(),
        ))?;
        let mut values = Vec::with_capacity(count);
        let mut scratch = Vec::new();
        subspace_into(kind, p.mass(), q.mass(), window, &mut values, &mut scratch);
        slice::from_raw_parts_mut(out, count).copy_from_slice(&values);
        Ok(())
    })
}

/// Writes the default parameters (470x380, 50x50 grid, 20 bins, window 3, Hellinger,
/// RG and RB pairs).
///
/// # Safety
/// `out` must point to a writable `LccdExtractorParams`.
#[no_mangle]
pub unsafe extern "C" fn lccd_extractor_default_params(out: *mut LccdExtractorParams) -> LccdStatus {
    guard(|| {
        non_null(out, "out")?;
        let d = ExtractionConfig::default();
        *out = LccdExtractorParams {
            resize_width: d.resize.0 as u32,
            resize_height: d.resize.1 as u32,
            grid_rows: d.grid_rows as u32,
            grid_cols: d.grid_cols as u32,
            bins: d.bins as u32,
            subspace_window: d.subspace.window() as u32,
            divergence: LccdDivergenceKind::Hellinger as u32,
            alpha: 0.5,
            channel_pairs: LCCD_PAIR_RG | LCCD_PAIR_RB,
        };
        Ok(())
    })
}

/// # Safety
/// `params` must point to a valid `LccdExtractorParams`; `out` to a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lccd_extractor_new(
    params: *const LccdExtractorParams,
    out: *mut *mut LccdExtractor,
) -> LccdStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        let p = &*params;
        let pairs: Vec<ChannelPair> = [
            (LCCD_PAIR_RG, ChannelPair::RG),
            (LCCD_PAIR_RB, ChannelPair::RB),
            (LCCD_PAIR_GB, ChannelPair::GB),
        ]
        .into_iter()
        .filter(|(bit, _)| p.channel_pairs & bit != 0)
        .map(|(_, pair)| pair)
        .collect();
        let config = ExtractionConfig {
            resize: (p.resize_width as usize, p.resize_height as usize),
            grid_rows: p.grid_rows as usize,
            grid_cols: p.grid_cols as usize,
            bins: p.bins as usize,
            subspace: lift(SubspaceConfig::new(p.subspace_window as usize))?,
            kind: divergence_kind(p.divergence, p.alpha)?,
            pairs,
        };
        lift(config.validate())?;
        *out = Box::into_raw(Box::new(LccdExtractor { config }));
        Ok(())
    })
}

/// # Safety
/// `extractor` must be NULL or a handle from [`lccd_extractor_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lccd_extractor_free(extractor: *mut LccdExtractor) {
    if !extractor.is_null() {
        drop(Box::from_raw(extractor));
    }
}

/// Output shape of an extractor. Any output pointer may be NULL.
///
/// # Safety
/// `extractor` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lccd_extractor_shape(
    extractor: *const LccdExtractor,
    spatial_dim: *mut usize,
    channel_dim: *mut usize,
    patch_rows: *mut usize,
    patch_cols: *mut usize,
) -> LccdStatus {
    guard(|| {
        non_null(extractor, "extractor")?;
        let c = &(*extractor).config;
        for (ptr, v) in [
            (spatial_dim, c.spatial_dim()),
            (channel_dim, c.channel_dim()),
            (patch_rows, c.patch_rows()),
            (patch_cols, c.patch_cols()),
        ] {
            if !ptr.is_null() {
                *ptr = v;
            }
        }
        Ok(())
    })
}

unsafe fn extract_into(
    extractor: *const LccdExtractor,
    img: &RasterImage,
    spatial_out: *mut *mut LccdDescriptorSet,
    channel_out: *mut *mut LccdDescriptorSet,
) -> Result<(), LccdStatus> {
    let (s, c) = lift(extract_image("", img, &(*extractor).config))?;
    *spatial_out = Box::into_raw(Box::new(LccdDescriptorSet { set: s }));
    *channel_out = Box::into_raw(Box::new(LccdDescriptorSet { set: c }));
    Ok(())
}

/// Describes an interleaved 8-bit RGB buffer of `width * height * 3` bytes.
///
/// # Safety
/// `rgb` must point to `width * height * 3` readable bytes; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lccd_extract_rgb(
    extractor: *const LccdExtractor,
    rgb: *const u8,
    width: usize,
    height: usize,
    spatial_out: *mut *mut LccdDescriptorSet,
    channel_out: *mut *mut LccdDescriptorSet,
) -> LccdStatus {
    guard(|| {
        non_null(extractor, "extractor")?;
        non_null(rgb, "rgb")?;
        non_null(spatial_out, "spatial_out")?;
        non_null(channel_out, "channel_out")?;
        let n = width
            .checked_mul(height)
            .and_then(|v| v.checked_mul(3))
            .ok_or_else(|| fail(LccdStatus::InvalidArgument, "image size overflows"))?;
        let img = lift(RasterImage::new(width, height, slice::from_raw_parts(rgb, n).to_vec()))?;
        extract_into(extractor, &img, spatial_out, channel_out)
    })
}

/// Decodes a PNG, JPEG or raw image file and describes it.
///
/// # Safety
/// `path` must be a NUL-terminated string; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lccd_extract_file(
    extractor: *const LccdExtractor,
    path: *const c_char,
    spatial_out: *mut *mut LccdDescriptorSet,
    channel_out: *mut *mut LccdDescriptorSet,
) -> LccdStatus {
    guard(|| {
        non_null(extractor, "extractor")?;
        non_null(spatial_out, "spatial_out")?;
        non_null(channel_out, "channel_out")?;
        let img = lift(RasterImage::open(path_arg(path)?))?;
        extract_into(extractor, &img, spatial_out, channel_out)
    })
}

/// Number of descriptors (patches) in the set; 0 for NULL.
///
/// # Safety
/// `set` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lccd_descriptor_set_count(set: *const LccdDescriptorSet) -> usize {
    set.as_ref().map_or(0, |s| s.set.len())
}

/// Values per descriptor; 0 for NULL.
///
/// # Safety
/// `set` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lccd_descriptor_set_dim(set: *const LccdDescriptorSet) -> usize {
    set.as_ref().map_or(0, |s| s.set.dim)
}

/// `count * dim` floats, descriptor-major, patches in row-major order. Owned by the set.
///
/// # Safety
/// `set` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lccd_descriptor_set_data(set: *const LccdDescriptorSet) -> *const f32 {
    set.as_ref().map_or(ptr::null(), |s| s.set.values.as_ptr())
}

/// # Safety
/// `set` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lccd_descriptor_set_free(set: *mut LccdDescriptorSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Loads an `LCCDPCA1` model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lccd_pca_load(path: *const c_char, out: *mut *mut LccdPca) -> LccdStatus {
    guard(|| {
        non_null(out, "out")?;
        let model = lift(formats::load_pca(path_arg(path)?))?;
        *out = Box::into_raw(Box::new(LccdPca { model }));
        Ok(())
    })
}

/// # Safety
/// `pca` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lccd_pca_output_dim(pca: *const LccdPca) -> usize {
    pca.as_ref().map_or(0, |p| p.model.output_dim())
}

/// # Safety
/// `pca` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lccd_pca_free(pca: *mut LccdPca) {
    if !pca.is_null() {
        drop(Box::from_raw(pca));
    }
}

/// Loads an `LCCDGMM1` model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lccd_gmm_load(path: *const c_char, out: *mut *mut LccdGmm) -> LccdStatus {
    guard(|| {
        non_null(out, "out")?;
        let model = lift(formats::load_gmm(path_arg(path)?))?;
        *out = Box::into_raw(Box::new(LccdGmm { model }));
        Ok(())
    })
}

/// Length of a Fisher vector under this model: `2 * K * dim`; 0 for NULL.
///
/// # Safety
/// `gmm` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lccd_gmm_fisher_dim(gmm: *const LccdGmm) -> usize {
    gmm.as_ref().map_or(0, |g| 2 * g.model.components() * g.model.dim())
}

/// # Safety
/// `gmm` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lccd_gmm_free(gmm: *mut LccdGmm) {
    if !gmm.is_null() {
        drop(Box::from_raw(gmm));
    }
}

/// Projects every descriptor of `set` with `pca` and writes the normalized Fisher vector.
///
/// # Safety
/// Handles must be live; `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lccd_fisher_vector(
    pca: *const LccdPca,
    gmm: *const LccdGmm,
    set: *const LccdDescriptorSet,
    out: *mut f64,
    out_len: usize,
) -> LccdStatus {
    guard(|| {
        non_null(pca, "pca")?;
        non_null(gmm, "gmm")?;
        non_null(set, "set")?;
        non_null(out, "out")?;
        let (pca, gmm, set) = (&(*pca).model, &(*gmm).model, &(*set).set);
        let need = 2 * gmm.components() * gmm.dim();
        if out_len < need {
            return Err(fail(
                LccdStatus::BufferTooSmall,
                format!("need {need} outputs, got {out_len}"),
            ));
        }
        let mut m = RowMatrix::with_cols(pca.output_dim());
        let mut buf = Vec::new();
        for d in set.iter() {
            lift(pca.project_f32(d, &mut buf))?;
            lift(m.push_row(&buf))?;
        }
        let fv = lift(fisher_vector(gmm, &m))?;
        slice::from_raw_parts_mut(out, need).copy_from_slice(&fv);
        Ok(())
    })
}
