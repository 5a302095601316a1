//! C ABI over the medpruner engine.
//!
//! Volumes and results are opaque handles created and freed through this API.
//! Every fallible function returns an [`MpStatus`]; on failure a message is
//! kept per thread and can be read with [`mp_last_error_message`]. Panics never
//! cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use medpruner::report::write_result_json;
use medpruner::tensor_io::{read_attention, read_volume};
use medpruner::{iaf_filter, prune_volume, Error, PruneConfig, PruneResult, Volume};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Out-of-range configuration value.
    Config = 2,
    /// Malformed input data or file contents.
    Invalid = 3,
    /// Filesystem failure.
    Io = 4,
    /// The caller's buffer is too small; the required length was still written.
    BufferTooSmall = 5,
    /// Internal panic. The handle arguments should be considered unusable.
    Panic = 6,
}

/// Pipeline parameters. Obtain defaults from [`mp_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MpConfig {
    pub gamma: f64,
    pub tau: f64,
    pub temperature: f64,
    pub contextual_ratio: f64,
    pub patch_size: usize,
    pub embed_dim: usize,
    pub num_heads: usize,
    pub head_dim: usize,
}

impl From<MpConfig> for PruneConfig {
    fn from(c: MpConfig) -> Self {
        PruneConfig {
            gamma: c.gamma,
            tau: c.tau,
            temperature: c.temperature,
            contextual_ratio: c.contextual_ratio,
            patch_size: c.patch_size,
            embed_dim: c.embed_dim,
            num_heads: c.num_heads,
            head_dim: c.head_dim,
        }
    }
}

impl From<PruneConfig> for MpConfig {
    fn from(c: PruneConfig) -> Self {
        MpConfig {
            gamma: c.gamma,
            tau: c.tau,
            temperature: c.temperature,
            contextual_ratio: c.contextual_ratio,
            patch_size: c.patch_size,
            embed_dim: c.embed_dim,
            num_heads: c.num_heads,
            head_dim: c.head_dim,
        }
    }
}

/// Opaque volume handle.
pub struct MpVolume(Volume);

/// Opaque pruning result handle.
pub struct MpResult(PruneResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> MpStatus {
    match err.root() {
        Error::Config(_) => MpStatus::Config,
        Error::Io(_) => MpStatus::Io,
        _ => MpStatus::Invalid,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), MpStatus>) -> MpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MpStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            MpStatus::Panic
        }
    }
}

fn fail(err: Error) -> MpStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(what: &str) -> MpStatus {
    set_error(format!("{what} is null"));
    MpStatus::NullPointer
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, MpStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error(format!("{what} is not valid UTF-8"));
            Err(MpStatus::Invalid)
        }
    }
}

unsafe fn copy_out(
    src: &[usize],
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> Result<(), MpStatus> {
    if len.is_null() {
        return Err(null("len"));
    }
    *len = src.len();
    if cap < src.len() {
        set_error(format!("buffer holds {cap}, need {}", src.len()));
        return Err(MpStatus::BufferTooSmall);
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

/// Message for the last failed call on this thread, or null if it succeeded.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn mp_config_default() -> MpConfig {
    PruneConfig::default().into()
}

/// Defaults with the given patch size and an embedding width of its square.
#[no_mangle]
pub extern "C" fn mp_config_with_patch_size(patch_size: usize) -> MpConfig {
    PruneConfig::with_patch_size(patch_size).into()
}

/// Reads an MPRV volume file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mp_volume_read(path: *const c_char, out: *mut *mut MpVolume) -> MpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path, "path")?;
        let vol = read_volume(path).map_err(fail)?;
        *out = Box::into_raw(Box::new(MpVolume(vol)));
        Ok(())
    })
}

/// Copies `len` voxels laid out depth-major, then rows, then columns.
///
/// # Safety
/// `data` must point to `len` floats and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mp_volume_from_data(
    depth: usize,
    height: usize,
    width: usize,
    data: *const f32,
    len: usize,
    out: *mut *mut MpVolume,
) -> MpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if data.is_null() && len > 0 {
            return Err(null("data"));
        }
        let values = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(data, len).to_vec()
        };
        let vol = Volume::new(depth, height, width, values).map_err(fail)?;
        *out = Box::into_raw(Box::new(MpVolume(vol)));
        Ok(())
    })
}

/// Writes the volume dimensions. Any output pointer may be null.
///
/// # Safety
/// `vol` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn mp_volume_shape(
    vol: *const MpVolume,
    depth: *mut usize,
    height: *mut usize,
    width: *mut usize,
) -> MpStatus {
    guard(|| {
        let v = &vol.as_ref().ok_or_else(|| null("vol"))?.0;
        for (p, x) in [(depth, v.depth()), (height, v.height()), (width, v.width())] {
            if !p.is_null() {
                *p = x;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `vol` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mp_volume_free(vol: *mut MpVolume) {
    if !vol.is_null() {
        drop(Box::from_raw(vol));
    }
}

/// Slice filtering alone. Retained indices go to `buf`; `*len` always receives
/// the count, so a call with `cap = 0` can size the buffer.
///
/// # Safety
/// `vol` must be a live handle, `buf` must hold `cap` entries and `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mp_iaf_filter(
    vol: *const MpVolume,
    gamma: f64,
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> MpStatus {
    guard(|| {
        let v = &vol.as_ref().ok_or_else(|| null("vol"))?.0;
        PruneConfig {
            gamma,
            ..Default::default()
        }
        .validate()
        .map_err(fail)?;
        copy_out(iaf_filter(v, gamma).retained(), buf, cap, len)
    })
}

/// Runs the full pipeline. `attention_path` may be null to use the built-in
/// patch encoder.
///
/// # Safety
/// `vol` must be a live handle, `cfg` and `out` valid pointers, and
/// `attention_path` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mp_prune(
    vol: *const MpVolume,
    cfg: *const MpConfig,
    attention_path: *const c_char,
    out: *mut *mut MpResult,
) -> MpStatus {
    guard(|| {
        let v = &vol.as_ref().ok_or_else(|| null("vol"))?.0;
        let cfg: PruneConfig = (*cfg.as_ref().ok_or_else(|| null("cfg"))?).into();
        if out.is_null() {
            return Err(null("out"));
        }
        let attention = if attention_path.is_null() {
            None
        } else {
            Some(read_attention(path_arg(attention_path, "attention_path")?).map_err(fail)?)
        };
        let res = prune_volume(v, &cfg, attention.as_deref()).map_err(fail)?;
        *out = Box::into_raw(Box::new(MpResult(res)));
        Ok(())
    })
}

/// Retention rate of a result, or NaN for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mp_result_r_rate(res: *const MpResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.0.r_rate)
}

/// Token and slice counts. Any output pointer may be null.
///
/// # Safety
/// `res` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn mp_result_counts(
    res: *const MpResult,
    original_tokens: *mut usize,
    retained_tokens: *mut usize,
    retained_slices: *mut usize,
) -> MpStatus {
    guard(|| {
        let r = &res.as_ref().ok_or_else(|| null("res"))?.0;
        for (p, x) in [
            (original_tokens, r.original_tokens),
            (retained_tokens, r.retained_tokens),
            (retained_slices, r.slice_selection.len()),
        ] {
            if !p.is_null() {
                *p = x;
            }
        }
        Ok(())
    })
}

/// Copies retained slice indices, sized like [`mp_iaf_filter`].
///
/// # Safety
/// `res` must be a live handle, `buf` must hold `cap` entries and `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mp_result_retained_slices(
    res: *const MpResult,
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> MpStatus {
    guard(|| {
        let r = &res.as_ref().ok_or_else(|| null("res"))?.0;
        copy_out(r.slice_selection.retained(), buf, cap, len)
    })
}

/// Copies the primary token indices of the `slot`-th retained slice.
///
/// # Safety
/// `res` must be a live handle, `buf` must hold `cap` entries and `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mp_result_primary_tokens(
    res: *const MpResult,
    slot: usize,
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> MpStatus {
    guard(|| {
        let r = &res.as_ref().ok_or_else(|| null("res"))?.0;
        let Some(slice) = r.slices.get(slot) else {
            set_error(format!(
                "slot {slot} out of range for {} slices",
                r.slices.len()
            ));
            return Err(MpStatus::Invalid);
        };
        copy_out(&slice.primary.indices, buf, cap, len)
    })
}

/// Writes the JSON report and its sibling contextual-token file.
///
/// # Safety
/// `res` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mp_result_write_json(
    res: *const MpResult,
    path: *const c_char,
    include_timings: bool,
) -> MpStatus {
    guard(|| {
        let r = &res.as_ref().ok_or_else(|| null("res"))?.0;
        let path = path_arg(path, "path")?;
        write_result_json(r, path, include_timings).map_err(fail)?;
        Ok(())
    })
}

/// # Safety
/// `res` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mp_result_free(res: *mut MpResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}
