use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use medpruner::synth::{make_skewed_headstack, make_step_volume};
use medpruner::tensor_io::{write_attention, write_volume};
use medpruner_ffi::*;

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = mp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn step_handle() -> *mut MpVolume {
    let vol = make_step_volume(30, 32, 32, 10, 0.2).unwrap();
    let mut out = ptr::null_mut();
    let status =
        unsafe { mp_volume_from_data(30, 32, 32, vol.data().as_ptr(), vol.data().len(), &mut out) };
    assert_eq!(status, MpStatus::Ok);
    out
}

#[test]
fn version_and_defaults() {
    let v = unsafe { CStr::from_ptr(mp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let cfg = mp_config_default();
    assert_eq!(cfg.tau, 0.9);
    assert_eq!(cfg.embed_dim, cfg.patch_size * cfg.patch_size);
    assert_eq!(mp_config_with_patch_size(8).embed_dim, 64);
}

#[test]
fn iaf_filter_sizes_and_fills_buffer() {
    let vol = step_handle();
    let mut len = 0;
    let status = unsafe { mp_iaf_filter(vol, 0.02, ptr::null_mut(), 0, &mut len) };
    assert_eq!(status, MpStatus::BufferTooSmall);
    assert_eq!(len, 3);
    let mut buf = vec![0usize; len];
    let status = unsafe { mp_iaf_filter(vol, 0.02, buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(status, MpStatus::Ok);
    assert!(mp_last_error_message().is_null());
    assert_eq!(buf, [0, 10, 20]);
    unsafe { mp_volume_free(vol) };
}

#[test]
fn prune_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let vol_path = dir.path().join("v.mprv");
    let att_path = dir.path().join("a.mpra");
    write_volume(&make_step_volume(30, 32, 32, 10, 0.2).unwrap(), &vol_path).unwrap();
    let stack = make_skewed_headstack(16, 16, 5, 20.0).unwrap();
    write_attention(&vec![stack; 30], &att_path).unwrap();

    let mut vol = ptr::null_mut();
    assert_eq!(
        unsafe { mp_volume_read(cstr(&vol_path).as_ptr(), &mut vol) },
        MpStatus::Ok
    );
    let (mut d, mut h) = (0, 0);
    assert_eq!(
        unsafe { mp_volume_shape(vol, &mut d, &mut h, ptr::null_mut()) },
        MpStatus::Ok
    );
    assert_eq!((d, h), (30, 32));

    let cfg = MpConfig {
        contextual_ratio: 0.0,
        ..mp_config_with_patch_size(8)
    };
    let mut res = ptr::null_mut();
    let status = unsafe { mp_prune(vol, &cfg, cstr(&att_path).as_ptr(), &mut res) };
    assert_eq!(status, MpStatus::Ok);

    let (mut orig, mut kept, mut slices) = (0, 0, 0);
    assert_eq!(
        unsafe { mp_result_counts(res, &mut orig, &mut kept, &mut slices) },
        MpStatus::Ok
    );
    assert_eq!((orig, kept, slices), (480, 3, 3));
    assert_eq!(unsafe { mp_result_r_rate(res) }, 3.0 / 480.0);

    let mut buf = [0usize; 8];
    let mut len = 0;
    assert_eq!(
        unsafe { mp_result_retained_slices(res, buf.as_mut_ptr(), 8, &mut len) },
        MpStatus::Ok
    );
    assert_eq!(&buf[..len], &[0, 10, 20]);
    assert_eq!(
        unsafe { mp_result_primary_tokens(res, 1, buf.as_mut_ptr(), 8, &mut len) },
        MpStatus::Ok
    );
    assert_eq!(&buf[..len], &[5]);
    assert_eq!(
        unsafe { mp_result_primary_tokens(res, 3, buf.as_mut_ptr(), 8, &mut len) },
        MpStatus::Invalid
    );

    let json = dir.path().join("r.json");
    assert_eq!(
        unsafe { mp_result_write_json(res, cstr(&json).as_ptr(), false) },
        MpStatus::Ok
    );
    assert!(json.exists() && json.with_extension("ctx.bin").exists());

    unsafe {
        mp_result_free(res);
        mp_volume_free(vol);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let vol = step_handle();
    let mut res = ptr::null_mut();

    let bad = MpConfig {
        tau: 1.5,
        ..mp_config_with_patch_size(8)
    };
    assert_eq!(
        unsafe { mp_prune(vol, &bad, ptr::null(), &mut res) },
        MpStatus::Config
    );
    assert!(last_error().contains("tau"));
    assert!(res.is_null());

    let missing = CString::new("/nonexistent/dir/v.mprv").unwrap();
    let mut other = ptr::null_mut();
    assert_eq!(
        unsafe { mp_volume_read(missing.as_ptr(), &mut other) },
        MpStatus::Io
    );

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.mprv");
    std::fs::write(&junk, b"JUNKJUNKJUNK").unwrap();
    assert_eq!(
        unsafe { mp_volume_read(cstr(&junk).as_ptr(), &mut other) },
        MpStatus::Invalid
    );
    assert!(last_error().contains("magic"));

    let data = [0.0f32; 3];
    assert_eq!(
        unsafe { mp_volume_from_data(1, 2, 2, data.as_ptr(), 3, &mut other) },
        MpStatus::Invalid
    );
    assert_eq!(
        unsafe { mp_prune(ptr::null(), &bad, ptr::null(), &mut res) },
        MpStatus::NullPointer
    );
    assert!(unsafe { mp_result_r_rate(ptr::null()) }.is_nan());
    unsafe {
        mp_volume_free(ptr::null_mut());
        mp_result_free(ptr::null_mut());
        mp_volume_free(vol);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"medpruner.h\"\n\
         int main(void) {\n\
           MpConfig cfg = mp_config_default();\n\
           MpVolume *v = 0;\n\
           MpResult *r = 0;\n\
           MpStatus s = mp_prune(v, &cfg, 0, &r);\n\
           return s == MP_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&header)
        .arg(&src)
        .output()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
