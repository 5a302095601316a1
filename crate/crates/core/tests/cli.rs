use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use medpruner::report::read_result_json;
use medpruner::tensor_io::{read_attention, read_contextual, read_volume, write_volume};
use medpruner::Volume;
use tempfile::TempDir;

fn medpruner(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_medpruner"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn step_volume(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("step.mprv");
    let out = medpruner(&[
        "synth",
        "step",
        "--depth",
        "30",
        "--height",
        "32",
        "--width",
        "32",
        "--block",
        "10",
        "--delta",
        "0.2",
        "--out",
        path_str(&path),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    path
}

#[test]
fn invalid_tau_exits_one_and_names_tau() {
    let dir = TempDir::new().unwrap();
    let vol = step_volume(&dir);
    let json = dir.path().join("r.json");
    let out = medpruner(&[
        "prune",
        "--volume",
        path_str(&vol),
        "--tau",
        "1.5",
        "--patch-size",
        "16",
        "--out",
        path_str(&json),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("tau"));
    assert!(!json.exists());
}

#[test]
fn duplicate_slices_collapse_to_first() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("dup.mprv");
    write_volume(
        &Volume::from_fn(5, 4, 4, |_, r, c| (r * 4 + c) as f32 / 16.0).unwrap(),
        &path,
    )
    .unwrap();
    let out = medpruner(&["slices", "--volume", path_str(&path), "--gamma", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "[0]");
}

#[test]
fn step_volume_slices() {
    let dir = TempDir::new().unwrap();
    let vol = step_volume(&dir);
    let out = medpruner(&["slices", "--volume", path_str(&vol)]);
    assert_eq!(stdout(&out).trim(), "[0,10,20]");
}

#[test]
fn sweep_prints_one_row_per_tau() {
    let dir = TempDir::new().unwrap();
    let vol = step_volume(&dir);
    let out = medpruner(&[
        "sweep",
        "--volume",
        path_str(&vol),
        "--patch-size",
        "8",
        "--taus",
        "0.2,0.5,0.9",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tau,r_rate,mean_mass"));
    let rates: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rates.len(), 3);
    assert!(rates.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn missing_volume_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let out = medpruner(&[
        "prune",
        "--volume",
        path_str(&dir.path().join("absent.mprv")),
        "--out",
        path_str(&dir.path().join("r.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupt_volume_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.mprv");
    std::fs::write(&path, b"NOPE\x01\x01\x00\x00").unwrap();
    let out = medpruner(&["slices", "--volume", path_str(&path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("magic"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(medpruner(&["prune"]).status.code(), Some(1));
    assert_eq!(medpruner(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(medpruner(&["--help"]).status.code(), Some(0));
}

#[test]
fn prune_writes_result_and_contextual_tokens() {
    let dir = TempDir::new().unwrap();
    let vol = step_volume(&dir);
    let json = dir.path().join("result.json");
    let out = medpruner(&[
        "prune",
        "--volume",
        path_str(&vol),
        "--patch-size",
        "8",
        "--tau",
        "0.5",
        "--contextual-ratio",
        "0.25",
        "--out",
        path_str(&json),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("r_rate"));

    let doc = read_result_json(&json).unwrap();
    assert_eq!(doc.retained_slices, vec![0, 10, 20]);
    assert_eq!(doc.original_tokens, 30 * 16);
    assert!(doc.timings_ms.is_none());
    let clusters: usize = doc.per_slice.iter().map(|s| s.clusters.len()).sum();
    let ctx = read_contextual(json.with_extension("ctx.bin")).unwrap();
    assert_eq!(ctx.len(), clusters);
    assert!(ctx.iter().all(|v| v.len() == 64));
}

#[test]
fn timings_flag_fills_timings() {
    let dir = TempDir::new().unwrap();
    let vol = step_volume(&dir);
    let json = dir.path().join("t.json");
    let out = medpruner(&[
        "prune",
        "--volume",
        path_str(&vol),
        "--patch-size",
        "8",
        "--timings",
        "--out",
        path_str(&json),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(read_result_json(&json).unwrap().timings_ms.is_some());
}

#[test]
fn synth_outputs_parse() {
    let dir = TempDir::new().unwrap();
    let lesion = dir.path().join("lesion.mprv");
    let out = medpruner(&[
        "synth",
        "lesion",
        "--depth",
        "8",
        "--height",
        "16",
        "--width",
        "16",
        "--center",
        "4",
        "--radius",
        "3",
        "--amplitude",
        "0.7",
        "--out",
        path_str(&lesion),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = read_volume(&lesion).unwrap();
    assert_eq!((v.depth(), v.height(), v.width()), (8, 16, 16));

    let attn = dir.path().join("a.mpra");
    let out = medpruner(&[
        "synth",
        "skewed-attn",
        "--slices",
        "8",
        "--tokens",
        "4",
        "--gap",
        "5",
        "--out",
        path_str(&attn),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stacks = read_attention(&attn).unwrap();
    assert_eq!(stacks.len(), 8);
    assert_eq!(stacks[0].tokens(), 4);
}

#[test]
fn ablate_and_compare_emit_json() {
    let dir = TempDir::new().unwrap();
    let vol = step_volume(&dir);
    let attn = dir.path().join("a.mpra");
    medpruner(&[
        "synth",
        "skewed-attn",
        "--slices",
        "30",
        "--tokens",
        "16",
        "--gap",
        "20",
        "--out",
        path_str(&attn),
    ]);

    let out = medpruner(&[
        "ablate",
        "--volume",
        path_str(&vol),
        "--attention",
        path_str(&attn),
        "--patch-size",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0]["variant"], "original");
    assert_eq!(rows[0]["r_rate"], 1.0);

    let file = dir.path().join("cmp.json");
    let out = medpruner(&[
        "compare",
        "--volume",
        path_str(&vol),
        "--attention",
        path_str(&attn),
        "--patch-size",
        "8",
        "--ratio",
        "0.2",
        "--out",
        path_str(&file),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    let names: Vec<&str> = rows
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["variant"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["medpruner", "fixed_ratio", "uniform_slice"]);
}

#[test]
fn attention_with_wrong_token_count_is_rejected() {
    let dir = TempDir::new().unwrap();
    let vol = step_volume(&dir);
    let attn = dir.path().join("a.mpra");
    medpruner(&[
        "synth",
        "skewed-attn",
        "--slices",
        "30",
        "--tokens",
        "9",
        "--gap",
        "1",
        "--out",
        path_str(&attn),
    ]);
    let out = medpruner(&[
        "prune",
        "--volume",
        path_str(&vol),
        "--attention",
        path_str(&attn),
        "--patch-size",
        "8",
        "--out",
        path_str(&dir.path().join("r.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
