use serde_json::Value;
use sixway_core::baker::{DatasetIndex, INDEX_NAME};
use sixway_core::guiding::GuidingMap;
use sixway_core::runtime::{ColorSpace, SixWayLightmaps};
use std::path::Path;
use std::process::{Command, Output};

fn sixway(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sixway")).current_dir(dir).env_remove("SIXWAY_THREADS").args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = sixway(dir, args);
    assert!(out.status.success(), "sixway {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn manifest(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("small.toml");
    std::fs::write(&p, "[camera]\nwidth = 16\nheight = 16\n[bake]\nspp = 2\nrng_seed = 9\n[procedural]\nkind = \"plume\"\ndims = [12, 12, 16]\nframes = 2\n").unwrap();
    p
}

#[test]
fn dataset_two_frames_three_cameras() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(dir.path(), &["--config", cfg.to_str().unwrap(), "dataset", "--cameras", "3", "--out", "data"]);
    let data = dir.path().join("data");
    let index = DatasetIndex::read(&data.join(INDEX_NAME)).unwrap();
    assert_eq!(index.records.len(), 6);
    assert_eq!(index.color_space, ColorSpace::Srgb);
    assert_eq!((index.width, index.height), (16, 16));
    for r in &index.records {
        let g = GuidingMap::read(&data.join(&r.guiding_path)).unwrap();
        assert_eq!((g.width, g.height), (16, 16));
        assert_eq!(g.depth_scale, r.depth_scale);
        SixWayLightmaps::read_pfm(&data.join(&r.lightmaps_path), index.color_space).unwrap();
        assert!(r.grid_path.starts_with("sequence/"), "{}", r.grid_path);
        assert!(data.join(&r.grid_path).is_file());
    }
    let pairs: Vec<_> = index.records.iter().map(|r| (r.frame, r.camera_id)).collect();
    assert_eq!(pairs, [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]);

    let m = manifest(&data.join("run-dataset.json"));
    assert_eq!(m["command"], "dataset");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["seeds"]["bake"], 9);
    let files: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert!(files.contains(&"f00001_c02_lightmaps.pfm"));
    assert!(files.contains(&"sequence/manifest.json"));
    for f in files {
        assert!(data.join(f).is_file(), "{f} listed but missing");
    }
}

#[test]
fn ring_defaults_to_nine_views_ten_degrees_apart() {
    let cfg = sixway_cli::PipelineConfig::default();
    assert_eq!((cfg.ring.count, cfg.ring.step_deg), (9, 10.0));
    assert_eq!((cfg.camera.width, cfg.camera.height, cfg.procedural.dims, cfg.bake.spp), (128, 128, [64; 3], 32));
}

#[test]
fn infer_without_weights_fails_with_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    ok(dir.path(), &["--config", cfg, "guide", "--out", "g"]);
    let out = sixway(dir.path(), &["--config", cfg, "infer", "--guiding", "g/guiding.pfm", "--out", "i"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("infer") && err.contains("missing weights"), "{err}");

    let out = sixway(dir.path(), &["infer", "--weights", "nope.nsw", "--guiding", "g/guiding.pfm", "--out", "i"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing weights"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["bake", "--bogus", "--out", "x"][..], &["frobnicate"], &["guide"], &["composite", "--lightmaps", "a.pfm", "--light", "1,2", "--out", "x"]] {
        let out = sixway(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn bad_config_and_stage_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"phase_g": 3.0}"#).unwrap();
    let out = sixway(dir.path(), &["--config", "bad.json", "guide", "--out", "g"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: config:"));

    let out = sixway(dir.path(), &["bake", "--grid", "missing.dgrid", "--out", "b"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: load:"));

    let out = sixway(dir.path(), &["--threads", "0", "gen", "--out", "s"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn chain_with_manifests_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    let cfg = cfg.to_str().unwrap();
    ok(d, &["gen", "--kind", "sphere_puff", "--dims", "16", "--frames", "1", "--out", "seq"]);
    ok(d, &["--config", cfg, "guide", "--grid", "seq/manifest.json", "--out", "g"]);
    ok(d, &["init-weights", "--arch", "tiny", "--seed", "2", "--out", "w"]);
    let out = ok(d, &["--config", cfg, "infer", "--weights", "w/weights.nsw", "--guiding", "g/guiding.pfm", "--out", "i"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("lightmaps.pfm"));
    ok(d, &["--config", cfg, "bake", "--grid", "seq/manifest.json", "--out", "b"]);
    ok(d, &["--config", cfg, "composite", "--lightmaps", "i/lightmaps.pfm", "--light", "0,0,-1:1,0.9,0.8", "--out", "ci"]);
    ok(d, &["--config", cfg, "composite", "--lightmaps", "b/lightmaps.pfm", "--light", "0,0,-1:1,0.9,0.8", "--out", "cb"]);
    ok(d, &["metrics", "--reference", "cb/composite.png", "--test", "ci", "--out", "m"]);
    ok(d, &["metrics", "--reference", "cb", "--test", "cb", "--out", "same"]);

    let report: Value = manifest(&d.join("m/metrics.json"));
    assert_eq!(report["frames"].as_array().unwrap().len(), 1);
    let same: Value = manifest(&d.join("same/metrics.json"));
    assert_eq!(same["mse"]["avg"], 0.0);
    assert!(std::fs::read_to_string(d.join("m/metrics.csv")).unwrap().starts_with("frame,mse,psnr\n"));

    let g = manifest(&d.join("g/run-guide.json"));
    assert_eq!(g["inputs"][0], "seq/manifest.json");
    assert_eq!(g["files"], serde_json::json!(["guiding.pfm", "guiding.json"]));
    let m1 = manifest(&d.join("cb/run-composite.json"));
    let m2 = manifest(&d.join("ci/run-composite.json"));
    assert_ne!(m1["config_hash"], m2["config_hash"]);
}

#[test]
fn metrics_rejects_mismatched_sets() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["init-weights", "--arch", "tiny", "--zeros", "--out", "w"]);
    std::fs::create_dir(d.join("empty")).unwrap();
    let out = sixway(d, &["metrics", "--reference", "empty", "--test", "empty", "--out", "m"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("metrics"));
}

#[test]
fn pack_atlas_writes_layout() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    let cfg = cfg.to_str().unwrap();
    ok(d, &["--config", cfg, "bake", "--frame", "0", "--out", "b0"]);
    ok(d, &["--config", cfg, "bake", "--frame", "1", "--out", "b1"]);
    ok(d, &["pack-atlas", "--lightmaps", "b0/lightmaps.pfm", "b1/lightmaps.pfm", "b0/lightmaps.pfm", "--out", "a"]);
    let layout = manifest(&d.join("a/atlas_layout.json"));
    assert_eq!(layout["K"], 3);
    assert_eq!((layout["frame_w"].as_u64(), layout["frame_h"].as_u64()), (Some(16), Some(16)));
    for f in ["atlas_1.png", "atlas_2.png", "atlas_1.pfm", "atlas_2.pfm"] {
        assert!(d.join("a").join(f).is_file());
    }
}

#[test]
fn threads_env_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    let cfg = cfg.to_str().unwrap();
    let run = |threads: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_sixway"))
            .current_dir(d)
            .env("SIXWAY_THREADS", threads)
            .args(["--config", cfg, "bake", "--out", out])
            .output()
            .unwrap();
        assert!(o.status.success());
        std::fs::read(d.join(out).join("lightmaps.pfm")).unwrap()
    };
    assert_eq!(run("1", "t1"), run("3", "t3"));
}

#[test]
fn serve_reports_busy_port() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    ok(d, &["init-weights", "--arch", "tiny", "--out", "w"]);
    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = busy.local_addr().unwrap().port().to_string();
    let out = sixway(d, &["--config", cfg.to_str().unwrap(), "serve", "--port", &port, "--weights", "w/weights.nsw", "--out", "s"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("serve") && err.contains("port in use"), "{err}");
    assert!(d.join("s/run-serve.json").is_file());
}
