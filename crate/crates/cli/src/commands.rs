use crate::config::PipelineConfig;
use crate::manifest::{config_hash, RunManifest};
use crate::{stage, ArchChoice, Command, LightSpec, SceneArgs, StageError};
use serde::Serialize;
use sixway_core::baker::{bake_emissive, bake_sixway, bake_tuple, BakeConfig, INDEX_NAME};
use sixway_core::bench::{run_bench, BenchStage};
use sixway_core::guiding::{generate_guiding, GuidingMap};
use sixway_core::image::{decode_png, encode_png, pfm_to_rgb, rgb_to_pfm, Pfm, RgbImage, ScalarMap};
use sixway_core::metrics::MetricReport;
use sixway_core::nn::{Generator, NetArchitecture, WeightStore};
use sixway_core::runtime::{
    composite, export_textures, pack_flipbook, pack_textures, shadow_visibility, Background, Channel, ColorSpace,
    DirectionalLight, ShadowContext, SixWayLightmaps,
};
use sixway_core::volume::{
    camera_ring, generate_procedural, load_grid, Camera, DensityGrid, PhaseFunction, ProceduralSource, Sequence,
    MANIFEST_NAME,
};
use sixway_server::{Scene, SceneMode, SceneSettings, ServerConfig, SessionState};
use std::path::{Path, PathBuf};
use std::sync::Arc;

type Result<T> = std::result::Result<T, StageError>;

pub fn dispatch(command: &Command, cfg: &PipelineConfig) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a, cfg),
        Command::Bake(a) => bake(a, cfg),
        Command::Guide(a) => guide(a, cfg),
        Command::Infer(a) => infer(a, cfg),
        Command::Composite(a) => composite_cmd(a, cfg),
        Command::Dataset(a) => dataset(a, cfg),
        Command::Metrics(a) => metrics(a, cfg),
        Command::Bench(a) => bench(a, cfg),
        Command::PackAtlas(a) => pack_atlas(a, cfg),
        Command::Serve(a) => serve(a, cfg),
        Command::InitWeights(a) => init_weights(a, cfg),
    }
}

fn start(command: &str, args: &impl Serialize, cfg: &PipelineConfig, out: &Path) -> Result<RunManifest> {
    std::fs::create_dir_all(out).map_err(|e| StageError { stage: "output", message: format!("{}: {e}", out.display()) })?;
    Ok(RunManifest::new(command, config_hash(command, args, cfg)))
}

fn finish(m: &RunManifest, out: &Path) -> Result<()> {
    let path = m.write(out).map_err(stage("output"))?;
    log::info!("wrote {}", path.display());
    for f in &m.files {
        println!("{}", out.join(f).display());
    }
    Ok(())
}

/// Loads the density for `scene`, recording the input or procedural seed.
fn load_scene(scene: &SceneArgs, cfg: &PipelineConfig, m: &mut RunManifest) -> Result<DensityGrid> {
    let err = |m: String| StageError { stage: "load", message: m };
    match &scene.grid {
        Some(p) => {
            m.input(p);
            if p.extension().is_some_and(|e| e == "json") {
                let seq = Sequence::open(p).map_err(stage("load"))?;
                if scene.frame >= seq.len() {
                    return Err(err(format!("frame {} out of range, sequence has {}", scene.frame, seq.len())));
                }
                seq.load_frame(scene.frame).map_err(stage("load"))
            } else {
                load_grid(p).map_err(stage("load"))
            }
        }
        None => {
            let p = &cfg.procedural;
            m.seed("procedural", p.seed);
            let src = ProceduralSource::new(p.kind().map_err(stage("load"))?, p.seed, p.dims).map_err(stage("load"))?;
            src.frame(scene.frame).map_err(stage("load"))
        }
    }
}

fn phase(cfg: &PipelineConfig) -> Result<PhaseFunction> {
    PhaseFunction::new(cfg.phase_g).map_err(stage("config"))
}

fn camera(cfg: &PipelineConfig, grid: &DensityGrid) -> Result<Camera> {
    cfg.camera.resolve(&grid.bounds()).map_err(stage("camera"))
}

fn gen(a: &crate::GenArgs, cfg: &PipelineConfig) -> Result<()> {
    let mut m = start("gen", a, cfg, &a.out)?;
    let p = &cfg.procedural;
    let kind_name = a.kind.clone().unwrap_or_else(|| p.kind.clone());
    let kind = kind_name.parse().map_err(stage("gen"))?;
    let seed = a.seed.unwrap_or(p.seed);
    let dims = a.dims.map(|d| [d; 3]).unwrap_or(p.dims);
    let frames = a.frames.unwrap_or(p.frames);
    if frames == 0 {
        return Err(StageError { stage: "gen", message: "frame count must be at least 1".into() });
    }
    let manifest = generate_procedural(kind, seed, dims, frames, &a.out).map_err(stage("gen"))?;
    m.seed("procedural", seed);
    m.file(&a.out, &a.out.join(MANIFEST_NAME));
    for f in &manifest.frames {
        m.file(&a.out, &a.out.join(&f.path));
    }
    finish(&m, &a.out)
}

fn bake_config(cfg: &PipelineConfig, spp: Option<u32>) -> Result<BakeConfig> {
    let c = BakeConfig { spp: spp.unwrap_or(cfg.bake.spp), ..cfg.bake };
    c.validate().map_err(stage("config"))?;
    Ok(c)
}

/// Reference bake with the emissive plane, sRGB-encoded like the network
/// output.
pub fn bake_lightmaps(grid: &DensityGrid, cfg: &PipelineConfig, camera: &Camera, bake: &BakeConfig) -> Result<SixWayLightmaps> {
    let mut maps = bake_sixway(grid, &cfg.medium, &phase(cfg)?, camera, bake).map_err(stage("bake"))?;
    let step = cfg.emissive_step.unwrap_or(grid.voxel_width() * 0.5);
    *maps.plane_mut(Channel::Emissive) = bake_emissive(grid, &cfg.medium, camera, &cfg.lut, step).map_err(stage("emissive"))?;
    Ok(maps.to_srgb())
}

fn bake(a: &crate::BakeArgs, cfg: &PipelineConfig) -> Result<()> {
    let mut m = start("bake", a, cfg, &a.out)?;
    let grid = load_scene(&a.scene, cfg, &mut m)?;
    let camera = camera(cfg, &grid)?;
    let bc = bake_config(cfg, a.spp)?;
    m.seed("bake", bc.rng_seed);
    let maps = bake_lightmaps(&grid, cfg, &camera, &bc)?;
    let path = a.out.join("lightmaps.pfm");
    maps.write_pfm(&path).map_err(stage("bake"))?;
    m.file(&a.out, &path);
    finish(&m, &a.out)
}

fn guide(a: &crate::GuideArgs, cfg: &PipelineConfig) -> Result<()> {
    let mut m = start("guide", a, cfg, &a.out)?;
    let grid = load_scene(&a.scene, cfg, &mut m)?;
    let camera = camera(cfg, &grid)?;
    m.seed("guiding", cfg.guiding.jitter_seed);
    let map = generate_guiding(&grid, &cfg.medium, &phase(cfg)?, &camera, &cfg.guiding).map_err(stage("guide"))?;
    let path = a.out.join("guiding.pfm");
    map.write(&path).map_err(stage("guide"))?;
    m.file(&a.out, &path);
    m.file(&a.out, &GuidingMap::meta_path(&path));
    finish(&m, &a.out)
}

fn load_generator(weights: Option<&Path>, cfg: &PipelineConfig, stage_name: &'static str) -> Result<(Generator, PathBuf)> {
    let missing = |message: String| StageError { stage: stage_name, message };
    let path = weights
        .map(Path::to_path_buf)
        .or_else(|| cfg.weights.clone())
        .ok_or_else(|| missing("missing weights: pass --weights or set `weights` in the config".into()))?;
    if !path.is_file() {
        return Err(missing(format!("missing weights: {} does not exist", path.display())));
    }
    let store = WeightStore::load(&path).map_err(stage(stage_name))?;
    Ok((Generator::new(store).map_err(stage(stage_name))?, path))
}

fn infer(a: &crate::InferArgs, cfg: &PipelineConfig) -> Result<()> {
    let mut m = start("infer", a, cfg, &a.out)?;
    let (generator, wpath) = load_generator(a.weights.as_deref(), cfg, "infer")?;
    m.input(&wpath);
    m.input(&a.guiding);
    let guiding = GuidingMap::read(&a.guiding).map_err(stage("infer"))?;
    let maps = generator.forward(&guiding).map_err(stage("infer"))?;
    let path = a.out.join("lightmaps.pfm");
    maps.write_pfm(&path).map_err(stage("infer"))?;
    m.file(&a.out, &path);
    finish(&m, &a.out)
}

fn lights(specs: &[LightSpec], cfg: &PipelineConfig) -> Result<Vec<DirectionalLight>> {
    if specs.is_empty() {
        return cfg.lights().map_err(stage("composite"));
    }
    specs
        .iter()
        .map(|s| crate::config::LightConfig { dir: s.dir, rgb: s.rgb }.to_light().map_err(stage("composite")))
        .collect()
}

fn visibility(
    cfg: &PipelineConfig,
    lights: &[DirectionalLight],
    grid: &DensityGrid,
    depth: &ScalarMap,
    camera: &Camera,
) -> Result<Vec<ScalarMap>> {
    lights
        .iter()
        .map(|l| {
            let ctx = ShadowContext::new(l.direction, &grid.bounds(), &cfg.occluders, cfg.shadow.resolution, cfg.shadow.bias)
                .map_err(stage("shadow"))?;
            shadow_visibility(&ctx, depth, camera).map_err(stage("shadow"))
        })
        .collect()
}

fn composite_cmd(a: &crate::CompositeArgs, cfg: &PipelineConfig) -> Result<()> {
    let mut m = start("composite", a, cfg, &a.out)?;
    m.input(&a.lightmaps);
    let maps = SixWayLightmaps::read_pfm(&a.lightmaps, ColorSpace::Srgb).map_err(stage("composite"))?;
    let lights = lights(&a.lights, cfg)?;
    let vis = if cfg.occluders.is_empty() {
        None
    } else {
        let gpath = a.guiding.as_ref().ok_or_else(|| StageError {
            stage: "shadow",
            message: "occluders are configured but no --guiding map gives pixel depths".into(),
        })?;
        m.input(gpath);
        let guiding = GuidingMap::read(gpath).map_err(stage("shadow"))?;
        let grid = load_scene(&a.scene, cfg, &mut m)?;
        let camera = camera(cfg, &grid)?;
        Some(visibility(cfg, &lights, &grid, &guiding.depth, &camera)?)
    };
    let bg = Background::Constant(a.background.unwrap_or(cfg.background));
    let img = composite(&maps, &lights, &bg, &cfg.lut, vis.as_deref()).map_err(stage("composite"))?;
    let pfm = a.out.join("composite.pfm");
    rgb_to_pfm(&img).write(&pfm).map_err(stage("composite"))?;
    let png = a.out.join("composite.png");
    write_png(&img.to_srgb(), &png)?;
    m.file(&a.out, &pfm);
    m.file(&a.out, &png);
    finish(&m, &a.out)
}

fn write_png(img: &RgbImage, path: &Path) -> Result<()> {
    let bytes = encode_png(img).map_err(stage("output"))?;
    std::fs::write(path, bytes).map_err(|e| StageError { stage: "output", message: format!("{}: {e}", path.display()) })
}

fn dataset(a: &crate::DatasetArgs, cfg: &PipelineConfig) -> Result<()> {
    let mut m = start("dataset", a, cfg, &a.out)?;
    let manifest_path = match &a.sequence {
        Some(p) => {
            m.input(p);
            p.clone()
        }
        None => {
            let p = &cfg.procedural;
            let dir = a.out.join("sequence");
            let seq = generate_procedural(p.kind().map_err(stage("gen"))?, p.seed, p.dims, p.frames.max(1), &dir)
                .map_err(stage("gen"))?;
            m.seed("procedural", p.seed);
            m.file(&a.out, &dir.join(MANIFEST_NAME));
            for f in &seq.frames {
                m.file(&a.out, &dir.join(&f.path));
            }
            dir.join(MANIFEST_NAME)
        }
    };
    let sequence = Sequence::open(&manifest_path).map_err(stage("dataset"))?;
    let first = sequence.load_frame(0).map_err(stage("dataset"))?;
    let template = camera(cfg, &first)?;
    let count = a.cameras.unwrap_or(cfg.ring.count);
    let cameras =
        camera_ring(&template, first.bounds().center(), count, cfg.ring.start_yaw_deg, cfg.ring.step_deg).map_err(stage("camera"))?;
    let bc = bake_config(cfg, a.spp)?;
    m.seed("bake", bc.rng_seed);
    m.seed("guiding", cfg.guiding.jitter_seed);
    let out = bake_tuple(&sequence, &cfg.medium, &phase(cfg)?, &cameras, &bc, &cfg.guiding, &cfg.lut, &a.out)
        .map_err(stage("dataset"))?;
    for f in &out.files {
        m.file(&a.out, f);
    }
    log::info!("{} records in {}", out.index.records.len(), a.out.join(INDEX_NAME).display());
    finish(&m, &a.out)
}

fn image_files(p: &Path) -> Result<Vec<PathBuf>> {
    let err = stage("metrics");
    if p.is_file() {
        return Ok(vec![p.to_path_buf()]);
    }
    let entries: Vec<PathBuf> = std::fs::read_dir(p)
        .map_err(|e| err(format!("{}: {e}", p.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    let with_ext = |ext: &str| {
        let mut v: Vec<PathBuf> = entries.iter().filter(|f| f.extension().is_some_and(|x| x == ext)).cloned().collect();
        v.sort();
        v
    };
    let files = match with_ext("png") {
        v if v.is_empty() => with_ext("pfm"),
        v => v,
    };
    if files.is_empty() {
        return Err(err(format!("{}: no PNG or PFM images", p.display())));
    }
    Ok(files)
}

/// Display-referred image: PNGs as stored, RGB PFMs encoded from linear.
/// A directory contributes its PNGs, or its PFMs when it holds no PNG.
pub fn load_display_image(p: &Path) -> Result<RgbImage> {
    let err = |m: String| StageError { stage: "metrics", message: format!("{}: {m}", p.display()) };
    if p.extension().is_some_and(|x| x == "pfm") {
        let pfm = Pfm::read(p).map_err(|e| err(e.to_string()))?;
        Ok(pfm_to_rgb(&pfm).map_err(|e| err(e.to_string()))?.to_srgb())
    } else {
        let bytes = std::fs::read(p).map_err(|e| err(e.to_string()))?;
        decode_png(&bytes).map_err(|e| err(e.to_string()))
    }
}

fn metrics(a: &crate::MetricsArgs, cfg: &PipelineConfig) -> Result<()> {
    let mut m = start("metrics", a, cfg, &a.out)?;
    let (refs, tests) = (image_files(&a.reference)?, image_files(&a.test)?);
    if refs.len() != tests.len() {
        return Err(StageError { stage: "metrics", message: format!("{} reference images but {} test images", refs.len(), tests.len()) });
    }
    let load = |v: &[PathBuf]| v.iter().map(|p| load_display_image(p)).collect::<Result<Vec<_>>>();
    let (ri, ti) = (load(&refs)?, load(&tests)?);
    refs.iter().chain(&tests).for_each(|p| m.input(p));
    let report = MetricReport::from_pairs(ri.iter().zip(&ti)).map_err(stage("metrics"))?;
    let json = a.out.join("metrics.json");
    let csv = a.out.join("metrics.csv");
    let write = |p: &Path, s: String| std::fs::write(p, s).map_err(|e| StageError { stage: "output", message: format!("{}: {e}", p.display()) });
    write(&json, serde_json::to_string_pretty(&report).expect("report serializes") + "\n")?;
    write(&csv, report.to_csv())?;
    eprintln!("PSNR avg {:.2} dB (min {:.2}, max {:.2}), MSE avg {:.6}", report.psnr.avg, report.psnr.min, report.psnr.max, report.mse.avg);
    m.file(&a.out, &json);
    m.file(&a.out, &csv);
    finish(&m, &a.out)
}

fn bench(a: &crate::BenchArgs, cfg: &PipelineConfig) -> Result<()> {
    let mut m = start("bench", a, cfg, &a.out)?;
    let grid = load_scene(&a.scene, cfg, &mut m)?;
    let camera = camera(cfg, &grid)?;
    let phase = phase(cfg)?;
    let generator = match &a.weights {
        Some(w) => load_generator(Some(w), cfg, "bench")?.0,
        None => {
            m.seed("weights", 0);
            Generator::new(WeightStore::random(&NetArchitecture::default(), 0)).map_err(stage("bench"))?
        }
    };
    let lights = cfg.lights().map_err(stage("bench"))?;
    let guiding = generate_guiding(&grid, &cfg.medium, &phase, &camera, &cfg.guiding).map_err(stage("bench"))?;
    let maps = generator.forward(&guiding).map_err(stage("bench"))?;
    let bg = Background::Constant(cfg.background);
    let bc = bake_config(cfg, None)?;

    let mut stages: Vec<BenchStage<'_>> = vec![
        ("guiding", Box::new(|| drop(generate_guiding(&grid, &cfg.medium, &phase, &camera, &cfg.guiding)))),
        ("inference", Box::new(|| drop(generator.forward(&guiding)))),
    ];
    if !cfg.occluders.is_empty() {
        stages.push(("shadow", Box::new(|| drop(visibility(cfg, &lights, &grid, &guiding.depth, &camera)))));
    }
    stages.push(("composite", Box::new(|| drop(composite(&maps, &lights, &bg, &cfg.lut, None)))));
    if a.with_bake {
        m.seed("bake", bc.rng_seed);
        stages.push(("reference_bake", Box::new(|| drop(bake_sixway(&grid, &cfg.medium, &phase, &camera, &bc)))));
    }
    let machine = format!("{} {}, {} threads", std::env::consts::OS, std::env::consts::ARCH, rayon::current_num_threads());
    let report = run_bench(stages, &cfg.bench, [camera.width, camera.height], &machine).map_err(stage("bench"))?;
    for s in &report.stages {
        eprintln!("{:<16} median {:>10.3} ms  p95 {:>10.3} ms", s.stage, s.median_ms, s.p95_ms);
    }
    let path = a.out.join("bench.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report).expect("report serializes") + "\n").map_err(stage("output"))?;
    m.file(&a.out, &path);
    finish(&m, &a.out)
}

fn pack_atlas(a: &crate::PackAtlasArgs, cfg: &PipelineConfig) -> Result<()> {
    let mut m = start("pack-atlas", a, cfg, &a.out)?;
    let frames = a
        .lightmaps
        .iter()
        .map(|p| {
            m.input(p);
            SixWayLightmaps::read_pfm(p, ColorSpace::Srgb).map(|maps| pack_textures(&maps))
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(stage("pack-atlas"))?;
    let atlas = pack_flipbook(&frames).map_err(stage("pack-atlas"))?;
    for f in export_textures(&atlas.textures, &a.out, "atlas").map_err(stage("pack-atlas"))? {
        m.file(&a.out, &f);
    }
    let layout = a.out.join("atlas_layout.json");
    std::fs::write(&layout, serde_json::to_string_pretty(&atlas.layout).expect("layout serializes") + "\n").map_err(stage("output"))?;
    m.file(&a.out, &layout);
    finish(&m, &a.out)
}

fn serve(a: &crate::ServeArgs, cfg: &PipelineConfig) -> Result<()> {
    let mut m = start("serve", a, cfg, &a.out)?;
    let (mode, bounds) = if !a.baked.is_empty() {
        let frames = a
            .baked
            .iter()
            .map(|p| {
                m.input(p);
                SixWayLightmaps::read_pfm(p, ColorSpace::Srgb)
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(stage("serve"))?;
        (SceneMode::Baked { frames }, None)
    } else {
        let frames = match &a.scene {
            Some(p) if p.extension().is_some_and(|e| e == "json") => {
                m.input(p);
                Sequence::open(p).and_then(|s| s.load_all()).map_err(stage("serve"))?
            }
            Some(p) => {
                m.input(p);
                vec![load_grid(p).map_err(stage("serve"))?]
            }
            None => {
                let p = &cfg.procedural;
                m.seed("procedural", p.seed);
                ProceduralSource::new(p.kind().map_err(stage("serve"))?, p.seed, p.dims)
                    .map_err(stage("serve"))?
                    .frames(p.frames.max(1))
                    .map_err(stage("serve"))?
            }
        };
        let (generator, wpath) = load_generator(a.weights.as_deref(), cfg, "serve")?;
        m.input(&wpath);
        let bounds = frames[0].bounds();
        (SceneMode::Neural { frames, generator }, Some(bounds))
    };

    let mut initial = SessionState { lights: Vec::new(), ..SessionState::default() };
    for l in cfg.lights().map_err(stage("serve"))? {
        initial.lights.push(sixway_server::LightState { dir: l.direction.to_array(), rgb: l.radiance });
    }
    initial.resolution = a.resolution.unwrap_or(cfg.camera.width);
    let mut settings = SceneSettings {
        medium: cfg.medium,
        phase_g: cfg.phase_g,
        guiding: cfg.guiding,
        background: cfg.background,
        lut: cfg.lut.clone(),
        occluders: cfg.occluders.clone(),
        shadow_resolution: cfg.shadow.resolution,
        shadow_bias: cfg.shadow.bias,
        ..SceneSettings::default()
    };
    if let Some(b) = bounds {
        let radius = b.diagonal() * 0.5;
        initial.target = b.center().to_array();
        initial.distance = cfg.camera.distance.unwrap_or(3.0 * radius);
        settings.near = 0.0;
        settings.far = initial.distance + 2.0 * radius;
    }
    let scene = Arc::new(Scene { mode, settings });
    let addr: std::net::SocketAddr = format!("{}:{}", a.host, a.port).parse().map_err(stage("serve"))?;
    finish(&m, &a.out)?;

    let runtime = tokio::runtime::Runtime::new().map_err(stage("serve"))?;
    let config = ServerConfig { static_dir: a.static_dir.clone(), initial, ..ServerConfig::default() };
    eprintln!("serving on http://{addr}");
    runtime.block_on(sixway_server::serve(addr, scene, config)).map_err(stage("serve"))
}

fn init_weights(a: &crate::InitWeightsArgs, cfg: &PipelineConfig) -> Result<()> {
    let mut m = start("init-weights", a, cfg, &a.out)?;
    let arch = match a.arch {
        ArchChoice::Default => NetArchitecture::default(),
        ArchChoice::Tiny => NetArchitecture::tiny(),
    };
    let store = if a.zeros {
        WeightStore::zeros(&arch)
    } else {
        m.seed("weights", a.seed);
        WeightStore::random(&arch, a.seed)
    };
    let path = a.out.join("weights.nsw");
    store.save(&path).map_err(stage("init-weights"))?;
    m.file(&a.out, &path);
    finish(&m, &a.out)
}
