//! End-to-end bake: load → render → segment → bake → fuse → unify → export.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use glam::DVec3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::asset_io::{encode_gray_png, encode_rgba_png, write_atomic, Asset, AssetError};
use crate::fixtures::table_palette;
use crate::fusion::{
    accumulate, region_unify_with_stats, vote, FusionConfig, FusionError, UnifyStats, VoteHistogram,
};
use crate::material_pbr::{emit_pbr, render_preview, Light, MaterialTable, PbrError, PbrMaps};
use crate::multiview::{build_schedule_with, render_view, CameraPose, ViewDefaults, ViewSchedule};
use crate::seg_backend::{
    segment, DirectoryBackend, OracleBackend, OraclePalette, SegError, SegmentationBackend,
    BACKGROUND,
};
use crate::uv_bake::{
    bake_view, rasterize_uv, BakeError, LabelUV, TexelSampleTable, MAX_UV_RESOLUTION,
    MIN_UV_RESOLUTION,
};

pub const MANIFEST_VERSION: u32 = 1;

/// Where per-view labels come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendSpec {
    Http {
        endpoint: String,
        #[serde(default = "default_retries")]
        max_retries: u32,
        #[serde(default = "default_in_flight")]
        max_in_flight: usize,
    },
    Dir {
        labels_dir: PathBuf,
    },
    /// Nearest-color classification of the render. Without a palette file
    /// the material table's display colors are used.
    Oracle {
        #[serde(default)]
        palette: Option<PathBuf>,
    },
}

fn default_retries() -> u32 {
    3
}

fn default_in_flight() -> usize {
    4
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::Oracle { palette: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub asset: PathBuf,
    /// Albedo PNG; looked up through the OBJ material library when absent.
    pub albedo: Option<PathBuf>,
    pub seed: u64,
    pub render_res: u32,
    pub uv_res: u32,
    /// Rotate a Y-up asset into the Z-up frame used by the camera schedule.
    pub y_up: bool,
    pub backend: BackendSpec,
    pub fusion: FusionConfig,
    pub material_table: Option<PathBuf>,
    pub out: PathBuf,
    pub debug_dump: bool,
    pub previews: bool,
    /// Worker threads; `None` lets the pool decide.
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            asset: PathBuf::new(),
            albedo: None,
            seed: 0,
            render_res: 1024,
            uv_res: 1024,
            y_up: false,
            backend: BackendSpec::default(),
            fusion: FusionConfig::default(),
            material_table: None,
            out: PathBuf::from("out"),
            debug_dump: false,
            previews: true,
            threads: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, r) in [("render_res", self.render_res), ("uv_res", self.uv_res)] {
            if !r.is_power_of_two() || !(MIN_UV_RESOLUTION..=MAX_UV_RESOLUTION).contains(&r) {
                return Err(format!("{name} {r} must be a power of two in [64, 8192]"));
            }
        }
        if self.threads == Some(0) {
            return Err("threads must be at least 1".into());
        }
        self.fusion.validate().map_err(|e| e.to_string())
    }

    /// SHA-256 over the canonical JSON form, ignoring the thread cap (which
    /// does not affect results).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.threads = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Render,
    Segment,
    Bake,
    Fuse,
    Unify,
    Export,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Render => "render",
            Stage::Segment => "segment",
            Stage::Bake => "bake",
            Stage::Fuse => "fuse",
            Stage::Unify => "unify",
            Stage::Export => "export",
        })
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error(transparent)]
    Seg(#[from] SegError),
    #[error(transparent)]
    Bake(#[from] BakeError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Pbr(#[from] PbrError),
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

impl PipelineError {
    fn at(stage: Stage) -> impl Fn(StageError) -> PipelineError {
        move |source| PipelineError { stage, source }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<StageError>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::at(stage)(e.into()))
    }
}

/// Everything an in-memory bake produces.
pub struct BakeResult {
    pub texels: TexelSampleTable,
    pub stack: Vec<LabelUV>,
    pub histogram: VoteHistogram,
    /// Vote winner before unification.
    pub voted: LabelUV,
    pub fused: LabelUV,
    pub unify: UnifyStats,
    pub pbr: PbrMaps,
    pub timings: Vec<(Stage, f64)>,
}

/// Bake a normalized asset with an already constructed backend. Runs on the
/// current rayon pool; per-view debug images go to `dump` when given.
pub fn bake_asset(
    asset: &Asset,
    schedule: &ViewSchedule,
    uv_res: u32,
    fusion: &FusionConfig,
    table: &MaterialTable,
    backend: &dyn SegmentationBackend,
    dump: Option<&Path>,
) -> Result<BakeResult, PipelineError> {
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: Stage, timings: &mut Vec<(Stage, f64)>| {
        timings.push((stage, clock.elapsed().as_secs_f64() * 1e3));
        clock = Instant::now();
    };

    let texels = rasterize_uv(&asset.mesh, uv_res).at(Stage::Bake)?;
    let palette = table.palette();
    let results = par_map(schedule.len(), |view| {
        let pose = &schedule.poses[view];
        let (image, gbuffer) = render_view(asset, pose);
        if let Some(dir) = dump {
            write_atomic(
                &dir.join(format!("view_{view:03}.png")),
                &encode_rgba_png(&image),
            )
            .at(Stage::Render)?;
            write_atomic(
                &dir.join(format!("depth_{view:03}.png")),
                &gbuffer.depth_png16(pose.radius + 1.0),
            )
            .at(Stage::Render)?;
        }
        let labels = segment(backend, view, &image).at(Stage::Segment)?;
        let baked = bake_view(&texels, &gbuffer, &labels, pose, view).at(Stage::Bake)?;
        if let Some(dir) = dump {
            write_atomic(&dir.join(format!("labels_{view:03}.png")), &labels.to_png())
                .at(Stage::Segment)?;
            write_atomic(
                &dir.join(format!("bake_{view:03}.png")),
                &baked.to_png(&palette),
            )
            .at(Stage::Bake)?;
        }
        Ok(baked)
    });
    let stack = results
        .into_iter()
        .collect::<Result<Vec<_>, PipelineError>>()?;
    lap(Stage::Bake, &mut timings);

    let histogram = accumulate(&stack, schedule, fusion).at(Stage::Fuse)?;
    let voted = vote(&histogram);
    if let Some(dir) = dump {
        write_atomic(&dir.join("votes.bin"), &histogram.dump_bytes()).at(Stage::Fuse)?;
        write_atomic(&dir.join("voted_labels.png"), &voted.to_png(&palette)).at(Stage::Fuse)?;
    }
    lap(Stage::Fuse, &mut timings);

    let (fused, unify) =
        region_unify_with_stats(&voted, &texels, &asset.mesh, fusion).at(Stage::Unify)?;
    lap(Stage::Unify, &mut timings);

    let pbr = emit_pbr(&fused, table);
    lap(Stage::Export, &mut timings);
    Ok(BakeResult {
        texels,
        stack,
        histogram,
        voted,
        fused,
        unify,
        pbr,
        timings,
    })
}

fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub asset: String,
    pub seed: u64,
    pub config_hash: String,
    pub backend: String,
    pub views: usize,
    pub render_res: u32,
    pub uv_res: u32,
    pub alpha: f64,
    pub threads: Option<usize>,
    pub retry_count: usize,
    pub degenerate_faces_dropped: usize,
    pub uv_overlap_texels: usize,
    pub assigned_texels: usize,
    /// Assigned texels that no view labelled.
    pub unvoted_texels: usize,
    /// Surface texels left without a label after unification.
    pub unassigned_texels: usize,
    pub holes_filled: usize,
    pub regions: usize,
    pub regions_absorbed: usize,
    pub timings_ms: Vec<(String, f64)>,
    pub outputs: Vec<String>,
}

pub struct BakeReport {
    pub manifest: Manifest,
    pub result: BakeResult,
}

pub fn make_backend(
    spec: &BackendSpec,
    table: &MaterialTable,
) -> Result<Box<dyn SegmentationBackend>, StageError> {
    Ok(match spec {
        #[cfg(feature = "http")]
        BackendSpec::Http {
            endpoint,
            max_retries,
            max_in_flight,
        } => {
            use crate::seg_backend::{HttpBackend, RetryPolicy};
            let retry = RetryPolicy {
                max_retries: *max_retries,
                ..RetryPolicy::default()
            };
            Box::new(HttpBackend::new(endpoint, retry, (*max_in_flight).max(1)))
        }
        #[cfg(not(feature = "http"))]
        BackendSpec::Http { .. } => {
            return Err(StageError::Config("built without HTTP support".into()));
        }
        BackendSpec::Dir { labels_dir } => Box::new(DirectoryBackend::new(labels_dir)),
        BackendSpec::Oracle { palette } => {
            let palette = match palette {
                Some(p) => OraclePalette::load(p).map_err(StageError::Config)?,
                None => table_palette(table),
            };
            Box::new(OracleBackend::new(palette))
        }
    })
}

/// Rotate a Y-up mesh so that its up axis becomes +Z.
fn y_up_to_z_up(p: DVec3) -> DVec3 {
    DVec3::new(p.x, -p.z, p.y)
}

pub fn load_asset(cfg: &PipelineConfig) -> Result<(Asset, usize), PipelineError> {
    let (mut asset, loaded) = Asset::load(&cfg.asset, cfg.albedo.as_deref()).at(Stage::Load)?;
    if cfg.y_up {
        asset.mesh = asset.mesh.map_positions(y_up_to_z_up);
    }
    Ok((
        asset.normalized().at(Stage::Load)?,
        loaded.degenerate_dropped,
    ))
}

pub fn load_table(path: Option<&Path>) -> Result<MaterialTable, PipelineError> {
    match path {
        Some(p) => MaterialTable::load(p).at(Stage::Load),
        None => Ok(MaterialTable::default()),
    }
}

/// Full bake with files in and out.
pub fn run_bake(cfg: &PipelineConfig) -> Result<BakeReport, PipelineError> {
    cfg.validate()
        .map_err(StageError::Config)
        .at(Stage::Config)?;
    let start = Instant::now();
    let (asset, degenerate) = load_asset(cfg)?;
    let table = load_table(cfg.material_table.as_deref())?;
    let backend = make_backend(&cfg.backend, &table).at(Stage::Config)?;
    let load_ms = start.elapsed().as_secs_f64() * 1e3;

    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| AssetError::io(&cfg.out, e))
        .at(Stage::Export)?;
    let dump_dir = cfg.out.join("debug");
    if cfg.debug_dump {
        std::fs::create_dir_all(&dump_dir)
            .map_err(|e| AssetError::io(&dump_dir, e))
            .at(Stage::Export)?;
    }
    let defaults = ViewDefaults::with_resolution(cfg.render_res);
    let schedule = build_schedule_with(cfg.seed, &defaults);

    let run = || -> Result<(BakeResult, Vec<String>, f64), PipelineError> {
        let result = bake_asset(
            &asset,
            &schedule,
            cfg.uv_res,
            &cfg.fusion,
            &table,
            backend.as_ref(),
            cfg.debug_dump.then_some(dump_dir.as_path()),
        )?;
        let clock = Instant::now();
        let outputs = write_outputs(cfg, &asset, &schedule, &result.pbr)?;
        Ok((result, outputs, clock.elapsed().as_secs_f64() * 1e3))
    };
    let (result, outputs, write_ms) = with_threads(cfg.threads, run).at(Stage::Config)??;

    let mut timings_ms = vec![("load".to_string(), load_ms)];
    timings_ms.extend(result.timings.iter().map(|(s, t)| (s.to_string(), *t)));
    timings_ms.push(("write".to_string(), write_ms));
    let unvoted = (0..result.texels.len())
        .filter(|&t| result.texels.is_assigned(t) && result.histogram.total(t) == 0.0)
        .count();
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        asset: cfg.asset.display().to_string(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        backend: backend.name().to_string(),
        views: schedule.len(),
        render_res: cfg.render_res,
        uv_res: cfg.uv_res,
        alpha: cfg.fusion.alpha,
        threads: cfg.threads,
        retry_count: backend.retry_count(),
        degenerate_faces_dropped: degenerate,
        uv_overlap_texels: result.texels.overlap_texels,
        assigned_texels: result.texels.assigned_count(),
        unvoted_texels: unvoted,
        unassigned_texels: (0..result.texels.len())
            .filter(|&t| result.texels.is_assigned(t) && result.fused.labels[t] == BACKGROUND)
            .count(),
        holes_filled: result.unify.holes_filled,
        regions: result.unify.regions,
        regions_absorbed: result.unify.regions_absorbed,
        timings_ms,
        outputs,
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_atomic(&cfg.out.join("manifest.json"), &json).at(Stage::Export)?;
    Ok(BakeReport { manifest, result })
}

#[derive(Debug, Error)]
#[error("could not build thread pool: {0}")]
struct PoolError(String);

impl From<PoolError> for StageError {
    fn from(e: PoolError) -> Self {
        StageError::Config(e.0)
    }
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, PoolError> {
    #[cfg(feature = "parallel")]
    {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| PoolError(e.to_string()))?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(f())
    }
}

/// Poses used for relit previews: the manual inspection views.
pub fn preview_poses(schedule: &ViewSchedule) -> Vec<CameraPose> {
    schedule
        .poses
        .iter()
        .filter(|p| p.manual)
        .copied()
        .collect()
}

fn write_outputs(
    cfg: &PipelineConfig,
    asset: &Asset,
    schedule: &ViewSchedule,
    pbr: &PbrMaps,
) -> Result<Vec<String>, PipelineError> {
    let res = pbr.resolution;
    let mut files = vec![
        ("material_labels.png".to_string(), pbr.label_png()),
        (
            "metallic.png".to_string(),
            encode_gray_png(res, res, &pbr.metallic.data),
        ),
        (
            "roughness.png".to_string(),
            encode_gray_png(res, res, &pbr.roughness.data),
        ),
    ];
    if cfg.previews {
        let poses = preview_poses(schedule);
        let light = Light::default();
        let images = par_map(poses.len(), |i| {
            render_preview(asset, pbr, &poses[i], &light)
        });
        for (pose, image) in poses.iter().zip(images) {
            files.push((
                format!("preview_{}.png", pose.tag()),
                encode_rgba_png(&image),
            ));
        }
    }
    for (name, bytes) in &files {
        write_atomic(&cfg.out.join(name), bytes).at(Stage::Export)?;
    }
    Ok(files.into_iter().map(|(n, _)| n).collect())
}
