use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use matbake::asset_io::{
    decode_label_png, load_texture, write_atomic, write_image, AssetError, GrayImage,
};
use matbake::material_pbr::{render_preview, Light, PbrMaps};
use matbake::metrics::{miou_labels, psnr, ssim, IoUReport};
use matbake::multiview::{build_schedule_with, ViewDefaults};
use matbake::pipeline::{load_asset, run_bake, BackendSpec, PipelineConfig};

use crate::exit::usage;
use crate::{BackendKind, BakeArgs, EvalArgs, PreviewArgs, ScheduleArgs};

pub fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got `{s}`"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
    }
    Ok(v)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    Ok(fs::read(path).map_err(|e| AssetError::io(path, e))?)
}

fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = fs::read_to_string(path).map_err(|e| AssetError::io(path, e))?;
    let mut cfg =
        PipelineConfig::from_toml(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    // Input paths in a config file are relative to the file.
    let base = path.parent().unwrap_or(Path::new(""));
    let rebase = |p: &mut PathBuf| {
        if p.is_relative() && !p.as_os_str().is_empty() {
            *p = base.join(&*p);
        }
    };
    rebase(&mut cfg.asset);
    if let Some(p) = cfg.albedo.as_mut() {
        rebase(p);
    }
    if let Some(p) = cfg.material_table.as_mut() {
        rebase(p);
    }
    match &mut cfg.backend {
        BackendSpec::Dir { labels_dir } => rebase(labels_dir),
        BackendSpec::Oracle { palette: Some(p) } => rebase(p),
        _ => {}
    }
    Ok(cfg)
}

fn resolve_backend(a: &BakeArgs, current: &BackendSpec) -> Result<BackendSpec> {
    let given: Vec<BackendKind> = [
        (a.endpoint.is_some(), BackendKind::Http),
        (a.labels_dir.is_some(), BackendKind::Dir),
        (a.palette.is_some(), BackendKind::Oracle),
    ]
    .into_iter()
    .filter_map(|(set, kind)| set.then_some(kind))
    .collect();
    let kind = match (a.backend, given.as_slice()) {
        (None, []) => return Ok(current.clone()),
        (None, [k]) => *k,
        (None, _) => {
            return Err(usage(
                "--endpoint, --labels-dir and --palette select different backends",
            ))
        }
        (Some(k), _) => {
            if let Some(other) = given.iter().find(|&&g| g != k) {
                return Err(usage(format!(
                    "{} does not apply to --backend {}",
                    flag_for(*other),
                    name_of(k)
                )));
            }
            k
        }
    };
    Ok(match (kind, current) {
        (BackendKind::Http, current) => {
            let (retries, in_flight, old) = match current {
                BackendSpec::Http {
                    endpoint,
                    max_retries,
                    max_in_flight,
                } => (*max_retries, *max_in_flight, Some(endpoint.clone())),
                _ => (3, 4, None),
            };
            let endpoint = a
                .endpoint
                .clone()
                .or(old)
                .ok_or_else(|| usage("--backend http needs --endpoint"))?;
            BackendSpec::Http {
                endpoint,
                max_retries: retries,
                max_in_flight: in_flight,
            }
        }
        (BackendKind::Dir, current) => {
            let old = match current {
                BackendSpec::Dir { labels_dir } => Some(labels_dir.clone()),
                _ => None,
            };
            BackendSpec::Dir {
                labels_dir: a
                    .labels_dir
                    .clone()
                    .or(old)
                    .ok_or_else(|| usage("--backend dir needs --labels-dir"))?,
            }
        }
        (BackendKind::Oracle, current) => {
            let old = match current {
                BackendSpec::Oracle { palette } => palette.clone(),
                _ => None,
            };
            BackendSpec::Oracle {
                palette: a.palette.clone().or(old),
            }
        }
    })
}

fn flag_for(kind: BackendKind) -> &'static str {
    match kind {
        BackendKind::Http => "--endpoint",
        BackendKind::Dir => "--labels-dir",
        BackendKind::Oracle => "--palette",
    }
}

fn name_of(kind: BackendKind) -> &'static str {
    match kind {
        BackendKind::Http => "http",
        BackendKind::Dir => "dir",
        BackendKind::Oracle => "oracle",
    }
}

/// Config file first, then flags on top.
fn build_config(a: &BakeArgs) -> Result<PipelineConfig> {
    let mut cfg = match &a.config {
        Some(p) => load_config(p)?,
        None => PipelineConfig::default(),
    };
    cfg.backend = resolve_backend(a, &cfg.backend)?;
    if let Some(p) = &a.asset {
        cfg.asset = p.clone();
    }
    if let Some(p) = &a.albedo {
        cfg.albedo = Some(p.clone());
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.render_res {
        cfg.render_res = v;
    }
    if let Some(v) = a.uv_res {
        cfg.uv_res = v;
    }
    if let Some(v) = a.alpha {
        cfg.fusion.alpha = v;
    }
    if let Some(p) = &a.material_table {
        cfg.material_table = Some(p.clone());
    }
    if let Some(p) = &a.out {
        cfg.out = p.clone();
    }
    if let Some(n) = a.threads {
        cfg.threads = Some(n);
    }
    cfg.debug_dump |= a.debug_dump;
    cfg.y_up |= a.y_up;
    if a.no_previews {
        cfg.previews = false;
    }
    if cfg.asset.as_os_str().is_empty() {
        return Err(usage(
            "no asset given; use --asset or set `asset` in the config",
        ));
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

pub fn bake(a: BakeArgs) -> Result<()> {
    let cfg = build_config(&a)?;
    log::info!("config hash {}", cfg.hash());
    let report = run_bake(&cfg)?;
    let m = &report.manifest;
    println!(
        "wrote {} files to {}",
        m.outputs.len() + 1,
        cfg.out.display()
    );
    println!(
        "views {}  backend {}  retries {}  texels {}  unvoted {}  unassigned {}",
        m.views, m.backend, m.retry_count, m.assigned_texels, m.unvoted_texels, m.unassigned_texels
    );
    let total: f64 = m.timings_ms.iter().map(|(_, t)| t).sum();
    println!("time {:.0} ms", total);
    Ok(())
}

pub fn schedule(a: ScheduleArgs) -> Result<()> {
    let seed = a.seed.or(a.seed_flag).unwrap_or(0);
    let schedule = build_schedule_with(seed, &ViewDefaults::with_resolution(a.render_res));
    let text = if a.json {
        serde_json::to_string_pretty(&schedule)? + "\n"
    } else {
        schedule
            .poses
            .iter()
            .enumerate()
            .map(|(i, p)| {
                format!(
                    "{i:2}  elevation {:9.4}  azimuth {:5.1}  {}\n",
                    p.elevation,
                    p.azimuth,
                    if p.manual { "manual" } else { "auto" }
                )
            })
            .collect()
    };
    match std::io::stdout().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn print_iou(report: &IoUReport) {
    println!(
        "{:<12} {:>3} {:>8} {:>10} {:>10}",
        "class", "id", "IoU", "gt", "pred"
    );
    for c in &report.classes {
        println!(
            "{:<12} {:>3} {:>8.4} {:>10} {:>10}",
            c.class, c.id, c.iou, c.gt_count, c.pred_count
        );
    }
    println!(
        "mIoU {:.4} over {} texels",
        report.mean_iou, report.evaluated_texels
    );
}

pub fn eval(a: EvalArgs) -> Result<()> {
    if a.render.len() != a.reference.len() {
        return Err(usage(format!(
            "{} --render but {} --reference",
            a.render.len(),
            a.reference.len()
        )));
    }
    if a.pred.is_none() && a.render.is_empty() {
        return Err(usage(
            "nothing to evaluate; give --pred/--gt or --render/--reference",
        ));
    }
    let mut out = serde_json::Map::new();
    if let (Some(pred), Some(gt)) = (&a.pred, &a.gt) {
        let (pw, ph, p) =
            decode_label_png(&read(pred)?).with_context(|| pred.display().to_string())?;
        let (gw, gh, g) = decode_label_png(&read(gt)?).with_context(|| gt.display().to_string())?;
        if (pw, ph) != (gw, gh) {
            return Err(matbake::metrics::MetricError::ShapeMismatch(format!(
                "pred {pw}x{ph} vs gt {gw}x{gh}"
            ))
            .into());
        }
        let report = miou_labels(&p, &g)?;
        print_iou(&report);
        out.insert("miou".into(), serde_json::to_value(&report)?);
    }
    let mut renders = Vec::new();
    for (r, f) in a.render.iter().zip(&a.reference) {
        let (x, y) = (load_texture(r)?, load_texture(f)?);
        let (p, s) = (psnr(&x, &y)?, ssim(&x, &y)?);
        println!(
            "{} vs {}: PSNR {:.2} dB  SSIM {:.4}",
            r.display(),
            f.display(),
            p,
            s
        );
        renders.push(json!({
            "render": r.display().to_string(),
            "reference": f.display().to_string(),
            "psnr": p,
            "ssim": s,
        }));
    }
    if renders.len() > 1 {
        let n = renders.len() as f64;
        let mean = |k: &str| {
            renders
                .iter()
                .map(|r| r[k].as_f64().unwrap_or(f64::INFINITY))
                .sum::<f64>()
                / n
        };
        let (mp, ms) = (mean("psnr"), mean("ssim"));
        println!("mean: PSNR {mp:.2} dB  SSIM {ms:.4}");
        out.insert("mean_psnr".into(), json!(mp));
        out.insert("mean_ssim".into(), json!(ms));
    }
    if !renders.is_empty() {
        out.insert("renders".into(), renders.into());
    }
    if let Some(path) = &a.json {
        let text = serde_json::to_vec_pretty(&serde_json::Value::Object(out))?;
        write_atomic(path, &text)?;
    }
    Ok(())
}

fn load_gray(path: &Path) -> Result<GrayImage> {
    let (width, height, data) =
        decode_label_png(&read(path)?).with_context(|| path.display().to_string())?;
    Ok(GrayImage {
        width,
        height,
        data,
    })
}

pub fn preview(a: PreviewArgs) -> Result<()> {
    let metallic = load_gray(&a.pbr.join("metallic.png"))?;
    let roughness = load_gray(&a.pbr.join("roughness.png"))?;
    let maps = PbrMaps::from_maps(metallic, roughness)?;
    let cfg = PipelineConfig {
        asset: a.asset.clone(),
        albedo: a.albedo.clone(),
        y_up: a.y_up,
        ..Default::default()
    };
    let (asset, _) = load_asset(&cfg)?;
    if a.res == 0 || a.res > 8192 {
        return Err(usage(format!("--res {} outside [1, 8192]", a.res)));
    }
    let pose = ViewDefaults::with_resolution(a.res).pose(a.elevation, a.azimuth, false);
    pose.validate().map_err(usage)?;
    let mut light = Light::default();
    if let Some(d) = a.light_dir {
        let d = glam_dir(d).ok_or_else(|| usage("--light-dir must be non-zero"))?;
        light.direction = d;
    }
    if let Some(i) = a.intensity {
        light.intensity = [i; 3];
    }
    if let Some(v) = a.ambient {
        light.ambient = v;
    }
    let image = render_preview(&asset, &maps, &pose, &light);
    write_image(&image, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn glam_dir(v: [f64; 3]) -> Option<matbake::glam::DVec3> {
    matbake::glam::DVec3::from_array(v).try_normalize()
}
