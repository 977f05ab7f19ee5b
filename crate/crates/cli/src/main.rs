//! `matbake` command line.

mod commands;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "matbake",
    version,
    about = "Bake PBR metallic/roughness maps for albedo-only assets"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write label, metallic and roughness maps.
    Bake(BakeArgs),
    /// Print the 41 camera poses for a seed.
    Schedule(ScheduleArgs),
    /// Compare label maps (mIoU) and renders (PSNR, SSIM).
    Eval(EvalArgs),
    /// Render a relit preview from baked maps.
    Preview(PreviewArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Http,
    Dir,
    Oracle,
}

#[derive(Args)]
struct BakeArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// OBJ mesh with UVs.
    #[arg(long)]
    asset: Option<PathBuf>,
    /// Albedo PNG (default: from the OBJ material library).
    #[arg(long)]
    albedo: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Base URL of the segmentation service.
    #[arg(long)]
    endpoint: Option<String>,
    /// Directory with labels_NNN.png per view.
    #[arg(long)]
    labels_dir: Option<PathBuf>,
    /// Oracle palette TOML (default: material table display colors).
    #[arg(long)]
    palette: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    render_res: Option<u32>,
    #[arg(long)]
    uv_res: Option<u32>,
    /// Vote weight of the manual views.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    material_table: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, env = "MATBAKE_THREADS")]
    threads: Option<usize>,
    /// Keep per-view renders, labels and vote counts under OUT/debug.
    #[arg(long)]
    debug_dump: bool,
    /// The asset is Y-up; rotate it to Z-up before rendering.
    #[arg(long)]
    y_up: bool,
    /// Skip the relit preview images.
    #[arg(long)]
    no_previews: bool,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(conflicts_with = "seed_flag")]
    seed: Option<u64>,
    #[arg(long = "seed", id = "seed_flag")]
    seed_flag: Option<u64>,
    /// Image size written into each pose.
    #[arg(long, default_value_t = 1024)]
    render_res: u32,
    /// Print JSON instead of one line per pose.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted label PNG.
    #[arg(long, requires = "gt")]
    pred: Option<PathBuf>,
    /// Ground-truth label PNG.
    #[arg(long, requires = "pred")]
    gt: Option<PathBuf>,
    /// Rendered image; pairs with the --reference at the same position.
    #[arg(long)]
    render: Vec<PathBuf>,
    #[arg(long)]
    reference: Vec<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct PreviewArgs {
    #[arg(long)]
    asset: PathBuf,
    #[arg(long)]
    albedo: Option<PathBuf>,
    /// Directory holding metallic.png and roughness.png.
    #[arg(long)]
    pbr: PathBuf,
    #[arg(long, default_value_t = 15.0, allow_negative_numbers = true)]
    elevation: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    azimuth: f64,
    #[arg(long, default_value_t = 512)]
    res: u32,
    /// Direction the light travels, as x,y,z.
    #[arg(long, value_parser = commands::parse_vec3, allow_negative_numbers = true)]
    light_dir: Option<[f64; 3]>,
    #[arg(long)]
    intensity: Option<f64>,
    #[arg(long)]
    ambient: Option<f64>,
    #[arg(long)]
    y_up: bool,
    #[arg(long, default_value = "preview.png")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Bake(a) => commands::bake(a),
        Command::Schedule(a) => commands::schedule(a),
        Command::Eval(a) => commands::eval(a),
        Command::Preview(a) => commands::preview(a),
    };
    match result {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit::code_for(&e))
        }
    }
}

/// The error chain on one line, skipping causes already quoted by their
/// parent's message.
fn describe(err: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if text.contains(&msg) {
            continue;
        }
        if !text.is_empty() {
            text.push_str(": ");
        }
        text.push_str(&msg);
    }
    text
}
