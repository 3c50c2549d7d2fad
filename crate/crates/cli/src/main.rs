//! `quadtext` command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error. Diagnostics go to
//! stderr; reports go to stdout.

mod config;
mod synth;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use quadtext::blob::{encode_targets, summarize};
use quadtext::evalkit::{
    evaluate_images, format_det_file, format_gt_file, format_report, load_dataset, parse_det_file, parse_gt_file,
    EvalOptions,
};
use quadtext::postprocess::{pnms, score_filter};
use quadtext::qrc::{project_quad, sample_grid};
use quadtext::targets::build_pyramid_targets;
use quadtext::Quad;

use crate::config::Config;

#[derive(Parser)]
#[command(name = "quadtext", version, about = "Quadrilateral text-detection geometry toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score detections against ground truth at one or more IoU thresholds.
    Eval {
        #[arg(long)]
        gt_dir: PathBuf,
        #[arg(long)]
        det_dir: PathBuf,
        /// Comma-separated IoU thresholds.
        #[arg(long, value_parser = parse_unit_list)]
        iou: Option<UnitList>,
        /// Treat ground truths under this area (px²) as do-not-care and drop
        /// smaller detections.
        #[arg(long, value_parser = parse_non_negative)]
        min_area: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Polygonal non-maximum suppression over a detection file.
    Pnms {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_unit)]
        threshold: Option<f64>,
        /// Drop detections scoring below this before suppression.
        #[arg(long, value_parser = parse_unit)]
        min_score: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Build dense training targets for one image and write them as a blob.
    Targets {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        width: u32,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        height: u32,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the sampling grid of a quadrilateral and its offsets from the
    /// regular kernel grid.
    Grid {
        /// Eight comma-separated coordinates `x1,y1,...,x4,y4` in pixels.
        #[arg(long, value_parser = parse_quad_coords, allow_hyphen_values = true)]
        quad: [f64; 8],
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        stride: u32,
        /// Kernel size `HxW`; defaults to the configured size.
        #[arg(long, value_parser = parse_kernel)]
        kernel: Option<(usize, usize)>,
        /// Output location `x,y` in feature-map cells; defaults to the cell
        /// nearest the quad center.
        #[arg(long, value_parser = parse_cell)]
        at: Option<(i64, i64)>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write a seeded synthetic ground-truth and detection set.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        images: usize,
        /// Detection noise as a fraction of text scale.
        #[arg(long, value_parser = parse_non_negative)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default configuration, or write it to a file.
    Config {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Debug)]
struct UnitList(Vec<f64>);

fn parse_number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    Ok(v)
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v = parse_number(s)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("{v} is outside [0, 1]"));
    }
    Ok(v)
}

fn parse_unit_list(s: &str) -> Result<UnitList, String> {
    s.split(',').map(parse_unit).collect::<Result<Vec<_>, _>>().map(UnitList)
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    let v = parse_number(s)?;
    if v < 0.0 {
        return Err(format!("{v} is negative"));
    }
    Ok(v)
}

fn parse_quad_coords(s: &str) -> Result<[f64; 8], String> {
    let v = s.split(',').map(parse_number).collect::<Result<Vec<_>, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 8 coordinates, got {}", v.len()))
}

fn parse_kernel(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| format!("{s:?} is not of the form HxW"))?;
    let side = |t: &str| match t.trim().parse::<usize>() {
        Ok(n) if n >= 2 => Ok(n),
        _ => Err(format!("kernel side {t:?} must be an integer >= 2")),
    };
    Ok((side(h)?, side(w)?))
}

fn parse_cell(s: &str) -> Result<(i64, i64), String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("{s:?} is not of the form x,y"))?;
    let int = |t: &str| t.trim().parse::<i64>().map_err(|_| format!("{t:?} is not an integer"));
    Ok((int(x)?, int(y)?))
}

fn load_config(path: Option<&Path>) -> anyhow::Result<Config> {
    path.map_or_else(|| Ok(Config::default()), Config::load)
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn warn_skipped(path: &Path, lines: &[usize]) {
    if !lines.is_empty() {
        let list: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
        eprintln!("warning: {}: skipped invalid quads on lines {}", path.display(), list.join(", "));
    }
}

fn cmd_eval(
    gt_dir: &Path,
    det_dir: &Path,
    iou: Option<UnitList>,
    min_area: Option<f64>,
    config: Option<&Path>,
) -> anyhow::Result<String> {
    let cfg = load_config(config)?;
    let taus = iou.map_or(cfg.eval_taus, |l| l.0);
    for dir in [gt_dir, det_dir] {
        if !dir.is_dir() {
            anyhow::bail!("{} is not a directory", dir.display());
        }
    }
    let (images, skipped) = load_dataset::<f64>(gt_dir, det_dir)?;
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} lines with invalid quads");
    }
    Ok(format_report(&evaluate_images(&images, &taus, &EvalOptions { min_area })))
}

fn cmd_pnms(
    input: &Path,
    out: &Path,
    threshold: Option<f64>,
    min_score: Option<f64>,
    config: Option<&Path>,
) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let parsed = parse_det_file::<f64>(&read_text(input)?).with_context(|| format!("in {}", input.display()))?;
    warn_skipped(input, &parsed.skipped);
    let dets = match min_score {
        Some(s) => score_filter(&parsed.items, s),
        None => parsed.items,
    };
    let kept = pnms(&dets, threshold.unwrap_or(cfg.pnms_thresh));
    write_atomic(out, format_det_file(&kept).as_bytes())
}

fn cmd_targets(gt: &Path, width: u32, height: u32, config: Option<&Path>, out: &Path) -> anyhow::Result<String> {
    let cfg = load_config(config)?;
    let parsed = parse_gt_file::<f64>(&read_text(gt)?).with_context(|| format!("in {}", gt.display()))?;
    warn_skipped(gt, &parsed.skipped);
    let levels = cfg.level_specs()?;
    let maps = build_pyramid_targets(&parsed.items, &levels, width as usize, height as usize, cfg.shrink_r)?;
    write_atomic(out, &encode_targets(&maps))?;
    Ok(summarize(&maps))
}

fn cmd_grid(
    coords: [f64; 8],
    stride: u32,
    kernel: Option<(usize, usize)>,
    at: Option<(i64, i64)>,
    config: Option<&Path>,
) -> anyhow::Result<String> {
    let cfg = load_config(config)?;
    let (h, w) = kernel.unwrap_or((cfg.kernel.h, cfg.kernel.w));
    let quad = Quad::from_coords(coords).context("invalid quad")?;
    let corners = project_quad(&quad, stride);
    let grid = sample_grid(&corners, h, w)?;
    let (px, py) = at.unwrap_or_else(|| {
        let c = quad.center();
        let s = f64::from(stride);
        ((c.x / s).round() as i64, (c.y / s).round() as i64)
    });
    let mut s = String::new();
    let q: Vec<String> = quad.coords().iter().map(|v| v.to_string()).collect();
    let _ = writeln!(s, "# quad {}", q.join(","));
    let _ = writeln!(s, "# stride {stride} kernel {h}x{w} cell {px},{py}");
    let _ = writeln!(s, "i,j,gx,gy,dy,dx");
    // Tap (i, j) sits at (i - h/2, j - w/2) cells from the location, which
    // also covers even sizes.
    for i in 0..h {
        for j in 0..w {
            let g = grid.get(i, j);
            let ry = (py + i as i64 - (h / 2) as i64) as f64;
            let rx = (px + j as i64 - (w / 2) as i64) as f64;
            let _ = writeln!(s, "{i},{j},{},{},{},{}", g.x, g.y, g.y - ry, g.x - rx);
        }
    }
    Ok(s)
}

fn cmd_synth(seed: u64, images: usize, noise: f64, out: &Path) -> anyhow::Result<()> {
    let (gt_dir, det_dir) = (out.join("gt"), out.join("det"));
    for d in [&gt_dir, &det_dir] {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    for im in synth::generate(seed, images, noise) {
        let gts: Vec<_> = im.gts.iter().map(|(g, t)| (*g, t.as_str())).collect();
        write_atomic(&gt_dir.join(format!("gt_{}.txt", im.stem)), format_gt_file(&gts).as_bytes())?;
        write_atomic(&det_dir.join(format!("{}.txt", im.stem)), format_det_file(&im.dets).as_bytes())?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Eval { gt_dir, det_dir, iou, min_area, config } => {
            print!("{}", cmd_eval(&gt_dir, &det_dir, iou, min_area, config.as_deref())?);
        }
        Command::Pnms { input, out, threshold, min_score, config } => {
            cmd_pnms(&input, &out, threshold, min_score, config.as_deref())?;
        }
        Command::Targets { gt, width, height, config, out } => {
            print!("{}", cmd_targets(&gt, width, height, config.as_deref(), &out)?);
        }
        Command::Grid { quad, stride, kernel, at, config } => {
            print!("{}", cmd_grid(quad, stride, kernel, at, config.as_deref())?);
        }
        Command::Synth { seed, images, noise, out } => cmd_synth(seed, images, noise, &out)?,
        Command::Config { out } => {
            let text = Config::default().to_toml();
            match out {
                Some(p) => write_atomic(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
