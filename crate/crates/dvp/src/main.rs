use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dvp_core::metrics::{bd_metrics, sequence_quality, BdMethod, QualityKind};
use dvp_core::mode;
use dvp_core::net::count_params_and_macs;
use dvp_core::resample::upscale_frame;
use dvp_core::scale::{ALL_MODES, CANONICAL_SCALES};
use dvp_core::{FilterKind, FrameRate, NetworkWeights, PrecodeOptions, ScaleFactor};
use serde_json::json;

use dvp::cache::CachingCodec;
use dvp::codec::{Codec, CodecName, CodecProfile, TemplateCodec};
use dvp::config::{parse_bitrates, ConfigFile};
use dvp::curves;
use dvp::dvpw;
use dvp::mock::{MockCodec, MockKnee};
use dvp::pipeline::{load_source, run_ladder_frames, LadderConfig, ManifestRecord};
use dvp::select::Downscaler;
use dvp::vmaf::{VmafStatus, VmafTool};
use dvp::y4m;

#[derive(Parser)]
#[command(name = "dvp", version, about = "Deep video precoding: per-GOP resolution selection for bitrate ladders")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Precode, select a scale per GOP and rung, encode, write the manifest.
    Encode(EncodeArgs),
    /// Quality of a distorted sequence, or Bjontegaard deltas of two curves.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Run the RD pruning stages over a CSV of rate,distortion,scale rows.
    Hull {
        #[arg(long)]
        points: PathBuf,
        /// Also write the hull survivors as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter and multiply-accumulate counts of the precoding network.
    Netinfo {
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = 1920)]
        width: usize,
        #[arg(long, default_value_t = 1080)]
        height: usize,
        #[arg(long)]
        json: bool,
    },
    /// Write a DVPW file with Xavier-initialised or pass-through weights.
    InitWeights {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Weights that reproduce bilinear downscaling.
        #[arg(long)]
        passthrough: bool,
    },
}

#[derive(Subcommand)]
enum MetricsCmd {
    /// Per-frame and sequence PSNR (and VMAF with --vmaf-template).
    Psnr {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        distorted: PathBuf,
        /// Filter used when the distorted sequence is smaller.
        #[arg(long, default_value = "bilinear")]
        upscaler: FilterKind,
        #[arg(long)]
        vmaf_template: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// BD-rate and BD-quality of `test` against `reference` (CSV rate,quality).
    Bd {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Piecewise cubic Hermite instead of the cubic fit.
        #[arg(long)]
        pchip: bool,
        #[arg(long)]
        vmaf: bool,
    },
}

#[derive(Args, Default)]
struct EncodeArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Raw yuv420p input geometry (omit for Y4M).
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Raw input frame rate, `30` or `30000/1001`.
    #[arg(long)]
    fps: Option<String>,
    #[arg(long)]
    codec: Option<String>,
    /// Comma-separated, e.g. `500k,1500k,5000k`.
    #[arg(long)]
    bitrates: Option<String>,
    #[arg(long)]
    gop: Option<usize>,
    /// `all`, `canonical`, or a list such as `1,3/2,2`.
    #[arg(long)]
    scales: Option<String>,
    #[arg(long)]
    footprint: Option<usize>,
    #[arg(long)]
    weights: Option<PathBuf>,
    /// `network` or a linear filter name.
    #[arg(long)]
    downscaler: Option<String>,
    #[arg(long)]
    upscaler: Option<String>,
    #[arg(long)]
    chroma_downscaler: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    encoder_template: Option<String>,
    #[arg(long)]
    cbr_template: Option<String>,
    #[arg(long)]
    decoder_template: Option<String>,
    #[arg(long)]
    vmaf_template: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-measure survivors on the whole GOP instead of the footprint.
    #[arg(long)]
    full_remap: bool,
    #[arg(long)]
    no_cache: bool,
}

const CONFIG_KEYS: &[&str] = &[
    "input",
    "width",
    "height",
    "fps",
    "codec",
    "bitrates",
    "gop",
    "scales",
    "footprint",
    "weights",
    "downscaler",
    "upscaler",
    "chroma-downscaler",
    "out",
    "manifest",
    "jobs",
    "encoder-template",
    "cbr-template",
    "decoder-template",
    "vmaf-template",
    "full-remap",
    "no-cache",
];

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Encode(a) => encode(a),
        Cmd::Metrics(m) => metrics(m),
        Cmd::Hull { points, out } => hull(&points, out.as_deref()),
        Cmd::Netinfo {
            weights,
            width,
            height,
            json,
        } => netinfo(weights.as_deref(), width, height, json),
        Cmd::InitWeights { out, seed, passthrough } => {
            let w = if passthrough {
                NetworkWeights::passthrough()
            } else {
                NetworkWeights::xavier(seed)
            };
            dvpw::save_weights(&out, &w).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} ({} parameters)", out.display(), w.param_count());
            Ok(())
        }
    }
}

fn parse_fps(s: &str) -> Result<FrameRate> {
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let (n, d): (u32, u32) = (n.trim().parse()?, d.trim().parse()?);
    if n == 0 || d == 0 {
        bail!("frame rate must be positive");
    }
    Ok(FrameRate::new(n, d))
}

fn parse_scales(s: &str, profile: &CodecProfile) -> Result<Vec<ScaleFactor>> {
    let mut v: Vec<ScaleFactor> = match s.trim() {
        "all" => profile.default_scales(),
        "canonical" => CANONICAL_SCALES.to_vec(),
        "every" => ALL_MODES.to_vec(),
        list => list
            .split(',')
            .map(|t| t.parse::<ScaleFactor>().map_err(|e| anyhow!("scale {t:?}: {e}")))
            .collect::<Result<_>>()?,
    };
    v.sort();
    v.dedup();
    Ok(v)
}

fn load_weights(path: Option<&Path>) -> Result<NetworkWeights> {
    match path {
        Some(p) => dvpw::load_weights(p).with_context(|| format!("loading weights {}", p.display())),
        None => {
            log::warn!("no --weights given; using pass-through weights (bilinear-equivalent precoding)");
            Ok(NetworkWeights::passthrough())
        }
    }
}

fn encode(a: EncodeArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => ConfigFile::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ConfigFile::default(),
    };
    cfg.check_keys(CONFIG_KEYS)?;
    let text = |flag: &Option<String>, key: &str| flag.clone().or_else(|| cfg.get(key).map(str::to_string));
    let path = |flag: &Option<PathBuf>, key: &str| flag.clone().or_else(|| cfg.get(key).map(PathBuf::from));
    let num = |flag: Option<usize>, key: &str| -> Result<Option<usize>> { Ok(flag.or(cfg.parsed::<usize>(key)?)) };

    let input = path(&a.input, "input").ok_or_else(|| anyhow!("--input is required"))?;
    let codec_name: CodecName = text(&a.codec, "codec").unwrap_or_else(|| "h264".into()).parse()?;
    let mut profile = CodecProfile::default_for(codec_name);
    if let Some(t) = text(&a.encoder_template, "encoder-template") {
        profile.templates.encode_vbv = t;
    }
    if let Some(t) = text(&a.cbr_template, "cbr-template") {
        profile.templates.encode_cbr = t;
    }
    if let Some(t) = text(&a.decoder_template, "decoder-template") {
        profile.templates.decode = t;
    }

    let filter = |flag: &Option<String>, key: &str, default: FilterKind| -> Result<FilterKind> {
        text(flag, key).map_or(Ok(default), |s| s.parse::<FilterKind>().map_err(|e| anyhow!("{key}: {e}")))
    };
    let upscaler = filter(&a.upscaler, "upscaler", FilterKind::Bilinear)?;
    let chroma = filter(&a.chroma_downscaler, "chroma-downscaler", FilterKind::BICUBIC)?;
    let down = match text(&a.downscaler, "downscaler").as_deref().unwrap_or("network") {
        "network" => Downscaler::Network {
            weights: Arc::new(load_weights(path(&a.weights, "weights").as_deref())?),
            opts: PrecodeOptions {
                chroma_filter: chroma,
                ..PrecodeOptions::default()
            },
        },
        other => Downscaler::Linear {
            luma: other.parse().map_err(|e| anyhow!("downscaler: {e}"))?,
            chroma,
        },
    };

    let out_dir = path(&a.out, "out").unwrap_or_else(|| PathBuf::from("dvp-out"));
    let mut ladder = LadderConfig::new(&out_dir);
    if let Some(b) = text(&a.bitrates, "bitrates") {
        ladder.bitrates = parse_bitrates(&b).map_err(|e| anyhow!(e))?;
    }
    ladder.scales = parse_scales(&text(&a.scales, "scales").unwrap_or_else(|| "all".into()), &profile)?;
    if let Some(g) = num(a.gop, "gop")? {
        ladder.gop_len = g;
    }
    if let Some(f) = num(a.footprint, "footprint")? {
        ladder.footprint_n = f;
    }
    if let Some(j) = num(a.jobs, "jobs")? {
        ladder.jobs = j;
    }
    ladder.upscaler = upscaler;
    ladder.full_remap = a.full_remap || cfg.flag("full-remap")?.unwrap_or(false);
    ladder.manifest_path = path(&a.manifest, "manifest");
    ladder.vmaf = text(&a.vmaf_template, "vmaf-template").map(|t| VmafTool {
        template: t,
        ..VmafTool::default()
    });
    if let Downscaler::Network { .. } = down {
        if let Some(s) = ladder.scales.iter().find(|s| !s.is_native() && !dvp_core::scale::is_canonical(**s)) {
            bail!("scale {s} is not produced by the precoding network");
        }
    }

    let raw = match (num(a.width, "width")?, num(a.height, "height")?) {
        (Some(w), Some(h)) => Some((w, h, parse_fps(&text(&a.fps, "fps").unwrap_or_else(|| "30".into()))?)),
        (None, None) => None,
        _ => bail!("--width and --height go together"),
    };
    let (frames, fps) = load_source(&input, raw).with_context(|| format!("reading {}", input.display()))?;
    log::info!("{} frames of {}x{} at {}/{} fps", frames.len(), frames[0].width, frames[0].height, fps.num, fps.den);

    let base: Box<dyn Codec> = match codec_name {
        CodecName::Mock => Box::new(MockCodec::new(MockKnee::default())),
        _ => Box::new(TemplateCodec::new(profile.clone())),
    };
    let no_cache = a.no_cache || cfg.flag("no-cache")?.unwrap_or(false);
    let codec: Box<dyn Codec> = if no_cache {
        base
    } else {
        Box::new(CachingCodec::new(base, out_dir.join("cache"))?)
    };

    let result = run_ladder_frames(frames, fps, &ladder, &down, codec.as_ref())?;
    let failed = result.records.iter().filter(|r| matches!(r, ManifestRecord::Error(_))).count();
    println!(
        "{} cells ({} failed); manifest {}; quality {}",
        result.records.len(),
        failed,
        result.manifest_path.display(),
        result.quality_path.display()
    );
    if failed > 0 {
        bail!("{failed} cells failed; see the manifest for details");
    }
    Ok(())
}

fn metrics(m: MetricsCmd) -> Result<()> {
    match m {
        MetricsCmd::Psnr {
            reference,
            distorted,
            upscaler,
            vmaf_template,
            json,
        } => {
            let (rh, rf) = y4m::read_y4m(fs::File::open(&reference)?).with_context(|| format!("reading {}", reference.display()))?;
            let (_, df) = y4m::read_y4m(fs::File::open(&distorted)?).with_context(|| format!("reading {}", distorted.display()))?;
            let df = df
                .iter()
                .map(|f| upscale_frame(f, rh.width, rh.height, upscaler))
                .collect::<Result<Vec<_>, _>>()?;
            let mut report = sequence_quality(&rf, &df)?;
            let mut vmaf_note = None;
            if let Some(t) = vmaf_template {
                let dir = std::env::temp_dir().join(format!("dvp-vmaf-{}", std::process::id()));
                fs::create_dir_all(&dir)?;
                let (r, d) = (dir.join("ref.yuv"), dir.join("dis.yuv"));
                y4m::write_raw_yuv(fs::File::create(&r)?, &rf)?;
                y4m::write_raw_yuv(fs::File::create(&d)?, &df)?;
                let tool = VmafTool {
                    template: t,
                    ..VmafTool::default()
                };
                match tool.status(&r, &d, rh.width, rh.height, &dir.join("vmaf.json"))? {
                    VmafStatus::Score(s) => report.sequence_vmaf = Some(s),
                    VmafStatus::Unavailable(why) => vmaf_note = Some(why),
                }
                let _ = fs::remove_dir_all(&dir);
            }
            if json {
                let frames: Vec<_> = report
                    .per_frame
                    .iter()
                    .map(|q| json!({"mse_y": q.mse_y, "mse_cb": q.mse_cb, "mse_cr": q.mse_cr, "psnr_avg": q.psnr_avg}))
                    .collect();
                let v = json!({
                    "per_frame": frames,
                    "sequence_psnr": report.sequence_psnr,
                    "sequence_vmaf": report.sequence_vmaf,
                    "vmaf_unavailable": vmaf_note,
                });
                println!("{}", serde_json::to_string_pretty(&v)?);
            } else {
                for (i, q) in report.per_frame.iter().enumerate() {
                    println!(
                        "frame {i:5}  psnr {:8.4} dB  mse y {:10.4} cb {:10.4} cr {:10.4}",
                        q.psnr_avg, q.mse_y, q.mse_cb, q.mse_cr
                    );
                }
                println!("sequence psnr {:.4} dB", report.sequence_psnr);
                match (report.sequence_vmaf, vmaf_note) {
                    (Some(v), _) => println!("sequence vmaf {v:.4}"),
                    (None, Some(why)) => println!("vmaf unavailable: {why}"),
                    _ => {}
                }
            }
            Ok(())
        }
        MetricsCmd::Bd {
            reference,
            test,
            pchip,
            vmaf,
        } => {
            let kind = if vmaf { QualityKind::Vmaf } else { QualityKind::Psnr };
            let a = curves::read_curve(fs::File::open(&reference)?, kind)?;
            let b = curves::read_curve(fs::File::open(&test)?, kind)?;
            let method = if pchip { BdMethod::Pchip } else { BdMethod::Cubic };
            let r = bd_metrics(&a, &b, method)?;
            let unit = if vmaf { "" } else { " dB" };
            println!("bd-rate {:+.4} %", r.bd_rate);
            println!("bd-quality {:+.4}{unit}", r.bd_quality);
            Ok(())
        }
    }
}

fn hull(points: &Path, out: Option<&Path>) -> Result<()> {
    let pts = curves::read_points(fs::File::open(points).with_context(|| format!("reading {}", points.display()))?)?;
    let (survivors, log) = mode::prune(pts)?;
    print!("{}", curves::format_stages(&log));
    if let Some(best) = mode::argmin_distortion(&survivors) {
        println!("lowest distortion on hull: {}", survivors[best].scale);
    }
    if let Some(o) = out {
        curves::write_points(fs::File::create(o)?, &log.after_hull)?;
    }
    Ok(())
}

fn netinfo(weights: Option<&Path>, width: usize, height: usize, as_json: bool) -> Result<()> {
    let w = match weights {
        Some(p) => dvpw::load_weights(p).with_context(|| format!("loading {}", p.display()))?,
        None => NetworkWeights::zeros(),
    };
    let cost = count_params_and_macs(&w, width, height);
    let block = &w.streams[0].blocks[0];
    let block_params = block.param_count();
    let block_weights: usize = block.layers().iter().map(|l| l.weight.len()).sum();
    let block_macs = dvp_core::net::block_macs_unscaled(block, width, height);
    let weights_only = {
        let mut n = 0;
        w.visit_layers(|_, l| n += l.weight.len());
        n
    };
    if as_json {
        let per_scale: serde_json::Map<String, serde_json::Value> =
            cost.per_scale_macs.iter().map(|(s, m)| (s.to_string(), json!(m))).collect();
        let v = json!({
            "width": width,
            "height": height,
            "params": cost.params,
            "params_weights_only": weights_only,
            "block_params": block_params,
            "block_params_weights_only": block_weights,
            "block_macs_unscaled": block_macs,
            "root_macs": cost.root_macs,
            "per_scale_macs": per_scale,
            "total_macs": cost.total_macs,
        });
        println!("{}", serde_json::to_string_pretty(&v)?);
        return Ok(());
    }
    println!("input {width}x{height}");
    println!("parameters            {} ({} weights, rest biases and PReLU slopes)", cost.params, weights_only);
    println!("block parameters      {block_params} ({block_weights} weights)");
    println!("block MACs, unscaled  {block_macs} ({:.3} G)", block_macs as f64 / 1e9);
    println!("root MACs             {} ({:.3} G)", cost.root_macs, cost.root_macs as f64 / 1e9);
    for (s, m) in &cost.per_scale_macs {
        println!("  scale {:>4}          {m} ({:.3} G)", s.to_string(), *m as f64 / 1e9);
    }
    println!("total MACs            {} ({:.3} G)", cost.total_macs, cost.total_macs as f64 / 1e9);
    Ok(())
}
