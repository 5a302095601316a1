//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 on I/O errors.
//! Diagnostics go to stderr; machine output goes to `--out` or stdout.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::PruneConfig;
use crate::error::{Error, Result};
use crate::iaf::iaf_filter;
use crate::pipeline::{compare_baselines, prune_volume, run_ablation, tau_sweep, VariantStats};
use crate::report::{round_sig12, write_result_json};
use crate::saliency::HeadStack;
use crate::synth::{make_lesion_volume, make_skewed_headstack, make_step_volume};
use crate::tensor_io::{read_attention, read_volume, write_attention, write_volume};
use crate::types::Volume;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_IO: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "medpruner",
    version,
    about = "Slice and token pruning for 3D volumes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full pipeline and write a JSON result.
    Prune {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Result JSON path; contextual tokens go to a sibling .ctx.bin file
        #[arg(long)]
        out: PathBuf,
        /// Record wall-clock stage timings (output is no longer reproducible)
        #[arg(long)]
        timings: bool,
    },
    /// Slice filtering only; prints retained slice indices as a JSON array.
    Slices {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long, default_value_t = PruneConfig::DEFAULT_GAMMA, allow_negative_numbers = true)]
        gamma: f64,
    },
    /// Token accounting for each ablation variant, as JSON.
    Ablate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retention and captured mass across thresholds, as CSV.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated thresholds in (0, 1]
        #[arg(long, value_delimiter = ',', required = true)]
        taus: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The pipeline against fixed-budget baselines, as JSON.
    Compare {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Budget for the fixed-ratio and uniform-slice baselines, in (0, 1]
        #[arg(long)]
        ratio: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write synthetic inputs.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// MPRV volume file
    #[arg(long)]
    volume: PathBuf,
    /// MPRA attention file covering every slice; defaults to the patch encoder
    #[arg(long)]
    attention: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    #[arg(long, default_value_t = PruneConfig::DEFAULT_GAMMA, allow_negative_numbers = true)]
    gamma: f64,
    #[arg(long, default_value_t = PruneConfig::DEFAULT_TAU, allow_negative_numbers = true)]
    tau: f64,
    #[arg(long, default_value_t = PruneConfig::DEFAULT_TEMPERATURE, allow_negative_numbers = true)]
    temperature: f64,
    #[arg(long, default_value_t = PruneConfig::DEFAULT_CONTEXTUAL_RATIO, allow_negative_numbers = true)]
    contextual_ratio: f64,
    #[arg(long, default_value_t = PruneConfig::DEFAULT_PATCH_SIZE)]
    patch_size: usize,
    #[arg(long, default_value_t = PruneConfig::DEFAULT_NUM_HEADS)]
    heads: usize,
    #[arg(long, default_value_t = PruneConfig::DEFAULT_HEAD_DIM)]
    head_dim: usize,
}

impl ConfigArgs {
    fn to_config(&self) -> PruneConfig {
        PruneConfig {
            gamma: self.gamma,
            tau: self.tau,
            temperature: self.temperature,
            contextual_ratio: self.contextual_ratio,
            num_heads: self.heads,
            head_dim: self.head_dim,
            ..PruneConfig::with_patch_size(self.patch_size)
        }
    }
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    /// Piecewise-constant slices stepping by DELTA every BLOCK slices.
    Step {
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        block: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Uniform background with one spherical bump.
    Lesion {
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        center: usize,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        amplitude: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Single-head attention concentrated on one token, repeated per slice.
    SkewedAttn {
        #[arg(long)]
        slices: usize,
        #[arg(long)]
        tokens: usize,
        #[arg(long, default_value_t = PruneConfig::DEFAULT_HEAD_DIM)]
        head_dim: usize,
        #[arg(long, default_value_t = 0)]
        dominant: usize,
        /// Attention logit gap; 0 gives uniform attention
        #[arg(long, allow_negative_numbers = true)]
        gap: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_inputs(input: &InputArgs) -> Result<(Volume, Option<Vec<HeadStack>>)> {
    let vol = read_volume(&input.volume)?;
    let attention = input.attention.as_ref().map(read_attention).transpose()?;
    Ok((vol, attention))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn rounded(rows: Vec<VariantStats>) -> Vec<VariantStats> {
    rows.into_iter()
        .map(|r| VariantStats {
            r_rate: round_sig12(r.r_rate),
            mean_mass: round_sig12(r.mean_mass),
            ..r
        })
        .collect()
}

fn json_text<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Prune {
            input,
            config,
            out,
            timings,
        } => {
            let cfg = config.to_config();
            cfg.validate()?;
            let (vol, attention) = load_inputs(&input)?;
            let res = prune_volume(&vol, &cfg, attention.as_deref())?;
            write_result_json(&res, &out, timings)?;
            eprintln!(
                "kept {} of {} slices, {} of {} tokens (r_rate {:.6})",
                res.slice_selection.len(),
                vol.depth(),
                res.retained_tokens,
                res.original_tokens,
                res.r_rate
            );
        }
        Command::Slices { volume, gamma } => {
            PruneConfig {
                gamma,
                ..Default::default()
            }
            .validate()?;
            let vol = read_volume(volume)?;
            let selection = iaf_filter(&vol, gamma);
            emit(
                None,
                &format!("{}\n", serde_json::to_string(selection.retained())?),
            )?;
        }
        Command::Ablate { input, config, out } => {
            let cfg = config.to_config();
            cfg.validate()?;
            let (vol, attention) = load_inputs(&input)?;
            let rows = rounded(run_ablation(&vol, &cfg, attention.as_deref())?);
            emit(out.as_deref(), &json_text(&rows)?)?;
        }
        Command::Sweep {
            input,
            config,
            taus,
            out,
        } => {
            let cfg = config.to_config();
            cfg.validate()?;
            let (vol, attention) = load_inputs(&input)?;
            let points = tau_sweep(&vol, &cfg, attention.as_deref(), &taus)?;
            let mut text = String::from("tau,r_rate,mean_mass\n");
            for p in points {
                text.push_str(&format!(
                    "{},{},{}\n",
                    round_sig12(p.tau),
                    round_sig12(p.r_rate),
                    round_sig12(p.mean_mass)
                ));
            }
            emit(out.as_deref(), &text)?;
        }
        Command::Compare {
            input,
            config,
            ratio,
            out,
        } => {
            let cfg = config.to_config();
            cfg.validate()?;
            let (vol, attention) = load_inputs(&input)?;
            let rows = rounded(compare_baselines(&vol, &cfg, attention.as_deref(), ratio)?);
            emit(out.as_deref(), &json_text(&rows)?)?;
        }
        Command::Synth(synth) => run_synth(synth)?,
    }
    Ok(())
}

fn run_synth(cmd: SynthCommand) -> Result<()> {
    match cmd {
        SynthCommand::Step {
            depth,
            height,
            width,
            block,
            delta,
            out,
        } => write_volume(&make_step_volume(depth, height, width, block, delta)?, out),
        SynthCommand::Lesion {
            depth,
            height,
            width,
            center,
            radius,
            amplitude,
            out,
        } => write_volume(
            &make_lesion_volume(depth, height, width, center, radius, amplitude)?,
            out,
        ),
        SynthCommand::SkewedAttn {
            slices,
            tokens,
            head_dim,
            dominant,
            gap,
            out,
        } => {
            if slices == 0 {
                return Err(Error::Invalid("slices must be >= 1".into()));
            }
            let stack = make_skewed_headstack(tokens, head_dim, dominant, gap)?;
            write_attention(&vec![stack; slices], out)
        }
    }
}

/// Parses `args` (including the program name), runs one subcommand and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_INVALID
            }
        }
    }
}
