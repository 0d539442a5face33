use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use cervdx::geometry::WidthSource;
use cervdx::heatmap::HeatmapParams;
use cervdx::pipeline::DiagnoseParams;
use cervdx::signal::{CombineRule, Thresholds};
use cervdx_cli::{
    cmd_diagnose, cmd_diagnose_batch, cmd_eval_dx, cmd_eval_seg, cmd_phantom, DiagnoseInputs,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "cervdx",
    version,
    about = "Diagnostic indicators from labeled cervical-spine sagittal MRI"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Width {
    Cord,
    Canal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    And,
    Or,
}

#[derive(Args)]
struct Params {
    #[arg(long, default_value_t = 1.5)]
    sigma_scale: f64,
    #[arg(long, default_value_t = 10)]
    min_region_size: usize,
    #[arg(long, default_value_t = 23.7)]
    t2mi_cut: f64,
    #[arg(long, default_value_t = 1.2)]
    rsci_cut: f64,
    /// How the two T2 cutoffs combine.
    #[arg(long, value_enum, default_value_t = Rule::And)]
    rule: Rule,
    #[arg(long, value_enum, default_value_t = Width::Cord)]
    width_source: Width,
}

impl Params {
    fn build(&self) -> DiagnoseParams {
        DiagnoseParams {
            heatmap: HeatmapParams {
                sigma_scale: self.sigma_scale,
                min_region_size: self.min_region_size,
            },
            thresholds: Thresholds {
                t2mi_cut: self.t2mi_cut,
                rsci_cut: self.rsci_cut,
                rule: match self.rule {
                    Rule::And => CombineRule::And,
                    Rule::Or => CombineRule::Or,
                },
            },
            width_source: match self.width_source {
                Width::Cord => WidthSource::Cord,
                Width::Canal => WidthSource::Canal,
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Diagnose one case: writes report.json, heatmap.f32 and overlay.png.
    Diagnose {
        #[arg(long)]
        image: PathBuf,
        /// One mask, or three (first, middle, last slice) with --slices 3.
        #[arg(long, required = true, num_args = 1..=3)]
        mask: Vec<PathBuf>,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// 1 or 3.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
        slices: u8,
        #[command(flatten)]
        params: Params,
    },
    /// Diagnose every `<id>.meta.json` case in a directory into `<out>/<id>/`.
    DiagnoseBatch {
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: Params,
    },
    /// Generate phantom cases with ground truth.
    Phantom {
        /// PhantomSpec JSON; defaults are used when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Generate this many randomized phantoms instead.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        id: Option<String>,
    },
    /// Segmentation overlap metrics between two mask directories.
    EvalSeg {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Diagnostic agreement and classification metrics against truths.
    EvalDx {
        #[arg(long)]
        reports: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Diagnose {
            image,
            mask,
            meta,
            out,
            slices,
            params,
        } => {
            if slices == 2 {
                anyhow::bail!("--slices must be 1 or 3");
            }
            if mask.len() != slices as usize {
                anyhow::bail!(
                    "--slices {slices} needs {slices} --mask value(s), got {}",
                    mask.len()
                );
            }
            cmd_diagnose(
                &DiagnoseInputs {
                    image,
                    masks: mask,
                    meta,
                },
                &out,
                &params.build(),
            )
        }
        Command::DiagnoseBatch { cases, out, params } => {
            cmd_diagnose_batch(&cases, &out, &params.build())
        }
        Command::Phantom {
            spec,
            out,
            count,
            seed,
            id,
        } => cmd_phantom(spec.as_deref(), &out, count, seed, id.as_deref()),
        Command::EvalSeg { pred, gt, out } => cmd_eval_seg(&pred, &gt, &out),
        Command::EvalDx {
            reports,
            truth,
            out,
        } => cmd_eval_dx(&reports, &truth, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
