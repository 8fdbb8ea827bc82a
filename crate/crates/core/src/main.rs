use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lfbp::experiment::{run_depthmap, run_reconstruct, run_simulate, run_sweep};
use lfbp::io::{load_light_field, save_image_png, BitDepth};
use lfbp::{extract_epi, fit_epi_line, refocus, ExperimentConfig, Method};

/// Light field reconstruction from focal stacks by back-projection.
#[derive(Parser)]
#[command(name = "lfbp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Plain shift-and-sum back-projection.
    Conventional,
    /// Back-projection of the focus-filtered sparse stack.
    Filtered,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Conventional => Method::Conventional,
            MethodArg::Filtered => Method::Filtered,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the synthetic scene and write its clear slices, simulated stacks and exact light field.
    Simulate {
        /// Experiment config (JSON).
        config: PathBuf,
    },
    /// Reconstruct a light field from the configured stack and write it as LF4D.
    Reconstruct {
        /// Experiment config (JSON).
        config: PathBuf,
        #[arg(long, value_enum, default_value = "filtered")]
        method: MethodArg,
        /// Number of simulated captures (synthetic scenes only); defaults to the first sweep entry.
        #[arg(long)]
        m: Option<usize>,
        /// Output file; defaults to `<outputs.dir>/<method>.lf4d`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract an epipolar-plane image from an LF4D file.
    Epi {
        /// Light field file (LF4D).
        lf: PathBuf,
        /// Row as a fraction of the image height, in [0, 1].
        #[arg(long, default_value_t = 0.5)]
        y_frac: f64,
        /// Vertical slope; must be one of the sampled values.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        eta: f64,
        /// Output PNG; defaults to `<lf>.epi.png`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the image focused at a depth from an LF4D file.
    Refocus {
        /// Light field file (LF4D).
        lf: PathBuf,
        /// Depth in mm relative to the principal plane.
        #[arg(long, allow_negative_numbers = true)]
        depth: f64,
        /// Output PNG; defaults to `<lf>.refocus.png`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full (M, NA) grid for both methods and write psnr.csv plus per-cell images.
    Sweep {
        /// Experiment config (JSON).
        config: PathBuf,
    },
    /// Write the per-pixel in-focus slice index as a 16-bit PNG.
    Depthmap {
        /// Experiment config (JSON).
        config: PathBuf,
        /// Number of simulated captures (synthetic scenes only); defaults to the first sweep entry.
        #[arg(long)]
        m: Option<usize>,
        /// Output PNG; defaults to `<outputs.dir>/depth_map.png`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn run(cli: Cli) -> lfbp::Result<()> {
    match cli.command {
        Command::Simulate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            for path in run_simulate(&cfg)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Reconstruct { config, method, m, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let method = Method::from(method);
            let out = out.unwrap_or_else(|| cfg.outputs.dir.join(format!("{method}.lf4d")));
            let lf = run_reconstruct(&cfg, method, m, &out)?;
            let ang = lf.angular();
            println!(
                "wrote {} ({}x{}x{}x{})",
                out.display(),
                lf.width(),
                lf.height(),
                ang.n_xi,
                ang.n_eta
            );
        }
        Command::Epi { lf, y_frac, eta, out } => {
            let field = load_light_field(&lf)?;
            let epi = extract_epi(&field, y_frac, eta)?;
            let out = out.unwrap_or_else(|| with_suffix(&lf, ".epi.png"));
            save_image_png(&epi, &out, BitDepth::Sixteen)?;
            println!("wrote {}", out.display());
            if let Some(line) = fit_epi_line(&epi, &field.angular().xis(), 0.5) {
                println!("ridge slope {:.6} 1/mm ({} rows)", line.slope, line.rows_used);
            }
        }
        Command::Refocus { lf, depth, out } => {
            let field = load_light_field(&lf)?;
            let image = refocus(&field, depth)?;
            let out = out.unwrap_or_else(|| with_suffix(&lf, ".refocus.png"));
            save_image_png(&image, &out, BitDepth::Sixteen)?;
            println!("wrote {}", out.display());
        }
        Command::Sweep { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let results = run_sweep(&cfg)?;
            println!("{:>5} {:>5} {:>14} {:>10}", "M", "NA", "conventional", "filtered");
            for r in &results {
                println!("{:>5} {:>5} {:>14.2} {:>10.2}", r.m, r.na, r.conventional_db, r.filtered_db);
            }
            println!("results in {}", cfg.outputs.dir.display());
        }
        Command::Depthmap { config, m, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = out.unwrap_or_else(|| cfg.outputs.dir.join("depth_map.png"));
            let covered = run_depthmap(&cfg, m, &out)?;
            println!("wrote {} ({:.1}% of pixels covered)", out.display(), 100.0 * covered);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
