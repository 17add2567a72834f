use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pdfbf_core::cli::{self, InjectPreset, SolveArgs};

#[derive(Parser)]
#[command(name = "pdfbf", version, about = "Primal-dual splitting solver for composite monotone inclusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a problem file: schema, shapes and sampled operator properties.
    Validate {
        path: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve a problem file.
    Solve {
        path: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Write a per-iteration CSV trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        trace_every: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Error injection preset: none, spike or decay.
        #[arg(long, value_parser = parse_inject)]
        inject: Option<InjectPreset>,
        /// Write the result JSON here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List or emit the bundled problem templates.
    Templates {
        #[command(subcommand)]
        action: TemplateAction,
    },
}

#[derive(Subcommand)]
enum TemplateAction {
    List,
    Emit {
        name: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_inject(s: &str) -> Result<InjectPreset, String> {
    InjectPreset::parse(s).ok_or_else(|| format!("unknown preset {s:?}, expected none, spike or decay"))
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let mut out = io::stdout().lock();
    let mut err = io::stderr().lock();
    let code = match args.command {
        Command::Validate { path, seed } => cli::cmd_validate(&path, seed, &mut out, &mut err),
        Command::Solve {
            path,
            tol,
            max_iter,
            trace,
            trace_every,
            seed,
            inject,
            output,
        } => {
            let args = SolveArgs {
                tol,
                max_iter,
                trace,
                trace_every,
                seed,
                inject,
                output,
            };
            cli::cmd_solve(&path, &args, &mut out, &mut err)
        }
        Command::Templates { action } => match action {
            TemplateAction::List => cli::cmd_templates_list(&mut out),
            TemplateAction::Emit { name, output } => {
                cli::cmd_templates_emit(&name, output.as_deref(), &mut out, &mut err)
            }
        },
    };
    ExitCode::from(code as u8)
}
