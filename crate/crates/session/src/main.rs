use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use freedrag_core::instruction::ConfigOverrides;
use freedrag_core::{Instruction, Method};
use freedrag_eval::metrics::SuiteOptions;
use freedrag_session::api::{self, DEFAULT_PORT, PORT_ENV};
use freedrag_session::batch::{self, Variant};
use freedrag_session::Registry;

#[derive(Parser)]
#[command(
    name = "freedrag",
    version,
    about = "Feature dragging on synthetic generator backends"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one instruction file; write trace.csv, renders and report.json.
    Run {
        #[arg(long)]
        instruction: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Stop after this many drags even if still running.
        #[arg(long)]
        drags: Option<usize>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Run and score a suite forward and reversed; write report.json/csv.
    Suite {
        #[command(flatten)]
        source: SuiteSource,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Compare parameter variants against the reference configuration.
    Ablate {
        #[command(flatten)]
        source: SuiteSource,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        l: Option<f64>,
        #[arg(long)]
        d: Option<f64>,
        /// Force λ = 0 (templates never update).
        #[arg(long)]
        no_update: bool,
        /// Always advance to the line-search point.
        #[arg(long)]
        no_backtracking: bool,
        /// Skip the reference run.
        #[arg(long)]
        no_reference: bool,
    },
    /// Write a built-in suite as an instruction array.
    ExportSuite {
        #[arg(long, value_enum)]
        builtin: Builtin,
        #[arg(long)]
        out: PathBuf,
    },
    /// Start the HTTP session service.
    Serve {
        #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
        port: u16,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SuiteSource {
    /// JSON array of instructions.
    #[arg(long)]
    instructions: Option<PathBuf>,
    #[arg(long, value_enum)]
    builtin: Option<Builtin>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Builtin {
    Convergence,
    Standard,
    Adversarial,
}

impl Builtin {
    fn name(self) -> &'static str {
        match self {
            Builtin::Convergence => "convergence",
            Builtin::Standard => "standard",
            Builtin::Adversarial => "adversarial",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Freedrag,
    Pointdrag,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Freedrag => Method::FreeDrag,
            MethodArg::Pointdrag => Method::PointDrag,
        }
    }
}

impl SuiteSource {
    fn load(&self) -> anyhow::Result<Vec<Instruction>> {
        Ok(match (&self.instructions, self.builtin) {
            (Some(path), _) => {
                batch::load_suite(path).with_context(|| format!("reading {}", path.display()))?
            }
            (None, Some(b)) => batch::builtin_suite(b.name())?,
            (None, None) => bail!("one of --instructions or --builtin is required"),
        })
    }
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run {
            instruction,
            out,
            drags,
            method,
        } => {
            let mut inst = batch::load_instruction(&instruction)
                .with_context(|| format!("reading {}", instruction.display()))?;
            if let Some(m) = method {
                inst.method = m.into();
            }
            let report = batch::run_to_dir(&inst, &ConfigOverrides::default(), drags, &out)?;
            println!(
                "{}: {} after {} drags, {} substeps",
                report.method.as_str(),
                report.status.as_str(),
                report.drags,
                report.substeps
            );
        }
        Command::Suite {
            source,
            out,
            method,
        } => {
            let suite = source.load()?;
            let opts = SuiteOptions {
                overrides: ConfigOverrides::default(),
                method: method.map(Into::into),
            };
            let reports = batch::suite_to_dir(&suite, &opts, &out)?;
            let failed = reports.iter().filter(|r| r.error.is_some()).count();
            println!(
                "{} instructions, {} failed; reports in {}",
                reports.len(),
                failed,
                out.display()
            );
        }
        Command::Ablate {
            source,
            out,
            l,
            d,
            no_update,
            no_backtracking,
            no_reference,
        } => {
            let suite = source.load()?;
            let overrides = ConfigOverrides {
                l,
                d,
                update_template: no_update.then_some(false),
                backtracking: no_backtracking.then_some(false),
                ..Default::default()
            };
            let mut variants = vec![];
            if !no_reference {
                variants.push(Variant::reference());
            }
            let v = Variant::from_overrides(overrides);
            if no_reference || v.name != "reference" {
                variants.push(v);
            }
            for s in batch::ablate_to_dir(&suite, &variants, &out)? {
                println!(
                    "{:<24} ccsd {:>9} freeze {:.3} exhausted {:.3} move {}",
                    s.name,
                    fmt_opt(s.mean_ccsd, 5),
                    s.freeze_fraction,
                    s.budget_exhausted_fraction,
                    fmt_opt(s.mean_move, 3)
                );
            }
        }
        Command::ExportSuite { builtin, out } => {
            let suite = batch::builtin_suite(builtin.name())?;
            fs::write(&out, serde_json::to_vec_pretty(&suite)?)
                .with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Serve { port } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                eprintln!("listening on 0.0.0.0:{port}");
                api::serve(Registry::default(), port).await
            })?;
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.prec$}"))
}
