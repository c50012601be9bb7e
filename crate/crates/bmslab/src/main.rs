use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bmslab::commands::{self, InspectView, Output};
use bmslab::config::{parse_system, ConfigDocument, Overrides};
use bmslab::format::Format;
use bmslab::golden::TableId;
use bmslab::{CliError, Result};
use bmslab_core::BmsRule;
use clap::{Args, Parser, Subcommand};

/// Bonus-malus systems with -1/+h/pen transition rules.
///
/// Exit codes: 0 success, 1 checks ran but some failed, 2 usage or
/// configuration error, 3 numeric failure, 4 internal consistency failure.
#[derive(Debug, Parser)]
#[command(name = "bmslab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RuleArgs {
    /// Top level z.
    #[arg(long)]
    z: Option<u32>,
    /// Levels climbed per claim.
    #[arg(long)]
    h: Option<u32>,
    /// Extra claim-free years needed before a level is given back.
    #[arg(long)]
    pen: Option<u32>,
    /// Entry level.
    #[arg(long)]
    l0: Option<u32>,
    /// Rule as `-1/+h` or `-1/+h/pen`.
    #[arg(long, allow_hyphen_values = true)]
    system: Option<String>,
}

impl RuleArgs {
    fn overrides(&self) -> Result<Overrides> {
        let mut o = Overrides {
            z: self.z,
            h: self.h,
            pen: self.pen,
            l0: self.l0,
            ..Overrides::default()
        };
        if let Some(system) = &self.system {
            let (h, pen) = parse_system(system)?;
            if self.h.is_some_and(|v| v != h) || (pen.is_some() && self.pen.is_some() && self.pen != pen) {
                return Err(CliError::Usage(format!(
                    "--system {system} contradicts --h/--pen"
                )));
            }
            o.h = Some(h);
            o.pen = o.pen.or(pen);
        }
        Ok(o)
    }

    /// Rule from the flags alone, with `defaults` = (z, h, pen, l0).
    fn rule(&self, defaults: (u32, u32, u32, u32)) -> Result<BmsRule> {
        let o = self.overrides()?;
        Ok(BmsRule::new(
            o.z.unwrap_or(defaults.0),
            o.h.unwrap_or(defaults.1),
            o.pen.unwrap_or(defaults.2),
            o.l0.unwrap_or(defaults.3),
        )?)
    }
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal relativities, level distribution and HMSE.
    Tabulate {
        /// Configuration file, or a preset name (example3, example4,
        /// lgpif_model1, lgpif_model2).
        #[arg(long)]
        config: String,
        #[command(flatten)]
        rule: RuleArgs,
        /// Gauss-Hermite nodes; 1 switches the random effect off.
        #[arg(long)]
        nodes: Option<usize>,
        /// Decimals in the table.
        #[arg(long, default_value_t = 3)]
        digits: usize,
        /// Comma-separated relativities whose HMSE is added to the footer.
        #[arg(long, allow_hyphen_values = true)]
        relativities: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Level path of a claim history. Without rule flags the -1/+2/2
    /// system with z = 20 entered at level 10 is used.
    Trace {
        #[command(flatten)]
        rule: RuleArgs,
        /// Claim counts N_1, N_2, ... separated by commas.
        #[arg(long, allow_hyphen_values = true)]
        claims: String,
        /// Also print the transition matrix at this claim mean.
        #[arg(long)]
        matrix: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte-Carlo check of the level distribution and HMSE.
    Simulate {
        #[arg(long)]
        config: String,
        #[command(flatten)]
        rule: RuleArgs,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        policyholders: Option<u64>,
        #[arg(long)]
        burn_in_years: Option<u32>,
        /// Comma-separated relativities to evaluate instead of the optimal
        /// ones.
        #[arg(long, allow_hyphen_values = true)]
        relativities: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Recompute a reference table (1a-2c, 7a-8b) for pen = 0..3 and
    /// compare.
    Reproduce {
        table: String,
        #[arg(long)]
        nodes: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// State space, transition matrix, stationary vector, quadrature grid
    /// or risk classes. Without a config the -1/+2/1 system with z = 7 is
    /// used.
    Inspect {
        #[arg(long)]
        config: Option<String>,
        #[command(flatten)]
        rule: RuleArgs,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long, value_enum, default_value_t = InspectView::States)]
        show: InspectView,
        /// Claim mean for the matrix and stationary views. Defaults to the
        /// first class of the config, or 0.1.
        #[arg(long)]
        mean: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn parse_relativities(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Usage(format!("relativity `{}` is not a finite number", v.trim())))
        })
        .collect()
}

fn load(config: &str, overrides: Overrides) -> Result<bmslab::config::RunConfig> {
    let mut doc = ConfigDocument::resolve(config)?;
    doc.apply(&overrides);
    doc.validate()
}

fn run(cli: Cli) -> Result<(Output, Option<PathBuf>)> {
    match cli.command {
        Command::Tabulate {
            config,
            rule,
            nodes,
            digits,
            relativities,
            output,
        } => {
            let relativities = relativities.as_deref().map(parse_relativities).transpose()?;
            let run = load(
                &config,
                Overrides {
                    nodes,
                    ..rule.overrides()?
                },
            )?;
            let out = commands::tabulate(&run, output.format, digits, relativities.as_deref())?;
            Ok((out, output.out))
        }
        Command::Trace {
            rule,
            claims,
            matrix,
            output,
        } => {
            let claims = commands::parse_claims(&claims)?;
            let rule = rule.rule((20, 2, 2, 10))?;
            Ok((commands::trace(rule, &claims, output.format, matrix)?, output.out))
        }
        Command::Simulate {
            config,
            rule,
            nodes,
            seed,
            policyholders,
            burn_in_years,
            relativities,
            output,
        } => {
            let relativities = relativities.as_deref().map(parse_relativities).transpose()?;
            let run = load(
                &config,
                Overrides {
                    nodes,
                    seed,
                    policyholders,
                    burn_in_years,
                    ..rule.overrides()?
                },
            )?;
            let out = commands::simulate_report(&run, output.format, relativities.as_deref())?;
            Ok((out, output.out))
        }
        Command::Reproduce { table, nodes, output } => {
            let id: TableId = table.parse()?;
            Ok((commands::reproduce(id, nodes, output.format)?, output.out))
        }
        Command::Inspect {
            config,
            rule,
            nodes,
            show,
            mean,
            output,
        } => {
            let (rule, run) = match config {
                Some(config) => {
                    let run = load(
                        &config,
                        Overrides {
                            nodes,
                            ..rule.overrides()?
                        },
                    )?;
                    (run.rule, Some(run))
                }
                None => (rule.rule((7, 2, 1, 0))?, None),
            };
            let mean = mean
                .or_else(|| run.as_ref().map(|r| r.portfolio.classes()[0].frequency_mean))
                .unwrap_or(0.1);
            let out = commands::inspect(rule, run.as_ref(), show, mean, output.format)?;
            Ok((out, output.out))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli).and_then(|(output, path)| {
        match &path {
            Some(path) => std::fs::write(path, &output.text).map_err(|source| CliError::Write {
                path: path.clone(),
                source,
            })?,
            None => {
                let mut stdout = std::io::stdout().lock();
                // A closed pipe is not worth an error message.
                let _ = stdout.write_all(output.text.as_bytes());
            }
        }
        Ok(output.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
