use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dissicert_cli::commands::{EXIT_USAGE, DEFAULT_SEED};
use dissicert_cli::report::to_machine;
use dissicert_cli::{
    cmd_certify, cmd_detect, cmd_simulate, cmd_steady_state, generate_heat_instance, load_problem, CertifyFlags,
    CliError, ControlProfile, HeatInstanceSpec, OutputSpec, ProblemFile, SimulateFlags,
};

#[derive(Parser)]
#[command(name = "dissicert", version, about = "Certify strict dissipativity of linear-quadratic optimal control problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Output {
    Human,
    Machine,
}

#[derive(Args)]
struct Common {
    /// Problem file (JSON).
    #[arg(long)]
    problem: PathBuf,
    /// JSON object of tolerance fields overriding those of the problem.
    #[arg(long, value_name = "PATH")]
    tol_overrides: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "human")]
    output: Output,
}

#[derive(Subcommand)]
enum Command {
    /// Run the certification pipeline.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Build P from the detectability of (A, C) instead of reading it.
        #[arg(long)]
        from_detectability: bool,
        /// Exit 2 unless the storage is bounded from below.
        #[arg(long)]
        require_bounded: bool,
        /// Number of seeded trajectory scenarios to check the certificate on.
        #[arg(long, value_name = "N", default_value_t = 0)]
        validate: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Solve the optimal steady-state problem.
    SteadyState {
        #[command(flatten)]
        common: Common,
    },
    /// Check detectability of (A, C) and build a storage operator from it.
    Detect {
        #[command(flatten)]
        common: Common,
    },
    /// Check the integral dissipation inequality along seeded trajectories.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Machine report of a previous certify run.
        #[arg(long, value_name = "PATH")]
        certificate: Option<PathBuf>,
        #[arg(long)]
        from_detectability: bool,
        #[arg(long, value_name = "N", default_value_t = 100)]
        validate: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Write a problem file for the Galerkin-truncated heat equation.
    GenerateHeat {
        #[arg(long)]
        n_modes: usize,
        #[arg(long, default_value_t = 1.0)]
        diffusion: f64,
        /// first_<k> or coefficients:<c1>,<c2>,...
        #[arg(long, default_value = "first_1")]
        control: ControlProfile,
        /// full or first_<k>.
        #[arg(long, default_value = "full")]
        observe: OutputSpec,
        /// Comma-separated entries of z.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z: Option<Vec<f64>>,
        /// Comma-separated entries of v.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v: Option<Vec<f64>>,
        /// Output path; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn render<S: serde::Serialize>(output: Output, report: &S, human: impl FnOnce() -> String) -> String {
    match output {
        Output::Machine => to_machine(report),
        Output::Human => human(),
    }
}

fn run(cli: Cli) -> Result<(String, i32), CliError> {
    match cli.command {
        Command::Certify {
            common,
            from_detectability,
            require_bounded,
            validate,
            seed,
        } => {
            let problem = load_problem(&common.problem, common.tol_overrides.as_deref())?;
            let flags = CertifyFlags {
                from_detectability,
                require_bounded,
                validate,
                seed,
            };
            let r = cmd_certify(&problem, &flags)?.report;
            Ok((render(common.output, &r, || r.to_human()), r.exit_code))
        }
        Command::SteadyState { common } => {
            let problem = load_problem(&common.problem, common.tol_overrides.as_deref())?;
            let r = cmd_steady_state(&problem);
            Ok((render(common.output, &r, || r.to_human()), r.exit_code))
        }
        Command::Detect { common } => {
            let problem = load_problem(&common.problem, common.tol_overrides.as_deref())?;
            let r = cmd_detect(&problem);
            Ok((render(common.output, &r, || r.to_human()), r.exit_code))
        }
        Command::Simulate {
            common,
            certificate,
            from_detectability,
            validate,
            seed,
        } => {
            let problem = load_problem(&common.problem, common.tol_overrides.as_deref())?;
            let flags = SimulateFlags {
                from_detectability,
                scenarios: validate,
                seed,
            };
            let r = cmd_simulate(&problem, certificate.as_deref(), &flags)?;
            Ok((render(common.output, &r, || r.to_human()), r.exit_code))
        }
        Command::GenerateHeat {
            n_modes,
            diffusion,
            control,
            observe,
            z,
            v,
            out,
        } => {
            let spec = HeatInstanceSpec {
                n_modes,
                control_profile: control,
                output: observe,
                diffusion,
                z,
                v,
            };
            let ocp = generate_heat_instance(&spec)?;
            let text = ProblemFile::from_instance(spec.name(), &ocp).to_json();
            match out {
                Some(path) => {
                    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
                    Ok((String::new(), 0))
                }
                None => Ok((text, 0)),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DISSICERT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok((text, code)) => {
            print!("{text}");
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
