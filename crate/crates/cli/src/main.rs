use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gridfreq::io::{
    parse_config, read_trace_csv, write_results, write_trace, write_trace_csv, Project,
    ResultBundle,
};
use gridfreq::lti::Trace;
use gridfreq::{pipeline, Error};

const SEED_ENV: &str = "GRIDFREQ_SEED";

#[derive(Parser)]
#[command(
    name = "gridfreq",
    version,
    about = "Frequency-response modelling and identification of multi-area power systems"
)]
struct Cli {
    /// Log progress to stderr
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write the trace as CSV
    Simulate {
        config: PathBuf,
        scenario: String,
        /// Output file (stdout if omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic measurement trace, optionally with noise
    GenSynth {
        config: PathBuf,
        scenario: String,
        /// Noise standard deviation, pu
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Noise seed (default: $GRIDFREQ_SEED, then the config seed)
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Step 1: fit every unit marked for identification
    IdentifyUnits {
        config: PathBuf,
        trace: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Step 2: fit area inertia and damping
    IdentifyGrid {
        config: PathBuf,
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Step-1 result file whose unit parameters replace the configured ones
        #[arg(long)]
        units: Option<PathBuf>,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// R² and RMS error for every channel shared by two traces
    Metrics {
        model: PathBuf,
        measured: PathBuf,
        /// Also write a result directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the resolved inertia and damping bounds
    Bounds { config: PathBuf },
}

#[derive(clap::Args)]
struct FitArgs {
    /// Result directory
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Multistart seed (default: $GRIDFREQ_SEED, then the config seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Number of starts (default: from the config)
    #[arg(long)]
    starts: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}

fn load(config: &Path) -> Result<Project, Error> {
    parse_config(config)?.project()
}

fn env_seed() -> Result<Option<u64>, Error> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::validation(SEED_ENV, format!("not an unsigned integer: `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn seed(flag: Option<u64>, project: &Project) -> Result<u64, Error> {
    Ok(match flag {
        Some(s) => s,
        None => env_seed()?.unwrap_or(project.identification.rng_seed),
    })
}

fn emit(trace: &Trace, output: Option<&Path>) -> Result<(), Error> {
    match output {
        Some(p) => write_trace_csv(trace, p),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_trace(trace, &mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn fit_config(
    project: &Project,
    fit: &FitArgs,
) -> Result<gridfreq::ident::MultistartConfig, Error> {
    let mut cfg = project.identification;
    cfg.rng_seed = seed(fit.seed, project)?;
    if let Some(n) = fit.starts {
        cfg.n_starts = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_r2(r2: Option<f64>) -> String {
    r2.map_or_else(|| "n/a".into(), |v| format!("{v:.6}"))
}

fn report(bundle: &ResultBundle, dir: &Path) -> Result<(), Error> {
    let files = write_results(bundle, dir)?;
    for u in &bundle.units {
        let params: Vec<String> = u
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v:.6}"))
            .collect();
        println!(
            "{:<8} {:<15} R2={:.6}  {}",
            u.unit,
            u.kind,
            u.fit.r2,
            params.join(" ")
        );
    }
    for a in &bundle.areas {
        println!("{:<8} H={:.4} s  D={:.4} pu", a.area, a.h, a.d);
    }
    for m in &bundle.metrics {
        println!("{:<16} R2={}  RMS={:.6e}", m.channel, fmt_r2(m.r2), m.rms);
    }
    for f in files {
        log::info!("wrote {}", f.display());
    }
    Ok(())
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Simulate {
            config,
            scenario,
            output,
        } => {
            let p = load(&config)?;
            emit(&pipeline::simulate(&p, &scenario)?, output.as_deref())
        }
        Command::GenSynth {
            config,
            scenario,
            noise,
            seed: s,
            output,
        } => {
            let p = load(&config)?;
            let tr = pipeline::gen_synth(&p, &scenario, noise, seed(s, &p)?)?;
            emit(&tr, output.as_deref())
        }
        Command::IdentifyUnits { config, trace, fit } => {
            let p = load(&config)?;
            let cfg = fit_config(&p, &fit)?;
            let tr = read_trace_csv(&trace)?;
            report(&pipeline::identify_units(&p, &tr, &cfg)?, &fit.out)
        }
        Command::IdentifyGrid {
            config,
            traces,
            units,
            fit,
        } => {
            let mut p = load(&config)?;
            let cfg = fit_config(&p, &fit)?;
            let mut step1 = Vec::new();
            if let Some(path) = units {
                step1 = ResultBundle::read(&path)?.units;
                p = pipeline::apply_unit_results(&p, &step1)?;
            }
            let trs = traces
                .iter()
                .map(|t| read_trace_csv(t))
                .collect::<Result<Vec<_>, _>>()?;
            let mut bundle = pipeline::identify_grid_step(&p, &trs, &cfg)?;
            bundle.units = step1;
            report(&bundle, &fit.out)
        }
        Command::Metrics {
            model,
            measured,
            out,
        } => {
            let m = read_trace_csv(&model)?;
            let y = read_trace_csv(&measured)?;
            let bundle = pipeline::metrics_bundle(&m, &y)?;
            match out {
                Some(dir) => report(&bundle, &dir),
                None => {
                    for c in &bundle.metrics {
                        println!("{:<16} R2={}  RMS={:.6e}", c.channel, fmt_r2(c.r2), c.rms);
                    }
                    Ok(())
                }
            }
        }
        Command::Bounds { config } => {
            let p = load(&config)?;
            let b = &p.grid_bounds;
            for a in &p.areas {
                let (hl, hu) = b.get(&format!("h_{}", a.id)).unwrap_or((a.h, a.h));
                let (dl, du) = b.get(&format!("d_{}", a.id)).unwrap_or((a.d, a.d));
                println!(
                    "{:<8} H in [{hl:.4}, {hu:.4}] s  D in [{dl:.4}, {du:.4}] pu",
                    a.id
                );
            }
            Ok(())
        }
    }
}
