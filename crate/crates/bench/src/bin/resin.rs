use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use resin_bench::harness::parse_modes;
use resin_bench::synthetic::settled_circuit;
use resin_bench::{
    run_benchmark, write_csv, BenchResult, DroneScenario, Summary, SyntheticWorkload,
};
use resin_core::circuit::dump;
use resin_core::grounder::compile;
use resin_core::runtime::{Bridge, Bus, BusMessage, Engine, EngineConfig, Mode};
use resin_core::{check, CompiledTarget, ReactiveCircuit, SemiringInstance};

#[derive(Parser)]
#[command(name = "resin", version, about = "Resin programs on reactive circuits")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and type check a program.
    Check { file: PathBuf },
    /// Ground a program and print every target as JSON.
    Compile {
        file: PathBuf,
        #[arg(long, default_value_t = 24)]
        max_sources: usize,
    },
    /// Serve a program's targets, either over a TCP bridge or on a recorded trace.
    Run {
        file: PathBuf,
        /// Engine configuration (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "reactive")]
        mode: String,
        /// JSON lines of bus messages; `-` reads stdin. Outputs go to stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Bridge address; defaults to the configured one.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Random polynomial workload under time-varying Poisson rates.
    BenchSynthetic {
        #[arg(long, default_value_t = 100)]
        signals: usize,
        #[arg(long, default_value_t = 1000)]
        models: usize,
        #[arg(long, default_value_t = 20)]
        sources_per_model: usize,
        #[arg(long, default_value_t = 60.0)]
        seconds: f64,
        #[command(flatten)]
        common: BenchArgs,
    },
    /// Pairwise drone distance scenario.
    BenchDrones {
        #[arg(long, default_value_t = 5)]
        drones: usize,
        #[arg(long, default_value_t = 60.0)]
        seconds: f64,
        #[command(flatten)]
        common: BenchArgs,
    },
    /// Print the circuit of each target, optionally adapted to fixed rates.
    DumpCircuit {
        file: PathBuf,
        /// Comma-separated `source=rate` pairs; unlisted sources get rate 0.
        #[arg(long)]
        rates: Option<String>,
        #[arg(long, default_value_t = 5.0)]
        h: f64,
    },
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "flat,adapted,reactive")]
    modes: String,
    /// Partition width in Hz.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Metrics window in seconds.
    #[arg(long, default_value_t = 5.0)]
    window: f64,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

impl BenchArgs {
    fn config(&self, default_h: f64) -> Result<EngineConfig> {
        let mut cfg = match &self.config {
            Some(p) => EngineConfig::load(p)?,
            None => EngineConfig {
                h: default_h,
                ..Default::default()
            },
        };
        if let Some(h) = self.h {
            cfg.h = h;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn modes(&self) -> Result<Vec<Mode>> {
        parse_modes(&self.modes).map_err(anyhow::Error::msg)
    }

    fn write(&self, result: &BenchResult) -> Result<()> {
        match &self.out {
            Some(p) => write_csv(
                File::create(p).with_context(|| p.display().to_string())?,
                result,
            )?,
            None => write_csv(io::stdout().lock(), result)?,
        }
        if let Some(p) = &self.summary {
            fs::write(p, serde_json::to_string_pretty(&Summary::new(result))?)?;
        }
        Ok(())
    }
}

enum Failure {
    Diagnostics,
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Diagnostics) => ExitCode::from(1),
        Err(Failure::Runtime(e)) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Check { file } => {
            front_end(&file, EngineConfig::default().max_sources)?;
        }
        Command::Compile { file, max_sources } => {
            let targets = front_end(&file, max_sources)?;
            let text = serde_json::to_string_pretty(&targets).map_err(anyhow::Error::from)?;
            emit(&format!("{text}\n"))?;
        }
        Command::Run {
            file,
            config,
            mode,
            trace,
            listen,
        } => {
            let cfg = match config {
                Some(p) => EngineConfig::load(p).map_err(anyhow::Error::from)?,
                None => EngineConfig::default(),
            };
            let targets = front_end(&file, cfg.max_sources)?;
            let mode = match parse_modes(&mode).map_err(anyhow::Error::msg)?.as_slice() {
                [m] => *m,
                _ => return Err(anyhow::anyhow!("run takes a single mode").into()),
            };
            let engines: Vec<Engine> = targets
                .into_iter()
                .map(|t| Engine::new(t, cfg.clone(), mode))
                .collect();
            match trace {
                Some(path) => replay(engines, &path)?,
                None => serve(engines, listen.as_deref().unwrap_or(&cfg.bridge_address))?,
            }
        }
        Command::BenchSynthetic {
            signals,
            models,
            sources_per_model,
            seconds,
            common,
        } => {
            let wl = SyntheticWorkload {
                n_signals: signals,
                models,
                sources_per_model,
                seed: common.seed,
                ..Default::default()
            };
            let cfg = common.config(5.0)?;
            let trace = wl.trace(seconds).map_err(anyhow::Error::from)?;
            let result = run_benchmark(
                |mode| {
                    Ok(wl
                        .engine(cfg.clone(), mode)
                        .expect("workload validated by trace"))
                },
                &trace,
                &common.modes()?,
                common.window,
            )
            .map_err(anyhow::Error::from)?;
            common.write(&result)?;
        }
        Command::BenchDrones {
            drones,
            seconds,
            common,
        } => {
            let sc = DroneScenario {
                n_drones: drones,
                seconds,
                seed: common.seed,
                ..Default::default()
            };
            let mut cfg = common.config(8.0)?;
            if common.config.is_none() {
                // Parked pairs repeat their distance exactly.
                cfg.epsilon = 0.0;
            }
            let dt = sc.simulate().map_err(anyhow::Error::from)?;
            let compiled = sc
                .compile(2 * drones * drones)
                .map_err(anyhow::Error::from)?;
            let result = run_benchmark(
                |mode| Ok(Engine::new(compiled.clone(), cfg.clone(), mode)),
                &dt.trace,
                &common.modes()?,
                common.window,
            )
            .map_err(anyhow::Error::from)?;
            common.write(&result)?;
        }
        Command::DumpCircuit { file, rates, h } => {
            for t in front_end(&file, EngineConfig::default().max_sources)? {
                emit(&format!(
                    "# {}\n{}",
                    t.channel,
                    dump_target(&t, rates.as_deref(), h)?
                ))?;
            }
        }
    }
    Ok(())
}

fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

/// A closed downstream pipe (`resin compile x | head`) is not a failure.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>()
            .is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
    })
}

/// Reads, checks and grounds a program. Diagnostics go to stderr.
fn front_end(file: &Path, limit: usize) -> Result<Vec<CompiledTarget>, Failure> {
    let text =
        fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    let name = file.display().to_string();
    let tp = match check(&text) {
        Ok(tp) => tp,
        Err(diags) => {
            for d in diags {
                eprintln!("{}", d.render(&name));
            }
            return Err(Failure::Diagnostics);
        }
    };
    compile(&tp, limit).map_err(|e| {
        eprintln!("{}", e.to_diagnostic().render(&name));
        Failure::Diagnostics
    })
}

fn dump_target(t: &CompiledTarget, rates: Option<&str>, h: f64) -> Result<String> {
    let poly = t.wmc_polynomial();
    let Some(text) = rates else {
        return Ok(dump(&ReactiveCircuit::from_polynomial(
            &poly,
            SemiringInstance::Probability,
        )));
    };
    let names = t.variables();
    let mut r = vec![0.0; names.len()];
    for pair in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (name, value) = pair
            .split_once('=')
            .with_context(|| format!("expected source=rate, got `{pair}`"))?;
        let Some(i) = names.iter().position(|n| n == name.trim()) else {
            bail!("{} has no source `{}`", t.channel, name.trim());
        };
        r[i] = value
            .trim()
            .parse()
            .with_context(|| format!("bad rate `{value}`"))?;
    }
    if h <= 0.0 {
        bail!("partition width must be positive, got {h}");
    }
    Ok(dump(&settled_circuit(&poly, &r, h)?))
}

fn replay(mut engines: Vec<Engine>, path: &Path) -> Result<()> {
    let input: Box<dyn BufRead> = if path == Path::new("-") {
        Box::new(BufReader::new(io::stdin()))
    } else {
        Box::new(BufReader::new(
            File::open(path).with_context(|| path.display().to_string())?,
        ))
    };
    let mut out = BufWriter::new(io::stdout().lock());
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let msg: BusMessage =
            serde_json::from_str(&line).with_context(|| format!("line {}", n + 1))?;
        for e in &mut engines {
            if !e.source_channels().contains(&msg.channel) {
                continue;
            }
            if let Some(outgoing) = e.step(&msg)? {
                writeln!(out, "{}", serde_json::to_string(&outgoing)?)?;
            }
        }
    }
    Ok(())
}

fn serve(engines: Vec<Engine>, listen: &str) -> Result<()> {
    let bus = Bus::new(1024);
    let bridge = Bridge::start(bus.clone(), listen)?;
    eprintln!("listening on {}", bridge.local_addr());
    let handles = engines
        .into_iter()
        .map(|e| e.spawn(bus.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    for h in handles {
        let _ = h.join();
    }
    bridge.join();
    Ok(())
}
