use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use linkbo::config::ExperimentConfig;
use linkbo::output;
use linkbo::stream::BusSpec;
use linkbo::table2::{table2, table2_markdown};
use linkbo::tracefile;
use linkbo_core::channel::ChannelParams;
use linkbo_core::endpoint::{decode_trace, DeviceConfig, RxEvent};
use linkbo_core::frame::Message;
use linkbo_core::SimTime;

#[derive(Parser)]
#[command(name = "linkbo", version, about = "LinkBo single-wire bus simulator and experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a YAML config.
    Run {
        config: PathBuf,
        /// Output directory for CSVs, plots and summary.md.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override messages per operating point.
        #[arg(long)]
        repetitions: Option<usize>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Print the protocol comparison table.
    Table2,
    /// Decode a `time_ps,value` trace CSV with a single receiver.
    Decode {
        trace: PathBuf,
        #[arg(long, default_value_t = 3e6)]
        frequency: f64,
        /// Use the 336 ns clock (3.36 µs slots).
        #[arg(long)]
        exact_rate: bool,
        #[arg(long, default_value_t = 10)]
        psc: u32,
        /// Receiver clock phase in ps.
        #[arg(long, default_value_t = 0)]
        phase: u64,
    },
    /// Simulate one message and write the bus trace as CSV.
    Trace {
        /// Message literal: hp:0xAB, lp:0x01,0x02 or addr:0x2A.
        #[arg(long)]
        message: Message,
        /// Analog wire of this length in metres; ideal bus when omitted.
        #[arg(long)]
        length: Option<f64>,
        #[arg(long, default_value_t = 3e6)]
        frequency: f64,
        #[arg(long, default_value_t = 300.0)]
        duration_us: f64,
        /// Digital trace CSV.
        #[arg(long)]
        out: PathBuf,
        /// Far-end voltage CSV (analog bus only).
        #[arg(long)]
        volts: Option<PathBuf>,
    },
}

enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, out, seed, repetitions, parallel } => {
            let mut cfg = ExperimentConfig::load(&config).map_err(Failure::Config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = repetitions {
                cfg.repetitions = r;
            }
            cfg.validate().map_err(Failure::Config)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(parallel.unwrap_or(0))
                .build()
                .map_err(|e| Failure::Config(e.into()))?;
            let results = pool.install(|| output::run(&cfg)).map_err(Failure::Run)?;
            let files = output::write_results(&out, &cfg, &results).map_err(Failure::Run)?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Table2 => {
            print!("{}", table2_markdown(&table2()));
            Ok(())
        }
        Command::Decode { trace, frequency, exact_rate, psc, phase } => {
            let file =
                File::open(&trace).with_context(|| format!("opening {}", trace.display())).map_err(Failure::Config)?;
            let t = tracefile::read_digital(BufReader::new(file)).map_err(Failure::Config)?;
            let config = DeviceConfig {
                nominal_frequency: frequency,
                clock_period_ps: exact_rate.then_some(336_000),
                psc_division: psc,
                phase_offset: phase,
                ..DeviceConfig::default()
            };
            let clock = config.clock().map_err(|e| Failure::Config(anyhow::anyhow!("{e}")))?;
            let mut stdout = io::stdout().lock();
            for (at, ev) in decode_trace(&t, &clock, &config) {
                let _ = writeln!(stdout, "{:>12.3} us  {}", at.as_ps() as f64 / 1e6, describe(&ev));
            }
            Ok(())
        }
        Command::Trace { message, length, frequency, duration_us, out, volts } => {
            let bus = match length {
                Some(l) => BusSpec::Analog(ChannelParams::at_length(l)),
                None => BusSpec::Ideal,
            };
            let tx = DeviceConfig { nominal_frequency: frequency, ..DeviceConfig::default() };
            let rx = DeviceConfig { phase_offset: (0.41e12 / frequency) as u64, ..tx.clone() };
            let cap =
                tracefile::capture(bus, tx, rx, &message, SimTime((duration_us * 1e6) as u64)).map_err(Failure::Run)?;
            let write = |path: &PathBuf, f: &dyn Fn(BufWriter<File>) -> Result<()>| -> Result<()> {
                let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                f(BufWriter::new(file))
            };
            write(&out, &|w| tracefile::write_digital(&cap.digital, w)).map_err(Failure::Run)?;
            if let Some(p) = volts {
                let v = cap
                    .voltages
                    .as_ref()
                    .context("voltages are only recorded on an analog bus")
                    .map_err(Failure::Config)?;
                let threshold = ChannelParams::baseline().comparator_threshold;
                write(&p, &|w| tracefile::write_analog(v, threshold, w)).map_err(Failure::Run)?;
            }
            Ok(())
        }
    }
}

fn bits(b: &[bool]) -> String {
    b.iter().map(|&x| if x { '1' } else { '0' }).collect()
}

fn describe(ev: &RxEvent) -> String {
    match ev {
        RxEvent::Synced { class, slot_cycles } => format!("sync {class:?}, slot {slot_cycles} cycles"),
        RxEvent::Received { message, acked } => {
            format!("received {message}{}", if *acked { "" } else { " (not addressed)" })
        }
        RxEvent::CrcRejected { bits: b } => format!("crc error, bits {}", bits(b)),
        RxEvent::Failed { error, bits: b } => format!("failed ({error:?}), bits {}", bits(b)),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
