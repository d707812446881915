use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use twpa_core::scenarios::{builtin, builtin_kind, parse_scenario, parse_scenario_as, run_scenario, write_outcome, Outcome, Scenario};

#[derive(Parser)]
#[command(name = "twpa", version, about = "Simulate a three-wave-mixing rf-SQUID TWPA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Band structure, phase mismatch and linear S-parameters.
    Dispersion(VerbArgs),
    /// One pump/signal transient with tone powers along the line.
    Tones(VerbArgs),
    /// Signal gain against frequency for each pump frequency.
    Gain(VerbArgs),
    /// Degenerate gain against signal phase.
    Phase(VerbArgs),
    /// Input reflection of a lone pump tone.
    Reflect(VerbArgs),
    /// Tone run and gain sweep on a uniformly loaded line.
    Uniform(VerbArgs),
    /// Run a scenario file.
    Run {
        file: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Print the TOML of a built-in scenario.
    Show { name: String },
}

#[derive(Args, Clone, Default)]
struct VerbArgs {
    /// Use this scenario file instead of the built-in settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Clone, Default)]
struct Opts {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent transient runs.
    #[arg(long)]
    workers: Option<usize>,
    /// Sampling interval in picoseconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Integrator steps per sample.
    #[arg(long)]
    substeps: Option<usize>,
    /// Re-grid the frequency sweep at the fine step.
    #[arg(long)]
    fine_grid: bool,
}

fn load(builtin_name: Option<&str>, path: Option<&PathBuf>, opts: &Opts) -> anyhow::Result<Scenario> {
    let mut sc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            match builtin_name {
                Some(name) => parse_scenario_as(&text, builtin_kind(name)?)?,
                None => parse_scenario(&text)?,
            }
        }
        None => builtin(builtin_name.expect("built-in name"))?,
    };
    if let Some(w) = opts.workers {
        sc.workers = w.max(1);
    }
    if let Some(dt) = opts.dt {
        if !(dt > 0.0) {
            bail!("--dt must be positive");
        }
        sc = sc.with_dt(dt * 1e-12);
    }
    if let Some(k) = opts.substeps {
        sc.protocol.substeps = k;
    }
    if opts.fine_grid {
        sc.sweep.refine();
    }
    if opts.out.is_some() {
        sc.out = opts.out.clone();
    }
    sc.validate()?;
    Ok(sc)
}

fn ghz(f: f64) -> f64 {
    f * 1e-9
}

fn report(outcome: &Outcome) {
    match outcome {
        Outcome::Dispersion(r) => {
            for (lo, hi) in &r.dispersion.stop_bands {
                println!("stop-band {:.3}-{:.3} GHz", ghz(*lo), ghz(*hi));
            }
            for c in &r.coherence {
                println!(
                    "fp {:.2} GHz, fs {:.2} GHz: xi {:.0}, xi(p+s) {:.1}, xi(p+i) {:.1}, 2p beat {:.1} cells",
                    ghz(c.fp), ghz(c.fs), c.xi, c.xi_p_plus_s, c.xi_p_plus_i, c.two_p_beat
                );
            }
        }
        Outcome::Tones(t) => print_tones(t),
        Outcome::Gain(r) => {
            for p in &r.profiles {
                println!(
                    "fp {:.2} GHz: peak {:.2} dB, 3 dB band {:.2}-{:.2} GHz, ripple {:.2} dB",
                    ghz(p.fp), p.peak_gain_db, ghz(p.band_3db.0), ghz(p.band_3db.1), p.ripple_db
                );
            }
            for z in &r.zoom {
                match z.ripple_spacing {
                    Some(s) => println!("fp {:.2} GHz: ripple spacing {:.0} MHz", ghz(z.fp), s * 1e-6),
                    None => println!("fp {:.2} GHz: ripple spacing undetermined", ghz(z.fp)),
                }
            }
        }
        Outcome::Phase(r) => println!(
            "fs {:.2} GHz: gain {:.2} to {:.2} dB, extinction {:.1} dB, excess over adjacent {:.2} dB",
            ghz(r.fs), r.min_gain_db, r.max_gain_db, r.extinction_db, r.excess_gain_db
        ),
        Outcome::Reflection(r) => {
            for (l, a) in r.levels.iter().enumerate() {
                let worst = r.s11_db[l].iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
                println!("pump {:.3} uA: max |S11| {:.2} dB", a * 1e6, worst);
            }
        }
        Outcome::Uniform(r) => {
            print_tones(&r.tones);
            if let Some(g) = &r.gain {
                println!("gain sweep: peak {:.2} dB", g.peak_gain_db);
            }
            println!("xi(p+s) {:.1} vs xi(p+i) {:.1}", r.xi_p_plus_s, r.xi_p_plus_i);
        }
    }
}

fn print_tones(t: &twpa_core::scenarios::ToneSummary) {
    println!(
        "fp {:.2} GHz, fs {:.2} GHz: gain {:.2} dB, S11 {:.2} dB, incident pump {:.1} dBm",
        ghz(t.fp), ghz(t.fs), t.gain_db, t.s11_db, t.pump_incident_dbm
    );
    println!(
        "harmonic conversion {:.2}%, pump depletion {:.2} dB",
        100.0 * t.harmonic_conversion,
        t.pump_depletion_db
    );
    match (&t.growth, &t.growth_error) {
        (Some(g), _) => println!(
            "growth g {:.3e} /cell, fitted gain {:.2} dB{}",
            g.g,
            g.fitted_gain_db,
            g.rejected.as_deref().map(|r| format!(" (rejected: {r})")).unwrap_or_default()
        ),
        (None, Some(e)) => println!("growth fit unavailable: {e}"),
        _ => {}
    }
}

fn execute(name: &str, sc: Scenario) -> anyhow::Result<ExitCode> {
    let dir = sc.out.clone().unwrap_or_else(|| PathBuf::from("results").join(name));
    let start = Instant::now();
    let outcome = run_scenario(&sc)?;
    let manifest = write_outcome(&sc, &outcome, start.elapsed().as_secs_f64(), &dir)?;
    report(&outcome);
    println!("wrote {} files to {}", manifest.files.len(), dir.display());
    if manifest.failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    eprintln!("{} point(s) failed:", manifest.failures.len());
    for f in &manifest.failures {
        eprintln!("  {} fp {:.3} GHz fs {:.3} GHz: {}", f.label, ghz(f.fp), ghz(f.fs), f.error);
    }
    Ok(ExitCode::from(2))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Show { name } => match twpa_core::scenarios::builtin_source(name) {
            Some(text) => {
                print!("{text}");
                Ok(ExitCode::SUCCESS)
            }
            None => Err(anyhow::anyhow!(
                "unknown scenario {name:?}; choose one of {}",
                twpa_core::scenarios::builtin_names().collect::<Vec<_>>().join(", ")
            )),
        },
        Command::Run { file, opts } => load(None, Some(file), opts).and_then(|sc| {
            let name = file.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string();
            execute(&name, sc)
        }),
        verb => {
            let (name, args) = match verb {
                Command::Dispersion(o) => ("dispersion", o),
                Command::Tones(o) => ("tones", o),
                Command::Gain(o) => ("gain", o),
                Command::Phase(o) => ("phase", o),
                Command::Reflect(o) => ("reflect", o),
                Command::Uniform(o) => ("uniform", o),
                Command::Run { .. } | Command::Show { .. } => unreachable!(),
            };
            load(Some(name), args.config.as_ref(), &args.opts).and_then(|sc| execute(name, sc))
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
