//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bodynfc::scenario::{
    build_coil, compare_coils, field_map_for, load_scenario, render_report, run_scenario,
    write_bundle, FieldMapConfig, ScenarioError,
};

#[derive(Parser)]
#[command(name = "bodynfc", version, about = "Body-scale NFC scenario simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its output bundle.
    Simulate {
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: out/<scenario name>].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the field of one coil on a grid above it.
    Fieldmap {
        scenario: PathBuf,
        #[arg(long)]
        coil: String,
        /// Points per axis as NX,NY,NZ.
        #[arg(long, value_parser = parse_grid)]
        grid: [usize; 3],
        #[arg(long, default_value_t = 0.002)]
        z_min_m: f64,
        #[arg(long, default_value_t = 0.05)]
        z_max_m: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Compare field decay of the scenario's meander and spiral coils.
    CompareCoils { scenario: PathBuf },
    /// Verify a finished output bundle and re-render its tables.
    Report { dir: PathBuf },
}

fn parse_grid(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| format!("{p:?} is not a count")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, z] if x > 0 && y > 0 && z > 0 => Ok([x, y, z]),
        _ => Err("expected three positive counts NX,NY,NZ".into()),
    }
}

fn simulate(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), ScenarioError> {
    let s = load_scenario(path)?;
    let seed = seed.unwrap_or(s.seed);
    let bundle = run_scenario(&s, seed)?;
    let dir = out.unwrap_or_else(|| Path::new("out").join(&s.name));
    let manifest = write_bundle(&bundle, &dir)?;
    println!("scenario {} seed {seed}", s.name);
    let readable = bundle.links.iter().filter(|l| l.link.readable()).count();
    println!("links: {readable}/{} readable", bundle.links.len());
    if let Some(c) = &bundle.coverage {
        println!("coverage: {}/{} ({:.1}%)", c.readable_count(), c.points.len(), 100.0 * c.fraction());
    }
    if let Some(b) = &bundle.bend {
        println!("bend sweep: max |dk/k| = {:.2}%", 100.0 * b.max_rel_change());
    }
    if let Some(c) = &bundle.compare {
        println!("decay length ratio: {:.4}", c.ratio);
    }
    if let Some(p) = &bundle.picoring {
        println!(
            "picoring: {} frames, airtime {:.2}%{}",
            p.stream.frames,
            100.0 * p.stream.airtime_fraction(p.frame_period),
            if p.stream.aborted { " (link down)" } else { "" }
        );
    }
    println!("wrote {} files to {}", manifest.files.len() + 1, dir.display());
    Ok(())
}

fn fieldmap(path: &Path, coil: &str, grid: [usize; 3], z_min_m: f64, z_max_m: f64, out: &Path) -> Result<(), ScenarioError> {
    let s = load_scenario(path)?;
    let cfg = s
        .coil(coil)
        .ok_or_else(|| ScenarioError::Validation(format!("unknown coil {coil:?}")))?;
    if !(z_min_m.is_finite() && z_max_m.is_finite() && z_min_m <= z_max_m) {
        return Err(ScenarioError::Validation("need z_min_m <= z_max_m".into()));
    }
    let built = build_coil(cfg, s.frequency_hz)?;
    let spec = FieldMapConfig {
        coil: coil.to_owned(),
        grid,
        z_min_m,
        z_max_m,
    };
    let samples = field_map_for(&built, &spec)?;
    std::fs::create_dir_all(out).map_err(|e| ScenarioError::Io {
        path: out.display().to_string(),
        message: e.to_string(),
    })?;
    let file = out.join(format!("fieldmap_{coil}.csv"));
    std::fs::write(&file, bodynfc::magnetics::field_map_csv(&samples)).map_err(|e| ScenarioError::Io {
        path: file.display().to_string(),
        message: e.to_string(),
    })?;
    println!("wrote {} samples to {}", samples.len(), file.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), ScenarioError> {
    match cli.command {
        Command::Simulate { scenario, seed, out } => simulate(&scenario, seed, out),
        Command::Fieldmap {
            scenario,
            coil,
            grid,
            z_min_m,
            z_max_m,
            out,
        } => fieldmap(&scenario, &coil, grid, z_min_m, z_max_m, &out),
        Command::CompareCoils { scenario } => {
            let s = load_scenario(&scenario)?;
            print!("{}", compare_coils(&s)?.to_text());
            Ok(())
        }
        Command::Report { dir } => {
            print!("{}", render_report(&dir)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
