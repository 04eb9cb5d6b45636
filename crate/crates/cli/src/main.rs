use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mdi_keyrate::optimizer::{Candidate, Mode, SearchSpace};
use mdi_keyrate_cli::commands::{
    run_eval, run_sweep, run_table, run_verify, sweep_csv, sweep_line, table_csv, SWEEP_HEADER,
};
use mdi_keyrate_cli::exit;
use mdi_keyrate_cli::output::provenance;
use mdi_keyrate_cli::scenario::{parse_f64, Grid, ParseError, Scenario};

#[derive(Parser)]
#[command(name = "mdi-keyrate", version, about = "Finite-key MDI-QKD key rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// builtin name (mao2018, zhou2016, kappa) or scenario file
    #[arg(long, default_value = "mao2018")]
    scenario: String,
    /// output file; standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// random draws per optimised point
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    kx: Option<usize>,
    #[arg(long)]
    kz: Option<usize>,
    /// G (independent ladders) or R (shared ladder)
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// optimise the key rate over a distance grid
    Sweep {
        #[command(flatten)]
        common: Common,
        /// start:stop:step in km
        #[arg(long)]
        grid: Option<String>,
    },
    /// optimised rates for several (k_X, k_Z, mode) rows at given distances
    Table {
        #[command(flatten)]
        common: Common,
        /// row as KX,KZ,MODE; repeatable (defaults to the scenario's space)
        #[arg(long = "config")]
        configs: Vec<String>,
        /// comma-separated distances in km; empty for none
        #[arg(long)]
        distances: Option<String>,
        #[arg(long)]
        grid: Option<String>,
    },
    /// run the oracle dominance and algebraic identity suites
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// dominance instances (identity ladders per k are capped at 200)
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// evaluate one point at explicit parameters, without optimisation
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        distance: f64,
        /// X intensities, semicolon or comma separated, descending
        #[arg(long)]
        mu_x: String,
        #[arg(long)]
        p_x: String,
        #[arg(long)]
        mu_z: String,
        #[arg(long)]
        p_z: String,
        /// basis probability p_Z
        #[arg(long)]
        basis_z: f64,
    },
}

fn bad(msg: String) -> anyhow::Error {
    ParseError(msg).into()
}

fn scenario_from(common: &Common) -> Result<Scenario> {
    let mut s = Scenario::load(&common.scenario)?;
    if let Some(seed) = common.seed {
        s.config.seed = seed;
    }
    if let Some(n) = common.samples {
        s.config.samples = n;
    }
    if let Some(k) = common.kx {
        s.space.k_x = k;
    }
    if let Some(k) = common.kz {
        s.space.k_z = k;
    }
    if let Some(m) = &common.mode {
        s.space.mode = m.parse::<Mode>().map_err(|e| bad(e.to_string()))?;
    }
    s.validate()?;
    Ok(s)
}

fn parse_space(base: &SearchSpace, text: &str) -> Result<SearchSpace> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [kx, kz, mode] = parts.as_slice() else {
        return Err(bad(format!("config {text:?} is not KX,KZ,MODE")));
    };
    let kx = kx.parse().map_err(|_| bad(format!("config {text:?}: bad k_X")))?;
    let kz = kz.parse().map_err(|_| bad(format!("config {text:?}: bad k_Z")))?;
    let mode = mode.parse().map_err(|e: mdi_keyrate::Error| bad(e.to_string()))?;
    let space = SearchSpace {
        k_x: kx,
        k_z: kz,
        mode,
        ..*base
    };
    space.validate().map_err(|e| bad(format!("config {text:?}: {e}")))?;
    Ok(space)
}

fn parse_values(key: &str, text: &str) -> Result<Vec<f64>> {
    let t = text.replace(',', ";");
    if t.trim().is_empty() {
        return Ok(Vec::new());
    }
    t.split(';').map(|v| parse_f64(key, v.trim())).collect()
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout()
            .write_all(text.as_bytes())
            .context("writing standard output"),
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Sweep { common, grid } => {
            let mut s = scenario_from(&common)?;
            if let Some(g) = grid {
                s.grid = g.parse::<Grid>()?;
            }
            let rows = run_sweep(&s, &s.grid.points());
            emit(common.out.as_deref(), &sweep_csv(&s, &rows))?;
        }
        Command::Table {
            common,
            configs,
            distances,
            grid,
        } => {
            let mut s = scenario_from(&common)?;
            if let Some(g) = grid {
                s.grid = g.parse::<Grid>()?;
            }
            let spaces = if configs.is_empty() {
                vec![s.space]
            } else {
                configs
                    .iter()
                    .map(|c| parse_space(&s.space, c))
                    .collect::<Result<_>>()?
            };
            let distances = match distances {
                Some(d) => parse_values("distances", &d)?,
                None => s.grid.points(),
            };
            let rates = run_table(&s, &spaces, &distances);
            emit(common.out.as_deref(), &table_csv(&s, &spaces, &distances, &rates))?;
        }
        Command::Verify { seed, samples, out } => {
            let outcome = run_verify(seed, samples);
            emit(out.as_deref(), &outcome.text)?;
            if !outcome.passed {
                return Ok(exit::VIOLATIONS);
            }
        }
        Command::Eval {
            common,
            distance,
            mu_x,
            p_x,
            mu_z,
            p_z,
            basis_z,
        } => {
            let s = scenario_from(&common)?;
            let candidate = Candidate {
                mu_x: parse_values("mu-x", &mu_x)?,
                p_x: parse_values("p-x", &p_x)?,
                mu_z: parse_values("mu-z", &mu_z)?,
                p_z: parse_values("p-z", &p_z)?,
                basis_z,
            };
            let row = run_eval(&s, &candidate, distance).map_err(|e| bad(e.to_string()))?;
            let text = format!("{}{SWEEP_HEADER}\n{}\n", provenance(&s, "eval"), sweep_line(&row));
            emit(common.out.as_deref(), &text)?;
        }
    }
    Ok(exit::OK)
}

fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.downcast_ref::<ParseError>().is_some()) {
        exit::PARSE
    } else if err.chain().any(|e| e.downcast_ref::<io::Error>().is_some()) {
        exit::IO
    } else {
        exit::PARSE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
