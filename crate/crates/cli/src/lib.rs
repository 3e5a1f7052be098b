//! `ramanlab`: batch runs of the light-shift, Monte Carlo, thermometry and
//! DSH linewidth tools with reproducible seeds and a manifest per run.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{Outcome, RunContext};
use crate::config::FileConfig;
pub use crate::error::{CliError, Result};
use crate::manifest::{code_version, config_hash, timestamp, RunManifest, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(
    name = "ramanlab",
    version,
    about = "Light-shift, dressed-state Monte Carlo, sideband thermometry and DSH linewidth runs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    /// Reuse finished map cells from an earlier run with the same configuration.
    #[arg(long, global = true)]
    pub resume: bool,

    /// Input file for spectrum-fit and dsh-fit, overriding the configuration.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Light-shift models over (s, detuning, kinetic energy).
    LightshiftScan,
    /// One Monte Carlo ensemble at the configured operating point.
    McSingle,
    /// Loss and scattering rates over the (s, detuning) grid.
    McMap,
    /// Seven-Lorentzian fit and sideband thermometry of a Raman spectrum.
    SpectrumFit,
    /// Beat spectrum of a synthetic laser.
    DshSimulate,
    /// Noise-amplitude fit to a measured beat spectrum.
    DshFit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::LightshiftScan => "lightshift-scan",
            Command::McSingle => "mc-single",
            Command::McMap => "mc-map",
            Command::SpectrumFit => "spectrum-fit",
            Command::DshSimulate => "dsh-simulate",
            Command::DshFit => "dsh-fit",
        }
    }
}

/// Loads the configuration and applies flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<(FileConfig, PathBuf)> {
    let (mut cfg, dir) = match &cli.config {
        Some(p) => (
            FileConfig::load(p)?,
            p.parent().map(|d| d.to_path_buf()).unwrap_or_default(),
        ),
        None => (FileConfig::default(), PathBuf::new()),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(input) = &cli.input {
        let abs = std::path::absolute(input).map_err(|source| CliError::Io {
            context: format!("resolving {}", input.display()),
            source,
        })?;
        match cli.command {
            Command::SpectrumFit => cfg.spectrum.input = Some(abs),
            Command::DshFit => cfg.dsh.input = Some(abs),
            other => {
                return Err(CliError::Config(format!("--input is not used by {}", other.name())));
            }
        }
    }
    // reject inconsistent settings before any work starts
    match cli.command {
        Command::DshSimulate | Command::DshFit => {
            cfg.dsh.dsh_config()?;
            cfg.dsh.amplitudes()?;
            cfg.dsh.init_amplitudes()?;
        }
        Command::LightshiftScan => {
            cfg.lightshift.s.values("lightshift.s")?;
            cfg.lightshift.detuning_hz.values("lightshift.detuning_hz")?;
        }
        Command::McMap => {
            cfg.mc.s_grid.values("mc.s_grid")?;
            cfg.mc.detuning_grid_hz.values("mc.detuning_grid_hz")?;
        }
        Command::McSingle | Command::SpectrumFit => {}
    }
    Ok((cfg, dir))
}

/// Runs one command and writes its manifest. Returns the manifest, whose
/// `converged` flag tells whether every fit converged.
pub fn run(cli: &Cli) -> Result<RunManifest> {
    let started_at = timestamp();
    let (cfg, config_dir) = resolve_config(cli)?;
    let hash = config_hash(&cfg)?;
    std::fs::create_dir_all(&cli.out_dir).map_err(|source| CliError::Io {
        context: format!("creating {}", cli.out_dir.display()),
        source,
    })?;
    let ctx = RunContext {
        cfg,
        config_dir,
        out_dir: cli.out_dir.clone(),
        resume: cli.resume,
        config_hash: hash.clone(),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let outcome: Outcome = pool.install(|| match cli.command {
        Command::LightshiftScan => commands::lightshift_scan(&ctx),
        Command::McSingle => commands::mc_single(&ctx),
        Command::McMap => commands::mc_map(&ctx),
        Command::SpectrumFit => commands::spectrum_fit(&ctx),
        Command::DshSimulate => commands::dsh_simulate(&ctx),
        Command::DshFit => commands::dsh_fit(&ctx),
    })?;
    let mut outputs = outcome.outputs;
    outputs.push(MANIFEST_FILE.into());
    let manifest = RunManifest {
        command: cli.command.name().into(),
        config_hash: hash,
        code_version: code_version(),
        started_at,
        finished_at: timestamp(),
        seed: ctx.cfg.seed,
        outputs,
        converged: outcome.converged,
        config: ctx.cfg,
    };
    manifest.write(&cli.out_dir)?;
    Ok(manifest)
}
