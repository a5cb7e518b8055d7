//! Run configuration.
//!
//! A config file is one JSON object whose keys are the [`RunConfig`] field
//! names. Values are resolved in this order, later wins:
//!
//! 1. per-experiment defaults (the acceptance parameters),
//! 2. the config file given by `--config`,
//! 3. command-line flags.
//!
//! The seed has no default.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Exact stationary law of one small chain.
    Exact,
    /// Exact stationary correlations over a grid of sizes and reservoirs.
    ExactSweep,
    /// Stationary fluctuation covariance from a replica ensemble.
    StationaryCov,
    /// Relaxation of fluctuations from a product initial state.
    Relax,
    /// Green function on the triangle.
    Green,
    /// Semidiscrete heat flow.
    Heat,
    /// Galerkin Ornstein-Uhlenbeck system.
    Ou,
    /// Randomized maximum-principle and correlation-bound suites.
    Bounds,
    /// Martingale and quadratic-variation diagnostics.
    Martingale,
    /// Identities of the sine basis and the covariance formulas.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Every field is optional in a file; [`RunConfig::resolve`] fills them all.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Option<Command>,
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub modes: Option<usize>,
    pub replicas: Option<usize>,
    pub burn_in: Option<f64>,
    pub times: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub subcommand: Command,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub modes: usize,
    pub replicas: usize,
    pub burn_in: f64,
    pub times: Vec<f64>,
    pub seed: u64,
    pub dt: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Resolved {
    pub fn to_config(&self) -> RunConfig {
        RunConfig {
            subcommand: Some(self.subcommand),
            n: Some(self.n),
            alpha: Some(self.alpha),
            beta: Some(self.beta),
            modes: Some(self.modes),
            replicas: Some(self.replicas),
            burn_in: Some(self.burn_in),
            times: Some(self.times.clone()),
            seed: Some(self.seed),
            dt: Some(self.dt),
            out: self.out.clone(),
            format: Some(self.format),
        }
    }
}

/// Acceptance parameters of each experiment. `dt = 0` means "choose
/// automatically".
pub fn defaults(cmd: Command) -> RunConfig {
    let base = |n: usize, alpha: f64, beta: f64, modes: usize, replicas: usize, times: Vec<f64>| RunConfig {
        subcommand: Some(cmd),
        n: Some(n),
        alpha: Some(alpha),
        beta: Some(beta),
        modes: Some(modes),
        replicas: Some(replicas),
        burn_in: Some(1.0),
        times: Some(times),
        seed: None,
        dt: Some(0.0),
        out: None,
        format: Some(Format::Csv),
    };
    match cmd {
        Command::Exact => base(3, 0.0, 1.0, 4, 0, vec![0.0]),
        Command::ExactSweep => base(12, 0.0, 1.0, 4, 0, vec![0.0]),
        Command::StationaryCov => base(100, 0.5, 0.5, 4, 20_000, vec![0.0]),
        Command::Relax => base(128, 0.1, 0.9, 3, 20_000, vec![0.05, 0.1, 0.2]),
        Command::Green => base(64, 0.0, 1.0, 4, 0, vec![0.0]),
        Command::Heat => base(20, 0.0, 1.0, 4, 0, vec![0.01, 0.05, 0.1, 0.5]),
        Command::Ou => base(0, 0.0, 1.0, 16, 0, vec![200.0]),
        Command::Bounds => base(64, 0.0, 1.0, 4, 100, vec![0.1]),
        Command::Martingale => base(128, 0.1, 0.9, 1, 1_000, vec![0.5]),
        Command::Spectral => base(0, 0.0, 1.0, 16, 0, vec![0.3, 0.7]),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(mut self, other: &RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f.clone(); } )* };
        }
        take!(subcommand, n, alpha, beta, modes, replicas, burn_in, times, seed, dt, out, format);
        self
    }

    /// Applies the experiment defaults underneath and validates.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let cmd = self.subcommand.ok_or_else(|| CliError::Config("no subcommand given".into()))?;
        let c = defaults(cmd).overlay(self);
        let bad = |m: String| Err(CliError::Config(m));
        let seed = match c.seed {
            Some(s) => s,
            None => return bad("a seed is required (--seed or \"seed\" in the config file)".into()),
        };
        let r = Resolved {
            subcommand: cmd,
            n: c.n.unwrap(),
            alpha: c.alpha.unwrap(),
            beta: c.beta.unwrap(),
            modes: c.modes.unwrap(),
            replicas: c.replicas.unwrap(),
            burn_in: c.burn_in.unwrap(),
            times: c.times.unwrap(),
            seed,
            dt: c.dt.unwrap(),
            out: c.out,
            format: c.format.unwrap(),
        };
        for (name, v) in [("alpha", r.alpha), ("beta", r.beta)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(r.burn_in.is_finite() && r.burn_in >= 0.0) {
            return bad(format!("burn_in must be finite and >= 0, got {}", r.burn_in));
        }
        if !(r.dt.is_finite() && r.dt >= 0.0) {
            return bad(format!("dt must be finite and >= 0, got {}", r.dt));
        }
        if r.times.is_empty() || r.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad(format!("times must be a nonempty list of finite nonnegative values, got {:?}", r.times));
        }
        if r.times.windows(2).any(|w| w[1] < w[0]) {
            return bad(format!("times must be sorted, got {:?}", r.times));
        }
        if r.modes == 0 {
            return bad("modes must be >= 1".into());
        }
        let needs_n = !matches!(cmd, Command::Ou | Command::Spectral);
        if needs_n && r.n < 2 {
            return bad(format!("n must be >= 2, got {}", r.n));
        }
        match cmd {
            Command::Exact | Command::ExactSweep if r.n > ssep_core::exact::N_MAX => {
                bad(format!("exact solutions need n <= {}, got {}", ssep_core::exact::N_MAX, r.n))
            }
            Command::StationaryCov | Command::Relax | Command::Martingale if r.replicas < 2 => {
                bad(format!("need at least 2 replicas, got {}", r.replicas))
            }
            Command::StationaryCov | Command::Relax if r.modes >= r.n => {
                bad(format!("modes must be < n, got {} modes for n = {}", r.modes, r.n))
            }
            Command::Bounds if r.replicas == 0 => bad("bounds needs replicas >= 1 random cases".into()),
            Command::Ou if r.times[r.times.len() - 1] <= 0.0 => bad("ou needs a positive run length".into()),
            Command::Martingale if r.times[r.times.len() - 1] <= 0.0 => {
                bad("martingale needs a positive horizon".into())
            }
            _ => Ok(r),
        }
    }
}

/// Command-line interface. Flags override the config file.
#[derive(Debug, Parser)]
#[command(name = "ssep", version, about = "Boundary-driven exclusion experiments")]
pub struct Cli {
    /// Experiment to run; overrides `subcommand` in the config file.
    #[arg(value_enum)]
    pub subcommand: Option<Command>,
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Number of sine modes J.
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<f64>,
    /// Comma-separated observation times.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// OU time step; 0 picks the largest stable step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; never changes the results.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Cli {
    pub fn flags(&self) -> RunConfig {
        RunConfig {
            subcommand: self.subcommand,
            n: self.n,
            alpha: self.alpha,
            beta: self.beta,
            modes: self.modes,
            replicas: self.replicas,
            burn_in: self.burn_in,
            times: self.times.clone(),
            seed: self.seed,
            dt: self.dt,
            out: self.out.clone(),
            format: self.format,
        }
    }

    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        Ok(file.overlay(&self.flags()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_mandatory() {
        let c = RunConfig { subcommand: Some(Command::Green), ..Default::default() };
        assert!(matches!(c.resolve(), Err(CliError::Config(_))));
        let c = RunConfig { seed: Some(1), ..c };
        assert_eq!(c.resolve().unwrap().n, 64);
    }

    #[test]
    fn flags_override_file() {
        let file: RunConfig = serde_json::from_str(r#"{"subcommand":"relax","n":40,"seed":3,"times":[0.1]}"#).unwrap();
        let cli = Cli::parse_from(["ssep", "--n", "50", "--times", "0.2,0.3"]);
        let r = file.overlay(&cli.flags()).resolve().unwrap();
        assert_eq!(r.subcommand, Command::Relax);
        assert_eq!((r.n, r.seed), (50, 3));
        assert_eq!(r.times, vec![0.2, 0.3]);
        assert_eq!(r.replicas, 20_000);
    }

    #[test]
    fn resolved_config_round_trips() {
        let r = RunConfig { subcommand: Some(Command::Ou), seed: Some(9), ..Default::default() }.resolve().unwrap();
        let text = serde_json::to_string(&r.to_config()).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.resolve().unwrap(), r);
    }

    #[test]
    fn rejects_bad_values() {
        let base = RunConfig { subcommand: Some(Command::Relax), seed: Some(1), ..Default::default() };
        for bad in [
            RunConfig { alpha: Some(1.5), ..base.clone() },
            RunConfig { times: Some(vec![0.2, 0.1]), ..base.clone() },
            RunConfig { n: Some(3), ..base.clone() },
            RunConfig { subcommand: Some(Command::Exact), n: Some(20), ..base.clone() },
        ] {
            assert!(matches!(bad.resolve(), Err(CliError::Config(_))), "{bad:?}");
        }
        assert!(serde_json::from_str::<RunConfig>(r#"{"seeds":1}"#).is_err());
    }
}
