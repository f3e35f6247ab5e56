use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Defaults shared by every subcommand.
pub mod defaults {
    pub const TOL: f64 = 1e-12;
    /// Below this the step-size controller works at the roundoff floor.
    pub const MIN_TOL: f64 = 1e-15;
    pub const R_MAX: f64 = 1e3;
    pub const OFFSETS: &str = "1e-2..1e-8";
    pub const GAMMA_BAR_REL_TOL: f64 = 1e-14;
    pub const LAMBDA_SIGMA_EPSILONS: [f64; 5] = [1e-6, 1e-7, 1e-8, 1e-9, 1e-10];
    pub const OUT_DIR: &str = ".";
}

const DEFAULTS_HELP: &str = "\
Defaults:
  --tol        1e-12   local error tolerance of the integrator (at least 1e-15)
  --r-max      1e3     outer radius for `shoot` (`branch` and `oscillate` use 1e30)
  --offsets    1e-2..1e-8   log-spaced, one per decade (`a..b`), or a comma list
  --out        .       directory for CSV/SVG artifacts
gamma_bar is bracketed to relative width 1e-14; lambda_sigma uses eps = 1e-6 .. 1e-10.

Exit codes: 0 success, 1 usage error, 2 domain error, 3 numerical failure.";

#[derive(Debug, Parser)]
#[command(name = "supercrit", version, about = "Radial solutions of the supercritical biharmonic equation", after_help = DEFAULTS_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sobolev and second critical exponents for a dimension.
    Pc {
        #[arg(long)]
        n: u32,
    },
    /// Eigenvalues, eigenvector and equilibrium of the linearization.
    Spectrum(Problem),
    /// Integrate one shot and write its trajectory.
    Shoot {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
        #[command(flatten)]
        numerics: Numerics,
        #[arg(long, default_value_t = defaults::R_MAX)]
        r_max: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Locate gamma_bar and build the Dirichlet branch.
    Branch {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, default_value = defaults::OFFSETS, value_parser = parse_offsets)]
        offsets: Offsets,
        #[command(flatten)]
        numerics: Numerics,
        #[command(flatten)]
        output: Output,
    },
    /// Oscillation report of the near-critical shot.
    Oscillate {
        #[command(flatten)]
        problem: Problem,
        #[command(flatten)]
        numerics: Numerics,
        #[command(flatten)]
        output: Output,
    },
    /// Regularity verdict for the extremal solution.
    Verdict(Problem),
    /// Render a CSV artifact as SVG.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        input: PathBuf,
        /// Output SVG file.
        #[arg(long)]
        out: PathBuf,
        /// With `--p`, draws the singular level on trajectory plots.
        #[arg(long, requires = "p")]
        n: Option<u32>,
        #[arg(long, requires = "n")]
        p: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct Problem {
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub p: f64,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct Numerics {
    #[arg(long, default_value_t = defaults::TOL)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    #[arg(long, default_value = defaults::OUT_DIR)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// `w1` against `s` from an `s,w1,w2,w3,w4` file.
    Trajectory,
    /// `u0` (log scale) against `lambda` from a branch file.
    Bifurcation,
    /// `w2` against `w1` from an `s,w1,w2,w3,w4` file.
    Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Offsets(pub Vec<f64>);

/// `a..b` gives one log-spaced offset per decade from `a` down to `b`;
/// otherwise a comma-separated list.
pub fn parse_offsets(text: &str) -> Result<Offsets, String> {
    let number = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("bad offset {s:?}: {e}"));
    if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (number(a)?, number(b)?);
        if !(a > 0.0 && b > 0.0 && a > b) {
            return Err(format!(
                "range {text:?} must run from a larger to a smaller positive offset"
            ));
        }
        return Ok(Offsets(supercrit::shooting::log_offsets(a, b, 1)));
    }
    text.split(',').map(number).collect::<Result<Vec<_>, _>>().map(Offsets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_range_and_list() {
        let o = parse_offsets("1e-2..1e-8").unwrap().0;
        assert_eq!(o.len(), 7);
        assert_eq!(o[0], 1e-2);
        assert_eq!(parse_offsets("1e-2, 1e-3").unwrap().0, vec![1e-2, 1e-3]);
        assert!(parse_offsets("1e-8..1e-2").is_err());
        assert!(parse_offsets("x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
