use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use supercrit::analysis::{extremal_regularity_verdict, oscillation_report, OscillationReport, RegularityVerdict};
use supercrit::emden_fowler::{w_to_radial, AutonomousEvent};
use supercrit::exponents::{critical_exponent_pc, critical_sobolev_exponent, k0, PC_TOLERANCE};
use supercrit::radial::TerminalEvent;
use supercrit::shooting::{
    branch_limit_estimate, build_branch, estimate_lambda_sigma, find_gamma_bar_with, shoot, BranchPoint, Shot,
    ShotClass, ShotConfig,
};
use supercrit::spectrum::{eigenvalues, fixed_point_w0, nu2_eigenvector, NCoefficients};
use supercrit::{ProblemParams, WPoint};

use crate::args::{defaults, Numerics, Offsets, PlotKind, Problem};
use crate::svg::{self, Plot, Scale, Series};

/// Invalid user input caught before or outside the numerical core.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

fn params(problem: Problem) -> Result<ProblemParams> {
    Ok(ProblemParams::new(problem.n, problem.p)?)
}

fn check_numerics(numerics: Numerics) -> Result<()> {
    let tol = numerics.tol;
    if !(defaults::MIN_TOL..1.0).contains(&tol) {
        return Err(input_error(format!(
            "--tol {tol} must lie in [{:e}, 1)",
            defaults::MIN_TOL
        )));
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_w_csv(path: &Path, points: &[WPoint]) -> Result<()> {
    write_csv(
        path,
        &["s", "w1", "w2", "w3", "w4"],
        points.iter().map(|p| (p.s, p.w[0], p.w[1], p.w[2], p.w[3])),
    )
}

#[derive(Serialize)]
struct PcSummary {
    n: u32,
    p_sobolev: f64,
    p_c: Option<f64>,
}

pub fn pc(n: u32) -> Result<()> {
    let p_sobolev = critical_sobolev_exponent(n)?;
    let p_c = critical_exponent_pc(n, PC_TOLERANCE)?.finite();
    print_json(&PcSummary { n, p_sobolev, p_c })
}

#[derive(Serialize)]
struct Eigenvalue {
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct SpectrumSummary {
    n: u32,
    p: f64,
    coefficients: NCoefficients,
    nu: Vec<Eigenvalue>,
    discriminant: f64,
    oscillatory: bool,
    w0: [f64; 4],
    nu2_eigenvector: [f64; 4],
}

pub fn spectrum(problem: Problem) -> Result<()> {
    let prm = params(problem)?;
    let spec = eigenvalues(&prm);
    print_json(&SpectrumSummary {
        n: prm.n(),
        p: prm.p(),
        coefficients: spec.coefficients,
        nu: spec.nu.iter().map(|z| Eigenvalue { re: z.re, im: z.im }).collect(),
        discriminant: spec.discriminant(),
        oscillatory: spec.is_oscillatory(),
        w0: fixed_point_w0(&prm).w,
        nu2_eigenvector: nu2_eigenvector(&prm)?.t,
    })
}

#[derive(Serialize)]
struct ShotSummary {
    n: u32,
    p: f64,
    gamma: f64,
    class: ShotClass,
    terminal_event: TerminalEvent,
    steps: usize,
    trajectory_csv: PathBuf,
    w_csv: PathBuf,
}

/// Terminal event of the whole shot in radial terms.
fn shot_terminal_event(shot: &Shot) -> TerminalEvent {
    match &shot.autonomous {
        None => shot.radial.terminal_event,
        Some(auto) => match auto.terminal_event {
            AutonomousEvent::ReachedEnd => TerminalEvent::ReachedRMax,
            AutonomousEvent::W1Zero(s) => TerminalEvent::UCrossedZero(s.exp()),
            AutonomousEvent::W2Zero(s) => TerminalEvent::UPrimeVanished(s.exp()),
            AutonomousEvent::NormExceeded(s) => TerminalEvent::BlowUp(s.exp()),
        },
    }
}

pub fn shoot_cmd(problem: Problem, gamma: f64, numerics: Numerics, r_max: f64, out: &Path) -> Result<()> {
    let prm = params(problem)?;
    check_numerics(numerics)?;
    if !(gamma.is_finite() && gamma < 0.0) {
        return Err(input_error(format!("--gamma {gamma} must be finite and negative")));
    }
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(input_error(format!("--r-max {r_max} must be finite and positive")));
    }
    let shot = shoot(&prm, gamma, &ShotConfig::new(numerics.tol, r_max))?;
    prepare_dir(out)?;

    let mut rows: Vec<_> = shot.radial.states.clone();
    if let Some(auto) = &shot.autonomous {
        rows.extend(auto.points.iter().skip(1).map(|w| w_to_radial(&prm, w)));
    }
    let trajectory_csv = out.join("trajectory.csv");
    write_csv(
        &trajectory_csv,
        &["r", "U", "U1", "U2", "U3"],
        rows.iter().map(|s| (s.r, s.u, s.u1, s.u2, s.u3)),
    )?;
    let w_csv = out.join("trajectory_w.csv");
    write_w_csv(&w_csv, &shot.w_points())?;

    let summary = ShotSummary {
        n: prm.n(),
        p: prm.p(),
        gamma,
        class: shot.class,
        terminal_event: shot_terminal_event(&shot),
        steps: rows.len(),
        trajectory_csv,
        w_csv,
    };
    let sidecar = out.join("trajectory.json");
    fs::write(&sidecar, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("cannot write {}", sidecar.display()))?;
    print_json(&summary)
}

#[derive(Serialize)]
struct BranchSummary {
    n: u32,
    p: f64,
    gamma_bar: f64,
    bracket: [f64; 2],
    /// Unstable-manifold estimate of the singular parameter, if the orbit reached `w2 = 0`.
    lambda_sigma: Option<f64>,
    /// Largest `lambda` on the computed branch.
    lambda_star_est: f64,
    /// Limit of `lambda` towards `gamma_bar` fitted from the branch.
    lambda_limit_fit: Option<f64>,
    points: usize,
    violations: Vec<String>,
    branch_csv: PathBuf,
}

pub fn branch(problem: Problem, offsets: &Offsets, numerics: Numerics, out: &Path) -> Result<()> {
    let prm = params(problem)?;
    check_numerics(numerics)?;
    if offsets.0.is_empty() || offsets.0.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(input_error("--offsets must be positive and finite"));
    }
    let cfg = ShotConfig::search(numerics.tol);
    let gb = find_gamma_bar_with(&prm, defaults::GAMMA_BAR_REL_TOL, &cfg)?;
    let branch = build_branch(&prm, &gb, &offsets.0, &cfg)?;
    let lambda_sigma = estimate_lambda_sigma(&prm, &defaults::LAMBDA_SIGMA_EPSILONS)
        .ok()
        .map(|l| l.value);
    let lambda_limit_fit = branch_limit_estimate(&prm, &branch).ok();

    prepare_dir(out)?;
    let branch_csv = out.join("branch.csv");
    write_csv(
        &branch_csv,
        &["gamma", "R_gamma", "U_at_R", "lambda", "u0"],
        branch
            .points
            .iter()
            .map(|b: &BranchPoint| (b.gamma, b.r_gamma, b.u_at_r, b.lambda, b.u0)),
    )?;
    print_json(&BranchSummary {
        n: prm.n(),
        p: prm.p(),
        gamma_bar: gb.value,
        bracket: [gb.lo, gb.hi],
        lambda_sigma,
        lambda_star_est: branch.lambda_star_estimate(),
        lambda_limit_fit,
        points: branch.points.len(),
        violations: branch.violations,
        branch_csv,
    })
}

pub fn oscillate(problem: Problem, numerics: Numerics, out: &Path) -> Result<()> {
    let prm = params(problem)?;
    check_numerics(numerics)?;
    let cfg = ShotConfig::search(numerics.tol);
    let gb = find_gamma_bar_with(&prm, defaults::GAMMA_BAR_REL_TOL, &cfg)?;
    // The lower end of the bracket is the last shot known to stay below the
    // singular solution for longest before hitting zero.
    let shot = shoot(&prm, gb.lo, &cfg)?;
    let points = shot.w_points();
    let report: OscillationReport = oscillation_report(&prm, &points)?;
    prepare_dir(out)?;
    write_w_csv(&out.join("oscillation_w.csv"), &points)?;
    print_json(&report)
}

pub fn verdict(problem: Problem) -> Result<()> {
    let prm = params(problem)?;
    let v: RegularityVerdict = extremal_regularity_verdict(&prm);
    print_json(&v)
}

/// Columns of a headed CSV file, looked up by name.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
        let header = r.headers()?.iter().map(str::to_owned).collect();
        let rows = r
            .records()
            .map(|rec| {
                let rec = rec?;
                rec.iter()
                    .map(|f| {
                        f.trim()
                            .parse::<f64>()
                            .map_err(|e| input_error(format!("bad number {f:?}: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Table { header, rows })
    }

    fn has(&self, name: &str) -> bool {
        self.header.iter().any(|h| h == name)
    }

    fn pairs(&self, x: &str, y: &str) -> Result<Vec<(f64, f64)>> {
        let col = |name: &str| {
            self.header.iter().position(|h| h == name).ok_or_else(|| {
                input_error(format!(
                    "input has no column {name:?} (columns: {})",
                    self.header.join(",")
                ))
            })
        };
        let (ix, iy) = (col(x)?, col(y)?);
        Ok(self
            .rows
            .iter()
            .filter_map(|r| Some((*r.get(ix)?, *r.get(iy)?)))
            .collect())
    }
}

pub fn plot(kind: PlotKind, input: &Path, out: &Path, problem: Option<Problem>) -> Result<()> {
    let table = Table::read(input)?;
    if table.rows.is_empty() {
        return Err(input_error(format!("{} has no data rows", input.display())));
    }
    let level = problem
        .map(params)
        .transpose()?
        .map(|prm| k0(&prm).powf(1.0 / (prm.p() - 1.0)));
    let series = |label: &str, points| {
        vec![Series {
            label: label.into(),
            points,
            colour: "steelblue",
        }]
    };
    let plot = match kind {
        PlotKind::Trajectory if table.has("s") => Plot {
            title: "w1 along the trajectory".into(),
            x_label: "s = ln r".into(),
            y_label: "w1".into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Linear,
            series: series("w1", table.pairs("s", "w1")?),
            reference: level.map(|v| (v, "K0^(1/(p-1))".to_string())),
        },
        PlotKind::Trajectory => Plot {
            title: "U along the trajectory".into(),
            x_label: "r".into(),
            y_label: "U".into(),
            x_scale: Scale::Log10,
            y_scale: Scale::Linear,
            series: series("U", table.pairs("r", "U")?),
            reference: None,
        },
        PlotKind::Phase => Plot {
            title: "phase portrait".into(),
            x_label: "w1".into(),
            y_label: "w2".into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Linear,
            series: series("(w1, w2)", table.pairs("w1", "w2")?),
            reference: None,
        },
        PlotKind::Bifurcation => Plot {
            title: "bifurcation diagram".into(),
            x_label: "lambda".into(),
            y_label: "u0".into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Log10,
            series: series("branch", table.pairs("lambda", "u0")?),
            reference: None,
        },
    };
    let text = svg::render(&plot).map_err(|e| input_error(e.to_string()))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_dir(dir)?;
    }
    fs::write(out, text).with_context(|| format!("cannot write {}", out.display()))?;
    print_json(&serde_json::json!({ "kind": format!("{kind:?}").to_lowercase(), "svg": out }))
}
