use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use vorlift::approx::{approximate, ApproxOptions};
use vorlift::counterexample::{certificate_csv, divergence_certificate, p1_partial_sums, RadiusLaw};
use vorlift::currents::{coarea_check, interior_boundary, level_set_current, slice_by_circle, PointMass};
use vorlift::error::{Error, ErrorKind, Result};
use vorlift::flux::circle_flux;
use vorlift::geometry::{Circle, Point};
use vorlift::grid::{GridFunction, GridSpec};
use vorlift::io::{read_circle_field, read_json, read_vector_field, write_circle_field, write_json, write_vector_field};
use vorlift::lifting::{lift, lift_with_current, unlift, ChargeSet};
use vorlift::norms::{directional_norm_check, lp_norm, Exponent};
use vorlift::{fixtures, PolylineCurrent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Integrate V = ∇⊥u to a circle-valued phase.
    Lift,
    /// Recover V = ∇⊥u from a phase by finite differences.
    Unlift,
    /// Approximate V by a field with finitely many quantized singularities.
    Approx,
    /// Extract the oriented level set {u = level} as a polyline current.
    Levelset,
    /// Slice a polyline current by a circle.
    Slice,
    /// Flux of V through a circle.
    Flux,
    /// Check the coarea identity for a phase.
    Coarea,
    /// Divergence certificate for the dipole counterexample.
    Counterexample,
    /// L^p norm and directional-norm identity of V.
    Norm,
    /// Write the deterministic fixture set into a directory.
    Fixtures,
}

/// Run parameters. Every field can come from `--config` and is overridden by the flag.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    command: Option<Command>,
    input: Option<PathBuf>,
    charges: Option<PathBuf>,
    current: Option<PathBuf>,
    output: Option<PathBuf>,
    p: Option<f64>,
    r: Option<f64>,
    grid: Option<usize>,
    seed: Option<u64>,
    tol: Option<f64>,
    nlevels: Option<usize>,
    ndirs: Option<usize>,
    level: Option<f64>,
    center: Option<[f64; 2]>,
    radius: Option<f64>,
    t: Option<f64>,
    eps: Option<f64>,
    threshold: Option<f64>,
    max_n: Option<usize>,
    nshifts: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(name = "vorlift", version, about = "Circle-valued lifting of planar L^p vector fields")]
struct Cli {
    /// Subcommand; may instead come from the config file.
    #[arg(value_enum)]
    command: Option<Command>,
    /// Input VF2D header (vector field or phase).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Charge list JSON.
    #[arg(long)]
    charges: Option<PathBuf>,
    /// Polyline current JSON.
    #[arg(long)]
    current: Option<PathBuf>,
    /// Output path; JSON/CSV results go to stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
    /// Ball radius for approx.
    #[arg(long)]
    r: Option<f64>,
    /// Grid resolution (cells per side) for fixtures.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    nlevels: Option<usize>,
    #[arg(long)]
    ndirs: Option<usize>,
    /// Level value for levelset.
    #[arg(long, allow_negative_numbers = true)]
    level: Option<f64>,
    /// Circle center as `x,y`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    center: Option<Vec<f64>>,
    #[arg(long)]
    radius: Option<f64>,
    /// Radius offset for slice.
    #[arg(long, allow_negative_numbers = true)]
    t: Option<f64>,
    /// Radius cap for the counterexample sequence.
    #[arg(long)]
    eps: Option<f64>,
    /// Largest certificate threshold; rows are produced for 1, 2, …, threshold.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_n: Option<usize>,
    #[arg(long)]
    nshifts: Option<usize>,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Cli {
    fn into_config(self) -> Result<RunConfig> {
        let base: RunConfig = match &self.config {
            Some(path) => read_json(path)?,
            None => RunConfig::default(),
        };
        let center = match self.center.as_deref() {
            Some(&[x, y]) => Some([x, y]),
            Some(c) => return Err(Error::Precondition(format!("--center takes x,y; got {} values", c.len()))),
            None => base.center,
        };
        let cfg = RunConfig {
            command: self.command.or(base.command),
            input: self.input.or(base.input),
            charges: self.charges.or(base.charges),
            current: self.current.or(base.current),
            output: self.output.or(base.output),
            p: self.p.or(base.p),
            r: self.r.or(base.r),
            grid: self.grid.or(base.grid),
            seed: self.seed.or(base.seed),
            tol: self.tol.or(base.tol),
            nlevels: self.nlevels.or(base.nlevels),
            ndirs: self.ndirs.or(base.ndirs),
            level: self.level.or(base.level),
            center,
            radius: self.radius.or(base.radius),
            t: self.t.or(base.t),
            eps: self.eps.or(base.eps),
            threshold: self.threshold.or(base.threshold),
            max_n: self.max_n.or(base.max_n),
            nshifts: self.nshifts.or(base.nshifts),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn require<T>(v: Option<T>, flag: &str, command: Command) -> Result<T> {
    v.ok_or_else(|| Error::Precondition(format!("{command:?} requires --{flag}").to_lowercase()))
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("tol", self.tol), ("r", self.r), ("radius", self.radius), ("eps", self.eps)] {
            if let Some(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(Error::Precondition(format!("--{name} must be positive and finite, got {x}")));
                }
            }
        }
        for (name, v) in [("level", self.level), ("t", self.t), ("p", self.p), ("threshold", self.threshold)] {
            if let Some(x) = v {
                if !x.is_finite() {
                    return Err(Error::Precondition(format!("--{name} must be finite")));
                }
            }
        }
        if let Some(c) = self.center {
            if !c.iter().all(|x| x.is_finite()) {
                return Err(Error::Precondition("--center must be finite".into()));
            }
        }
        Ok(())
    }

    fn circle(&self, command: Command) -> Result<Circle<f64>> {
        let c = require(self.center, "center", command)?;
        let r = require(self.radius, "radius", command)?;
        Ok(Circle::new(Point::new(c[0], c[1]), r))
    }

    fn exponent(&self, default: f64) -> Result<Exponent<f64>> {
        Exponent::new(self.p.unwrap_or(default))
    }
}

/// `name.json` → `name.<suffix>.json`.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(format!("{suffix}.json"))
}

fn emit_json<S: Serialize>(output: Option<&Path>, value: &S) -> Result<()> {
    match output {
        Some(path) => write_json(path, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn emit_text(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => Ok(fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_charges(path: Option<&Path>) -> Result<ChargeSet<f64>> {
    let cs: ChargeSet<f64> = match path {
        Some(p) => read_json(p)?,
        None => ChargeSet::empty(),
    };
    cs.validate()?;
    Ok(cs)
}

#[derive(Serialize)]
struct LiftReport {
    boundary_degree: i64,
    total_degree: i64,
    max_loop_residual: f64,
    tol: f64,
}

#[derive(Serialize)]
struct LevelSetReport {
    level: f64,
    pieces: usize,
    segments: usize,
    mass: f64,
    interior_boundary: Vec<PointMass<f64>>,
}

#[derive(Serialize)]
struct NormReport {
    p: f64,
    lp_norm: f64,
    ndirs: usize,
    directional_relative_error: f64,
}

fn cmd_lift(cfg: &RunConfig) -> Result<()> {
    let cmd = Command::Lift;
    let v = read_vector_field::<f64>(&require(cfg.input.clone(), "input", cmd)?)?;
    let output = require(cfg.output.clone(), "output", cmd)?;
    let mut charges = read_charges(cfg.charges.as_deref())?;
    let result = match &cfg.current {
        Some(path) => {
            let current: PolylineCurrent = read_json(path)?;
            current.validate()?;
            let r = lift_with_current(&v, &charges, &current, cfg.tol)?;
            charges.charges.extend(
                vorlift::currents::boundary(&current).into_iter().map(|m| vorlift::lifting::Charge::new(m.point, m.multiplicity)),
            );
            r
        }
        None => lift(&v, &charges, cfg.tol)?,
    };
    write_circle_field(&output, &result.u)?;
    write_json(
        &sidecar(&output, "report"),
        &LiftReport {
            boundary_degree: result.boundary_degree,
            total_degree: charges.total_degree(),
            max_loop_residual: result.max_loop_residual,
            tol: result.tol,
        },
    )
}

fn cmd_unlift(cfg: &RunConfig) -> Result<()> {
    let cmd = Command::Unlift;
    let u = read_circle_field::<f64>(&require(cfg.input.clone(), "input", cmd)?)?;
    write_vector_field(&require(cfg.output.clone(), "output", cmd)?, &unlift(&u))
}

fn cmd_approx(cfg: &RunConfig) -> Result<()> {
    let cmd = Command::Approx;
    let v = read_vector_field::<f64>(&require(cfg.input.clone(), "input", cmd)?)?;
    let output = require(cfg.output.clone(), "output", cmd)?;
    let defaults = ApproxOptions::<f64>::default();
    let opts = ApproxOptions {
        seed: cfg.seed.unwrap_or(0),
        nshifts: cfg.nshifts.unwrap_or(defaults.nshifts),
        tol: cfg.tol.unwrap_or(defaults.tol),
        ..defaults
    };
    let a = approximate(&v, cfg.exponent(1.5)?, require(cfg.r, "r", cmd)?, &opts)?;
    write_vector_field(&output, &a.field)?;
    write_json(&sidecar(&output, "charges"), &a.charges)?;
    write_json(&sidecar(&output, "cover"), &a.cover)?;
    write_json(&sidecar(&output, "report"), &a.report)
}

fn cmd_levelset(cfg: &RunConfig) -> Result<()> {
    let cmd = Command::Levelset;
    let u = read_circle_field::<f64>(&require(cfg.input.clone(), "input", cmd)?)?;
    let level = require(cfg.level, "level", cmd)?;
    let current = level_set_current(&u, level)?;
    let report = LevelSetReport {
        level,
        pieces: current.pieces.len(),
        segments: current.segment_count(),
        mass: current.mass(),
        interior_boundary: interior_boundary(&current, &u.grid, u.grid.h + u.grid.h),
    };
    match &cfg.output {
        Some(path) => {
            write_json(path, &current)?;
            write_json(&sidecar(path, "report"), &report)
        }
        None => emit_json(None, &report),
    }
}

fn cmd_slice(cfg: &RunConfig) -> Result<()> {
    let cmd = Command::Slice;
    let current: PolylineCurrent = read_json(&require(cfg.current.clone(), "current", cmd)?)?;
    current.validate()?;
    let s = slice_by_circle(&current, &cfg.circle(cmd)?, cfg.t.unwrap_or(0.0))?;
    emit_json(cfg.output.as_deref(), &s)
}

fn cmd_flux(cfg: &RunConfig) -> Result<()> {
    let cmd = Command::Flux;
    let v = read_vector_field::<f64>(&require(cfg.input.clone(), "input", cmd)?)?;
    let f = circle_flux(&v, &cfg.circle(cmd)?, cfg.tol.unwrap_or(1e-8))?;
    emit_json(cfg.output.as_deref(), &f)
}

fn cmd_coarea(cfg: &RunConfig) -> Result<()> {
    let cmd = Command::Coarea;
    let u = read_circle_field::<f64>(&require(cfg.input.clone(), "input", cmd)?)?;
    let g = GridFunction::constant(&u.grid, 1.0);
    let report = coarea_check(&u, &g, cfg.nlevels.unwrap_or(64))?;
    emit_json(cfg.output.as_deref(), &report)
}

fn cmd_counterexample(cfg: &RunConfig) -> Result<()> {
    let p = cfg.p.unwrap_or(1.5);
    let eps = cfg.eps.unwrap_or(0.1);
    let max_n = cfg.max_n.unwrap_or(1_000_000);
    if p == 1.0 {
        let ns: Vec<usize> = std::iter::successors(Some(1usize), |n| n.checked_mul(10)).take_while(|&n| n <= max_n).collect();
        let mut csv = String::from("N,sum\n");
        for (n, s) in p1_partial_sums(RadiusLaw::InverseSquare, eps, &ns) {
            csv.push_str(&format!("{n},{s}\n"));
        }
        return emit_text(cfg.output.as_deref(), &csv);
    }
    let top = cfg.threshold.unwrap_or(10.0);
    let thresholds: Vec<f64> = (1..=top.floor().max(1.0) as usize).map(|t| t as f64).collect();
    let rows = divergence_certificate(p, eps, &thresholds, max_n)?;
    emit_text(cfg.output.as_deref(), &certificate_csv(&rows))
}

fn cmd_norm(cfg: &RunConfig) -> Result<()> {
    let cmd = Command::Norm;
    let v = read_vector_field::<f64>(&require(cfg.input.clone(), "input", cmd)?)?;
    let p = cfg.exponent(2.0)?;
    let ndirs = cfg.ndirs.unwrap_or(2048);
    let report = NormReport {
        p: p.get(),
        lp_norm: lp_norm(&v, p)?,
        ndirs,
        directional_relative_error: directional_norm_check(&v, p, ndirs)?,
    };
    emit_json(cfg.output.as_deref(), &report)
}

fn cmd_fixtures(cfg: &RunConfig) -> Result<()> {
    let dir = require(cfg.output.clone(), "output", Command::Fixtures)?;
    fs::create_dir_all(&dir)?;
    let grid = GridSpec::<f64>::unit_disk(cfg.grid.unwrap_or(64))?;
    let (v, c) = fixtures::model_vortex(&grid);
    write_vector_field(&dir.join("model_vortex.json"), &v)?;
    write_json(&dir.join("model_vortex.charges.json"), &c)?;
    let (v, c) = fixtures::dipole(&grid);
    write_vector_field(&dir.join("dipole.json"), &v)?;
    write_json(&dir.join("dipole.charges.json"), &c)?;
    write_vector_field(&dir.join("swirl.json"), &fixtures::swirl(&grid))?;
    let (v, u, c) = fixtures::lifted_two_charge(&grid);
    write_vector_field(&dir.join("two_charge.json"), &v)?;
    write_circle_field(&dir.join("two_charge.phase.json"), &u)?;
    write_json(&dir.join("two_charge.charges.json"), &c)
}

fn run(cfg: &RunConfig) -> Result<()> {
    let command = cfg
        .command
        .ok_or_else(|| Error::Precondition("no command given on the command line or in the config".into()))?;
    match command {
        Command::Lift => cmd_lift(cfg),
        Command::Unlift => cmd_unlift(cfg),
        Command::Approx => cmd_approx(cfg),
        Command::Levelset => cmd_levelset(cfg),
        Command::Slice => cmd_slice(cfg),
        Command::Flux => cmd_flux(cfg),
        Command::Coarea => cmd_coarea(cfg),
        Command::Counterexample => cmd_counterexample(cfg),
        Command::Norm => cmd_norm(cfg),
        Command::Fixtures => cmd_fixtures(cfg),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Io => 1,
        ErrorKind::Contract => 2,
        ErrorKind::Tolerance => 3,
    }
}

fn main() -> ExitCode {
    let result = Cli::parse().into_config().and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            if let Error::NotLiftable { worst, .. } = &e {
                for (a, b, res) in worst {
                    eprintln!("  loop {a}-{b}: residual {res:.6e}");
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
