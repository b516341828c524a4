//! `conjugate`: emit profile, geodesic and Jacobi data as CSV and stable
//! solutions, roots and scan reports as JSON.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::FRAC_PI_4;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use conjugate_core::geodesics::{closed_theta, solve_radial};
use conjugate_core::jacobi::fundamental_pair;
use conjugate_core::profile::solve_warp;
use conjugate_core::search::{assemble_report, find_r_star};
use conjugate_core::stable::stable_solution;
use conjugate_core::{Error, GeodesicParams, JacobiKernel, KernelKind, ProfileParams, ScanConfig};
use serde::Serialize;

const TOL_RANGE: (f64, f64) = (1e-12, 1e-4);

#[derive(Parser)]
#[command(
    name = "conjugate",
    version,
    about = "Conjugate points of warped-product metrics"
)]
struct Cli {
    /// Integration tolerance, in [1e-12, 1e-4].
    #[arg(long, global = true, env = "CONJUGATE_TOL", default_value_t = 1e-11)]
    tol: f64,
    /// Write output here instead of standard output.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Metric {
    #[arg(long, default_value_t = FRAC_PI_4)]
    r: f64,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Parallel,
    Perpendicular,
}

impl From<Kind> for KernelKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Parallel => KernelKind::Parallel,
            Kind::Perpendicular => KernelKind::Perpendicular,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// CSV `rho,A,A',K_par,K_perp` of the warp function.
    Profile {
        #[command(flatten)]
        metric: Metric,
        #[arg(long, default_value_t = 3.0)]
        rho_max: f64,
        #[arg(long, default_value_t = 0.01)]
        drho: f64,
    },
    /// CSV `t,rho,rho',theta` along a geodesic.
    Geodesic {
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[command(flatten)]
        metric: Metric,
        #[arg(long, default_value_t = 10.0)]
        tmax: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
    },
    /// CSV `t,U,U',V,V',kernel` of the fundamental pair.
    Jacobi {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[command(flatten)]
        metric: Metric,
        #[arg(long, default_value_t = 10.0)]
        tmax: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
    },
    /// JSON summary of the decaying solution.
    Stable {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[command(flatten)]
        metric: Metric,
    },
    /// JSON root `r*(eps)` of the radial certificate.
    FindR {
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.1)]
        halfwidth: f64,
    },
    /// JSON scan report; exit status 0 only on overall success.
    Scan {
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.3)]
        sigma: f64,
        #[arg(long, default_value_t = 0.01)]
        ds: f64,
        #[arg(long, default_value_t = 0.1)]
        halfwidth: f64,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long)]
        s_cap: Option<f64>,
    },
}

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(_) | Error::Domain { .. } => Failure::Usage(e.to_string()),
            other => Failure::Compute(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Compute(format!("write failed: {e}"))
    }
}

fn grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>, Failure> {
    if !(step > 0.0) || !(end >= start) {
        return Err(Failure::Usage(format!(
            "bad grid [{start}, {end}] with step {step}"
        )));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

fn json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| Failure::Compute(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct RootOutput {
    eps: f64,
    r_star: f64,
    root_residual: f64,
    bracket: conjugate_core::search::Bracket,
}

/// Returns whether the run succeeded in the sense of its subcommand.
fn run(cli: &Cli, out: &mut dyn Write) -> Result<bool, Failure> {
    let tol = cli.tol;
    if !(TOL_RANGE.0..=TOL_RANGE.1).contains(&tol) {
        return Err(Failure::Usage(format!("tol {tol:e} outside [1e-12, 1e-4]")));
    }
    match cli.command {
        Command::Profile {
            metric,
            rho_max,
            drho,
        } => {
            let warp = solve_warp(ProfileParams::new(metric.r, metric.eps)?, tol)?;
            writeln!(out, "rho,A,A',K_par,K_perp")?;
            for rho in grid(drho, rho_max, drho)? {
                let (a, da) = warp.eval(rho);
                writeln!(
                    out,
                    "{rho},{a},{da},{},{}",
                    warp.k_parallel(rho),
                    warp.k_perp(rho)?
                )?;
            }
        }
        Command::Geodesic {
            s,
            metric,
            tmax,
            dt,
        } => {
            let params = GeodesicParams::new(s, metric.r, metric.eps)?;
            let radial = solve_radial(params, tmax, tol)?;
            let closed = metric.eps == 0.0 && (metric.r - FRAC_PI_4).abs() <= 1e-6;
            writeln!(out, "t,rho,rho',theta")?;
            for t in grid(0.0, tmax, dt)? {
                let (rho, drho) = radial.eval(t.min(tmax))?;
                if closed {
                    writeln!(out, "{t},{rho},{drho},{}", closed_theta(s, t))?;
                } else {
                    writeln!(out, "{t},{rho},{drho},")?;
                }
            }
        }
        Command::Jacobi {
            kind,
            s,
            metric,
            tmax,
            dt,
        } => {
            let params = GeodesicParams::new(s, metric.r, metric.eps)?;
            let kernel = JacobiKernel::new(kind.into(), params, tmax, tol)?;
            let pair = fundamental_pair(&kernel, tmax, tol)?;
            writeln!(out, "t,U,U',V,V',kernel")?;
            for t in grid(0.0, tmax, dt)? {
                let t = t.min(tmax);
                let [u, du, v, dv] = pair.eval(t)?;
                writeln!(out, "{t},{u},{du},{v},{dv},{}", kernel.value(t)?)?;
            }
        }
        Command::Stable { kind, s, metric } => {
            let params = GeodesicParams::new(s, metric.r, metric.eps)?;
            let kernel = JacobiKernel::new(
                kind.into(),
                params,
                conjugate_core::stable::RADIAL_HORIZON,
                tol,
            )?;
            json(out, &stable_solution(&kernel, tol)?.summary())?;
        }
        Command::FindR { eps, halfwidth } => {
            let root = find_r_star(eps, halfwidth, tol)?;
            json(
                out,
                &RootOutput {
                    eps,
                    r_star: root.r_star,
                    root_residual: root.root_residual,
                    bracket: root.bracket,
                },
            )?;
        }
        Command::Scan {
            eps,
            sigma,
            ds,
            halfwidth,
            horizon,
            s_cap,
        } => {
            ProfileParams::new(FRAC_PI_4, eps)?;
            if !(sigma > 0.0 && ds > 0.0 && halfwidth > 0.0 && horizon > 0.0) {
                return Err(Failure::Usage(
                    "sigma, ds, halfwidth and horizon must be positive".into(),
                ));
            }
            let config = ScanConfig {
                sigma,
                ds,
                halfwidth,
                horizon,
                s_cap,
                tol,
            };
            let report = assemble_report(eps, config);
            json(out, &report)?;
            return Ok(report.overall.is_success());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out: Box<dyn Write> = match &cli.output {
        Some(path) => match File::create(path) {
            Ok(f) => Box::new(BufWriter::new(f)),
            Err(e) => {
                eprintln!("error: cannot create {}: {e}", path.display());
                return ExitCode::from(1);
            }
        },
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let result = run(&cli, out.as_mut()).and_then(|ok| {
        out.flush()?;
        Ok(ok)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: scan did not certify the metric");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
