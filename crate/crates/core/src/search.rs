//! Parameter search: the radius `r*(ε)` at which the radial stable solution has
//! `Y'(0) = 0`, followed by sampled verification that the metric `g_{r*, ε}` has
//! no interior conjugate points.
//!
//! Verification is by sampling on finite grids. It is not a computer-assisted
//! proof.

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::{comparison_lower_bound, solve_radial_with, GeodesicParams};
use crate::jacobi::{fundamental_pair, JacobiKernel, KernelKind};
use crate::profile::{solve_warp, ProfileParams, WarpFunction};
use crate::stable::{certificate, certificate_s_derivatives, classify, stable_solution, Verdict};

/// Grids and tolerances of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Certificates are used for `0 <= s <= sigma`.
    pub sigma: f64,
    /// Spacing of the `s`-grids.
    pub ds: f64,
    /// Root bracket is `[π/4 - halfwidth, π/4 + halfwidth]`.
    pub halfwidth: f64,
    /// Positivity horizon for `U∥, U⊥`.
    pub horizon: f64,
    /// Upper end of the positivity grid; `None` means `ρ₀`.
    pub s_cap: Option<f64>,
    pub tol: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            sigma: 0.3,
            ds: 0.01,
            halfwidth: 0.1,
            horizon: 20.0,
            s_cap: None,
            tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub r_lo: f64,
    pub r_hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootResult {
    pub r_star: f64,
    pub root_residual: f64,
    pub bracket: Bracket,
    pub evaluations: usize,
}

/// `Y'_{0, r, ε}(0)` for the parallel stable solution along the radial geodesic.
pub fn root_function(r: f64, eps: f64, tol: f64) -> Result<f64> {
    let params = GeodesicParams::new(0.0, r, eps)?;
    let kernel = JacobiKernel::new(
        KernelKind::Parallel,
        params,
        crate::stable::RADIAL_HORIZON,
        tol,
    )?;
    let sol = stable_solution(&kernel, tol)?;
    Ok(sol.y.state(0)[1])
}

/// Solve `Y'_{0, r, ε}(0) = 0` for `r` in `[π/4 - halfwidth, π/4 + halfwidth]`
/// by the Illinois variant of regula falsi.
pub fn find_r_star(eps: f64, halfwidth: f64, tol: f64) -> Result<RootResult> {
    if !(halfwidth > 0.0 && halfwidth < FRAC_PI_4) {
        return Err(Error::InvalidParams(format!(
            "bracket halfwidth {halfwidth} outside (0, pi/4)"
        )));
    }
    let f = |r: f64| root_function(r, eps, tol);
    let (r_lo, r_hi) = (FRAC_PI_4 - halfwidth, FRAC_PI_4 + halfwidth);
    let (f_lo, f_hi) = (f(r_lo)?, f(r_hi)?);
    let bracket = Bracket {
        r_lo,
        r_hi,
        f_lo,
        f_hi,
    };
    if !(f_lo * f_hi < 0.0) {
        return Err(Error::Bracket {
            r_lo,
            r_hi,
            f_lo,
            f_hi,
        });
    }
    let target = 0.01 * tol;
    let (mut a, mut fa, mut b, mut fb) = (r_lo, f_lo, r_hi, f_hi);
    let mut side = 0i8;
    let mut best = if f_lo.abs() < f_hi.abs() {
        (a, fa)
    } else {
        (b, fb)
    };
    for evaluations in 3..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c)?;
        if fc.abs() < best.1.abs() {
            best = (c, fc);
        }
        if fc.abs() <= target || fc == 0.0 || (b - a).abs() <= 4.0 * f64::EPSILON {
            return Ok(RootResult {
                r_star: best.0,
                root_residual: best.1.abs(),
                bracket,
                evaluations,
            });
        }
        if fc * fb > 0.0 {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::RootStalled {
        r: best.0,
        residual: best.1.abs(),
    })
}

/// `0, ds, 2 ds, ...` up to and including `end` (up to rounding).
pub fn s_grid(start: f64, end: f64, ds: f64) -> Vec<f64> {
    if !(ds > 0.0) || end < start {
        return Vec::new();
    }
    let n = ((end - start) / ds + 1e-9).floor() as usize;
    // Snapped to 12 decimals so that 0.3 + 15 * 0.01 reads as 0.45.
    (0..=n)
        .map(|k| ((start + k as f64 * ds) * 1e12).round() / 1e12)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallSEntry {
    pub s: f64,
    pub w_prime_0_parallel: f64,
    pub w_prime_0_perp: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallSReport {
    pub entries: Vec<SmallSEntry>,
    /// `∂_s W'(0)` and `∂²_s W'(0)` at `s = 0`, parallel then perpendicular.
    pub d1: [f64; 2],
    pub d2: [f64; 2],
    pub concave: bool,
}

impl SmallSReport {
    pub fn passed(&self) -> bool {
        self.concave
            && self
                .entries
                .iter()
                .all(|e| e.verdict == Verdict::NoDoubleZeros)
    }
}

/// Stencil step for the concavity signature.
pub const CONCAVITY_STEP: f64 = 1e-2;

fn certificate_entry(s: f64, r: f64, eps: f64, tol: f64) -> Result<SmallSEntry> {
    let params = GeodesicParams::new(s, r, eps)?;
    let wp = certificate(KernelKind::Parallel, params, tol)?;
    let wq = certificate(KernelKind::Perpendicular, params, tol)?;
    let both_pass = classify(wp).verdict == Verdict::NoDoubleZeros
        && classify(wq).verdict == Verdict::NoDoubleZeros;
    Ok(SmallSEntry {
        s,
        w_prime_0_parallel: wp,
        w_prime_0_perp: wq,
        verdict: if both_pass {
            Verdict::NoDoubleZeros
        } else {
            Verdict::DoubleZeroExists
        },
    })
}

/// Certificates for `s = 0, ds, ..., sigma` and the concavity signature at `s = 0`.
pub fn verify_small_s(r: f64, eps: f64, sigma: f64, ds: f64, tol: f64) -> Result<SmallSReport> {
    verify_certificates_on(&s_grid(0.0, sigma, ds), r, eps, tol)
}

fn verify_certificates_on(grid: &[f64], r: f64, eps: f64, tol: f64) -> Result<SmallSReport> {
    let entries = grid
        .par_iter()
        .map(|&s| certificate_entry(s, r, eps, tol))
        .collect::<Result<Vec<_>>>()?;
    let (mut d1, mut d2) = ([0.0; 2], [0.0; 2]);
    for (i, kind) in KernelKind::ALL.into_iter().enumerate() {
        (d1[i], d2[i]) = certificate_s_derivatives(kind, r, eps, CONCAVITY_STEP, tol)?;
    }
    Ok(SmallSReport {
        entries,
        d1,
        d2,
        concave: d2.iter().all(|&d| d < 0.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidSEntry {
    pub s: f64,
    pub min_u_parallel: f64,
    pub min_u_perp: f64,
    pub du_end_parallel: f64,
    pub du_end_perp: f64,
    /// `ρ(T)`; the kernels are negative beyond `T` when this exceeds `ρ₀`.
    pub rho_end: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativityThreshold {
    pub rho0: f64,
    pub parallel: f64,
    pub perpendicular: f64,
    /// Both curvatures sampled negative on `(ρ₀, ρ₀ + 20]`.
    pub certified: bool,
}

/// `ρ₀` with `K∥ < 0` and `K⊥ < 0` for `ρ > ρ₀`, confirmed by a sign scan.
pub fn negativity_threshold(warp: &WarpFunction) -> NegativityThreshold {
    let parallel = warp.parallel_negativity_radius();
    let perpendicular = warp.perp_negativity_radius();
    let rho0 = parallel.max(perpendicular);
    // Past ρ₀ the exterior K⊥ = (1 + 4a₊a₋)/A² - 1 decreases with A, so a finite
    // scan plus the monotone tail covers (ρ₀, ∞).
    let certified = (1..=4000).all(|k| {
        let rho = rho0 + 1e-9 + 20.0 * k as f64 / 4000.0;
        warp.k_parallel(rho) < 0.0 && warp.k_perp(rho).is_ok_and(|v| v < 0.0)
    }) && warp.k_perp(rho0 + 1e-9).is_ok_and(|v| v < 0.0)
        && warp.k_parallel(rho0 + 1e-9) < 0.0;
    NegativityThreshold {
        rho0,
        parallel,
        perpendicular,
        certified,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeSReport {
    pub threshold: NegativityThreshold,
    pub entries: Vec<MidSEntry>,
}

impl LargeSReport {
    pub fn passed(&self) -> bool {
        self.threshold.certified && self.entries.iter().all(|e| e.pass)
    }
}

fn positivity_entry(
    warp: &Arc<WarpFunction>,
    s: f64,
    horizon: f64,
    rho0: f64,
    tol: f64,
) -> Result<MidSEntry> {
    let params = GeodesicParams::with_profile(s, warp.params)?;
    let radial = Arc::new(solve_radial_with(params, warp.clone(), horizon, tol)?);
    let mut mins = [0.0; 2];
    let mut ends = [0.0; 2];
    for (i, kind) in KernelKind::ALL.into_iter().enumerate() {
        let kernel = JacobiKernel::from_radial(kind, radial.clone());
        let pair = fundamental_pair(&kernel, horizon, tol)?;
        mins[i] = pair.min_u(horizon).0;
        ends[i] = pair.eval(horizon)?[1];
    }
    let rho_end = radial.eval(horizon)?.0;
    Ok(MidSEntry {
        s,
        min_u_parallel: mins[0],
        min_u_perp: mins[1],
        du_end_parallel: ends[0],
        du_end_perp: ends[1],
        rho_end,
        pass: mins.iter().all(|&m| m > 0.0) && ends.iter().all(|&d| d > 0.0) && rho_end >= rho0,
    })
}

/// `ρ₀` and positivity of `U∥, U⊥` on `[0, T]` for `s = sigma, sigma + ds, ..., s_cap`
/// (default `ρ₀`). Beyond `ρ₀` both kernels are negative along the whole
/// geodesic and Sturm comparison with `Y'' = 0` rules out double zeros.
pub fn verify_large_s(
    r: f64,
    eps: f64,
    sigma: f64,
    s_cap: Option<f64>,
    ds: f64,
    horizon: f64,
    tol: f64,
) -> Result<LargeSReport> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParams(format!(
            "sigma = {sigma} must be positive"
        )));
    }
    let warp = Arc::new(solve_warp(ProfileParams::new(r, eps)?, tol.min(1e-12))?);
    let threshold = negativity_threshold(&warp);
    let cap = s_cap.unwrap_or(threshold.rho0);
    let entries = s_grid(sigma, cap, ds)
        .par_iter()
        .map(|&s| positivity_entry(&warp, s, horizon, threshold.rho0, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(LargeSReport { threshold, entries })
}

/// The stable radial solution at the root, which decays in both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryWitness {
    pub w_prime_0: f64,
    pub y0: f64,
    pub t: f64,
    pub y_forward: f64,
    pub y_backward: f64,
    pub bound: f64,
    pub pass: bool,
}

pub const WITNESS_TIME: f64 = 30.0;

pub fn boundary_witness(r: f64, eps: f64, tol: f64) -> Result<BoundaryWitness> {
    let params = GeodesicParams::new(0.0, r, eps)?;
    let kernel = JacobiKernel::new(
        KernelKind::Parallel,
        params,
        crate::stable::RADIAL_HORIZON,
        tol,
    )?;
    let sol = stable_solution(&kernel, tol)?;
    let t = WITNESS_TIME;
    let y_forward = sol.eval(t)?.0;
    let y_backward = sol.eval(-t)?.0;
    let bound = 2.0 * (-t).exp() * 1.01;
    Ok(BoundaryWitness {
        w_prime_0: sol.w_prime_0,
        y0: sol.y0,
        t,
        y_forward,
        y_backward,
        bound,
        pass: sol.y0 > 0.0 && y_forward.abs() < bound && y_backward.abs() < bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonTrapping {
    /// Lower bound for `A'/A`.
    pub a: f64,
    /// Smallest `ρ(t) - ρ̄(t)` over the sampled geodesics and times.
    pub min_gap: f64,
    pub pass: bool,
}

/// Compare radial solutions with the explicit lower bound `ρ̄` for `s` on a grid
/// and `t` in `[0, horizon]`.
pub fn non_trapping_check(
    r: f64,
    eps: f64,
    s_values: &[f64],
    horizon: f64,
    tol: f64,
) -> Result<NonTrapping> {
    let warp = Arc::new(solve_warp(ProfileParams::new(r, eps)?, tol.min(1e-12))?);
    let a = warp.log_derivative_lower_bound();
    let gaps = s_values
        .par_iter()
        .map(|&s| -> Result<f64> {
            let params = GeodesicParams::with_profile(s, warp.params)?;
            let radial = solve_radial_with(params, warp.clone(), horizon, tol)?;
            let mut gap = f64::INFINITY;
            for k in 0..=(horizon * 20.0) as usize {
                let t = k as f64 * 0.05;
                gap = gap.min(radial.eval(t)?.0 - comparison_lower_bound(a, s, 0.0, t)?);
            }
            Ok(gap)
        })
        .collect::<Result<Vec<_>>>()?;
    let min_gap = gaps.into_iter().fold(f64::INFINITY, f64::min);
    Ok(NonTrapping {
        a,
        min_gap,
        pass: a > 0.0 && min_gap >= -10.0 * tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum Overall {
    #[serde(rename = "boundary-CP-and-no-interior-CP")]
    Success,
    #[serde(rename = "failed")]
    Failed { reason: String },
}

impl Overall {
    pub fn is_success(&self) -> bool {
        matches!(self, Overall::Success)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub eps: f64,
    pub config: ScanConfig,
    pub r_star: Option<f64>,
    pub root_residual: Option<f64>,
    pub bracket: Option<Bracket>,
    pub small_s: Vec<SmallSEntry>,
    pub concavity_d1: Option<[f64; 2]>,
    pub concavity_d2: Option<[f64; 2]>,
    pub overlap_s: Vec<SmallSEntry>,
    pub mid_s: Vec<MidSEntry>,
    pub large_s_threshold: Option<f64>,
    pub curvature_negativity_certified: bool,
    pub boundary_witness: Option<BoundaryWitness>,
    pub non_trapping: Option<NonTrapping>,
    pub method: String,
    pub overall: Overall,
}

/// Run every stage for one `ε` and aggregate. Stage failures are recorded in
/// `overall` rather than returned.
pub fn assemble_report(eps: f64, config: ScanConfig) -> ScanReport {
    let tol = config.tol;
    let mut report = ScanReport {
        eps,
        config,
        r_star: None,
        root_residual: None,
        bracket: None,
        small_s: Vec::new(),
        concavity_d1: None,
        concavity_d2: None,
        overlap_s: Vec::new(),
        mid_s: Vec::new(),
        large_s_threshold: None,
        curvature_negativity_certified: false,
        boundary_witness: None,
        non_trapping: None,
        method: "certification by sampling on finite grids; not an interval-arithmetic proof"
            .to_owned(),
        overall: Overall::Success,
    };
    let mut failures: Vec<String> = Vec::new();

    let root = match find_r_star(eps, config.halfwidth, tol) {
        Ok(root) => root,
        Err(e) => {
            let stage = if matches!(e, Error::Bracket { .. }) {
                "bracket"
            } else {
                "root"
            };
            report.overall = Overall::Failed {
                reason: format!("{stage}: {e}"),
            };
            return report;
        }
    };
    report.r_star = Some(root.r_star);
    report.root_residual = Some(root.root_residual);
    report.bracket = Some(root.bracket);
    if !(root.root_residual < tol) {
        failures.push(format!(
            "root residual {:e} >= tol {tol:e}",
            root.root_residual
        ));
    }
    let r = root.r_star;

    match verify_small_s(r, eps, config.sigma, config.ds, tol) {
        Ok(small) => {
            if !small.passed() {
                failures.push("small-s certificates".to_owned());
            }
            report.small_s = small.entries;
            report.concavity_d1 = Some(small.d1);
            report.concavity_d2 = Some(small.d2);
        }
        Err(e) => failures.push(format!("small-s: {e}")),
    }

    let overlap_grid: Vec<f64> = s_grid(config.sigma, 2.0 * config.sigma, config.ds)
        .into_iter()
        .filter(|&s| s > config.sigma + 0.5 * config.ds)
        .collect();
    match overlap_grid
        .par_iter()
        .map(|&s| certificate_entry(s, r, eps, tol))
        .collect::<Result<Vec<_>>>()
    {
        Ok(entries) => {
            if entries.iter().any(|e| e.verdict != Verdict::NoDoubleZeros) {
                failures.push("overlap certificates".to_owned());
            }
            report.overlap_s = entries;
        }
        Err(e) => failures.push(format!("overlap: {e}")),
    }

    match verify_large_s(
        r,
        eps,
        config.sigma,
        config.s_cap,
        config.ds,
        config.horizon,
        tol,
    ) {
        Ok(large) => {
            if large.entries.iter().any(|e| !e.pass) {
                failures.push("mid-s positivity".to_owned());
            }
            if !large.threshold.certified {
                failures.push("curvature negativity".to_owned());
            }
            report.large_s_threshold = Some(large.threshold.rho0);
            report.curvature_negativity_certified = large.threshold.certified;
            report.mid_s = large.entries;
        }
        Err(e) => failures.push(format!("large-s: {e}")),
    }

    match boundary_witness(r, eps, tol) {
        Ok(w) => {
            if !w.pass {
                failures.push("boundary witness".to_owned());
            }
            report.boundary_witness = Some(w);
        }
        Err(e) => failures.push(format!("boundary witness: {e}")),
    }

    let cap = report.large_s_threshold.unwrap_or(1.0);
    let s_values = s_grid(0.0, cap + 0.5, 0.1);
    match non_trapping_check(r, eps, &s_values, config.horizon, tol) {
        Ok(nt) => {
            if !nt.pass {
                failures.push("non-trapping bound".to_owned());
            }
            report.non_trapping = Some(nt);
        }
        Err(e) => failures.push(format!("non-trapping: {e}")),
    }

    if !failures.is_empty() {
        report.overall = Overall::Failed {
            reason: failures.join("; "),
        };
    }
    report
}
