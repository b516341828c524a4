//! Acceptance checks. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, LN_2, SQRT_2};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use conjugate_core::geodesics::{closed_rho, solve_radial, solve_radial_with};
use conjugate_core::jacobi::{
    closed_u_parallel, closed_u_perp, closed_v_parallel, closed_v_perp, fundamental_pair,
    theta_infinity,
};
use conjugate_core::profile::solve_warp;
use conjugate_core::search::{assemble_report, find_r_star, Overall, ScanConfig};
use conjugate_core::stable::{
    certificate, certificate_s_derivatives, certified_solution, closed_certificate,
    one_sided_derivatives,
};
use conjugate_core::{GeodesicParams, JacobiKernel, KernelKind, ProfileParams, ScanReport};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

/// Strictly decreasing, except that a distance already exactly zero must stay zero.
fn decreasing(v: &[f64]) -> bool {
    v.windows(2)
        .all(|w| w[0] > w[1] || (w[0] == 0.0 && w[1] == 0.0))
}

fn critical(s: f64) -> GeodesicParams {
    GeodesicParams::new(s, FRAC_PI_4, 0.0).unwrap()
}

fn geodesic_oracle() -> Check {
    let mut worst: f64 = 0.0;
    for s in [0.0, 0.1, 0.3, 0.6, 0.78, 1.0, 2.0] {
        let radial = solve_radial(critical(s), 12.0, 1e-10).map_err(e)?;
        for k in 0..=1200 {
            let t = k as f64 * 0.01;
            let rho = radial.eval(t).map_err(e)?.0;
            worst = worst.max((rho - closed_rho(s, t)).abs());
        }
    }
    ensure(worst < 1e-8, || format!("max |rho - closed| = {worst:e}"))?;
    Ok(format!("max |rho - closed| = {worst:.2e}"))
}

fn warp_coefficients() -> Check {
    let warp = solve_warp(ProfileParams::critical(), 1e-12).map_err(e)?;
    let dp = (warp.a_plus - 0.5 * SQRT_2 * (-FRAC_PI_4).exp()).abs();
    let dm = warp.a_minus.abs();
    ensure(dp < 1e-14 && dm < 1e-14, || {
        format!("|a+ err| = {dp:e}, |a-| = {dm:e}")
    })?;
    Ok(format!("|a+ err| = {dp:.1e}, |a-| = {dm:.1e}"))
}

fn jacobi_oracle() -> Check {
    let mut worst: f64 = 0.0;
    for s in [0.1, 0.3, 0.7, 1.0] {
        for kind in KernelKind::ALL {
            let kernel = JacobiKernel::new(kind, critical(s), 10.0, 1e-12).map_err(e)?;
            let pair = fundamental_pair(&kernel, 10.0, 1e-12).map_err(e)?;
            for k in 0..=1000 {
                let t = k as f64 * 0.01;
                let [u, _, v, _] = pair.eval(t).map_err(e)?;
                let (cu, cv) = match kind {
                    KernelKind::Parallel => (closed_u_parallel(s, t), closed_v_parallel(s, t)),
                    KernelKind::Perpendicular => (
                        closed_u_perp(s, t).map_err(e)?,
                        closed_v_perp(s, t).map_err(e)?,
                    ),
                };
                let err = (u - cu).abs().max((v - cv).abs());
                if !(err < 1e-7) {
                    return Err(format!("{kind} s = {s} t = {t}: error {err:e}"));
                }
                worst = worst.max(err);
            }
        }
    }
    Ok(format!("max abs error on [0, 10] = {worst:.2e}"))
}

fn theta_endpoints() -> Check {
    let at0 = (theta_infinity(0.0).map_err(e)? - FRAC_PI_2).abs();
    let at_cap = (theta_infinity(FRAC_PI_4).map_err(e)? - SQRT_2).abs();
    let near_cap = (theta_infinity(FRAC_PI_4 - 1e-15).map_err(e)? - SQRT_2).abs();
    ensure(at0 < 1e-12 && at_cap < 1e-12, || {
        format!("errors {at0:e}, {at_cap:e}")
    })?;
    Ok(format!(
        "|Θ∞(0) - π/2| = {at0:.1e}, |Θ∞(π/4) - √2| = {at_cap:.1e}, at π/4 - 1e-15: {near_cap:.1e}"
    ))
}

fn radial_certificate() -> Check {
    let mut worst: f64 = 0.0;
    for r in [0.7, FRAC_PI_4, 0.85] {
        let p = GeodesicParams::new(0.0, r, 0.0).map_err(e)?;
        let w = certificate(KernelKind::Parallel, p, 1e-11).map_err(e)?;
        let exact = (r.sin() - r.cos()) / (r.sin() + r.cos());
        worst = worst.max((w - exact).abs());
    }
    ensure(worst < 1e-9, || format!("max error {worst:e}"))?;
    Ok(format!("max |W'(0) - closed| = {worst:.2e}"))
}

fn root_finding() -> Check {
    let tol = 1e-11;
    let sharp = find_r_star(0.0, 0.1, tol).map_err(e)?;
    let d0 = (sharp.r_star - FRAC_PI_4).abs();
    ensure(d0 < 1e-10, || format!("|r*(0) - π/4| = {d0:e}"))?;
    let mut dist = Vec::new();
    for eps in [0.1, 0.05, 0.01] {
        let root = find_r_star(eps, 0.1, tol).map_err(e)?;
        ensure(root.root_residual < 1e-10, || {
            format!("eps = {eps}: residual {:e}", root.root_residual)
        })?;
        dist.push((root.r_star - FRAC_PI_4).abs());
    }
    ensure(dist[0] > dist[1] && dist[1] > dist[2], || {
        format!("|r* - π/4| = {dist:?}")
    })?;
    Ok(format!(
        "|r*(0) - π/4| = {d0:.1e}; |r* - π/4| at eps 0.1, 0.05, 0.01 = {:.4e}, {:.4e}, {:.4e}",
        dist[0], dist[1], dist[2]
    ))
}

fn concavity() -> Check {
    let mut parts = Vec::new();
    for (kind, target) in [
        (KernelKind::Parallel, -1.0),
        (KernelKind::Perpendicular, -1.0 / 3.0),
    ] {
        let (d1c, d2c) = one_sided_derivatives(|s| closed_certificate(kind, s), 1e-3).map_err(e)?;
        let (d1n, d2n) = certificate_s_derivatives(kind, FRAC_PI_4, 0.0, 1e-3, 1e-12).map_err(e)?;
        ensure((d2c - target).abs() < 1e-3, || {
            format!("{kind} closed d2 = {d2c}")
        })?;
        ensure((d2n - target).abs() < 5e-3, || {
            format!("{kind} integrated d2 = {d2n}")
        })?;
        ensure(d1c.abs() < 1e-6 && d1n.abs() < 1e-6, || {
            format!("{kind} d1 = {d1c:e}, {d1n:e}")
        })?;
        parts.push(format!(
            "{kind}: d2 = {d2c:.6} (closed), {d2n:.6} (integrated), |d1| <= {:.1e}",
            d1c.abs().max(d1n.abs())
        ));
    }
    Ok(parts.join("; "))
}

fn report_summary(report: &ScanReport) -> Result<(), String> {
    match &report.overall {
        Overall::Success => Ok(()),
        Overall::Failed { reason } => Err(format!("overall failed: {reason}")),
    }
}

fn headline_sharp() -> Check {
    let report = assemble_report(0.0, ScanConfig::default());
    report_summary(&report)?;
    let r_star = report.r_star.ok_or("no root")?;
    ensure((r_star - FRAC_PI_4).abs() < 1e-10, || {
        format!("r* = {r_star}")
    })?;
    let witness = report.boundary_witness.as_ref().ok_or("no witness")?;
    let bound = 2.0 * (-30f64).exp() * 1.01;
    ensure(
        witness.y_forward.abs() < bound && witness.y_backward.abs() < bound,
        || {
            format!(
                "|Y(±30)| = {:e}, {:e}",
                witness.y_forward, witness.y_backward
            )
        },
    )?;
    ensure(
        report
            .small_s
            .iter()
            .all(|c| c.w_prime_0_parallel <= 0.0 && c.w_prime_0_perp <= 0.0),
        || "a small-s certificate is positive".into(),
    )?;
    let margin = report
        .mid_s
        .iter()
        .map(|m| m.min_u_parallel.min(m.min_u_perp))
        .fold(f64::INFINITY, f64::min);
    ensure(margin > 0.01, || format!("min U = {margin}"))?;
    let rho0 = report.large_s_threshold.ok_or("no threshold")?;
    let expected = FRAC_PI_4 + 0.5 * LN_2;
    ensure(
        (rho0 - expected).abs() < 1e-12 && report.curvature_negativity_certified,
        || {
            format!(
                "rho0 = {rho0}, certified = {}",
                report.curvature_negativity_certified
            )
        },
    )?;
    Ok(format!(
        "r* = {r_star}, {} small-s and {} mid-s points, min U = {margin:.4}, rho0 = {rho0:.12}",
        report.small_s.len(),
        report.mid_s.len()
    ))
}

fn headline_smooth() -> Check {
    let report = assemble_report(0.05, ScanConfig::default());
    report_summary(&report)?;
    let residual = report.root_residual.ok_or("no root")?;
    ensure(residual < 1e-10, || format!("residual {residual:e}"))?;
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../artifacts/scan_eps_0.05.json"
    );
    let text = std::fs::read_to_string(path).map_err(|err| format!("{path}: {err}"))?;
    let archived: ScanReport = serde_json::from_str(&text).map_err(e)?;
    let (a, b) = (
        archived.r_star.unwrap_or(f64::NAN),
        report.r_star.unwrap_or(f64::NAN),
    );
    ensure(
        archived.overall.is_success() && (a - b).abs() < 1e-12,
        || format!("archived artifact disagrees: r* {a} vs {b}"),
    )?;
    Ok(format!(
        "r* = {b}, residual = {residual:.1e}, archived artifact matches"
    ))
}

fn property_suite() -> Check {
    let tol = 1e-11;
    let r_smooth = 0.7604650677454535;

    // Wronskian along every fundamental pair of a parameter grid.
    let mut wronskian: f64 = 0.0;
    for (r, eps) in [(FRAC_PI_4, 0.0), (r_smooth, 0.05), (0.7, 0.1)] {
        for k in 0..=15 {
            let s = 0.1 * k as f64;
            for kind in KernelKind::ALL {
                let kernel =
                    JacobiKernel::new(kind, GeodesicParams::new(s, r, eps).map_err(e)?, 20.0, tol)
                        .map_err(e)?;
                let pair = fundamental_pair(&kernel, 20.0, tol).map_err(e)?;
                wronskian = wronskian.max(pair.wronskian_defect());
            }
        }
    }
    ensure(wronskian < 1e-8, || {
        format!("Wronskian defect {wronskian:e}")
    })?;

    // W > 0 on [0, 20] near (0, π/4, 0).
    let mut min_w = f64::INFINITY;
    for r in [FRAC_PI_4 - 0.02, FRAC_PI_4, FRAC_PI_4 + 0.02] {
        for eps in [0.0, 0.05] {
            for s in [0.0, 0.1, 0.2, 0.3] {
                for kind in KernelKind::ALL {
                    let sol =
                        certified_solution(kind, GeodesicParams::new(s, r, eps).map_err(e)?, tol)
                            .map_err(e)?;
                    min_w = min_w.min(sol.min_w(20.0).0);
                }
            }
        }
    }
    ensure(min_w > 0.0, || format!("min W = {min_w}"))?;

    // A(ρ) ∂_s ρ = sin(s) U∥ by central differences in s.
    let mut rho1: f64 = 0.0;
    for (r, eps) in [(FRAC_PI_4, 0.0), (r_smooth, 0.05)] {
        let warp = Arc::new(solve_warp(ProfileParams::new(r, eps).map_err(e)?, 1e-13).map_err(e)?);
        for s in [0.1, 0.3] {
            let h = 1e-4;
            let radial = |s: f64| {
                solve_radial_with(
                    GeodesicParams::new(s, r, eps).unwrap(),
                    warp.clone(),
                    8.0,
                    1e-13,
                )
            };
            let (plus, minus) = (radial(s + h).map_err(e)?, radial(s - h).map_err(e)?);
            let center = Arc::new(radial(s).map_err(e)?);
            let pair = fundamental_pair(
                &JacobiKernel::from_radial(KernelKind::Parallel, center.clone()),
                8.0,
                1e-13,
            )
            .map_err(e)?;
            for k in 0..=80 {
                let t = 0.1 * k as f64;
                let d = (plus.eval(t).map_err(e)?.0 - minus.eval(t).map_err(e)?.0) / (2.0 * h);
                let a = warp.eval(center.eval(t).map_err(e)?.0).0;
                let u = pair.eval(t).map_err(e)?[0];
                rho1 = rho1.max((a * d - s.sin() * u).abs());
            }
        }
    }
    ensure(rho1 < 1e-5, || format!("A ∂_s ρ identity error {rho1:e}"))?;

    // Monotone ε-convergence of kernels, warp coefficients and certificates.
    let epsilons = [0.1, 0.05, 0.01];
    let sharp_warp = solve_warp(ProfileParams::critical(), 1e-13).map_err(e)?;
    let mut coef = Vec::new();
    for eps in epsilons {
        let w = solve_warp(ProfileParams::new(FRAC_PI_4, eps).map_err(e)?, 1e-13).map_err(e)?;
        coef.push(
            (w.a_plus - sharp_warp.a_plus)
                .abs()
                .max((w.a_minus - sharp_warp.a_minus).abs()),
        );
    }
    ensure(decreasing(&coef), || format!("a± distances {coef:?}"))?;
    for s in [0.0, 0.3, 1.0] {
        for kind in KernelKind::ALL {
            let base = JacobiKernel::new(kind, critical(s), 12.0, tol).map_err(e)?;
            let mut l1 = Vec::new();
            for eps in epsilons {
                let k = JacobiKernel::new(
                    kind,
                    GeodesicParams::new(s, FRAC_PI_4, eps).map_err(e)?,
                    12.0,
                    tol,
                )
                .map_err(e)?;
                let dt = 1e-3;
                let mut acc = 0.0;
                for i in 0..12000 {
                    let t = (i as f64 + 0.5) * dt;
                    acc += (k.value(t).map_err(e)? - base.value(t).map_err(e)?).abs() * dt;
                }
                l1.push(acc);
            }
            ensure(decreasing(&l1), || {
                format!("{kind} s = {s}: kernel L1 {l1:?}")
            })?;
        }
    }
    for s in [0.0, 0.2] {
        for kind in KernelKind::ALL {
            let base = certificate(kind, critical(s), tol).map_err(e)?;
            let mut dist = Vec::new();
            for eps in epsilons {
                let w = certificate(
                    kind,
                    GeodesicParams::new(s, FRAC_PI_4, eps).map_err(e)?,
                    tol,
                )
                .map_err(e)?;
                dist.push((w - base).abs());
            }
            ensure(decreasing(&dist), || {
                format!("{kind} s = {s}: certificate {dist:?}")
            })?;
        }
    }
    Ok(format!(
        "Wronskian defect <= {wronskian:.1e}, min W = {min_w:.3e}, A ∂_s ρ identity error <= {rho1:.1e}, ε-convergence monotone"
    ))
}

type Criterion = (&'static str, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("closed-form geodesic oracle", geodesic_oracle),
        ("special warp coefficients", warp_coefficients),
        ("Jacobi closed-form oracle", jacobi_oracle),
        ("Θ∞ endpoints", theta_endpoints),
        ("radial stable certificate", radial_certificate),
        ("root finding", root_finding),
        ("concavity signature", concavity),
        ("headline at eps = 0", headline_sharp),
        ("headline at eps = 0.05", headline_smooth),
        ("property suite", property_suite),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.2}s): {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
