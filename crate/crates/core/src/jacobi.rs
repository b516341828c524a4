//! The scalar Jacobi equations `Y'' + k(t) Y = 0` along `γ_μ`.
//!
//! The parallel kernel is `K∥(ρ(t))`. The perpendicular kernel is the sectional
//! curvature of the plane spanned by `γ'` and a normal to the plane of `γ`,
//! `ρ'² K∥(ρ) + (1 - ρ'²) K⊥(ρ)`. For radial geodesics both coincide.

use std::f64::consts::{FRAC_PI_4, SQRT_2};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::{
    cap_exit_factor, entry_time, solve_radial, sqrt_cos_2s, GeodesicParams, RadialSolution,
};
use crate::ode::{integrate_ivp, Branch, IntegratorOptions, OdeSystem, Tolerance, Trajectory};
use crate::profile::WarpFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Parallel,
    Perpendicular,
}

impl KernelKind {
    pub const ALL: [KernelKind; 2] = [KernelKind::Parallel, KernelKind::Perpendicular];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Parallel => "parallel",
            KernelKind::Perpendicular => "perpendicular",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel" | "par" => Ok(KernelKind::Parallel),
            "perpendicular" | "perp" => Ok(KernelKind::Perpendicular),
            other => Err(Error::InvalidParams(format!(
                "unknown kernel kind '{other}'"
            ))),
        }
    }
}

/// `k(t)` from the radial state. `radial_line` selects the `s = 0` convention.
fn kernel_from_state(
    kind: KernelKind,
    warp: &WarpFunction,
    rho: f64,
    drho: f64,
    branch: Branch,
    radial_line: bool,
) -> f64 {
    let kp = warp.k_parallel_branch(rho, branch);
    if kind == KernelKind::Parallel || radial_line {
        return kp;
    }
    let v2 = drho * drho;
    v2 * kp + (1.0 - v2) * warp.k_perp_branch(rho, branch)
}

/// The coefficient `k(t)` of a scalar Jacobi equation along `γ_μ`.
#[derive(Debug, Clone)]
pub struct JacobiKernel {
    pub kind: KernelKind,
    pub params: GeodesicParams,
    pub radial: Arc<RadialSolution>,
    pub warp: Arc<WarpFunction>,
}

impl JacobiKernel {
    pub fn new(kind: KernelKind, params: GeodesicParams, horizon: f64, tol: f64) -> Result<Self> {
        let radial = solve_radial(params, horizon, tol)?;
        Ok(Self::from_radial(kind, Arc::new(radial)))
    }

    pub fn from_radial(kind: KernelKind, radial: Arc<RadialSolution>) -> Self {
        Self {
            kind,
            params: radial.params,
            warp: radial.warp.clone(),
            radial,
        }
    }

    /// Largest `t` at which the kernel can be evaluated.
    pub fn horizon(&self) -> f64 {
        self.radial.horizon()
    }

    /// `k(t)`, even in `t`.
    pub fn value(&self, t: f64) -> Result<f64> {
        let ta = t.abs();
        let (rho, drho) = self.radial.eval(ta)?;
        Ok(kernel_from_state(
            self.kind,
            &self.warp,
            rho,
            drho,
            self.radial.branch_at(ta),
            self.params.s == 0.0,
        ))
    }

    /// Time of the curvature jump `ρ = r` for `ε = 0`, if any.
    pub fn jump_time(&self) -> Option<f64> {
        if self.params.profile.is_sharp() {
            self.radial.entry_time
        } else {
            None
        }
    }
}

/// `k(t)` for `t >= 0`; see [`JacobiKernel::value`].
pub fn kernel_value(kernel: &JacobiKernel, t: f64) -> Result<f64> {
    kernel.value(t)
}

/// Radial equation together with the two Jacobi solutions:
/// `(ρ, ρ', U, U', V, V')`.
#[derive(Debug, Clone)]
struct PairSystem {
    kind: KernelKind,
    warp: Arc<WarpFunction>,
    radial_line: bool,
}

impl OdeSystem for PairSystem {
    fn dim(&self) -> usize {
        6
    }

    fn rhs(&self, _t: f64, y: &[f64], branch: Branch, d: &mut [f64]) {
        if self.radial_line {
            d[0] = 1.0;
            d[1] = 0.0;
        } else {
            let (a, da) = self.warp.eval_branch(y[0], branch);
            d[0] = y[1];
            d[1] = da / a * (1.0 - y[1] * y[1]);
        }
        let k = kernel_from_state(self.kind, &self.warp, y[0], y[1], branch, self.radial_line);
        d[2] = y[3];
        d[3] = -k * y[2];
        d[4] = y[5];
        d[5] = -k * y[4];
    }

    fn switching(&self, _t: f64, y: &[f64]) -> Option<f64> {
        Some(y[0] - self.warp.params.r())
    }

    fn event_label(&self) -> &str {
        "rho=r"
    }
}

/// `U` with `U(0) = 1, U'(0) = 0` and `V` with `V(0) = 0, V'(0) = 1`.
#[derive(Debug, Clone)]
pub struct FundamentalPair {
    pub kind: KernelKind,
    pub params: GeodesicParams,
    pub u: Trajectory,
    pub v: Trajectory,
    full: Trajectory,
    system: PairSystem,
}

impl FundamentalPair {
    pub fn horizon(&self) -> f64 {
        self.full.grid.t1
    }

    pub fn nodes(&self) -> &[f64] {
        self.full.nodes()
    }

    /// `[U, U', V, V']` at `t`, extended to `t < 0` with `U` even and `V` odd.
    pub fn eval(&self, t: f64) -> Result<[f64; 4]> {
        let y = self.full.evaluate(&self.system, t.abs())?;
        Ok(if t < 0.0 {
            [y[2], -y[3], -y[4], y[5]]
        } else {
            [y[2], y[3], y[4], y[5]]
        })
    }

    /// Largest relative Wronskian defect `|UV' - U'V - 1| / (|UV'| + |U'V|)`
    /// over the integration nodes.
    pub fn wronskian_defect(&self) -> f64 {
        (0..self.full.len())
            .map(|i| {
                let y = self.full.state(i);
                let (p, q) = (y[2] * y[5], y[3] * y[4]);
                (p - q - 1.0).abs() / (p.abs() + q.abs())
            })
            .fold(0.0, f64::max)
    }

    /// `(min U, argmin)` over the nodes of `[0, t_max]`.
    pub fn min_u(&self, t_max: f64) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for (i, &t) in self.full.nodes().iter().enumerate() {
            if t > t_max {
                break;
            }
            let u = self.full.state(i)[2];
            if u < best.0 {
                best = (u, t);
            }
        }
        best
    }

    /// The kernel value at node `i`, from the integrated radial state.
    pub fn kernel_at_node(&self, i: usize) -> f64 {
        let y = self.full.state(i);
        let branch = if i + 1 < self.full.len() {
            self.full.branch(i)
        } else {
            self.full.branch(i.saturating_sub(1))
        };
        kernel_from_state(
            self.kind,
            &self.system.warp,
            y[0],
            y[1],
            branch,
            self.system.radial_line,
        )
    }
}

/// Integrate `U` and `V` on `[0, horizon]`.
///
/// The radial equation is integrated alongside, so for `ε = 0` a node is placed
/// exactly at the curvature jump and the solutions are continued C¹ across it.
pub fn fundamental_pair(kernel: &JacobiKernel, horizon: f64, tol: f64) -> Result<FundamentalPair> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParams(format!(
            "horizon {horizon} must be positive"
        )));
    }
    let system = PairSystem {
        kind: kernel.kind,
        warp: kernel.warp.clone(),
        radial_line: kernel.params.s == 0.0,
    };
    let y0 = [kernel.params.s, 0.0, 1.0, 0.0, 0.0, 1.0];
    let y0 = if system.radial_line {
        [0.0, 1.0, 1.0, 0.0, 0.0, 1.0]
    } else {
        y0
    };
    let opts = IntegratorOptions::from(Tolerance::new(tol)).max_step(0.25);
    let full = integrate_ivp(&system, 0.0, &y0, horizon, opts)?;
    Ok(FundamentalPair {
        kind: kernel.kind,
        params: kernel.params,
        u: full.project_pair(2),
        v: full.project_pair(4),
        full,
        system,
    })
}

fn cap_entry(s: f64) -> f64 {
    entry_time(s, FRAC_PI_4).expect("0 <= s < pi/4")
}

/// `(cos ℓ - sin ℓ, cos ℓ + sin ℓ)` for `ℓ = ℓ(s)` at `r = π/4`, computed from `s`
/// so that the first entry is exactly 0 at `s = 0`.
fn cap_entry_cos_sin(s: f64) -> (f64, f64) {
    let c = sqrt_cos_2s(s);
    let scale = SQRT_2 * s.cos();
    (
        2.0 * s.sin().powi(2) / ((1.0 + c) * scale),
        (1.0 + c) / scale,
    )
}

/// `U∥_s(t)` at `(π/4, 0)`.
pub fn closed_u_parallel(s: f64, t: f64) -> f64 {
    if s >= FRAC_PI_4 {
        return t.cosh();
    }
    let (l, ta) = (cap_entry(s), t.abs());
    if ta <= l {
        t.cos()
    } else {
        // cos ℓ cosh x - sin ℓ sinh x, split into its growing and decaying modes.
        let x = ta - l;
        let (diff, sum) = cap_entry_cos_sin(s);
        0.5 * (diff * x.exp() + sum * (-x).exp())
    }
}

/// `V∥_s(t)` at `(π/4, 0)`.
pub fn closed_v_parallel(s: f64, t: f64) -> f64 {
    if s >= FRAC_PI_4 {
        return t.sinh();
    }
    let (l, ta) = (cap_entry(s), t.abs());
    if ta <= l {
        t.sin()
    } else {
        let x = ta - l;
        let (diff, sum) = cap_entry_cos_sin(s);
        t.signum() * 0.5 * (sum * x.exp() - diff * (-x).exp())
    }
}

fn check_perp_s(s: f64, operation: &'static str) -> Result<()> {
    if !(s > 0.0) {
        return Err(Error::Domain {
            operation,
            reason: format!("s = {s} must be positive (csc s is singular at 0)"),
        });
    }
    Ok(())
}

/// `arccos(tan s)` for `0 <= s <= π/4`, accurate up to `s = π/4`.
fn arccos_tan(s: f64) -> f64 {
    // 1 - tan s = √2 sin(π/4 - s) / cos s.
    let d = FRAC_PI_4 - s;
    2.0 * (d.sin().max(0.0) / (SQRT_2 * s.cos())).sqrt().asin()
}

/// `Θ(t, s) = 2 sin s sinh(t - ℓ(s)) / F(t, s) + arccos(tan s)` for `0 <= s < π/4`.
pub fn theta(t: f64, s: f64) -> Result<f64> {
    if !(0.0..FRAC_PI_4).contains(&s) {
        return Err(Error::Domain {
            operation: "theta",
            reason: format!("need 0 <= s < pi/4, got {s}"),
        });
    }
    let l = cap_entry(s);
    Ok(2.0 * s.sin() * (t - l).sinh() / cap_exit_factor(t, s) + arccos_tan(s))
}

/// `Θ_∞(s) = arccos(tan s) + 2 sin s / (1 + √(cos 2s))`; `s = π/4` gives the limit `√2`.
pub fn theta_infinity(s: f64) -> Result<f64> {
    if !(0.0..=FRAC_PI_4).contains(&s) {
        return Err(Error::Domain {
            operation: "theta_infinity",
            reason: format!("need 0 <= s <= pi/4, got {s}"),
        });
    }
    Ok(arccos_tan(s) + 2.0 * s.sin() / (1.0 + sqrt_cos_2s(s)))
}

/// `U⊥_s(t)` at `(π/4, 0)`, `s > 0`.
pub fn closed_u_perp(s: f64, t: f64) -> Result<f64> {
    check_perp_s(s, "closed_u_perp")?;
    if s >= FRAC_PI_4 {
        return Ok(t.cosh() * (SQRT_2 * (FRAC_PI_4 - s).exp() * t.tanh()).cos());
    }
    let ta = t.abs();
    if ta <= cap_entry(s) {
        return Ok(t.cos());
    }
    Ok(0.5 * SQRT_2 / s.sin() * cap_exit_factor(ta, s) * theta(ta, s)?.cos())
}

/// `V⊥_s(t)` at `(π/4, 0)`, `s > 0`.
pub fn closed_v_perp(s: f64, t: f64) -> Result<f64> {
    check_perp_s(s, "closed_v_perp")?;
    if s >= FRAC_PI_4 {
        let w = SQRT_2 * (FRAC_PI_4 - s).exp();
        return Ok(t.cosh() * (w * t.tanh()).sin() / w);
    }
    let ta = t.abs();
    if ta <= cap_entry(s) {
        return Ok(t.sin());
    }
    Ok(t.signum() * 0.5 * SQRT_2 * cap_exit_factor(ta, s) * theta(ta, s)?.sin())
}

/// The kernel `K_s(t)` at `(π/4, 0)` in closed form.
pub fn closed_kernel(kind: KernelKind, s: f64, t: f64) -> f64 {
    let ta = t.abs();
    let inside = s < FRAC_PI_4 && ta < cap_entry(s);
    match kind {
        _ if inside => 1.0,
        KernelKind::Parallel => -1.0,
        KernelKind::Perpendicular if s == 0.0 => -1.0,
        KernelKind::Perpendicular if s >= FRAC_PI_4 => {
            -1.0 + 2.0 * (std::f64::consts::FRAC_PI_2 - 2.0 * s).exp() / ta.cosh().powi(4)
        }
        KernelKind::Perpendicular => -1.0 + 4.0 * s.sin().powi(2) / cap_exit_factor(ta, s).powi(4),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-11;

    fn kernel(kind: KernelKind, s: f64) -> JacobiKernel {
        JacobiKernel::new(
            kind,
            GeodesicParams::new(s, FRAC_PI_4, 0.0).unwrap(),
            25.0,
            TOL,
        )
        .unwrap()
    }

    #[test]
    fn kernel_values_match_lemmas() {
        let k = kernel(KernelKind::Perpendicular, 0.3);
        assert_eq!(k.value(0.2).unwrap(), 1.0);
        let f = cap_exit_factor(2.0, 0.3);
        let exact = -1.0 + 4.0 * 0.3f64.sin().powi(2) / f.powi(4);
        assert!((k.value(2.0).unwrap() - exact).abs() < 1e-9);
        let far = kernel(KernelKind::Perpendicular, 1.0);
        let exact = -1.0 + 2.0 * (-2.0 + std::f64::consts::FRAC_PI_2).exp() / 1f64.cosh().powi(4);
        assert!((far.value(1.0).unwrap() - exact).abs() < 1e-9);
        assert!((far.value(20.0).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(kernel(KernelKind::Parallel, 0.3).value(3.0).unwrap(), -1.0);
    }

    #[test]
    fn radial_parallel_pair_decays() {
        let pair = fundamental_pair(&kernel(KernelKind::Parallel, 0.0), 10.0, TOL).unwrap();
        for t in [1.0, 3.0, 7.5] {
            let u = pair.eval(t).unwrap()[0];
            assert!((u - 0.5 * SQRT_2 * (-(t - FRAC_PI_4)).exp()).abs() < 1e-9);
        }
        assert!(pair
            .full
            .events
            .iter()
            .any(|e| (e.time - FRAC_PI_4).abs() < 1e-12));
    }

    #[test]
    fn perpendicular_pair_matches_closed_forms() {
        for s in [0.3, 1.0] {
            let pair =
                fundamental_pair(&kernel(KernelKind::Perpendicular, s), 10.0, 1e-12).unwrap();
            for k in 0..=100 {
                let t = 0.1 * k as f64;
                let [u, _, v, _] = pair.eval(t).unwrap();
                assert!(
                    (u - closed_u_perp(s, t).unwrap()).abs() < 1e-7,
                    "U s={s} t={t}"
                );
                assert!(
                    (v - closed_v_perp(s, t).unwrap()).abs() < 1e-7,
                    "V s={s} t={t}"
                );
            }
            assert!(pair.wronskian_defect() < 1e-9);
        }
    }

    #[test]
    fn parity_of_pair() {
        let pair = fundamental_pair(&kernel(KernelKind::Parallel, 0.2), 5.0, TOL).unwrap();
        let a = pair.eval(2.0).unwrap();
        let b = pair.eval(-2.0).unwrap();
        assert_eq!(a[0], b[0]);
        assert_eq!(a[1], -b[1]);
        assert_eq!(a[2], -b[2]);
        assert_eq!(a[3], b[3]);
    }

    #[test]
    fn parallel_closed_forms() {
        assert!((closed_u_parallel(0.0, FRAC_PI_4) - 0.5 * SQRT_2).abs() < 1e-15);
        let l = cap_entry(0.2);
        let u = l.cos() * (3.0 - l).cosh() - l.sin() * (3.0 - l).sinh();
        assert!((closed_u_parallel(0.2, 3.0) - u).abs() < 1e-13);
        let v = l.sin() * (3.0 - l).cosh() + l.cos() * (3.0 - l).sinh();
        assert!((closed_v_parallel(0.2, 3.0) - v).abs() < 1e-12);
        // The decaying radial solution keeps full relative accuracy far out.
        let u20 = closed_u_parallel(0.0, 20.0) / (0.5 * SQRT_2 * (FRAC_PI_4 - 20.0).exp());
        assert!((u20 - 1.0).abs() < 1e-14);
        assert_eq!(closed_v_parallel(0.2, -3.0), -closed_v_parallel(0.2, 3.0));
        assert_eq!(closed_u_parallel(1.0, 2.0), 2f64.cosh());
    }

    #[test]
    fn perpendicular_closed_forms() {
        assert_eq!(closed_u_perp(FRAC_PI_4, 0.0).unwrap(), 1.0);
        assert!(closed_u_perp(0.0, 1.0).is_err());
        // Continuity across the junction.
        let l = cap_entry(0.3);
        for f in [closed_u_perp, closed_v_perp] {
            assert!((f(0.3, l).unwrap() - f(0.3, l + 1e-12).unwrap()).abs() < 1e-10);
        }
        // Smooth limit s -> 0.
        let u = closed_u_perp(1e-6, 2.0).unwrap();
        assert!((u - closed_u_parallel(0.0, 2.0)).abs() < 1e-5);
    }

    #[test]
    fn theta_infinity_values() {
        assert!((theta_infinity(0.0).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((theta_infinity(FRAC_PI_4).unwrap() - SQRT_2).abs() < 1e-12);
        assert!((theta_infinity(FRAC_PI_4 - 1e-14).unwrap() - SQRT_2).abs() < 1e-6);
        let expected = 0.3f64.tan().acos() + 2.0 * 0.3f64.sin() / (1.0 + 0.6f64.cos().sqrt());
        assert!((theta_infinity(0.3).unwrap() - expected).abs() < 1e-14);
        assert!((theta(40.0, 0.3).unwrap() - expected).abs() < 1e-14);
        assert!(theta_infinity(0.8).is_err());
        let mut prev = f64::INFINITY;
        for k in 0..=78 {
            let v = theta_infinity(0.01 * k as f64).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn theta_is_increasing_and_bounded() {
        for s in [0.05, 0.3, 0.6, 0.78] {
            let l = cap_entry(s);
            let mut prev = theta(l, s).unwrap();
            for k in 1..200 {
                let t = l + 0.1 * k as f64;
                let v = theta(t, s).unwrap();
                assert!(v > prev || (v - prev).abs() < 1e-15);
                assert!(v > 0.0 && v < std::f64::consts::FRAC_PI_2);
                prev = v;
            }
        }
    }

    #[test]
    fn closed_kernel_matches_numeric() {
        for s in [0.0, 0.4, 1.2] {
            let k = kernel(KernelKind::Perpendicular, s);
            for t in [0.1, 0.5, 1.5, 4.0] {
                let exact = closed_kernel(KernelKind::Perpendicular, s, t);
                assert!((k.value(t).unwrap() - exact).abs() < 1e-9, "s={s} t={t}");
            }
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(
            "perp".parse::<KernelKind>().unwrap(),
            KernelKind::Perpendicular
        );
        assert_eq!(KernelKind::Parallel.to_string(), "parallel");
        assert!("diagonal".parse::<KernelKind>().is_err());
    }
}
