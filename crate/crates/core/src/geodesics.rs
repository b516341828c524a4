//! Radial coordinate of the geodesics `γ_{s,r,ε}` and the closed forms of the
//! `(π/4, 0)` metric.
//!
//! A geodesic is labelled by its distance `s` of closest approach to the origin,
//! attained at `t = 0`, so `ρ(0) = s`, `ρ'(0) = 0` and `ρ` is even in `t`.

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate_ivp, Branch, Event, OdeSystem, Trajectory};
use crate::profile::{solve_warp, ProfileParams, WarpFunction};

/// Default integration horizon.
pub const DEFAULT_HORIZON: f64 = 30.0;

/// `μ = (s, r, ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicParams {
    pub s: f64,
    pub profile: ProfileParams,
}

impl GeodesicParams {
    pub fn new(s: f64, r: f64, eps: f64) -> Result<Self> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidParams(format!("s = {s} must be >= 0")));
        }
        Ok(Self {
            s,
            profile: ProfileParams::new(r, eps)?,
        })
    }

    pub fn with_profile(s: f64, profile: ProfileParams) -> Result<Self> {
        Self::new(s, profile.r(), profile.eps())
    }

    pub fn r(&self) -> f64 {
        self.profile.r()
    }

    pub fn eps(&self) -> f64 {
        self.profile.eps()
    }
}

/// `ρ'' = (A'/A)(ρ) (1 - ρ'^2)` as a system in `(ρ, ρ')`, switching at `ρ = r`.
#[derive(Debug, Clone)]
pub struct RadialSystem {
    pub warp: Arc<WarpFunction>,
}

impl OdeSystem for RadialSystem {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, _t: f64, y: &[f64], branch: Branch, d: &mut [f64]) {
        let (a, da) = self.warp.eval_branch(y[0], branch);
        d[0] = y[1];
        d[1] = da / a * (1.0 - y[1] * y[1]);
    }

    fn switching(&self, _t: f64, y: &[f64]) -> Option<f64> {
        Some(y[0] - self.warp.params.r())
    }

    fn event_label(&self) -> &str {
        "rho=r"
    }
}

/// `ρ_μ` and `ρ_μ'` on `[0, T]`.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub params: GeodesicParams,
    pub warp: Arc<WarpFunction>,
    pub trajectory: Trajectory,
    /// First time with `ρ = r`; present iff `s < r`.
    pub entry_time: Option<f64>,
    system: RadialSystem,
}

impl RadialSolution {
    pub fn horizon(&self) -> f64 {
        self.trajectory.grid.t1
    }

    /// `(ρ(t), ρ'(t))`, extended to `t < 0` by evenness.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        let (ta, sign) = if t < 0.0 { (-t, -1.0) } else { (t, 1.0) };
        if self.params.s == 0.0 {
            if ta > self.horizon() {
                return Err(crate::ode::OdeError::OutOfRange {
                    t,
                    t0: 0.0,
                    t1: self.horizon(),
                }
                .into());
            }
            return Ok((ta, sign));
        }
        let y = self.trajectory.evaluate(&self.system, ta)?;
        Ok((y[0], sign * y[1]))
    }

    /// Side of `ρ = r` that `t >= 0` belongs to.
    pub fn branch_at(&self, t: f64) -> Branch {
        match self.entry_time {
            Some(l) if t.abs() < l => Branch::Below,
            _ => Branch::Above,
        }
    }
}

/// Integrate the radial geodesic equation for `μ` on `[0, horizon]`.
///
/// For `s = 0` the solution is the exact line `ρ(t) = t`, which sidesteps the
/// polar-coordinate singularity at the origin.
pub fn solve_radial(params: GeodesicParams, horizon: f64, tol: f64) -> Result<RadialSolution> {
    let warp = Arc::new(solve_warp(params.profile, tol.min(1e-12))?);
    solve_radial_with(params, warp, horizon, tol)
}

/// As [`solve_radial`] with a precomputed warp function.
pub fn solve_radial_with(
    params: GeodesicParams,
    warp: Arc<WarpFunction>,
    horizon: f64,
    tol: f64,
) -> Result<RadialSolution> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParams(format!(
            "horizon {horizon} must be positive"
        )));
    }
    let system = RadialSystem { warp: warp.clone() };
    let r = params.r();
    if params.s == 0.0 {
        let n = (horizon / 0.05).ceil() as usize;
        let mut nodes: Vec<f64> = (0..=n).map(|k| (k as f64 * 0.05).min(horizon)).collect();
        nodes.dedup();
        if r < horizon && !nodes.contains(&r) {
            let at = nodes.partition_point(|&x| x < r);
            nodes.insert(at, r);
        }
        let states = nodes.iter().flat_map(|&t| [t, 1.0]).collect();
        let events = if r < horizon {
            vec![Event {
                time: r,
                label: "rho=r".to_owned(),
            }]
        } else {
            Vec::new()
        };
        return Ok(RadialSolution {
            params,
            warp,
            trajectory: Trajectory::from_samples(nodes, 2, states, events),
            entry_time: Some(r),
            system,
        });
    }
    let trajectory = integrate_ivp(&system, 0.0, &[params.s, 0.0], horizon, tol)?;
    let entry_time = trajectory.events.first().map(|e| e.time);
    Ok(RadialSolution {
        params,
        warp,
        trajectory,
        entry_time,
        system,
    })
}

/// `ℓ_r(s) = arccos(cos r / cos s)`, time for `γ_s` to reach the sphere `ρ = r`.
pub fn entry_time(s: f64, r: f64) -> Result<f64> {
    check_inside(s, r, "entry_time")?;
    // cos² s - cos² r = sin(r - s) sin(r + s) keeps precision as s → r.
    Ok(((r - s).sin() * (r + s).sin()).sqrt().atan2(r.cos()))
}

/// `ρ'(ℓ_r(s)) = √(cos² s - cos² r) / sin r`.
pub fn radial_exit_slope(s: f64, r: f64) -> Result<f64> {
    check_inside(s, r, "radial_exit_slope")?;
    Ok(((r - s).sin() * (r + s).sin()).sqrt() / r.sin())
}

fn check_inside(s: f64, r: f64, operation: &'static str) -> Result<()> {
    if !(s >= 0.0 && s < r) {
        return Err(Error::Domain {
            operation,
            reason: format!("need 0 <= s < r, got s = {s}, r = {r}"),
        });
    }
    Ok(())
}

pub(crate) fn ln_cosh(t: f64) -> f64 {
    let x = t.abs();
    x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2
}

/// `√(cos 2s)`, the exit slope at `r = π/4`.
pub(crate) fn sqrt_cos_2s(s: f64) -> f64 {
    // cos 2s = sin(2 (π/4 - s)) is exact at s = π/4.
    (2.0 * (FRAC_PI_4 - s)).sin().max(0.0).sqrt()
}

/// `F(t, s) = cosh(t - ℓ(s)) + √(cos 2s) sinh(t - ℓ(s))` for `0 <= s < π/4`.
pub fn cap_exit_factor(t: f64, s: f64) -> f64 {
    let l = entry_time(s, FRAC_PI_4).expect("0 <= s < pi/4");
    let x = t - l;
    let c = sqrt_cos_2s(s);
    0.5 * ((1.0 + c) * x.exp() + (1.0 - c) * (-x).exp())
}

/// Closed-form `ρ_s(t)` of the `(π/4, 0)` metric.
pub fn closed_rho(s: f64, t: f64) -> f64 {
    if s >= FRAC_PI_4 {
        return s + ln_cosh(t);
    }
    let l = entry_time(s, FRAC_PI_4).expect("0 <= s < pi/4");
    let ta = t.abs();
    if ta <= l {
        // arccos(cos s cos t) written without the cancellation near 1.
        let (hs, ht) = ((0.5 * s).sin(), (0.5 * ta).sin());
        2.0 * (hs * hs + s.cos() * ht * ht).sqrt().min(1.0).asin()
    } else {
        FRAC_PI_4 + cap_exit_factor(ta, s).ln()
    }
}

/// Closed-form angular coordinate `θ_s(t)` of the `(π/4, 0)` metric.
pub fn closed_theta(s: f64, t: f64) -> f64 {
    if s >= FRAC_PI_4 {
        return 2f64.sqrt() * t.tanh() * (FRAC_PI_4 - s).exp();
    }
    if t == 0.0 {
        return 0.0;
    }
    let l = entry_time(s, FRAC_PI_4).expect("0 <= s < pi/4");
    let ta = t.abs();
    if ta <= l {
        let sin_rho = closed_rho(s, t).sin();
        (t.sin() / sin_rho).clamp(-1.0, 1.0).asin()
    } else {
        let base = (sqrt_cos_2s(s) / s.cos()).min(1.0).asin();
        t.signum() * (2.0 * s.sin() * (ta - l).sinh() / cap_exit_factor(ta, s) + base)
    }
}

/// Solution of `ρ'' = a (1 - ρ'^2)` with `ρ(0) = s`, `ρ'(0) = v`; a lower bound
/// for every radial solution whose warp satisfies `A'/A >= a`.
pub fn comparison_lower_bound(a: f64, s: f64, v: f64, t: f64) -> Result<f64> {
    if !(a > 0.0) || !(v.abs() <= 1.0) {
        return Err(Error::Domain {
            operation: "comparison_lower_bound",
            reason: format!("need a > 0 and |v| <= 1, got a = {a}, v = {v}"),
        });
    }
    let x = a * t;
    // log(((1 + v) e^x + (1 - v) e^{-x}) / 2) with the dominant exponential factored.
    let log_term = if x >= 0.0 {
        x + (0.5 * ((1.0 + v) + (1.0 - v) * (-2.0 * x).exp())).ln()
    } else {
        -x + (0.5 * ((1.0 + v) * (2.0 * x).exp() + (1.0 - v))).ln()
    };
    Ok(s + log_term / a)
}
