//! Decaying Jacobi solutions normalized by `e^t Y(t) → 1`, and the certificate
//! `W'(0) = Y'(0) / Y(0)`.
//!
//! For an even kernel with `k + 1` integrable at infinity, no nontrivial solution
//! vanishes twice exactly when `W'(0) <= 0`.

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::{sqrt_cos_2s, GeodesicParams};
use crate::jacobi::{kernel_value, theta_infinity, JacobiKernel, KernelKind};
use crate::ode::{integrate_backward, Branch, IntegratorOptions, OdeSystem, Tolerance, Trajectory};

/// First seed horizon tried.
pub const INITIAL_HORIZON: f64 = 30.0;
/// Horizon increment of the stabilization check.
pub const HORIZON_STEP: f64 = 5.0;
/// Largest seed horizon before giving up.
pub const MAX_HORIZON: f64 = 60.0;
/// Radial horizon used when a kernel has to be built internally.
pub const RADIAL_HORIZON: f64 = MAX_HORIZON + HORIZON_STEP + 1.0;
/// Sign threshold for the no-double-zero decision.
pub const TOL_SIGN: f64 = 1e-9;

/// `Y'' = -k(t) Y` with the kernel evaluated from the dense radial solution.
struct StableSystem<'a> {
    kernel: &'a JacobiKernel,
    jump: Option<f64>,
}

impl OdeSystem for StableSystem<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, y: &[f64], branch: Branch, d: &mut [f64]) {
        let k = match self.jump {
            // The sharp kernel on a given side of the jump is read off the branch,
            // so stages that overshoot the jump by rounding stay on their side.
            Some(_) => self.kernel.value_on_branch(t, branch),
            None => kernel_value(self.kernel, t),
        }
        .unwrap_or(f64::NAN);
        d[0] = y[1];
        d[1] = -k * y[0];
    }

    fn switching(&self, t: f64, _y: &[f64]) -> Option<f64> {
        self.jump.map(|l| t - l)
    }

    fn event_label(&self) -> &str {
        "rho=r"
    }
}

/// The decaying solution `Y` on `[0, seed_horizon]`.
#[derive(Debug, Clone)]
pub struct StableSolution {
    pub kind: KernelKind,
    pub params: GeodesicParams,
    pub y: Trajectory,
    pub y0: f64,
    pub w_prime_0: f64,
    pub seed_horizon: f64,
    /// `|1 + k(T)|`, the size of the neglected kernel tail at the seed.
    pub seed_residual: f64,
    kernel: Arc<JacobiKernel>,
}

/// Serializable summary of a [`StableSolution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableSummary {
    pub kind: KernelKind,
    pub s: f64,
    pub r: f64,
    pub eps: f64,
    #[serde(rename = "Y0")]
    pub y0: f64,
    #[serde(rename = "W_prime_0")]
    pub w_prime_0: f64,
    pub seed_horizon: f64,
    pub seed_residual: f64,
}

impl StableSolution {
    /// `(Y(t), Y'(t))` with `Y` extended evenly to `t < 0`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        let sys = StableSystem {
            kernel: &self.kernel,
            jump: self.kernel.jump_time(),
        };
        let v = self.y.evaluate(&sys, t.abs())?;
        Ok((v[0], if t < 0.0 { -v[1] } else { v[1] }))
    }

    /// `W(t) = Y(t) / Y(0)`.
    pub fn w(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?.0 / self.y0)
    }

    /// `(min W, argmin)` over the nodes in `[0, t_max]`.
    pub fn min_w(&self, t_max: f64) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for (i, &t) in self.y.nodes().iter().enumerate() {
            if t > t_max {
                break;
            }
            let w = self.y.state(i)[0] / self.y0;
            if w < best.0 {
                best = (w, t);
            }
        }
        best
    }

    pub fn summary(&self) -> StableSummary {
        StableSummary {
            kind: self.kind,
            s: self.params.s,
            r: self.params.r(),
            eps: self.params.eps(),
            y0: self.y0,
            w_prime_0: self.w_prime_0,
            seed_horizon: self.seed_horizon,
            seed_residual: self.seed_residual,
        }
    }
}

impl JacobiKernel {
    /// `k(t)` with the side of a sharp jump fixed by `branch`.
    pub(crate) fn value_on_branch(&self, t: f64, branch: Branch) -> Result<f64> {
        let ta = t.abs();
        let (rho, drho) = self.radial.eval(ta)?;
        let kp = self.warp.k_parallel_branch(rho, branch);
        if self.kind == KernelKind::Parallel || self.params.s == 0.0 {
            return Ok(kp);
        }
        let v2 = drho * drho;
        Ok(v2 * kp + (1.0 - v2) * self.warp.k_perp_branch(rho, branch))
    }
}

/// Integrate the decaying solution backward from a fixed seed horizon.
pub fn stable_solution_at(kernel: &JacobiKernel, horizon: f64, tol: f64) -> Result<StableSolution> {
    let kernel = if kernel.horizon() < horizon {
        Arc::new(JacobiKernel::new(
            kernel.kind,
            kernel.params,
            horizon + 1.0,
            tol,
        )?)
    } else {
        Arc::new(kernel.clone())
    };
    let sys = StableSystem {
        kernel: &kernel,
        jump: kernel.jump_time(),
    };
    let seed = (-horizon).exp();
    let opts = IntegratorOptions::from(Tolerance::relative(tol, tol * seed * 1e-3)).max_step(0.5);
    let y = integrate_backward(&sys, horizon, &[seed, -seed], 0.0, opts)?;
    let first = y.state(0);
    let (y0, dy0) = (first[0], first[1]);
    let seed_residual = (1.0 + kernel_value(&kernel, horizon)?).abs();
    Ok(StableSolution {
        kind: kernel.kind,
        params: kernel.params,
        y0,
        w_prime_0: dy0 / y0,
        seed_horizon: horizon,
        seed_residual,
        y,
        kernel,
    })
}

/// The decaying solution with the seed horizon chosen adaptively: starting at
/// [`INITIAL_HORIZON`], the horizon grows by [`HORIZON_STEP`] until `W'(0)`
/// moves by less than `tol`. The longer of the last two solutions is returned.
pub fn stable_solution(kernel: &JacobiKernel, tol: f64) -> Result<StableSolution> {
    let kernel = if kernel.horizon() < RADIAL_HORIZON {
        JacobiKernel::new(kernel.kind, kernel.params, RADIAL_HORIZON, tol)?
    } else {
        kernel.clone()
    };
    let mut horizon = INITIAL_HORIZON;
    let mut prev = stable_solution_at(&kernel, horizon, tol)?;
    let mut change = f64::INFINITY;
    while horizon < MAX_HORIZON {
        horizon += HORIZON_STEP;
        let next = stable_solution_at(&kernel, horizon, tol)?;
        change = (next.w_prime_0 - prev.w_prime_0).abs();
        prev = next;
        if change < tol {
            return Ok(prev);
        }
    }
    Err(Error::SeedHorizon { horizon, change })
}

/// `W'(0)` for the given kernel kind and parameters; requires `Y(0) > 0`.
pub fn certificate(kind: KernelKind, params: GeodesicParams, tol: f64) -> Result<f64> {
    Ok(certified_solution(kind, params, tol)?.w_prime_0)
}

/// The stable solution behind [`certificate`], with the `Y(0) > 0` check applied.
pub fn certified_solution(
    kind: KernelKind,
    params: GeodesicParams,
    tol: f64,
) -> Result<StableSolution> {
    let kernel = JacobiKernel::new(kind, params, RADIAL_HORIZON, tol)?;
    let sol = stable_solution(&kernel, tol)?;
    if !(sol.y0 > 0.0) {
        return Err(Error::NonPositiveY0 {
            y0: sol.y0,
            s: params.s,
            r: params.r(),
            eps: params.eps(),
        });
    }
    Ok(sol)
}

/// `W'(0)` at `(s, π/4, 0)` in closed form.
pub fn closed_certificate(kind: KernelKind, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain {
            operation: "closed_certificate",
            reason: format!("s = {s} must be >= 0"),
        });
    }
    if s >= FRAC_PI_4 {
        return Ok(match kind {
            // k ≡ -1, so Y = e^{-t}.
            KernelKind::Parallel => -1.0,
            // Y ∝ U - w cot(w) V with w = √2 e^{π/4 - s}.
            KernelKind::Perpendicular => {
                let w = std::f64::consts::SQRT_2 * (FRAC_PI_4 - s).exp();
                -w / w.tan()
            }
        });
    }
    let c = sqrt_cos_2s(s);
    Ok(match kind {
        KernelKind::Parallel => -(1.0 - c) / (1.0 + c),
        KernelKind::Perpendicular if s == 0.0 => 0.0,
        KernelKind::Perpendicular => -1.0 / (s.sin() * theta_infinity(s)?.tan()),
    })
}

/// One-sided stencils at `s = 0`:
/// `d1 = (-3f0 + 4f1 - f2) / 2h`, `d2 = (2f0 - 5f1 + 4f2 - f3) / h²`.
pub fn one_sided_derivatives<F>(f: F, h: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let v = [f(0.0)?, f(h)?, f(2.0 * h)?, f(3.0 * h)?];
    let d1 = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    let d2 = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h);
    Ok((d1, d2))
}

/// First and second `s`-derivatives of the integrated certificate at `s = 0`.
pub fn certificate_s_derivatives(
    kind: KernelKind,
    r: f64,
    eps: f64,
    h: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    if !(1e-3..=1e-1).contains(&h) {
        return Err(Error::InvalidParams(format!(
            "stencil step h = {h} outside [1e-3, 1e-1]"
        )));
    }
    one_sided_derivatives(
        |s| certificate(kind, GeodesicParams::new(s, r, eps)?, tol),
        h,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NoDoubleZeros,
    DoubleZeroExists,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub verdict: Verdict,
    pub certificate: f64,
    /// `|W'(0)| < TOL_SIGN / 10`: the boundary case of the criterion.
    pub marginal: bool,
}

/// Classify a certificate value against [`TOL_SIGN`].
pub fn classify(certificate: f64) -> CriterionOutcome {
    CriterionOutcome {
        verdict: if certificate <= TOL_SIGN {
            Verdict::NoDoubleZeros
        } else {
            Verdict::DoubleZeroExists
        },
        certificate,
        marginal: certificate.abs() < TOL_SIGN / 10.0,
    }
}

pub fn no_double_zero_criterion(
    kind: KernelKind,
    params: GeodesicParams,
    tol: f64,
) -> Result<CriterionOutcome> {
    Ok(classify(certificate(kind, params, tol)?))
}
