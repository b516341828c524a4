//! Radial curvature profile, warp function and sectional curvatures.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate_ivp, Branch, OdeSystem, Trajectory};

/// Half-width of the default radius interval around π/4.
pub const ETA: f64 = 0.15;
/// Largest mollification width on the default grid.
pub const EPS0: f64 = 0.15;

/// `(r, ε)`: radius of the round cap and width of the curvature transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    r: f64,
    eps: f64,
}

impl ProfileParams {
    pub fn new(r: f64, eps: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidParams(format!("r = {r} must be positive")));
        }
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParams(format!("eps = {eps} must be >= 0")));
        }
        if !(r + eps < FRAC_PI_2) {
            return Err(Error::InvalidParams(format!(
                "r + eps = {} must be below pi/2",
                r + eps
            )));
        }
        Ok(Self { r, eps })
    }

    /// The `C^{1,1}` metric `(π/4, 0)`.
    pub fn critical() -> Self {
        Self {
            r: FRAC_PI_4,
            eps: 0.0,
        }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn is_sharp(&self) -> bool {
        self.eps == 0.0
    }

    /// Inside `[π/4 - ETA, π/4 + ETA] × [0, EPS0]`.
    pub fn in_default_neighborhood(&self) -> bool {
        (self.r - FRAC_PI_4).abs() <= ETA && self.eps <= EPS0
    }
}

/// Smooth step: 0 for `x <= 0`, 1 for `x >= 1`, with `φ(x) + φ(1 - x) = 1`.
pub fn mollifier(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        // exp(-1/x) / (exp(-1/x) + exp(-1/(1-x)))
        1.0 / (1.0 + (1.0 / x - 1.0 / (1.0 - x)).exp())
    }
}

/// Radial sectional curvature `K∥(ρ)`; equals 1 at `ρ = r` when `ε = 0`.
pub fn k_parallel(params: &ProfileParams, rho: f64) -> f64 {
    if params.eps > 0.0 {
        1.0 - 2.0 * mollifier((rho - params.r) / params.eps)
    } else if rho <= params.r {
        1.0
    } else {
        -1.0
    }
}

fn k_parallel_branch(params: &ProfileParams, rho: f64, branch: Branch) -> f64 {
    if params.eps > 0.0 {
        k_parallel(params, rho)
    } else {
        match branch {
            Branch::Below => 1.0,
            Branch::Above => -1.0,
        }
    }
}

/// `A'' = -K∥(ρ) A` as a first-order system in `ρ`, switching at `ρ = r`.
#[derive(Debug, Clone, Copy)]
pub struct ProfileSystem {
    pub params: ProfileParams,
}

impl OdeSystem for ProfileSystem {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, rho: f64, y: &[f64], branch: Branch, d: &mut [f64]) {
        d[0] = y[1];
        d[1] = -k_parallel_branch(&self.params, rho, branch) * y[0];
    }

    fn switching(&self, rho: f64, _y: &[f64]) -> Option<f64> {
        self.params.is_sharp().then_some(rho - self.params.r)
    }

    fn event_label(&self) -> &str {
        "rho=r"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `ρ <= r`: round sphere, `A = sin ρ`.
    Interior,
    /// `r < ρ < r + ε`, integrated numerically.
    Transition,
    /// `ρ >= r + ε`: `A = a₊ e^ρ + a₋ e^{-ρ}`.
    Exterior,
}

#[derive(Debug, Clone)]
struct Transition {
    system: ProfileSystem,
    trajectory: Trajectory,
}

/// The warp function `A_{r,ε}` with its three evaluators.
#[derive(Debug, Clone)]
pub struct WarpFunction {
    pub params: ProfileParams,
    pub a_plus: f64,
    pub a_minus: f64,
    transition: Option<Transition>,
}

/// Build `A_{r,ε}`. For `ε = 0` the exterior coefficients come from C¹ matching
/// with `sin` at `ρ = r`; for `ε > 0` the transition is integrated at `tol`.
pub fn solve_warp(params: ProfileParams, tol: f64) -> Result<WarpFunction> {
    let (r, eps) = (params.r, params.eps);
    if eps == 0.0 {
        let (s, c) = r.sin_cos();
        return Ok(WarpFunction {
            params,
            a_plus: 0.5 * (-r).exp() * (s + c),
            a_minus: 0.5 * r.exp() * (s - c),
            transition: None,
        });
    }
    let system = ProfileSystem { params };
    let trajectory = integrate_ivp(&system, r, &[r.sin(), r.cos()], r + eps, tol)?;
    let end = trajectory.last_state();
    let (a, da) = (end[0], end[1]);
    let rho1 = r + eps;
    Ok(WarpFunction {
        params,
        a_plus: 0.5 * (-rho1).exp() * (a + da),
        a_minus: 0.5 * rho1.exp() * (a - da),
        transition: Some(Transition { system, trajectory }),
    })
}

impl WarpFunction {
    pub fn region(&self, rho: f64) -> Region {
        let (r, eps) = (self.params.r, self.params.eps);
        if rho <= r {
            Region::Interior
        } else if rho >= r + eps {
            Region::Exterior
        } else {
            Region::Transition
        }
    }

    fn exterior(&self, rho: f64) -> (f64, f64) {
        let (ep, em) = (rho.exp(), (-rho).exp());
        (
            self.a_plus * ep + self.a_minus * em,
            self.a_plus * ep - self.a_minus * em,
        )
    }

    fn transition_eval(&self, rho: f64) -> (f64, f64) {
        let tr = self
            .transition
            .as_ref()
            .expect("transition region requires eps > 0");
        let y = tr
            .trajectory
            .evaluate(&tr.system, rho)
            .expect("rho inside the transition interval");
        (y[0], y[1])
    }

    /// `(A(ρ), A'(ρ))`.
    pub fn eval(&self, rho: f64) -> (f64, f64) {
        match self.region(rho) {
            Region::Interior => (rho.sin(), rho.cos()),
            Region::Transition => self.transition_eval(rho),
            Region::Exterior => self.exterior(rho),
        }
    }

    /// `(A, A')` using the smooth extension of the given side of `ρ = r`
    /// when `ε = 0`; identical to [`eval`](Self::eval) otherwise.
    pub fn eval_branch(&self, rho: f64, branch: Branch) -> (f64, f64) {
        if !self.params.is_sharp() {
            return self.eval(rho);
        }
        match branch {
            Branch::Below => (rho.sin(), rho.cos()),
            Branch::Above => self.exterior(rho),
        }
    }

    pub fn k_parallel(&self, rho: f64) -> f64 {
        k_parallel(&self.params, rho)
    }

    pub fn k_parallel_branch(&self, rho: f64, branch: Branch) -> f64 {
        k_parallel_branch(&self.params, rho, branch)
    }

    /// `K⊥(ρ) = A^{-2} (1 - A'^2)`.
    pub fn k_perp(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(Error::Domain {
                operation: "k_perp",
                reason: format!("rho = {rho} must be positive"),
            });
        }
        Ok(match self.region(rho) {
            Region::Interior => 1.0,
            Region::Transition => {
                let (a, da) = self.transition_eval(rho);
                (1.0 - da * da) / (a * a)
            }
            Region::Exterior => self.k_perp_exterior(rho),
        })
    }

    /// `A² - A'² = 4 a₊ a₋` on the exterior, so `K⊥ = (1 + 4 a₊ a₋) / A² - 1`
    /// without cancellation at large ρ.
    fn k_perp_exterior(&self, rho: f64) -> f64 {
        let a = self.exterior(rho).0;
        (1.0 + 4.0 * self.a_plus * self.a_minus) / (a * a) - 1.0
    }

    /// `K⊥` on the given side of `ρ = r` for `ε = 0`.
    pub fn k_perp_branch(&self, rho: f64, branch: Branch) -> f64 {
        if !self.params.is_sharp() {
            return self.k_perp(rho).unwrap_or(1.0);
        }
        match branch {
            Branch::Below => 1.0,
            Branch::Above => self.k_perp_exterior(rho),
        }
    }

    /// `cos²α K∥(ρ) + sin²α K⊥(ρ)` for `cos α ∈ [-1, 1]`.
    pub fn sec_interpolated(&self, rho: f64, cos_alpha: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&cos_alpha) {
            return Err(Error::Domain {
                operation: "sec_interpolated",
                reason: format!("cos_alpha = {cos_alpha} outside [-1, 1]"),
            });
        }
        let c2 = cos_alpha * cos_alpha;
        Ok(c2 * self.k_parallel(rho) + (1.0 - c2) * self.k_perp(rho)?)
    }

    /// `A'/A`, the coefficient of the radial geodesic equation.
    pub fn log_derivative(&self, rho: f64) -> f64 {
        let (a, da) = self.eval(rho);
        da / a
    }

    /// A constant `a > 0` with `A'/A >= a` on `(0, ∞)`.
    pub fn log_derivative_lower_bound(&self) -> f64 {
        let (r, eps) = (self.params.r, self.params.eps);
        // cot is decreasing on the interior; the exterior ratio is monotone in ρ
        // and tends to 1.
        let mut a = (1.0 / r.tan()).min(self.log_derivative(r + eps)).min(1.0);
        if let Some(tr) = &self.transition {
            for i in 0..tr.trajectory.len() {
                let y = tr.trajectory.state(i);
                a = a.min(y[1] / y[0]);
            }
            for k in 1..200 {
                a = a.min(self.log_derivative(r + eps * k as f64 / 200.0));
            }
        }
        a
    }

    /// The radius beyond which `K⊥ < 0`, i.e. where `A'` crosses 1.
    pub fn perp_negativity_radius(&self) -> f64 {
        let (r, eps) = (self.params.r, self.params.eps);
        let (ap, am) = (self.a_plus, self.a_minus);
        // a₊ x² - x - a₋ = 0 with x = e^ρ.
        let x = (1.0 + (1.0 + 4.0 * ap * am).sqrt()) / (2.0 * ap);
        let rho = x.ln();
        if rho >= r + eps || eps == 0.0 {
            return rho;
        }
        // A' decreases until K∥ changes sign at r + ε/2 and increases after.
        let (mut lo, mut hi) = (r + 0.5 * eps, r + eps);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid).1 > 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        hi
    }

    /// The radius beyond which `K∥ < 0`.
    pub fn parallel_negativity_radius(&self) -> f64 {
        self.params.r + 0.5 * self.params.eps
    }
}
