//! Adaptive Dormand–Prince 5(4) integration for systems whose right-hand side
//! is smooth on either side of a switching surface `g(t, y) = 0`.
//!
//! The integrator never lets a step straddle the surface: when an accepted step
//! changes the sign of `g`, the crossing is bracketed on the step, refined by
//! Illinois iteration, and the integration is restarted from a node placed
//! exactly at the crossing with the right-hand side of the far branch. Solutions
//! produced this way are the C¹ weak solutions of equations with jump
//! coefficients.
//!
//! Off-node values are recovered by re-stepping: a single Dormand–Prince step
//! from the nearest accepted node, taken with the branch active on that
//! interval. Its local error is no larger than that of the accepted step.

use thiserror::Error;

/// Side of the switching surface a smooth segment lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// `g < 0`
    Below,
    /// `g > 0`
    Above,
}

impl Branch {
    pub fn flip(self) -> Self {
        match self {
            Branch::Below => Branch::Above,
            Branch::Above => Branch::Below,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Branch::Below => -1.0,
            Branch::Above => 1.0,
        }
    }
}

/// A first-order system `y' = f(t, y)` with an optional switching function.
///
/// `rhs` receives the branch of the current smooth segment and must evaluate the
/// smooth extension of that branch even if `y` lies slightly on the other side.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], branch: Branch, dydt: &mut [f64]);

    fn switching(&self, _t: f64, _y: &[f64]) -> Option<f64> {
        None
    }

    fn event_label(&self) -> &str {
        "switch"
    }
}

impl<S: OdeSystem + ?Sized> OdeSystem for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn rhs(&self, t: f64, y: &[f64], branch: Branch, dydt: &mut [f64]) {
        (**self).rhs(t, y, branch, dydt)
    }
    fn switching(&self, t: f64, y: &[f64]) -> Option<f64> {
        (**self).switching(t, y)
    }
    fn event_label(&self) -> &str {
        (**self).event_label()
    }
}

type SwitchFn = Box<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// Closure-backed system, mostly for tests and small one-off problems.
pub struct FnSystem<F> {
    dim: usize,
    f: F,
    switching: Option<SwitchFn>,
    label: String,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], Branch, &mut [f64]),
{
    pub fn new(dim: usize, f: F) -> Self {
        Self {
            dim,
            f,
            switching: None,
            label: "switch".to_owned(),
        }
    }

    pub fn with_switching(
        mut self,
        label: &str,
        g: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.switching = Some(Box::new(g));
        self.label = label.to_owned();
        self
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(f64, &[f64], Branch, &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn rhs(&self, t: f64, y: &[f64], branch: Branch, dydt: &mut [f64]) {
        (self.f)(t, y, branch, dydt)
    }
    fn switching(&self, t: f64, y: &[f64]) -> Option<f64> {
        self.switching.as_ref().map(|g| g(t, y))
    }
    fn event_label(&self) -> &str {
        &self.label
    }
}

/// The system `z' = -f(T - τ, z)` in the reversed time `τ = T - t`.
pub struct Reversed<S> {
    pub inner: S,
    pub t_end: f64,
}

impl<S: OdeSystem> OdeSystem for Reversed<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn rhs(&self, tau: f64, y: &[f64], branch: Branch, dydt: &mut [f64]) {
        self.inner.rhs(self.t_end - tau, y, branch, dydt);
        for d in dydt.iter_mut() {
            *d = -*d;
        }
    }
    fn switching(&self, tau: f64, y: &[f64]) -> Option<f64> {
        self.inner.switching(self.t_end - tau, y)
    }
    fn event_label(&self) -> &str {
        self.inner.event_label()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e}): right-hand side is non-Lipschitz or stiff here")]
    StepUnderflow { t: f64, h: f64 },
    #[error("event bracketing did not converge on [{t_lo}, {t_hi}]: crossing looks tangential")]
    EventBracketing { t_lo: f64, t_hi: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { max_steps: usize, t: f64 },
    #[error("invalid integration interval [{t0}, {t1}]")]
    InvalidInterval { t0: f64, t1: f64 },
    #[error("state dimension {got} does not match system dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("t = {t} lies outside the trajectory [{t0}, {t1}]")]
    OutOfRange { t: f64, t0: f64, t1: f64 },
}

/// Mixed error weights: component `i` is scaled by `abs + rel * |y_i|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    pub fn new(tol: f64) -> Self {
        Self { rel: tol, abs: tol }
    }

    pub fn relative(rel: f64, abs: f64) -> Self {
        Self { rel, abs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub tol: Tolerance,
    pub initial_step: Option<f64>,
    pub max_step: f64,
    pub max_steps: usize,
}

impl IntegratorOptions {
    pub fn new(tol: f64) -> Self {
        Self::from(Tolerance::new(tol))
    }

    pub fn max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }

    pub fn initial_step(mut self, h: f64) -> Self {
        self.initial_step = Some(h);
        self
    }
}

impl From<Tolerance> for IntegratorOptions {
    fn from(tol: Tolerance) -> Self {
        Self {
            tol,
            initial_step: None,
            max_step: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl From<f64> for IntegratorOptions {
    fn from(tol: f64) -> Self {
        Self::new(tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub label: String,
}

/// Accepted integration nodes, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub step_hint: f64,
    pub nodes: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Solution of an initial value problem on its accepted nodes.
///
/// Component 0 is the "value" and component 1 the "derivative" for systems
/// obtained from a scalar second-order equation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub dim: usize,
    states: Vec<f64>,
    branches: Vec<Branch>,
    pub events: Vec<Event>,
    pub direction: Direction,
}

impl Trajectory {
    /// Assemble a trajectory from known samples of an exact solution.
    pub fn from_samples(nodes: Vec<f64>, dim: usize, states: Vec<f64>, events: Vec<Event>) -> Self {
        assert_eq!(nodes.len() * dim, states.len());
        assert!(nodes.windows(2).all(|w| w[0] < w[1]), "nodes must increase");
        let branches = vec![Branch::Below; nodes.len().saturating_sub(1)];
        Trajectory {
            grid: TimeGrid {
                t0: nodes[0],
                t1: nodes[nodes.len() - 1],
                step_hint: nodes.get(1).map_or(0.0, |t| t - nodes[0]),
                nodes,
            },
            dim,
            states,
            branches,
            events,
            direction: Direction::Forward,
        }
    }

    pub fn len(&self) -> usize {
        self.grid.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.grid.nodes
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.states.chunks(self.dim).map(|s| s[k]).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.component(0)
    }

    pub fn derivs(&self) -> Vec<f64> {
        self.component(1)
    }

    /// Branch used on the interval `[nodes[i], nodes[i + 1]]`.
    pub fn branch(&self, i: usize) -> Branch {
        self.branches[i]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Projection onto components `[k, k + 2)` as a scalar trajectory.
    pub fn project_pair(&self, k: usize) -> Trajectory {
        let states = self
            .states
            .chunks(self.dim)
            .flat_map(|s| [s[k], s[k + 1]])
            .collect();
        Trajectory {
            grid: self.grid.clone(),
            dim: 2,
            states,
            branches: self.branches.clone(),
            events: self.events.clone(),
            direction: self.direction,
        }
    }

    /// Index `i` with `nodes[i] <= t <= nodes[i + 1]`.
    fn interval(&self, t: f64) -> Result<usize, OdeError> {
        let nodes = &self.grid.nodes;
        let (t0, t1) = (nodes[0], nodes[nodes.len() - 1]);
        if !(t >= t0 && t <= t1) {
            return Err(OdeError::OutOfRange { t, t0, t1 });
        }
        let i = nodes.partition_point(|&x| x <= t);
        Ok(i.saturating_sub(1).min(nodes.len().saturating_sub(2)))
    }

    /// State at an arbitrary time in the covered range.
    ///
    /// `sys` must be the system (in the original time variable) that produced
    /// the trajectory.
    pub fn evaluate<S: OdeSystem>(&self, sys: &S, t: f64) -> Result<Vec<f64>, OdeError> {
        let i = self.interval(t)?;
        let nodes = &self.grid.nodes;
        if t == nodes[i] {
            return Ok(self.state(i).to_vec());
        }
        if i + 1 < nodes.len() && t == nodes[i + 1] {
            return Ok(self.state(i + 1).to_vec());
        }
        let branch = self.branches[i];
        let mut work = Workspace::new(self.dim);
        match self.direction {
            Direction::Forward => {
                let start = self.state(i).to_vec();
                sys.rhs(nodes[i], &start, branch, &mut work.k[0]);
                Ok(work
                    .step(sys, nodes[i], &start, t - nodes[i], branch, false)
                    .0)
            }
            Direction::Backward => {
                let rev = Reversed {
                    inner: sys,
                    t_end: self.grid.t1,
                };
                let start = self.state(i + 1).to_vec();
                let tau = self.grid.t1 - nodes[i + 1];
                rev.rhs(tau, &start, branch, &mut work.k[0]);
                Ok(work
                    .step(&rev, tau, &start, nodes[i + 1] - t, branch, false)
                    .0)
            }
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }

    /// One step from `(t, y)`; `k[0]` must already hold `f(t, y)`.
    /// Returns the fifth-order solution and, if requested, the error vector.
    fn step<S: OdeSystem>(
        &mut self,
        sys: &S,
        t: f64,
        y: &[f64],
        h: f64,
        branch: Branch,
        with_error: bool,
    ) -> (Vec<f64>, Vec<f64>) {
        let n = y.len();
        #[allow(clippy::needless_range_loop)]
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in A[s][..s].iter().enumerate() {
                    acc += a * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            sys.rhs(t + C[s] * h, &self.tmp, branch, &mut self.k[s]);
        }
        // Row 6 of A is the fifth-order weight vector, so tmp is y_{n+1}.
        let y_new = self.tmp.clone();
        let err = if with_error {
            (0..n)
                .map(|i| h * (0..7).map(|s| E[s] * self.k[s][i]).sum::<f64>())
                .collect()
        } else {
            Vec::new()
        };
        (y_new, err)
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], tol: Tolerance) -> f64 {
    err.iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| e.abs() / (tol.abs + tol.rel * a.abs().max(b.abs())))
        .fold(0.0, f64::max)
}

fn initial_branch<S: OdeSystem>(sys: &S, t: f64, y: &[f64], span: f64) -> Branch {
    match sys.switching(t, y) {
        None => Branch::Below,
        Some(g) if g > 0.0 => Branch::Above,
        Some(g) if g < 0.0 => Branch::Below,
        Some(_) => {
            // On the surface: probe along the flow (both branches agree here).
            let mut f = vec![0.0; y.len()];
            sys.rhs(t, y, Branch::Below, &mut f);
            let dt = 1e-7 * span.max(1.0);
            let probe: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a + dt * b).collect();
            match sys.switching(t + dt, &probe) {
                Some(g) if g < 0.0 => Branch::Below,
                _ => Branch::Above,
            }
        }
    }
}

fn initial_step<S: OdeSystem>(
    sys: &S,
    t: f64,
    y: &[f64],
    f0: &[f64],
    span: f64,
    tol: Tolerance,
) -> f64 {
    let scale = |i: usize| tol.abs + tol.rel * y[i].abs();
    let d0 = (0..y.len())
        .map(|i| (y[i] / scale(i)).abs())
        .fold(0.0, f64::max);
    let d1 = (0..y.len())
        .map(|i| (f0[i] / scale(i)).abs())
        .fold(0.0, f64::max);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    sys.rhs(t + h0, &y1, initial_branch(sys, t, y, span), &mut f1);
    let d2 = (0..y.len())
        .map(|i| ((f1[i] - f0[i]) / scale(i)).abs())
        .fold(0.0, f64::max)
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrate `sys` forward from `(t0, y0)` to `t1`.
pub fn integrate_ivp<S: OdeSystem>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: impl Into<IntegratorOptions>,
) -> Result<Trajectory, OdeError> {
    let opts = opts.into();
    let n = sys.dim();
    if y0.len() != n {
        return Err(OdeError::Dimension {
            expected: n,
            got: y0.len(),
        });
    }
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(OdeError::InvalidInterval { t0, t1 });
    }
    let span = t1 - t0;
    let mut branch = initial_branch(sys, t0, y0, span);
    let mut work = Workspace::new(n);
    let mut t = t0;
    let mut y = y0.to_vec();
    sys.rhs(t, &y, branch, &mut work.k[0]);
    let mut h = opts
        .initial_step
        .unwrap_or_else(|| initial_step(sys, t, &y, &work.k[0].clone(), span, opts.tol))
        .min(opts.max_step)
        .min(span);
    let step_hint = h;

    let mut nodes = vec![t0];
    let mut states = y.clone();
    let mut branches = Vec::new();
    let mut events = Vec::new();
    let mut last_rejected = false;
    let mut steps = 0usize;

    while t < t1 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(OdeError::TooManySteps {
                max_steps: opts.max_steps,
                t,
            });
        }
        let remaining = t1 - t;
        let landing = h >= remaining * (1.0 - 1e-12);
        if landing {
            h = remaining;
        }
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_min {
            return Err(OdeError::StepUnderflow { t, h });
        }
        let (y_new, err) = work.step(sys, t, &y, h, branch, true);
        let err_norm = error_norm(&err, &y, &y_new, opts.tol);
        if !err_norm.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            h *= 0.25;
            last_rejected = true;
            continue;
        }
        if err_norm > 1.0 {
            h *= (0.9 * err_norm.powf(-0.2)).max(0.2);
            last_rejected = true;
            continue;
        }
        let t_new = if landing { t1 } else { t + h };

        if let Some(g_new) = sys.switching(t_new, &y_new) {
            if branch.sign() * g_new < 0.0 {
                let (theta, y_event) = locate_event(sys, &mut work, t, &y, h, branch)?;
                let t_event = if theta >= h { t_new } else { t + theta };
                if t_event > t {
                    nodes.push(t_event);
                    states.extend_from_slice(&y_event);
                    branches.push(branch);
                }
                events.push(Event {
                    time: t_event,
                    label: sys.event_label().to_owned(),
                });
                branch = branch.flip();
                t = t_event;
                y = y_event;
                sys.rhs(t, &y, branch, &mut work.k[0]);
                last_rejected = false;
                continue;
            }
        }

        nodes.push(t_new);
        states.extend_from_slice(&y_new);
        branches.push(branch);
        t = t_new;
        y = y_new;
        // FSAL: the last stage was evaluated at (t + h, y_new).
        work.k[0] = work.k[6].clone();

        let mut fac = if err_norm == 0.0 {
            5.0
        } else {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        if last_rejected {
            fac = fac.min(1.0);
        }
        last_rejected = false;
        h = (h * fac).min(opts.max_step);
    }

    Ok(Trajectory {
        grid: TimeGrid {
            t0,
            t1,
            step_hint,
            nodes,
        },
        dim: n,
        states,
        branches,
        events,
        direction: Direction::Forward,
    })
}

/// Find the first crossing on `[t, t + h]`. Returns the offset from `t` and the
/// state there, the point being on the surface or just past it.
fn locate_event<S: OdeSystem>(
    sys: &S,
    work: &mut Workspace,
    t: f64,
    y: &[f64],
    h: f64,
    branch: Branch,
) -> Result<(f64, Vec<f64>), OdeError> {
    let sigma = branch.sign();
    let k0 = work.k[0].clone();
    let eval = |theta: f64, work: &mut Workspace| -> (f64, Vec<f64>) {
        work.k[0].copy_from_slice(&k0);
        let (ys, _) = work.step(sys, t, y, theta, branch, false);
        let g = sys.switching(t + theta, &ys).unwrap_or(0.0);
        (sigma * g, ys)
    };
    let (mut a, mut fa) = (0.0, sigma * sys.switching(t, y).unwrap_or(0.0));
    if fa <= 0.0 {
        fa = f64::MIN_POSITIVE;
    }
    let (mut b, (mut fb, mut yb)) = (h, eval(h, work));
    let resolution = 4.0 * f64::EPSILON * (t.abs() + h).max(1.0);
    let mut side = 0i8;
    for _ in 0..300 {
        if b - a <= resolution || fb == 0.0 {
            work.k[0].copy_from_slice(&k0);
            return Ok((b, yb));
        }
        // Illinois variant of regula falsi, with a bisection fallback.
        let mut c = b - fb * (b - a) / (fb - fa);
        if !(c > a && c < b) || !c.is_finite() {
            c = 0.5 * (a + b);
        }
        let (fc, yc) = eval(c, work);
        if fc > 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            yb = yc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    work.k[0].copy_from_slice(&k0);
    Err(OdeError::EventBracketing {
        t_lo: t + a,
        t_hi: t + b,
    })
}

/// Integrate backward from `(t_end, y_end)` down to `t0 < t_end`.
///
/// Runs the forward integrator in `τ = t_end - t`; the returned trajectory is
/// ordered by increasing `t`.
pub fn integrate_backward<S: OdeSystem>(
    sys: &S,
    t_end: f64,
    y_end: &[f64],
    t0: f64,
    opts: impl Into<IntegratorOptions>,
) -> Result<Trajectory, OdeError> {
    if !(t_end > t0) {
        return Err(OdeError::InvalidInterval { t0, t1: t_end });
    }
    let rev = Reversed { inner: sys, t_end };
    let fwd = integrate_ivp(&rev, 0.0, y_end, t_end - t0, opts)?;
    let n = fwd.dim;
    let count = fwd.len();
    let mut nodes: Vec<f64> = fwd.grid.nodes.iter().rev().map(|tau| t_end - tau).collect();
    // Pin the endpoints against rounding in t_end - τ.
    nodes[0] = t0;
    nodes[count - 1] = t_end;
    let mut states = Vec::with_capacity(count * n);
    for i in (0..count).rev() {
        states.extend_from_slice(fwd.state(i));
    }
    let branches = fwd.branches.iter().rev().copied().collect();
    let mut events: Vec<Event> = fwd
        .events
        .into_iter()
        .map(|e| Event {
            time: t_end - e.time,
            label: e.label,
        })
        .collect();
    events.reverse();
    Ok(Trajectory {
        grid: TimeGrid {
            t0,
            t1: t_end,
            step_hint: fwd.grid.step_hint,
            nodes,
        },
        dim: n,
        states,
        branches,
        events,
        direction: Direction::Backward,
    })
}
