//! Fixed-step trapezoidal integration of the ladder with a Newton solve per step.
//!
//! The second-order nodal equations are integrated in first-order form over
//! (node phase, phase rate). Eliminating the new rates leaves one nonlinear
//! system in the new node phases whose Jacobian is symmetric tridiagonal.

use serde::Serialize;

use super::network::Network;
use super::tridiag::FactoredTridiag;
use crate::error::{Error, Result};
use crate::physics::{screening_parameter, solve_dc_phase};
use crate::units::PHI0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorConfig {
    /// Sampling interval (s).
    pub dt: f64,
    /// Integration steps per sampling interval.
    pub substeps: usize,
    /// Newton stops once the largest phase update is below this (rad).
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 4e-12,
            substeps: 4,
            newton_tol: 1e-9,
            max_newton: 20,
        }
    }
}

impl IntegratorConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    /// Integration step `dt / substeps` (s).
    pub fn step_size(&self) -> f64 {
        self.dt / self.substeps as f64
    }
}

/// Largest branch-phase change (rad) for which `sin` is extrapolated from the
/// previous Newton iterate instead of being re-evaluated.
const TAYLOR_LIMIT: f64 = 1e-4;

/// Node phases (`Phi_n / phi0`, rad) and their rates (rad/s) at time `t`.
/// Node voltages are `phi0 * rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub t: f64,
    pub phase: Vec<f64>,
    pub rate: Vec<f64>,
}

impl NetworkState {
    pub fn zeros(n_nodes: usize) -> Self {
        Self {
            t: 0.0,
            phase: vec![0.0; n_nodes],
            rate: vec![0.0; n_nodes],
        }
    }

    pub fn branch_phase(&self, n: usize) -> f64 {
        self.phase[n] - self.phase[n + 1]
    }

    /// Static equilibrium of `net` with the full dc bias applied: every branch
    /// at the dc phase, last node at zero phase, all rates zero.
    pub fn dc_equilibrium(net: &Network) -> Self {
        let beta_l = screening_parameter(net.l, net.ic);
        let phi_dc = solve_dc_phase(net.l * net.drive.idc / PHI0, beta_l);
        let n = net.n_nodes();
        Self {
            t: 0.0,
            phase: (0..n).map(|i| (n - 1 - i) as f64 * phi_dc).collect(),
            rate: vec![0.0; n],
        }
    }
}

/// What a recorder sees at each sample of the recording window.
#[derive(Debug)]
pub struct Snapshot<'a> {
    pub t: f64,
    pub state: &'a NetworkState,
    /// Node voltages (V).
    pub voltage: &'a [f64],
    /// Total series current of each SQUID branch, node n to n+1 (A).
    pub branch_current: &'a [f64],
    /// Current delivered into node 0 by the source and its resistor (A).
    pub port_current: f64,
    /// Current into the load resistor at the last node (A).
    pub load_current: f64,
}

/// Consumer of equidistant samples.
pub trait Recorder {
    fn start(&mut self, _n_nodes: usize, _n_samples: usize, _dt: f64, _t_start: f64) {}
    fn record(&mut self, sample: usize, snapshot: &Snapshot<'_>);
}

/// Recording window `[t_start, t_end)` on the step grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecordWindow {
    pub t_start: f64,
    pub t_end: f64,
}

impl RecordWindow {
    pub fn new(t_start: f64, t_end: f64) -> Self {
        Self { t_start, t_end }
    }

    /// First step index and sample count on a grid of spacing `dt`.
    pub fn samples(&self, dt: f64) -> Result<(usize, usize)> {
        let first = self.t_start / dt;
        let count = (self.t_end - self.t_start) / dt;
        let on_grid = |x: f64| (x - x.round()).abs() < 1e-6;
        if !(on_grid(first) && on_grid(count)) || count.round() < 1.0 || first < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "window [{:e}, {:e}) s is not a whole number of {dt:e} s steps",
                self.t_start, self.t_end
            )));
        }
        Ok((first.round() as usize, count.round() as usize))
    }
}

/// Solver diagnostics of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct IntegrationStats {
    pub steps: usize,
    pub newton_iterations: usize,
    pub max_newton_iterations: usize,
    /// Smallest / largest branch phase seen inside the recording window (rad).
    pub branch_phase_min: f64,
    pub branch_phase_max: f64,
}

/// Time stepper holding the state and all scratch buffers.
pub struct Stepper<'a> {
    net: &'a Network,
    cfg: IntegratorConfig,
    h: f64,
    step: usize,
    state: NetworkState,
    prev_rate: Vec<f64>,
    static_current: Vec<f64>,
    injection: (f64, f64),
    cap: Vec<f64>,
    shunt: Vec<f64>,
    mass: FactoredTridiag,
    jacobian: FactoredTridiag,
    accel: Vec<f64>,
    guess: Vec<f64>,
    new_rate: Vec<f64>,
    residual: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
    new_static: Vec<f64>,
    stiffness: Vec<f64>,
    trig: Vec<(f64, f64)>,
    trig_at: Vec<f64>,
    newton_total: usize,
    newton_max: usize,
}

impl<'a> Stepper<'a> {
    /// Starts from rest (all fluxes and voltages zero).
    pub fn new(net: &'a Network, cfg: IntegratorConfig) -> Result<Self> {
        Self::with_state(net, cfg, NetworkState::zeros(net.n_nodes()))
    }

    pub fn with_state(net: &'a Network, cfg: IntegratorConfig, state: NetworkState) -> Result<Self> {
        let n = net.n_nodes();
        if n < 2 || state.phase.len() != n || state.rate.len() != n {
            return Err(Error::InvalidParameter(format!(
                "state has {} nodes, network {n}",
                state.phase.len()
            )));
        }
        if !(cfg.dt > 0.0) || cfg.substeps == 0 || cfg.max_newton == 0 {
            return Err(Error::InvalidParameter(
                "dt, substeps and max_newton must be positive".into(),
            ));
        }
        let mut mass_diag = net.node_cap.clone();
        for d in mass_diag.iter_mut().take(n - 1) {
            *d += net.cj;
        }
        for d in mass_diag.iter_mut().skip(1) {
            *d += net.cj;
        }
        let mass_off = vec![-net.cj; n - 1];
        let static_current = (0..n - 1)
            .map(|b| {
                net.branch_static_current(
                    state.branch_phase(b),
                    state.rate[b] - state.rate[b + 1],
                )
            })
            .collect();
        let shunt = (0..n)
            .map(|i| {
                let g = (if i == 0 { net.g_in } else { 0.0 })
                    + (if i == n - 1 { net.g_out } else { 0.0 });
                PHI0 * g
            })
            .collect();
        Ok(Self {
            net,
            cfg,
            h: cfg.step_size(),
            step: 0,
            injection: net.injection(state.t),
            prev_rate: state.rate.clone(),
            state,
            static_current,
            cap: net.node_cap.iter().map(|c| PHI0 * c).collect(),
            shunt,
            jacobian: FactoredTridiag::new(&mass_diag, &mass_off),
            mass: FactoredTridiag::new(&mass_diag, &mass_off),
            accel: vec![0.0; n],
            guess: vec![0.0; n],
            new_rate: vec![0.0; n],
            residual: vec![0.0; n],
            diag: vec![0.0; n],
            off: vec![0.0; n - 1],
            new_static: vec![0.0; n - 1],
            stiffness: vec![0.0; n - 1],
            trig: vec![(0.0, 1.0); n - 1],
            trig_at: vec![0.0; n - 1],
            newton_total: 0,
            newton_max: 0,
        })
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    /// Integration steps taken so far.
    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Phase accelerations (rad/s^2) satisfying Kirchhoff's current law at the current time.
    pub fn acceleration(&mut self) -> &[f64] {
        let n = self.net.n_nodes();
        let a = &mut self.accel;
        for i in 0..n {
            a[i] = -self.shunt[i] * self.state.rate[i];
        }
        a[0] += self.injection.0;
        a[n - 1] += self.injection.1;
        for b in 0..n - 1 {
            a[b] -= self.static_current[b];
            a[b + 1] += self.static_current[b];
        }
        self.mass.solve(a);
        for x in a.iter_mut() {
            *x /= PHI0;
        }
        &self.accel
    }

    /// Advances one integration step.
    pub fn step(&mut self) -> Result<()> {
        let net = self.net;
        let h = self.h;
        let c2h = 2.0 / h;
        let half_h = 0.5 * h;
        let n = net.n_nodes();
        let last = n - 1;
        let t1 = (self.step + 1) as f64 * h;
        let inj1 = net.injection(t1);
        let inj0 = self.injection;
        let drive = (half_h * (inj1.0 + inj0.0), half_h * (inj1.1 + inj0.1));

        let p = &self.state.phase;
        let w = &self.state.rate;
        for i in 0..n {
            self.guess[i] = p[i] + h * (1.5 * w[i] - 0.5 * self.prev_rate[i]);
        }

        let k_lin = PHI0 / net.l;
        let g_damp = PHI0 * net.g_junction;
        let w_cap = PHI0 * net.cj * c2h;
        let mut converged = false;
        let mut last_update = f64::INFINITY;
        let mut iterations = 0;
        while iterations < self.cfg.max_newton {
            iterations += 1;
            let first = iterations <= 2;
            for i in 0..n {
                let w1 = c2h * (self.guess[i] - p[i]) - w[i];
                self.new_rate[i] = w1;
                self.residual[i] =
                    self.cap[i] * (w1 - w[i]) + self.shunt[i] * half_h * (w1 + w[i]);
            }
            self.residual[0] -= drive.0;
            self.residual[last] -= drive.1;
            for b in 0..n - 1 {
                let psi = self.guess[b] - self.guess[b + 1];
                let dpsi1 = self.new_rate[b] - self.new_rate[b + 1];
                let dpsi0 = w[b] - w[b + 1];
                let delta = psi - self.trig_at[b];
                let sin = if first || delta.abs() > TAYLOR_LIMIT {
                    let (sin, cos) = psi.sin_cos();
                    self.trig[b] = (sin, cos);
                    self.trig_at[b] = psi;
                    sin
                } else {
                    // sin(x + d) to third order in d; the remainder is below 1e-17
                    let (s0, c0) = self.trig[b];
                    let d2 = 0.5 * delta * delta;
                    s0 * (1.0 - d2) + c0 * delta * (1.0 - d2 * (1.0 / 3.0))
                };
                if first {
                    self.stiffness[b] = k_lin + net.ic * self.trig[b].1;
                    self.off[b] = -(w_cap + half_h * self.stiffness[b] + g_damp);
                }
                let s1 = k_lin * psi + net.ic * sin + g_damp * dpsi1;
                self.new_static[b] = s1;
                let flow = PHI0 * net.cj * (dpsi1 - dpsi0) + half_h * (s1 + self.static_current[b]);
                self.residual[b] += flow;
                self.residual[b + 1] -= flow;
            }
            if first {
                for i in 0..n {
                    let mut d = self.cap[i] * c2h + self.shunt[i];
                    if i < last {
                        d -= self.off[i];
                    }
                    if i > 0 {
                        d -= self.off[i - 1];
                    }
                    self.diag[i] = d;
                }
                self.jacobian.refactor(&self.diag, &self.off);
            }
            for r in self.residual.iter_mut() {
                *r = -*r;
            }
            self.jacobian.solve(&mut self.residual);
            let mut max_update: f64 = 0.0;
            for (g, du) in self.guess.iter_mut().zip(&self.residual) {
                *g += du;
                max_update = max_update.max(du.abs());
            }
            if !max_update.is_finite() {
                return Err(Error::Divergence {
                    step: self.step + 1,
                    time: t1,
                });
            }
            last_update = max_update;
            if max_update < self.cfg.newton_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NewtonFailure {
                step: self.step + 1,
                time: t1,
                update: last_update,
                iterations,
            });
        }
        // First-order correction of the branch currents for the final update;
        // the neglected term is of order Ic * tol^2.
        let du = &self.residual;
        for b in 0..n - 1 {
            let dpsi = du[b] - du[b + 1];
            self.static_current[b] =
                self.new_static[b] + (self.stiffness[b] + g_damp * c2h) * dpsi;
        }
        std::mem::swap(&mut self.prev_rate, &mut self.state.rate);
        for i in 0..n {
            self.state.rate[i] = c2h * (self.guess[i] - self.state.phase[i]) - self.prev_rate[i];
        }
        std::mem::swap(&mut self.state.phase, &mut self.guess);
        self.step += 1;
        self.state.t = t1;
        self.injection = inj1;
        self.newton_total += iterations;
        self.newton_max = self.newton_max.max(iterations);
        Ok(())
    }

    /// Advances one sampling interval (`substeps` integration steps).
    pub fn advance(&mut self) -> Result<()> {
        for _ in 0..self.cfg.substeps {
            self.step()?;
        }
        Ok(())
    }

    /// Fills node voltages and branch currents of the current state and
    /// returns `(port_current, load_current)`.
    pub fn observe(&mut self, voltage: &mut [f64], branch_current: &mut [f64]) -> (f64, f64) {
        self.acceleration();
        let net = self.net;
        let n = net.n_nodes();
        for i in 0..n {
            voltage[i] = PHI0 * self.state.rate[i];
        }
        for b in 0..n - 1 {
            branch_current[b] = self.static_current[b]
                + PHI0 * net.cj * (self.accel[b] - self.accel[b + 1]);
        }
        let port = self.injection.0 - net.g_in * voltage[0];
        let load = net.g_out * voltage[n - 1];
        (port, load)
    }
}

/// Integrates from rest to `window.t_end`, passing every sample inside the
/// window to `recorder`.
pub fn integrate_with(
    net: &Network,
    cfg: IntegratorConfig,
    window: RecordWindow,
    recorder: &mut dyn Recorder,
) -> Result<IntegrationStats> {
    let (first, count) = window.samples(cfg.dt)?;
    let mut stepper = Stepper::new(net, cfg)?;
    let n = net.n_nodes();
    recorder.start(n, count, cfg.dt, window.t_start);
    let mut voltage = vec![0.0; n];
    let mut current = vec![0.0; n - 1];
    let mut stats = IntegrationStats {
        branch_phase_min: f64::INFINITY,
        branch_phase_max: f64::NEG_INFINITY,
        ..Default::default()
    };
    let end = first + count;
    for k in 0..end {
        if k >= first {
            let (port_current, load_current) = stepper.observe(&mut voltage, &mut current);
            let state = stepper.state();
            for b in 0..n - 1 {
                let psi = state.branch_phase(b);
                stats.branch_phase_min = stats.branch_phase_min.min(psi);
                stats.branch_phase_max = stats.branch_phase_max.max(psi);
            }
            recorder.record(
                k - first,
                &Snapshot {
                    t: state.t,
                    state,
                    voltage: &voltage,
                    branch_current: &current,
                    port_current,
                    load_current,
                },
            );
        }
        if k + 1 < end {
            stepper.advance()?;
        }
    }
    stats.steps = stepper.steps_taken();
    stats.newton_iterations = stepper.newton_total;
    stats.max_newton_iterations = stepper.newton_max;
    Ok(stats)
}
