//! Ladder network in node-flux coordinates.
//!
//! Node `n` (0-based, `0..=N`) carries the phase `Phi_n / phi0`. Branch `n`
//! joins node `n` to node `n + 1` and is one rf-SQUID: the loop inductance, the
//! junction supercurrent `Ic sin(psi)`, the junction capacitance and the subgap
//! resistance in parallel. Cell `n` puts `C_n / 2` to ground on each side, so an
//! interior node sees `(C_{n-1} + C_n) / 2` and the two end nodes one half-cap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::LineSpec;
use crate::units::{PHI0, TWO_PI};

/// A sinusoidal current source `amplitude * sin(2 pi freq t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ToneDrive {
    /// Peak current (A).
    pub amplitude: f64,
    /// Frequency (Hz).
    pub freq: f64,
    /// Phase (rad).
    pub phase: f64,
}

impl ToneDrive {
    pub fn new(amplitude: f64, freq: f64, phase: f64) -> Self {
        Self {
            amplitude,
            freq,
            phase,
        }
    }

    pub fn current(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * (TWO_PI * self.freq * t + self.phase).sin()
    }
}

/// Sources connected at the input of the line.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DriveSpec {
    pub pump: ToneDrive,
    pub signal: ToneDrive,
    /// Final dc bias current (A).
    pub idc: f64,
    /// Linear ramp duration of the dc bias (s).
    pub ramp_time: f64,
}

impl DriveSpec {
    /// dc bias only, ramped over 0.4 ns.
    pub fn bias_only(idc: f64) -> Self {
        Self {
            idc,
            ramp_time: 0.4e-9,
            ..Self::default()
        }
    }

    pub fn with_pump(mut self, amplitude: f64, freq: f64) -> Self {
        self.pump = ToneDrive::new(amplitude, freq, self.pump.phase);
        self
    }

    pub fn with_signal(mut self, amplitude: f64, freq: f64) -> Self {
        self.signal = ToneDrive::new(amplitude, freq, self.signal.phase);
        self
    }

    pub fn dc_current(&self, t: f64) -> f64 {
        if self.ramp_time > 0.0 && t < self.ramp_time {
            self.idc * (t / self.ramp_time).max(0.0)
        } else {
            self.idc
        }
    }

    /// ac current of both sinusoidal sources.
    pub fn ac_current(&self, t: f64) -> f64 {
        self.pump.current(t) + self.signal.current(t)
    }
}

/// Assembled equation system of the ladder.
#[derive(Debug, Clone)]
pub struct Network {
    /// Ground capacitance at each of the `N + 1` nodes (F).
    pub node_cap: Vec<f64>,
    pub l: f64,
    pub ic: f64,
    pub cj: f64,
    /// Junction subgap conductance (S); zero when lossless.
    pub g_junction: f64,
    /// Source conductance at node 0 (S); zero for an open input.
    pub g_in: f64,
    /// Load conductance at node N (S); zero for an open output.
    pub g_out: f64,
    pub drive: DriveSpec,
}

impl Network {
    pub fn n_nodes(&self) -> usize {
        self.node_cap.len()
    }

    pub fn n_branches(&self) -> usize {
        self.node_cap.len() - 1
    }

    /// External current injected into node `i` at time `t`.
    ///
    /// The ac sources and the bias feed node 0. The bias returns through a
    /// bias-tee at the last node, so the whole dc current threads every SQUID
    /// and none of it flows in the terminations.
    pub fn injection(&self, t: f64) -> (f64, f64) {
        let dc = self.drive.dc_current(t);
        (self.drive.ac_current(t) + dc, -dc)
    }

    /// Static (non-capacitive) current of a branch for phase drop `psi` and
    /// phase rate `psi_dot`.
    #[inline]
    pub fn branch_static_current(&self, psi: f64, psi_dot: f64) -> f64 {
        PHI0 / self.l * psi + self.ic * psi.sin() + PHI0 * self.g_junction * psi_dot
    }

    /// Stored energy (J) of a state, with the junction term measured from its
    /// minimum so a resting line has zero energy.
    pub fn energy(&self, phase: &[f64], rate: &[f64]) -> f64 {
        let mut e = 0.0;
        for (i, &c) in self.node_cap.iter().enumerate() {
            e += 0.5 * c * (PHI0 * rate[i]).powi(2);
        }
        for n in 0..self.n_branches() {
            let psi = phase[n] - phase[n + 1];
            let dv = PHI0 * (rate[n] - rate[n + 1]);
            e += 0.5 * self.cj * dv * dv
                + 0.5 * (PHI0 * psi).powi(2) / self.l
                + self.ic * PHI0 * (1.0 - psi.cos());
        }
        e
    }
}

/// Builds the nodal equations of `line` driven by `drive`.
pub fn assemble_network(line: &LineSpec, drive: &DriveSpec) -> Result<Network> {
    let caps = line.profile.sequence();
    let n = caps.len();
    if n == 0 {
        return Err(Error::InvalidParameter("line has no cells".into()));
    }
    if drive.ramp_time < 0.0 {
        return Err(Error::InvalidParameter("negative ramp time".into()));
    }
    let mut node_cap = vec![0.0; n + 1];
    for (k, &c) in caps.iter().enumerate() {
        node_cap[k] += 0.5 * c;
        node_cap[k + 1] += 0.5 * c;
    }
    let conductance = |r: Option<f64>| r.filter(|r| r.is_finite()).map_or(0.0, |r| 1.0 / r);
    Ok(Network {
        node_cap,
        l: line.squid.l,
        ic: line.squid.ic,
        cj: line.squid.cj,
        g_junction: conductance(line.squid.rj),
        g_in: conductance(line.rs),
        g_out: conductance(line.rt),
        drive: *drive,
    })
}
