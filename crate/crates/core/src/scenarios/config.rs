//! Scenario files: TOML with unit-suffixed quantities, resolved into typed specs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{LineSpec, LoadingProfile, SquidParams};
use crate::tmm::frequency_grid;
use crate::transient::{DriveSpec, Protocol, ToneDrive};
use crate::units::parse_quantity;

/// What a scenario produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    DispersionReport,
    ToneEvolution,
    GainSweep,
    PhaseSweep,
    ReflectionScan,
    UniformComparison,
    Custom,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::DispersionReport => "dispersion-report",
            Self::ToneEvolution => "tone-evolution",
            Self::GainSweep => "gain-sweep",
            Self::PhaseSweep => "phase-sweep",
            Self::ReflectionScan => "reflection-scan",
            Self::UniformComparison => "uniform-comparison",
            Self::Custom => "custom",
        }
    }

    pub fn uses_transient(&self) -> bool {
        !matches!(self, Self::DispersionReport)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    kind: Option<ScenarioKind>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    #[serde(default)]
    line: RawLine,
    #[serde(default)]
    drive: RawDrive,
    #[serde(default)]
    protocol: RawProtocol,
    #[serde(default)]
    sweep: RawSweep,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    #[serde(rename = "L")]
    l: Option<String>,
    #[serde(rename = "Ic")]
    ic: Option<String>,
    #[serde(rename = "CJ")]
    cj: Option<String>,
    /// `"inf"` for a lossless junction.
    #[serde(rename = "IcRJ")]
    ic_rj: Option<String>,
    #[serde(rename = "Idc")]
    idc: Option<String>,
    #[serde(rename = "Z0")]
    z0: Option<String>,
    /// `"open"` leaves the port unterminated.
    #[serde(rename = "Rs")]
    rs: Option<String>,
    #[serde(rename = "Rt")]
    rt: Option<String>,
    /// Small-signal inductance used by the transfer-matrix analysis instead
    /// of the value from the bias chain.
    #[serde(rename = "L_S0_linear")]
    l_s0_linear: Option<String>,
    #[serde(default)]
    profile: RawProfile,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    /// Constant capacitance on every cell; excludes the three-level fields.
    uniform: Option<String>,
    #[serde(rename = "C01")]
    c01: Option<String>,
    #[serde(rename = "C02")]
    c02: Option<String>,
    #[serde(rename = "C03")]
    c03: Option<String>,
    kappa: Option<usize>,
    mu: Option<usize>,
    nu: Option<usize>,
    #[serde(rename = "N")]
    n: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrive {
    pump: Option<String>,
    fp: Option<String>,
    theta_p: Option<String>,
    signal: Option<String>,
    fs: Option<String>,
    theta_s: Option<String>,
    ramp: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    dt: Option<String>,
    substeps: Option<usize>,
    discard: Option<String>,
    record: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    fp: Option<Vec<String>>,
    fs: Option<Vec<String>>,
    fs_start: Option<String>,
    fs_stop: Option<String>,
    fs_step: Option<String>,
    fine_step: Option<String>,
    zoom: Option<Vec<String>>,
    phase_steps: Option<usize>,
    adjacent_offset: Option<String>,
    pump_levels: Option<Vec<String>>,
    uniform_fs: Option<String>,
    uniform_pump: Option<String>,
}

/// Sweep axes of a scenario. Unused axes keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    /// Pump frequencies (Hz).
    pub fp: Vec<f64>,
    /// Signal frequencies (Hz), or probe frequencies for a reflection scan.
    pub fs: Vec<f64>,
    /// Step of the `--fine-grid` and zoom grids (Hz).
    pub fine_step: f64,
    /// Band re-run on the fine grid for ripple spacing, if any (Hz).
    pub zoom: Option<(f64, f64)>,
    /// Signal phases per degenerate phase sweep.
    pub phase_steps: usize,
    /// Distance of the non-degenerate comparison points from `fp/2` (Hz).
    pub adjacent_offset: f64,
    /// Pump amplitudes of a reflection scan (A).
    pub pump_levels: Vec<f64>,
    /// Signal frequency of the uniform-line tone run (Hz).
    pub uniform_fs: f64,
    /// Pump amplitude of the uniform-line tone run (A).
    pub uniform_pump: f64,
}

impl SweepSpec {
    /// Replaces the signal grid by one of spacing `fine_step` over the same span.
    pub fn refine(&mut self) {
        if let (Some(&lo), Some(&hi)) = (self.fs.first(), self.fs.last()) {
            self.fs = frequency_grid(lo, hi, self.fine_step);
        }
    }
}

/// A fully resolved scenario.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub line: LineSpec,
    /// `L_S0` for the transfer-matrix analysis when it differs from the bias chain (H).
    pub linear_l_s0: Option<f64>,
    pub drive: DriveSpec,
    pub protocol: Protocol,
    pub sweep: SweepSpec,
    pub workers: usize,
    pub out: Option<PathBuf>,
}

fn quantity(field: &Option<String>, dim: &str, default: f64) -> Result<f64> {
    field.as_deref().map_or(Ok(default), |s| parse_quantity(s, dim))
}

fn resistance(field: &Option<String>, default: Option<f64>) -> Result<Option<f64>> {
    match field.as_deref().map(str::trim) {
        None => Ok(default),
        Some("open") | Some("inf") => Ok(None),
        Some(s) => parse_quantity(s, "Ohm").map(Some),
    }
}

fn quantities(field: &Option<Vec<String>>, dim: &str) -> Result<Option<Vec<f64>>> {
    field
        .as_ref()
        .map(|v| v.iter().map(|s| parse_quantity(s, dim)).collect())
        .transpose()
}

/// Parses a scenario file. Fields left out take the reference-design defaults
/// of the scenario kind (see [`super::builtin`]).
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let raw: RawFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid scenario file: {e}")))?;
    resolve(raw, ScenarioKind::Custom)
}

/// Like [`parse_scenario`], with `kind` used when the file does not name one.
pub fn parse_scenario_as(text: &str, kind: ScenarioKind) -> Result<Scenario> {
    let raw: RawFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid scenario file: {e}")))?;
    resolve(raw, kind)
}

fn resolve(raw: RawFile, default_kind: ScenarioKind) -> Result<Scenario> {
    let kind = raw.kind.unwrap_or(default_kind);
    let l = &raw.line;
    let ic_rj = match l.ic_rj.as_deref().map(str::trim) {
        None => Some(16.5e-3),
        Some("inf") => None,
        Some(s) => Some(parse_quantity(s, "V")?),
    };
    let squid = SquidParams::new(
        quantity(&l.l, "H", 84e-12)?,
        quantity(&l.ic, "A", 1.57e-6)?,
        quantity(&l.cj, "F", 20e-15)?,
        ic_rj,
    )?;
    let p = &l.profile;
    let n = p.n.unwrap_or(1500);
    let profile = match &p.uniform {
        Some(c) => {
            if p.c01.is_some() || p.c02.is_some() || p.c03.is_some() {
                return Err(Error::Config(
                    "profile: give either `uniform` or C01/C02/C03".into(),
                ));
            }
            LoadingProfile::uniform(parse_quantity(c, "F")?, n)?
        }
        None if kind == ScenarioKind::UniformComparison
            && p.c01.is_none()
            && p.c02.is_none()
            && p.c03.is_none() =>
        {
            LoadingProfile::uniform(40e-15, n)?
        }
        None => LoadingProfile::new(
            quantity(&p.c01, "F", 8.8e-15)?,
            quantity(&p.c02, "F", 62.3e-15)?,
            quantity(&p.c03, "F", 80e-15)?,
            p.kappa.unwrap_or(5),
            p.mu.unwrap_or(5),
            p.nu.unwrap_or(5),
            n,
        )?,
    };
    let line = LineSpec::new(
        squid,
        quantity(&l.idc, "A", 9.8e-6)?,
        profile,
        quantity(&l.z0, "Ohm", 50.0)?,
        resistance(&l.rs, Some(50.0))?,
        resistance(&l.rt, Some(50.0))?,
    )?;
    let linear_l_s0 = l
        .l_s0_linear
        .as_deref()
        .map(|s| parse_quantity(s, "H"))
        .transpose()?;

    let d = &raw.drive;
    let (pump_default, fs_default) = match kind {
        ScenarioKind::ToneEvolution => (2.0e-6, 6.7e9),
        ScenarioKind::UniformComparison => (1.8e-6, 8.0e9),
        _ => (1.8e-6, 6.7e9),
    };
    let fp_default = if kind == ScenarioKind::PhaseSweep { 12.48e9 } else { 12.92e9 };
    let drive = DriveSpec {
        pump: ToneDrive::new(
            quantity(&d.pump, "A", pump_default)?,
            quantity(&d.fp, "Hz", fp_default)?,
            quantity(&d.theta_p, "rad", 0.0)?,
        ),
        signal: ToneDrive::new(
            quantity(&d.signal, "A", 0.01e-6)?,
            quantity(&d.fs, "Hz", fs_default)?,
            quantity(&d.theta_s, "rad", 0.0)?,
        ),
        idc: line.bias.idc,
        ramp_time: quantity(&d.ramp, "s", 0.4e-9)?,
    };

    let pr = &raw.protocol;
    let base = Protocol::default();
    let protocol = Protocol {
        dt: quantity(&pr.dt, "s", base.dt)?,
        substeps: pr.substeps.unwrap_or(base.substeps),
        t_discard: quantity(&pr.discard, "s", base.t_discard)?,
        t_record: quantity(&pr.record, "s", base.t_record)?,
    };

    let s = &raw.sweep;
    let fp_list = quantities(&s.fp, "Hz")?.unwrap_or_else(|| match kind {
        ScenarioKind::GainSweep | ScenarioKind::DispersionReport => vec![12.48e9, 12.92e9],
        _ => vec![drive.pump.freq],
    });
    let fs = match quantities(&s.fs, "Hz")? {
        Some(list) => list,
        None => {
            let (lo, hi, step) = match kind {
                ScenarioKind::ReflectionScan => (11.0e9, 14.0e9, 100e6),
                _ => (3.0e9, 10.0e9, 100e6),
            };
            frequency_grid(
                quantity(&s.fs_start, "Hz", lo)?,
                quantity(&s.fs_stop, "Hz", hi)?,
                quantity(&s.fs_step, "Hz", step)?,
            )
        }
    };
    let zoom = match quantities(&s.zoom, "Hz")? {
        None => None,
        Some(v) if v.len() == 2 && v[0] < v[1] => Some((v[0], v[1])),
        Some(_) => return Err(Error::Config("sweep.zoom needs [low, high]".into())),
    };
    let sweep = SweepSpec {
        fp: fp_list,
        fs,
        fine_step: quantity(&s.fine_step, "Hz", 20e6)?,
        zoom,
        phase_steps: s.phase_steps.unwrap_or(24),
        adjacent_offset: quantity(&s.adjacent_offset, "Hz", 100e6)?,
        pump_levels: quantities(&s.pump_levels, "A")?.unwrap_or_else(|| vec![0.01e-6, 1.8e-6]),
        uniform_fs: quantity(&s.uniform_fs, "Hz", 8.0e9)?,
        uniform_pump: quantity(&s.uniform_pump, "A", 2.0e-6)?,
    };
    let scenario = Scenario {
        kind,
        line,
        linear_l_s0,
        drive,
        protocol,
        sweep,
        workers: raw.workers.unwrap_or(1).max(1),
        out: raw.out,
    };
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    /// Checks ranges and, for transient scenarios, that every driven frequency
    /// sits on the DFT grid of the protocol.
    pub fn validate(&self) -> Result<()> {
        let sw = &self.sweep;
        if sw.fp.is_empty() || sw.fs.is_empty() {
            return Err(Error::Config("sweep ranges must be non-empty".into()));
        }
        if !(sw.fine_step > 0.0) || sw.phase_steps < 2 {
            return Err(Error::Config(
                "fine_step must be positive and phase_steps at least 2".into(),
            ));
        }
        let p = &self.protocol;
        if !(p.dt > 0.0 && p.t_record > 0.0 && p.t_discard >= 0.0) || p.substeps == 0 {
            return Err(Error::Config("protocol times must be positive".into()));
        }
        if !self.kind.uses_transient() {
            return Ok(());
        }
        let res = p.resolution();
        let on_grid = |f: f64| {
            let q = f / res;
            (q - q.round()).abs() < 1e-6
        };
        let d = &self.drive;
        let mut freqs = Vec::new();
        match self.kind {
            ScenarioKind::DispersionReport => {}
            ScenarioKind::ToneEvolution | ScenarioKind::Custom => {
                freqs.extend([d.pump.freq, d.signal.freq])
            }
            ScenarioKind::GainSweep => {
                freqs.extend(&sw.fp);
                freqs.extend(&sw.fs);
                if let Some((lo, hi)) = sw.zoom {
                    freqs.extend([lo, hi, sw.fine_step]);
                }
            }
            ScenarioKind::PhaseSweep => {
                freqs.extend([0.5 * d.pump.freq, sw.adjacent_offset])
            }
            ScenarioKind::ReflectionScan => freqs.extend(&sw.fs),
            ScenarioKind::UniformComparison => {
                freqs.extend([d.pump.freq, sw.uniform_fs]);
                freqs.extend(&sw.fs);
            }
        }
        if let Some(bad) = freqs.into_iter().find(|&f| !on_grid(f)) {
            return Err(Error::Config(format!(
                "frequency {bad:e} Hz is not a multiple of the {res:e} Hz DFT resolution"
            )));
        }
        Ok(())
    }

    /// Protocol with a different sampling interval; the step count per sample is kept.
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.protocol.dt = dt;
        self
    }
}
