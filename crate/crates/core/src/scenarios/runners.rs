//! The canned experiments. Every transient is an independent run; sweeps fan
//! out over a bounded worker pool and merge results in sweep order.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Scenario, ScenarioKind};
use crate::error::{Error, Result};
use crate::physics::{LineSpec, LoadingProfile};
use crate::spectral::{
    backward_power, beating_period, bin_s_parameters, extract_tones, find_tone, fit_growth,
    forward_power, peak_spacing, s_parameters, transducer_gain, FitCriteria, GainProfile,
    GrowthFit, ToneField, ToneLabel, ToneRecorder, ToneSet,
};
use crate::tmm::{
    bloch_dispersion, median, default_dispersion_grid, frequency_grid, linear_s_parameters,
    phase_mismatch, DispersionResult, LinearLine, MismatchCurve, SParameterSet,
};
use crate::transient::{run_protocol, DriveSpec, IntegrationStats, Protocol};
use crate::units::{watts_to_dbm, TWO_PI};

/// Smoothing (cells) and hysteresis (dB) of the beat-period estimator.
pub const BEAT_SMOOTHING: usize = 20;
pub const BEAT_HYSTERESIS_DB: f64 = 0.5;

/// Maps `f` over `items` on `workers` threads, keeping input order.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if workers <= 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Diagnostics of one transient.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub label: String,
    pub pump_amplitude: f64,
    pub fp: f64,
    pub signal_amplitude: f64,
    pub fs: f64,
    pub theta_s: f64,
    pub stats: Option<IntegrationStats>,
    pub wall_s: f64,
    pub error: Option<String>,
}

impl RunRecord {
    fn new(label: &str, drive: &DriveSpec) -> Self {
        Self {
            label: label.to_string(),
            pump_amplitude: drive.pump.amplitude,
            fp: drive.pump.freq,
            signal_amplitude: drive.signal.amplitude,
            fs: drive.signal.freq,
            theta_s: drive.signal.phase,
            stats: None,
            wall_s: 0.0,
            error: None,
        }
    }
}

/// Tone fields of one pump/signal transient.
#[derive(Debug, Clone)]
pub struct ToneRun {
    pub fields: Vec<ToneField>,
    pub record: RunRecord,
}

/// Runs `protocol` and extracts the tone set of the drive frequencies.
pub fn run_tones(line: &LineSpec, drive: &DriveSpec, protocol: &Protocol, label: &str) -> Result<ToneRun> {
    let tones = ToneSet::new(drive.pump.freq, drive.signal.freq);
    let mut rec = ToneRecorder::for_tones(&tones, protocol.resolution())?;
    let start = Instant::now();
    let stats = run_protocol(line, drive, protocol, &mut rec)?;
    let fields = extract_tones(&rec.into_frame(), &tones)?;
    let mut record = RunRecord::new(label, drive);
    record.stats = Some(stats);
    record.wall_s = start.elapsed().as_secs_f64();
    Ok(ToneRun { fields, record })
}

/// Small-signal response at a set of probe frequencies.
#[derive(Debug, Clone, Serialize)]
pub struct ProbePoint {
    pub freq: f64,
    pub s11: Complex64,
    pub s21: Complex64,
}

/// Runs `protocol` and returns `(S11, S21)` at every frequency in `freqs`.
pub fn run_probe(
    line: &LineSpec,
    drive: &DriveSpec,
    protocol: &Protocol,
    freqs: &[f64],
    label: &str,
) -> Result<(Vec<ProbePoint>, RunRecord)> {
    let res = protocol.resolution();
    let bins = freqs
        .iter()
        .map(|&f| {
            let q = f / res;
            if (q - q.round()).abs() > 1e-6 {
                Err(Error::OffGrid {
                    label: label.to_string(),
                    freq: f,
                    resolution: res,
                })
            } else {
                Ok(q.round() as usize)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rec = ToneRecorder::new(bins);
    let start = Instant::now();
    let stats = run_protocol(line, drive, protocol, &mut rec)?;
    let frame = rec.into_frame();
    let points = freqs
        .iter()
        .map(|&f| {
            let (s11, s21) = bin_s_parameters(&frame, f, line.z0)?;
            Ok(ProbePoint { freq: f, s11, s21 })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut record = RunRecord::new(label, drive);
    record.stats = Some(stats);
    record.wall_s = start.elapsed().as_secs_f64();
    Ok((points, record))
}

/// Net power of one tone at the ends of the line.
#[derive(Debug, Clone, Serialize)]
pub struct ToneLevel {
    pub label: &'static str,
    pub freq: f64,
    pub input_dbm: f64,
    pub output_dbm: f64,
}

/// Analysis of a single pump/signal transient.
#[derive(Debug, Clone, Serialize)]
pub struct ToneSummary {
    pub fp: f64,
    pub fs: f64,
    pub pump_amplitude: f64,
    pub signal_amplitude: f64,
    /// `|S21|^2` of the signal (dB).
    pub gain_db: f64,
    /// `|S11|^2` of the signal (dB).
    pub s11_db: f64,
    /// Pump power incident from the source (dBm).
    pub pump_incident_dbm: f64,
    pub levels: Vec<ToneLevel>,
    /// Output pump power over output second-harmonic power (dB).
    pub two_p_below_pump_db: Option<f64>,
    /// Output signal power over output p+s power (dB).
    pub p_plus_s_below_signal_db: Option<f64>,
    /// Output signal power over output p+i power (dB).
    pub p_plus_i_below_signal_db: Option<f64>,
    /// Median over all nodes of the signal-to-p+s power ratio (dB).
    pub p_plus_s_median_below_signal_db: Option<f64>,
    /// Median over all nodes of the signal-to-p+i power ratio (dB).
    pub p_plus_i_median_below_signal_db: Option<f64>,
    /// Largest fraction, over all nodes, of the pump input power carried by
    /// the second and third harmonics.
    pub harmonic_conversion: f64,
    /// Deepest drop of the net pump power below its input value (dB).
    pub pump_depletion_db: f64,
    pub growth: Option<GrowthFit>,
    pub growth_error: Option<String>,
    /// Median spacing of the 2p power maxima (cells).
    pub two_p_spacing_cells: Option<f64>,
    /// Half of that spacing, the `pi / dk` beat length (cells).
    pub two_p_beat_cells: Option<f64>,
    /// Median spacing of the p+i power maxima (cells).
    pub p_plus_i_spacing_cells: Option<f64>,
    /// Largest excursion of any branch phase from the dc phase (rad).
    pub max_phase_excursion: f64,
    pub record: RunRecord,
    #[serde(skip)]
    pub fields: Vec<ToneField>,
}

fn out_power(f: &ToneField) -> f64 {
    *f.power.last().expect("non-empty tone field")
}

fn ratio_db(a: f64, b: f64) -> Option<f64> {
    (a > 0.0 && b > 0.0).then(|| 10.0 * (a / b).log10())
}

/// Derives gain, levels, conversion figures, the growth fit and beat periods.
pub fn summarize_tones(line: &LineSpec, drive: &DriveSpec, run: ToneRun) -> Result<ToneSummary> {
    let fields = run.fields;
    let get = |label: ToneLabel| {
        find_tone(&fields, label)
            .ok_or_else(|| Error::InvalidParameter(format!("tone {} missing", label.name())))
    };
    let signal = get(ToneLabel::Signal)?;
    let pump = get(ToneLabel::Pump)?;
    let (s11, s21) = s_parameters(signal, line.z0)?;
    let z0 = line.z0;
    let incident = (pump.input_voltage() + z0 * pump.port_current).norm_sqr() / (8.0 * z0);
    let levels = fields
        .iter()
        .map(|f| ToneLevel {
            label: f.label.name(),
            freq: f.freq,
            input_dbm: watts_to_dbm(f.power[0]),
            output_dbm: watts_to_dbm(out_power(f)),
        })
        .collect();
    let p_in = pump.power[0];
    let mut conversion: f64 = 0.0;
    let second = find_tone(&fields, ToneLabel::SecondHarmonic);
    let third = find_tone(&fields, ToneLabel::ThirdHarmonic);
    for n in 0..pump.power.len() {
        let h = second.map_or(0.0, |t| t.power[n].abs()) + third.map_or(0.0, |t| t.power[n].abs());
        conversion = conversion.max(h / p_in);
    }
    let depletion = pump
        .power
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| 10.0 * (p_in / p).log10())
        .fold(f64::NEG_INFINITY, f64::max);
    let below = |a: Option<&ToneField>, b: Option<&ToneField>| match (a, b) {
        (Some(a), Some(b)) => ratio_db(out_power(a), out_power(b)),
        _ => None,
    };
    let median_below = |other: Option<&ToneField>| {
        let other = other?;
        let mut r: Vec<f64> = signal
            .power
            .iter()
            .zip(&other.power)
            .filter_map(|(a, b)| ratio_db(a.abs(), b.abs()))
            .collect();
        (!r.is_empty()).then(|| median(&mut r))
    };
    let z_fit = line.derived().z_mean;
    let (growth, growth_error) = match find_tone(&fields, ToneLabel::Idler) {
        Some(idler) if !signal.degenerate => {
            match fit_growth(signal, idler, z_fit, &FitCriteria::default()) {
                Ok(fit) => (Some(fit), None),
                Err(e) => (None, Some(e.to_string())),
            }
        }
        _ => (None, Some("degenerate drive has no separate idler".into())),
    };
    let period = |label: ToneLabel| {
        find_tone(&fields, label)
            .and_then(|t| beating_period(t, BEAT_SMOOTHING, BEAT_HYSTERESIS_DB).ok())
    };
    let two_p_spacing = period(ToneLabel::SecondHarmonic);
    let phi_dc = line.bias.phi_dc;
    let excursion = run.record.stats.map_or(f64::NAN, |s| {
        (s.branch_phase_max - phi_dc).max(phi_dc - s.branch_phase_min)
    });
    Ok(ToneSummary {
        fp: drive.pump.freq,
        fs: drive.signal.freq,
        pump_amplitude: drive.pump.amplitude,
        signal_amplitude: drive.signal.amplitude,
        gain_db: transducer_gain(s21),
        s11_db: transducer_gain(s11),
        pump_incident_dbm: watts_to_dbm(incident),
        levels,
        two_p_below_pump_db: below(Some(pump), second),
        p_plus_s_below_signal_db: below(Some(signal), find_tone(&fields, ToneLabel::PumpPlusSignal)),
        p_plus_i_below_signal_db: below(Some(signal), find_tone(&fields, ToneLabel::PumpPlusIdler)),
        p_plus_s_median_below_signal_db: median_below(find_tone(&fields, ToneLabel::PumpPlusSignal)),
        p_plus_i_median_below_signal_db: median_below(find_tone(&fields, ToneLabel::PumpPlusIdler)),
        harmonic_conversion: conversion,
        pump_depletion_db: depletion,
        growth,
        growth_error,
        two_p_spacing_cells: two_p_spacing,
        two_p_beat_cells: two_p_spacing.map(|s| 0.5 * s),
        p_plus_i_spacing_cells: period(ToneLabel::PumpPlusIdler),
        max_phase_excursion: excursion,
        record: run.record,
        fields,
    })
}

/// One transient with the scenario's drive, analysed.
pub fn run_tone_evolution(sc: &Scenario) -> Result<ToneSummary> {
    let run = run_tones(&sc.line, &sc.drive, &sc.protocol, sc.kind.name())?;
    summarize_tones(&sc.line, &sc.drive, run)
}

/// Transfer-matrix view of the scenario's line.
pub fn linear_line(sc: &Scenario) -> LinearLine {
    let mut lin = LinearLine::lossless(&sc.line);
    if let Some(l) = sc.linear_l_s0 {
        lin.l_s0 = l;
    }
    lin
}

/// Coherence lengths at the scenario's signal frequency for one pump.
#[derive(Debug, Clone, Serialize)]
pub struct CoherenceSummary {
    pub fp: f64,
    pub fs: f64,
    pub xi: f64,
    pub xi_p_plus_s: f64,
    pub xi_p_plus_i: f64,
    /// `pi / (2 k_p - k_m)` (cells).
    pub two_p_beat: f64,
    /// Sign changes of `dk` across `(0, fp)` outside stop-bands.
    pub zero_crossings: usize,
    pub pump_in_gap: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DispersionReport {
    pub l_s0: f64,
    pub dispersion: DispersionResult,
    pub mismatch: Vec<MismatchCurve>,
    pub coherence: Vec<CoherenceSummary>,
    pub sparams: SParameterSet,
}

pub fn run_dispersion_report(sc: &Scenario) -> Result<DispersionReport> {
    let lin = linear_line(sc);
    let dispersion = bloch_dispersion(&lin, &default_dispersion_grid())?;
    let fs_probe = sc.drive.signal.freq;
    let mut mismatch = Vec::new();
    let mut coherence = Vec::new();
    for &fp in &sc.sweep.fp {
        let grid = frequency_grid(20e6, fp - 20e6, 20e6);
        let curve = phase_mismatch(&dispersion, fp, &grid)?;
        let at = phase_mismatch(&dispersion, fp, &[fs_probe])?;
        let zero_crossings = curve
            .dk
            .windows(2)
            .zip(curve.flagged.windows(2))
            .filter(|(d, f)| !f[0] && !f[1] && d[0].signum() != d[1].signum())
            .count();
        coherence.push(CoherenceSummary {
            fp,
            fs: fs_probe,
            xi: at.xi[0],
            xi_p_plus_s: at.p_plus_s[0].xi,
            xi_p_plus_i: at.p_plus_i[0].xi,
            two_p_beat: std::f64::consts::PI / (2.0 * dispersion.re_k_at(fp) - dispersion.k_m),
            zero_crossings,
            pump_in_gap: at.pump_in_gap,
        });
        mismatch.push(curve);
    }
    let sparams = linear_s_parameters(&lin, &frequency_grid(0.1e9, 30e9, 10e6), sc.line.z0)?;
    Ok(DispersionReport {
        l_s0: lin.l_s0,
        dispersion,
        mismatch,
        coherence,
        sparams,
    })
}

/// Gain at one sweep point.
#[derive(Debug, Clone, Serialize)]
pub struct GainPoint {
    pub fp: f64,
    pub fs: f64,
    pub gain_db: f64,
    pub s11_db: f64,
    pub degenerate: bool,
}

/// A sweep point that failed; the sweep carries on without it.
#[derive(Debug, Clone, Serialize)]
pub struct PointFailure {
    pub label: String,
    pub fp: f64,
    pub fs: f64,
    pub error: String,
}

/// Signal-gain transients for every `(fp, fs)` pair.
pub fn sweep_gain(
    line: &LineSpec,
    base: &DriveSpec,
    protocol: &Protocol,
    pairs: &[(f64, f64)],
    workers: usize,
    label: &str,
) -> Result<(Vec<GainPoint>, Vec<RunRecord>, Vec<PointFailure>)> {
    let outcomes = parallel_map(pairs, workers, |&(fp, fs)| {
        let drive = DriveSpec {
            pump: crate::transient::ToneDrive { freq: fp, ..base.pump },
            signal: crate::transient::ToneDrive { freq: fs, ..base.signal },
            ..*base
        };
        let result = run_tones(line, &drive, protocol, label).and_then(|run| {
            let signal = find_tone(&run.fields, ToneLabel::Signal)
                .ok_or_else(|| Error::InvalidParameter("signal tone missing".into()))?;
            let (s11, s21) = s_parameters(signal, line.z0)?;
            Ok((
                GainPoint {
                    fp,
                    fs,
                    gain_db: transducer_gain(s21),
                    s11_db: transducer_gain(s11),
                    degenerate: signal.degenerate,
                },
                run.record,
            ))
        });
        (drive, result)
    })?;
    let mut points = Vec::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (drive, outcome) in outcomes {
        match outcome {
            Ok((p, r)) => {
                points.push(p);
                records.push(r);
            }
            Err(e) => {
                let mut r = RunRecord::new(label, &drive);
                r.error = Some(e.to_string());
                records.push(r);
                failures.push(PointFailure {
                    label: label.to_string(),
                    fp: drive.pump.freq,
                    fs: drive.signal.freq,
                    error: e.to_string(),
                });
            }
        }
    }
    Ok((points, records, failures))
}

/// Fine-grid rerun of a band, used for the ripple period.
#[derive(Debug, Clone, Serialize)]
pub struct ZoomResult {
    pub fp: f64,
    pub fs: Vec<f64>,
    pub gain_db: Vec<f64>,
    /// Median spacing of gain maxima (Hz).
    pub ripple_spacing: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GainSweepReport {
    pub profiles: Vec<GainProfile>,
    pub points: Vec<GainPoint>,
    pub zoom: Vec<ZoomResult>,
    pub failures: Vec<PointFailure>,
    pub records: Vec<RunRecord>,
}

fn profiles_by_pump(
    fps: &[f64],
    drive: &DriveSpec,
    points: &[GainPoint],
) -> (Vec<GainProfile>, Vec<PointFailure>) {
    let mut profiles = Vec::new();
    let mut failures = Vec::new();
    for &fp in fps {
        let (fs, gain): (Vec<f64>, Vec<f64>) = points
            .iter()
            .filter(|p| p.fp == fp)
            .map(|p| (p.fs, p.gain_db))
            .unzip();
        match GainProfile::new(fp, drive.pump.amplitude, drive.signal.amplitude, fs, gain) {
            Ok(p) => profiles.push(p),
            Err(e) => failures.push(PointFailure {
                label: "gain-profile".into(),
                fp,
                fs: f64::NAN,
                error: e.to_string(),
            }),
        }
    }
    (profiles, failures)
}

pub fn run_gain_sweep(sc: &Scenario) -> Result<GainSweepReport> {
    let mut pairs = Vec::new();
    for &fp in &sc.sweep.fp {
        pairs.extend(sc.sweep.fs.iter().filter(|&&fs| fs < fp).map(|&fs| (fp, fs)));
    }
    let (coarse, mut records, mut failures) =
        sweep_gain(&sc.line, &sc.drive, &sc.protocol, &pairs, sc.workers, "gain")?;
    let zoom_grid = sc
        .sweep
        .zoom
        .map(|(lo, hi)| frequency_grid(lo, hi, sc.sweep.fine_step))
        .unwrap_or_default();
    let zoom_pairs: Vec<(f64, f64)> = sc
        .sweep
        .fp
        .iter()
        .flat_map(|&fp| zoom_grid.iter().filter(move |&&fs| fs < fp).map(move |&fs| (fp, fs)))
        .collect();
    let (fine, zoom_records, zoom_failures) =
        sweep_gain(&sc.line, &sc.drive, &sc.protocol, &zoom_pairs, sc.workers, "gain-zoom")?;
    records.extend(zoom_records);
    failures.extend(zoom_failures);
    let (profiles, profile_failures) = profiles_by_pump(&sc.sweep.fp, &sc.drive, &coarse);
    failures.extend(profile_failures);
    let zoom = if zoom_grid.is_empty() {
        Vec::new()
    } else {
        sc.sweep
            .fp
            .iter()
            .map(|&fp| {
                let (fs, gain_db): (Vec<f64>, Vec<f64>) = fine
                    .iter()
                    .filter(|p| p.fp == fp)
                    .map(|p| (p.fs, p.gain_db))
                    .unzip();
                let skip: Vec<bool> = fs.iter().map(|&f| (2.0 * f - fp).abs() < 1.0).collect();
                ZoomResult {
                    fp,
                    ripple_spacing: peak_spacing(&fs, &gain_db, &skip).ok(),
                    fs,
                    gain_db,
                }
            })
            .collect()
    };
    Ok(GainSweepReport {
        profiles,
        points: coarse,
        zoom,
        failures,
        records,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseSweepReport {
    pub fp: f64,
    pub fs: f64,
    pub theta: Vec<f64>,
    pub gain_db: Vec<f64>,
    pub s21: Vec<Complex64>,
    /// Extra runs at the phases of extreme gain predicted by the two-term
    /// model `S21 = a + b exp(-2i theta)` fitted to the sweep.
    pub refined: Vec<(f64, f64)>,
    pub max_gain_db: f64,
    pub min_gain_db: f64,
    pub extinction_db: f64,
    /// Correlation of `G(theta)` with `G(theta + pi)`.
    pub period_correlation: Option<f64>,
    /// Mean gain at `fp/2 +- adjacent_offset`.
    pub adjacent_gain_db: f64,
    /// `max_gain_db - adjacent_gain_db`.
    pub excess_gain_db: f64,
    pub failures: Vec<PointFailure>,
    pub records: Vec<RunRecord>,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 1.0;
    }
    sab / (saa * sbb).sqrt()
}

pub fn run_phase_sweep(sc: &Scenario) -> Result<PhaseSweepReport> {
    let fp = sc.drive.pump.freq;
    let fs = 0.5 * fp;
    let steps = sc.sweep.phase_steps;
    let theta: Vec<f64> = (0..steps).map(|k| TWO_PI * k as f64 / steps as f64).collect();
    let line = &sc.line;
    let degenerate_run = |th: f64| -> std::result::Result<(Complex64, RunRecord), (RunRecord, String)> {
        let mut drive = sc.drive;
        drive.signal.freq = fs;
        drive.signal.phase = th;
        let run = run_tones(line, &drive, &sc.protocol, "phase").map_err(|e| {
            (RunRecord::new("phase", &drive), e.to_string())
        })?;
        let signal = find_tone(&run.fields, ToneLabel::Signal).expect("signal tone");
        let (_, s21) = s_parameters(signal, line.z0)
            .map_err(|e| (run.record.clone(), e.to_string()))?;
        Ok((s21, run.record))
    };
    let mut failures = Vec::new();
    let mut records = Vec::new();
    let fail = |r: RunRecord, e: String, failures: &mut Vec<PointFailure>| {
        failures.push(PointFailure {
            label: "phase".into(),
            fp: r.fp,
            fs: r.fs,
            error: e.clone(),
        });
        let mut r = r;
        r.error = Some(e);
        r
    };
    let results = parallel_map(&theta, sc.workers, |&th| degenerate_run(th))?;
    let mut kept_theta = Vec::new();
    let mut s21 = Vec::new();
    for (th, res) in theta.iter().zip(results) {
        match res {
            Ok((s, r)) => {
                kept_theta.push(*th);
                s21.push(s);
                records.push(r);
            }
            Err((r, e)) => records.push(fail(r, e, &mut failures)),
        }
    }
    if s21.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "only {} of {steps} phase points succeeded",
            s21.len()
        )));
    }
    let gain_db: Vec<f64> = s21.iter().map(|&s| transducer_gain(s)).collect();

    // Least squares for S21 = a + b exp(-2i theta).
    let basis: Vec<Complex64> = kept_theta.iter().map(|&t| Complex64::from_polar(1.0, -2.0 * t)).collect();
    let n = s21.len() as f64;
    let (s_e, s_y, s_ey) = basis.iter().zip(&s21).fold(
        (Complex64::default(), Complex64::default(), Complex64::default()),
        |(e, y, ey), (&b, &s)| (e + b, y + s, ey + b.conj() * s),
    );
    let det = n * n - s_e.norm_sqr();
    let a = (n * s_y - s_e * s_ey) / det;
    let b = (n * s_ey - s_e.conj() * s_y) / det;
    let theta_min = ((b.arg() - a.arg() - std::f64::consts::PI) / 2.0).rem_euclid(std::f64::consts::PI);
    let extra = [theta_min, theta_min + std::f64::consts::FRAC_PI_2];
    let mut refined = Vec::new();
    for res in parallel_map(&extra, sc.workers, |&th| (th, degenerate_run(th)))? {
        match res {
            (th, Ok((s, r))) => {
                refined.push((th, transducer_gain(s)));
                records.push(r);
            }
            (_, Err((r, e))) => records.push(fail(r, e, &mut failures)),
        }
    }
    let all = gain_db.iter().chain(refined.iter().map(|r| &r.1));
    let (min_gain_db, max_gain_db) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| {
        (lo.min(g), hi.max(g))
    });
    let period_correlation = (steps % 2 == 0 && s21.len() == steps).then(|| {
        let shifted: Vec<f64> = (0..steps).map(|k| gain_db[(k + steps / 2) % steps]).collect();
        pearson(&gain_db, &shifted)
    });
    let off = sc.sweep.adjacent_offset;
    let pairs = [(fp, fs - off), (fp, fs + off)];
    let (adjacent, adj_records, adj_failures) =
        sweep_gain(line, &sc.drive, &sc.protocol, &pairs, sc.workers, "phase-adjacent")?;
    records.extend(adj_records);
    failures.extend(adj_failures);
    if adjacent.is_empty() {
        return Err(Error::InsufficientData("adjacent non-degenerate runs failed".into()));
    }
    let adjacent_gain_db = adjacent.iter().map(|p| p.gain_db).sum::<f64>() / adjacent.len() as f64;
    Ok(PhaseSweepReport {
        fp,
        fs,
        theta: kept_theta,
        gain_db,
        s21,
        refined,
        max_gain_db,
        min_gain_db,
        extinction_db: max_gain_db - min_gain_db,
        period_correlation,
        adjacent_gain_db,
        excess_gain_db: max_gain_db - adjacent_gain_db,
        failures,
        records,
    })
}

/// Reflection of a lone pump tone versus frequency and amplitude.
#[derive(Debug, Clone, Serialize)]
pub struct ReflectionReport {
    pub levels: Vec<f64>,
    pub freqs: Vec<f64>,
    /// `s11_db[level][freq]`; NaN where the run failed.
    pub s11_db: Vec<Vec<f64>>,
    pub s21_db: Vec<Vec<f64>>,
    /// Lossy transfer-matrix overlay on a 10 MHz grid over the same span.
    pub tmm_freqs: Vec<f64>,
    pub tmm_s11_db: Vec<f64>,
    pub failures: Vec<PointFailure>,
    pub records: Vec<RunRecord>,
}

pub fn run_reflection_scan(sc: &Scenario) -> Result<ReflectionReport> {
    let freqs = sc.sweep.fs.clone();
    let levels = sc.sweep.pump_levels.clone();
    let jobs: Vec<(usize, usize)> = (0..levels.len())
        .flat_map(|l| (0..freqs.len()).map(move |f| (l, f)))
        .collect();
    let outcomes = parallel_map(&jobs, sc.workers, |&(l, f)| {
        let drive = DriveSpec {
            pump: crate::transient::ToneDrive::new(levels[l], freqs[f], sc.drive.pump.phase),
            signal: Default::default(),
            ..sc.drive
        };
        (drive, run_probe(&sc.line, &drive, &sc.protocol, &[freqs[f]], "reflect"))
    })?;
    let mut s11_db = vec![vec![f64::NAN; freqs.len()]; levels.len()];
    let mut s21_db = s11_db.clone();
    let mut failures = Vec::new();
    let mut records = Vec::new();
    for (&(l, f), (drive, outcome)) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok((points, record)) => {
                s11_db[l][f] = transducer_gain(points[0].s11);
                s21_db[l][f] = transducer_gain(points[0].s21);
                records.push(record);
            }
            Err(e) => {
                let mut r = RunRecord::new("reflect", &drive);
                r.error = Some(e.to_string());
                records.push(r);
                failures.push(PointFailure {
                    label: "reflect".into(),
                    fp: drive.pump.freq,
                    fs: 0.0,
                    error: e.to_string(),
                });
            }
        }
    }
    let (lo, hi) = (freqs[0], freqs[freqs.len() - 1]);
    let tmm_freqs = frequency_grid(lo, hi, 10e6);
    let tmm = linear_s_parameters(&LinearLine::lossy(&sc.line), &tmm_freqs, sc.line.z0)?;
    Ok(ReflectionReport {
        levels,
        freqs,
        s11_db,
        s21_db,
        tmm_s11_db: tmm.s11_db(),
        tmm_freqs,
        failures,
        records,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformReport {
    pub tones: ToneSummary,
    pub gain: Option<GainProfile>,
    pub points: Vec<GainPoint>,
    /// Coherence lengths at the tone-run signal frequency.
    pub xi: f64,
    pub xi_p_plus_s: f64,
    pub xi_p_plus_i: f64,
    pub failures: Vec<PointFailure>,
    pub records: Vec<RunRecord>,
}

/// The same circuit without dispersion engineering: a tone run and a gain sweep.
pub fn run_uniform_comparison(sc: &Scenario) -> Result<UniformReport> {
    let line = &sc.line;
    let fp = sc.drive.pump.freq;
    let mut tone_drive = sc.drive;
    tone_drive.pump.amplitude = sc.sweep.uniform_pump;
    tone_drive.signal.freq = sc.sweep.uniform_fs;
    let run = run_tones(line, &tone_drive, &sc.protocol, "uniform-tones")?;
    let tones = summarize_tones(line, &tone_drive, run)?;
    let pairs: Vec<(f64, f64)> = sc.sweep.fs.iter().filter(|&&f| f < fp).map(|&f| (fp, f)).collect();
    let (points, mut records, mut failures) =
        sweep_gain(line, &sc.drive, &sc.protocol, &pairs, sc.workers, "uniform-gain")?;
    let (mut profiles, profile_failures) = profiles_by_pump(&[fp], &sc.drive, &points);
    failures.extend(profile_failures);
    let gain = profiles.pop();
    let lin = linear_line(sc);
    let disp = bloch_dispersion(&lin, &default_dispersion_grid())?;
    let mc = phase_mismatch(&disp, fp, &[sc.sweep.uniform_fs])?;
    records.insert(0, tones.record.clone());
    Ok(UniformReport {
        tones,
        gain,
        points,
        xi: mc.xi[0],
        xi_p_plus_s: mc.p_plus_s[0].xi,
        xi_p_plus_i: mc.p_plus_i[0].xi,
        failures,
        records,
    })
}

/// Forward and backward power envelopes (dBm) of one tone, for plotting.
pub fn wave_envelopes(tone: &ToneField, z: f64) -> (Vec<f64>, Vec<f64>) {
    let dbm = |v: Vec<f64>| v.into_iter().map(watts_to_dbm).collect();
    (dbm(forward_power(tone, z)), dbm(backward_power(tone, z)))
}

/// Outcome of any scenario.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    Dispersion(DispersionReport),
    Tones(ToneSummary),
    Gain(GainSweepReport),
    Phase(PhaseSweepReport),
    Reflection(ReflectionReport),
    Uniform(UniformReport),
}

impl Outcome {
    pub fn failures(&self) -> &[PointFailure] {
        match self {
            Self::Gain(r) => &r.failures,
            Self::Phase(r) => &r.failures,
            Self::Reflection(r) => &r.failures,
            Self::Uniform(r) => &r.failures,
            Self::Dispersion(_) | Self::Tones(_) => &[],
        }
    }

    pub fn records(&self) -> Vec<RunRecord> {
        match self {
            Self::Dispersion(_) => Vec::new(),
            Self::Tones(t) => vec![t.record.clone()],
            Self::Gain(r) => r.records.clone(),
            Self::Phase(r) => r.records.clone(),
            Self::Reflection(r) => r.records.clone(),
            Self::Uniform(r) => r.records.clone(),
        }
    }
}

/// Runs a scenario of any kind.
pub fn run_scenario(sc: &Scenario) -> Result<Outcome> {
    Ok(match sc.kind {
        ScenarioKind::DispersionReport => Outcome::Dispersion(run_dispersion_report(sc)?),
        ScenarioKind::ToneEvolution | ScenarioKind::Custom => Outcome::Tones(run_tone_evolution(sc)?),
        ScenarioKind::GainSweep => Outcome::Gain(run_gain_sweep(sc)?),
        ScenarioKind::PhaseSweep => Outcome::Phase(run_phase_sweep(sc)?),
        ScenarioKind::ReflectionScan => Outcome::Reflection(run_reflection_scan(sc)?),
        ScenarioKind::UniformComparison => Outcome::Uniform(run_uniform_comparison(sc)?),
    })
}

/// The line of `sc` with a constant loading equal to `c`.
pub fn uniform_variant(line: &LineSpec, c: f64) -> Result<LineSpec> {
    Ok(line.with_profile(LoadingProfile::uniform(c, line.n_cells())?))
}
