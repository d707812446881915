//! Frequency-domain post-processing of transient runs: DFT, tone extraction,
//! node powers, scattering parameters, gain statistics and growth fits.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tmm::median;
use crate::transient::{Recorder, Snapshot, TransientTrace};
use crate::units::TWO_PI;

/// DFT bins (`X_q = (1/M) sum_tau x_tau exp(-2 pi i tau q / M)`) of node
/// voltages and currents, either for every bin or for a chosen subset.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralFrame {
    /// Bin spacing `1 / (M dt)` (Hz).
    pub resolution: f64,
    pub n_samples: usize,
    pub nodes: Vec<usize>,
    /// Bin indices held by this frame, ascending.
    pub bins: Vec<usize>,
    /// `voltage[b][j]`: bin `bins[b]` of node `nodes[j]`.
    pub voltage: Vec<Vec<Complex64>>,
    pub current: Vec<Vec<Complex64>>,
    pub port_current: Vec<Complex64>,
}

impl SpectralFrame {
    pub fn slot(&self, bin: usize) -> Option<usize> {
        self.bins.binary_search(&bin).ok()
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.resolution
    }

    /// Index of the bin at `freq`, or an off-grid error.
    pub fn bin_of(&self, label: &str, freq: f64) -> Result<usize> {
        grid_bin(label, freq, self.resolution)
    }
}

fn grid_bin(label: &str, freq: f64, resolution: f64) -> Result<usize> {
    let q = freq / resolution;
    if freq < 0.0 || (q - q.round()).abs() > 1e-6 {
        return Err(Error::OffGrid {
            label: label.to_string(),
            freq,
            resolution,
        });
    }
    Ok(q.round() as usize)
}

fn dft_series(fft: &Arc<dyn rustfft::Fft<f64>>, x: &[f64]) -> Vec<Complex64> {
    let m = x.len() as f64;
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);
    for v in &mut buf {
        *v /= m;
    }
    buf
}

/// Full DFT of every recorded series in a trace.
pub fn dft(trace: &TransientTrace) -> SpectralFrame {
    let m = trace.n_samples();
    let fft = FftPlanner::new().plan_fft_forward(m);
    let voltage = trace.voltage.iter().map(|x| dft_series(&fft, x)).collect::<Vec<_>>();
    let current = trace.current.iter().map(|x| dft_series(&fft, x)).collect::<Vec<_>>();
    let port = dft_series(&fft, &trace.port_current);
    let transpose = |per_node: Vec<Vec<Complex64>>| -> Vec<Vec<Complex64>> {
        (0..m)
            .map(|q| per_node.iter().map(|s| s[q]).collect())
            .collect()
    };
    SpectralFrame {
        resolution: 1.0 / (m as f64 * trace.dt),
        n_samples: m,
        nodes: trace.nodes.clone(),
        bins: (0..m).collect(),
        voltage: transpose(voltage),
        current: transpose(current),
        port_current: port,
    }
}

/// Accumulates selected DFT bins of every node while the solver runs, so a
/// full trace never has to be stored. Produces the same numbers as [`dft`].
pub struct ToneRecorder {
    bins: Vec<usize>,
    n_samples: usize,
    dt: f64,
    n_nodes: usize,
    twiddle: Vec<Complex64>,
    v_re: Vec<Vec<f64>>,
    v_im: Vec<Vec<f64>>,
    i_re: Vec<Vec<f64>>,
    i_im: Vec<Vec<f64>>,
    port: Vec<Complex64>,
}

impl ToneRecorder {
    pub fn new(mut bins: Vec<usize>) -> Self {
        bins.sort_unstable();
        bins.dedup();
        Self {
            bins,
            n_samples: 0,
            dt: 0.0,
            n_nodes: 0,
            twiddle: Vec::new(),
            v_re: Vec::new(),
            v_im: Vec::new(),
            i_re: Vec::new(),
            i_im: Vec::new(),
            port: Vec::new(),
        }
    }

    /// Recorder for the tones of a pump/signal pair on the grid of `resolution`.
    pub fn for_tones(tones: &ToneSet, resolution: f64) -> Result<Self> {
        let bins = tones
            .entries()
            .iter()
            .map(|(label, f)| grid_bin(label.name(), *f, resolution))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(bins))
    }

    pub fn into_frame(self) -> SpectralFrame {
        let m = self.n_samples as f64;
        let join = |re: &[f64], im: &[f64]| -> Vec<Complex64> {
            re.iter()
                .zip(im)
                .map(|(&a, &b)| Complex64::new(a, b) / m)
                .collect()
        };
        SpectralFrame {
            resolution: 1.0 / (m * self.dt),
            n_samples: self.n_samples,
            nodes: (0..self.n_nodes).collect(),
            voltage: (0..self.bins.len())
                .map(|b| join(&self.v_re[b], &self.v_im[b]))
                .collect(),
            current: (0..self.bins.len())
                .map(|b| join(&self.i_re[b], &self.i_im[b]))
                .collect(),
            port_current: self.port.iter().map(|p| p / m).collect(),
            bins: self.bins,
        }
    }
}

impl Recorder for ToneRecorder {
    fn start(&mut self, n_nodes: usize, n_samples: usize, dt: f64, _t_start: f64) {
        self.n_nodes = n_nodes;
        self.n_samples = n_samples;
        self.dt = dt;
        self.twiddle = (0..n_samples)
            .map(|k| Complex64::from_polar(1.0, -TWO_PI * k as f64 / n_samples as f64))
            .collect();
        let zeros = || vec![vec![0.0; n_nodes]; self.bins.len()];
        self.v_re = zeros();
        self.v_im = zeros();
        self.i_re = zeros();
        self.i_im = zeros();
        self.port = vec![Complex64::default(); self.bins.len()];
    }

    fn record(&mut self, sample: usize, snap: &Snapshot<'_>) {
        let m = self.n_samples;
        let last = self.n_nodes - 1;
        for (b, &q) in self.bins.iter().enumerate() {
            let w = self.twiddle[(sample * q) % m];
            let (v_re, v_im) = (&mut self.v_re[b], &mut self.v_im[b]);
            for (n, &v) in snap.voltage.iter().enumerate() {
                v_re[n] += v * w.re;
                v_im[n] += v * w.im;
            }
            let (i_re, i_im) = (&mut self.i_re[b], &mut self.i_im[b]);
            for (n, &i) in snap.branch_current.iter().enumerate() {
                i_re[n] += i * w.re;
                i_im[n] += i * w.im;
            }
            i_re[last] += snap.load_current * w.re;
            i_im[last] += snap.load_current * w.im;
            self.port[b] += snap.port_current * w;
        }
    }
}

/// Mixing products tracked for a pump/signal pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ToneLabel {
    Signal,
    Idler,
    Pump,
    PumpPlusSignal,
    PumpPlusIdler,
    SecondHarmonic,
    ThirdHarmonic,
}

impl ToneLabel {
    pub const ALL: [ToneLabel; 7] = [
        ToneLabel::Signal,
        ToneLabel::Idler,
        ToneLabel::Pump,
        ToneLabel::PumpPlusSignal,
        ToneLabel::PumpPlusIdler,
        ToneLabel::SecondHarmonic,
        ToneLabel::ThirdHarmonic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ToneLabel::Signal => "s",
            ToneLabel::Idler => "i",
            ToneLabel::Pump => "p",
            ToneLabel::PumpPlusSignal => "p+s",
            ToneLabel::PumpPlusIdler => "p+i",
            ToneLabel::SecondHarmonic => "2p",
            ToneLabel::ThirdHarmonic => "3p",
        }
    }

    pub fn frequency(&self, fp: f64, fs: f64) -> f64 {
        let fi = fp - fs;
        match self {
            ToneLabel::Signal => fs,
            ToneLabel::Idler => fi,
            ToneLabel::Pump => fp,
            ToneLabel::PumpPlusSignal => fp + fs,
            ToneLabel::PumpPlusIdler => fp + fi,
            ToneLabel::SecondHarmonic => 2.0 * fp,
            ToneLabel::ThirdHarmonic => 3.0 * fp,
        }
    }
}

/// Tones of one pump/signal pair. When `fs = fp/2` the idler (and `p+i`)
/// coincide with the signal (and `p+s`) and are not listed separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToneSet {
    pub fp: f64,
    pub fs: f64,
}

impl ToneSet {
    pub fn new(fp: f64, fs: f64) -> Self {
        Self { fp, fs }
    }

    pub fn is_degenerate(&self) -> bool {
        (2.0 * self.fs - self.fp).abs() <= 1e-9 * self.fp
    }

    pub fn entries(&self) -> Vec<(ToneLabel, f64)> {
        let degenerate = self.is_degenerate();
        ToneLabel::ALL
            .iter()
            .filter(|l| {
                !(degenerate && matches!(l, ToneLabel::Idler | ToneLabel::PumpPlusIdler))
            })
            .map(|&l| (l, l.frequency(self.fp, self.fs)))
            .collect()
    }
}

/// One tone along the line: physical phasors (peak amplitude, twice the DFT
/// bin) and the net power flow `P_n = Re{V_n I_n*} / 2` at every node.
#[derive(Debug, Clone, Serialize)]
pub struct ToneField {
    pub label: ToneLabel,
    pub freq: f64,
    pub bin: usize,
    pub voltage: Vec<Complex64>,
    pub current: Vec<Complex64>,
    /// Power flow (W) at each node.
    pub power: Vec<f64>,
    /// Current entering the first node from the source.
    pub port_current: Complex64,
    /// Signal and idler (or p+s and p+i) share this bin.
    pub degenerate: bool,
}

impl ToneField {
    pub fn power_dbm(&self) -> Vec<f64> {
        self.power.iter().map(|&p| crate::units::watts_to_dbm(p)).collect()
    }

    pub fn input_voltage(&self) -> Complex64 {
        self.voltage[0]
    }

    pub fn output_voltage(&self) -> Complex64 {
        *self.voltage.last().expect("non-empty tone field")
    }
}

/// Extracts every tone of `tones` from `frame`. Tones must sit exactly on DFT bins.
pub fn extract_tones(frame: &SpectralFrame, tones: &ToneSet) -> Result<Vec<ToneField>> {
    let degenerate = tones.is_degenerate();
    tones
        .entries()
        .into_iter()
        .map(|(label, f)| {
            let bin = frame.bin_of(label.name(), f)?;
            if 2 * bin >= frame.n_samples.max(1) {
                return Err(Error::InvalidParameter(format!(
                    "tone {} at {f:e} Hz is above the Nyquist frequency",
                    label.name()
                )));
            }
            let slot = frame.slot(bin).ok_or_else(|| {
                Error::InvalidParameter(format!("bin {bin} ({}) was not recorded", label.name()))
            })?;
            let voltage: Vec<Complex64> = frame.voltage[slot].iter().map(|v| 2.0 * v).collect();
            let current: Vec<Complex64> = frame.current[slot].iter().map(|i| 2.0 * i).collect();
            let power = voltage
                .iter()
                .zip(&current)
                .map(|(v, i)| 0.5 * (v * i.conj()).re)
                .collect();
            Ok(ToneField {
                label,
                freq: f,
                bin,
                voltage,
                current,
                power,
                port_current: 2.0 * frame.port_current[slot],
                degenerate: degenerate
                    && matches!(label, ToneLabel::Signal | ToneLabel::PumpPlusSignal),
            })
        })
        .collect()
}

pub fn find_tone(fields: &[ToneField], label: ToneLabel) -> Option<&ToneField> {
    fields.iter().find(|f| f.label == label)
}

/// Forward `(S11, S21)` of a tone from the input/output phasors.
pub fn s_parameters(tone: &ToneField, z0: f64) -> Result<(Complex64, Complex64)> {
    s_parameters_from(tone.input_voltage(), tone.port_current, tone.output_voltage(), z0)
}

pub fn s_parameters_from(
    v_in: Complex64,
    i_in: Complex64,
    v_out: Complex64,
    z0: f64,
) -> Result<(Complex64, Complex64)> {
    let incident = v_in + z0 * i_in;
    if !(incident.norm() > 1e-18) {
        return Err(Error::DegenerateDrive(incident.norm()));
    }
    Ok(((v_in - z0 * i_in) / incident, 2.0 * v_out / incident))
}

/// `(S11, S21)` at an arbitrary recorded bin, from the node-0 voltage, the
/// port current and the last-node voltage.
pub fn bin_s_parameters(frame: &SpectralFrame, freq: f64, z0: f64) -> Result<(Complex64, Complex64)> {
    let bin = frame.bin_of("probe", freq)?;
    let slot = frame
        .slot(bin)
        .ok_or_else(|| Error::InvalidParameter(format!("bin {bin} was not recorded")))?;
    let v = &frame.voltage[slot];
    s_parameters_from(
        v[0],
        frame.port_current[slot],
        *v.last().expect("non-empty frame"),
        z0,
    )
}

/// Transducer gain `|S21|^2` in dB (equal source and load impedances).
pub fn transducer_gain(s21: Complex64) -> f64 {
    10.0 * s21.norm_sqr().log10()
}

/// Power (W) carried by the forward-travelling wave at each node, splitting
/// the node phasors with the reference impedance `z`: `|V + zI|^2 / 8z`.
pub fn forward_power(tone: &ToneField, z: f64) -> Vec<f64> {
    tone.voltage
        .iter()
        .zip(&tone.current)
        .map(|(v, i)| (v + z * i).norm_sqr() / (8.0 * z))
        .collect()
}

/// Power (W) of the backward-travelling wave, `|V - zI|^2 / 8z`.
pub fn backward_power(tone: &ToneField, z: f64) -> Vec<f64> {
    tone.voltage
        .iter()
        .zip(&tone.current)
        .map(|(v, i)| (v - z * i).norm_sqr() / (8.0 * z))
        .collect()
}

/// Least-squares fit of the forward signal/idler power envelopes to
/// `P_s ~ cosh^2(g n)`, `P_i ~ sinh^2(g n)` with a common `g`.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    /// Exponential gain coefficient (1/cell).
    pub g: f64,
    /// Fitted signal power at the input (W).
    pub signal_amplitude: f64,
    /// Fitted idler prefactor (W).
    pub idler_amplitude: f64,
    /// RMS deviation of the fitted log-envelopes (dB).
    pub residual_db: f64,
    /// Largest drop of the smoothed signal power below its running maximum (dB).
    pub signal_drawdown_db: f64,
    /// Forward signal gain from the first to the last node (dB).
    pub envelope_gain_db: f64,
    /// `cosh^2(g N)` (dB).
    pub fitted_gain_db: f64,
    /// Why the fit should not be trusted, if it should not.
    pub rejected: Option<String>,
}

/// Thresholds for accepting a growth fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitCriteria {
    /// Minimum end-to-end forward signal gain (dB).
    pub min_gain_db: f64,
    /// Moving-average window (cells) applied before the drawdown test.
    pub smoothing: usize,
    /// Maximum allowed signal drawdown (dB).
    pub max_drawdown_db: f64,
    /// Maximum allowed RMS log residual (dB).
    pub max_residual_db: f64,
}

impl Default for FitCriteria {
    fn default() -> Self {
        Self {
            min_gain_db: 6.0,
            smoothing: 20,
            max_drawdown_db: 2.0,
            max_residual_db: 1.5,
        }
    }
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1).min(values.len().max(1));
    values
        .windows(w)
        .map(|win| win.iter().sum::<f64>() / w as f64)
        .collect()
}

/// Fits the growth of the forward signal and idler waves along the line,
/// separating forward and backward waves with the impedance `z`.
pub fn fit_growth(
    signal: &ToneField,
    idler: &ToneField,
    z: f64,
    criteria: &FitCriteria,
) -> Result<GrowthFit> {
    if signal.degenerate {
        return Err(Error::InvalidParameter(
            "growth fit needs distinct signal and idler tones".into(),
        ));
    }
    fit_growth_powers(&forward_power(signal, z), &forward_power(idler, z), criteria)
}

/// Growth fit on given signal and idler power envelopes (W per node).
///
/// The idler is only fitted beyond the first tenth of the line, where `sinh`
/// has left its zero at the input.
pub fn fit_growth_powers(
    signal: &[f64],
    idler: &[f64],
    criteria: &FitCriteria,
) -> Result<GrowthFit> {
    let n = signal.len();
    if n < 10 || idler.len() != n {
        return Err(Error::InsufficientData(format!(
            "need matching envelopes of at least 10 nodes, got {} and {}",
            n,
            idler.len()
        )));
    }
    let cells = (n - 1) as f64;
    let points = |p: &[f64], skip: usize| -> Vec<(f64, f64)> {
        p.iter()
            .enumerate()
            .skip(skip)
            .filter(|(_, &x)| x > 0.0)
            .map(|(k, &x)| (k as f64, x.ln()))
            .collect()
    };
    let s_pts = points(signal, 0);
    let i_pts = points(idler, (n / 10).max(1));
    if s_pts.len() < n / 2 || i_pts.len() < n / 4 {
        return Err(Error::InsufficientData(
            "power envelopes are mostly non-positive".into(),
        ));
    }

    // ln P = offset + 2 ln f(g n); the best offset for fixed g is the mean residual.
    let ln_cosh = |x: f64| x.abs() + (0.5 * (1.0 + (-2.0 * x.abs()).exp())).ln();
    let ln_sinh = |x: f64| x + (0.5 * (1.0 - (-2.0 * x).exp())).ln();
    let fit_offset = |pts: &[(f64, f64)], model: &dyn Fn(f64) -> f64| -> (f64, f64) {
        let off = pts.iter().map(|&(k, y)| y - 2.0 * model(k)).sum::<f64>() / pts.len() as f64;
        let sse = pts.iter().map(|&(k, y)| (y - off - 2.0 * model(k)).powi(2)).sum();
        (off, sse)
    };
    let cost = |g: f64| -> (f64, f64, f64) {
        let (off_s, sse_s) = fit_offset(&s_pts, &|k| ln_cosh(g * k));
        let (off_i, sse_i) = fit_offset(&i_pts, &|k| ln_sinh(g * k));
        (sse_s + sse_i, off_s, off_i)
    };
    let g_max = 20.0 / cells;
    let steps = 400;
    let mut best = (f64::INFINITY, 0.0);
    for j in 1..=steps {
        let g = g_max * j as f64 / steps as f64;
        let c = cost(g).0;
        if c < best.0 {
            best = (c, g);
        }
    }
    let h = g_max / steps as f64;
    let (mut a, mut b) = ((best.1 - h).max(1e-12), best.1 + h);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if cost(x1).0 < cost(x2).0 {
            b = x2;
        } else {
            a = x1;
        }
    }
    let g = 0.5 * (a + b);
    let (sse, off_s, off_i) = cost(g);
    let count = (s_pts.len() + i_pts.len()) as f64;
    let residual_db = 10.0 / std::f64::consts::LN_10 * (sse / count).sqrt();

    let smooth = moving_average(signal, criteria.smoothing);
    let mut running = f64::NEG_INFINITY;
    let mut drawdown: f64 = 0.0;
    for &p in &smooth {
        let level = if p > 0.0 { db(p) } else { f64::NEG_INFINITY };
        running = running.max(level);
        drawdown = drawdown.max(running - level);
    }
    let envelope_gain_db = if signal[0] > 0.0 && signal[n - 1] > 0.0 {
        db(signal[n - 1] / signal[0])
    } else {
        f64::NEG_INFINITY
    };
    let fitted_gain_db = 2.0 * ln_cosh(g * cells) * 10.0 / std::f64::consts::LN_10;
    let rejected = if !(envelope_gain_db >= criteria.min_gain_db) {
        Some(format!(
            "signal gain {envelope_gain_db:.2} dB below {:.1} dB",
            criteria.min_gain_db
        ))
    } else if drawdown > criteria.max_drawdown_db {
        Some(format!("signal envelope not monotone: drops {drawdown:.2} dB"))
    } else if residual_db > criteria.max_residual_db {
        Some(format!("fit residual {residual_db:.2} dB"))
    } else {
        None
    };
    Ok(GrowthFit {
        g,
        signal_amplitude: off_s.exp(),
        idler_amplitude: off_i.exp(),
        residual_db,
        signal_drawdown_db: drawdown,
        envelope_gain_db,
        fitted_gain_db,
        rejected,
    })
}

/// Spatial beat period (cells) of a tone: the median spacing of the maxima of
/// `|P_n|` after a moving average over `smoothing` cells. A maximum only counts
/// once the level has fallen `hysteresis_db` below it and risen again by the
/// same amount, which suppresses ripple inside one loading period.
pub fn beating_period(tone: &ToneField, smoothing: usize, hysteresis_db: f64) -> Result<f64> {
    let magnitude: Vec<f64> = tone.power.iter().map(|p| p.abs()).collect();
    envelope_period(&magnitude, smoothing, hysteresis_db)
}

pub fn envelope_period(values: &[f64], smoothing: usize, hysteresis_db: f64) -> Result<f64> {
    if values.len() < smoothing.max(1) + 3 {
        return Err(Error::InsufficientData(
            "envelope shorter than the smoothing window".into(),
        ));
    }
    let level: Vec<f64> = moving_average(values, smoothing)
        .into_iter()
        .map(|p| db(p.max(f64::MIN_POSITIVE)))
        .collect();
    let maxima = hysteresis_maxima(&level, hysteresis_db);
    if maxima.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} envelope maxima, need at least 3",
            maxima.len()
        )));
    }
    let mut spacing: Vec<f64> = maxima.windows(2).map(|p| (p[1] - p[0]) as f64).collect();
    Ok(median(&mut spacing))
}

/// Indices of maxima that are preceded by a rise and followed by a fall of
/// at least `delta`.
fn hysteresis_maxima(y: &[f64], delta: f64) -> Vec<usize> {
    let mut maxima = Vec::new();
    let mut rising = false;
    let mut low = y[0];
    let mut high = (y[0], 0);
    for (k, &v) in y.iter().enumerate() {
        if rising {
            if v > high.0 {
                high = (v, k);
            }
            if v < high.0 - delta {
                maxima.push(high.1);
                rising = false;
                low = v;
            }
        } else {
            low = low.min(v);
            if v > low + delta {
                rising = true;
                high = (v, k);
            }
        }
    }
    maxima
}

/// Gain versus signal frequency with summary statistics.
#[derive(Debug, Clone, Serialize)]
pub struct GainProfile {
    pub fp: f64,
    pub pump_amplitude: f64,
    pub signal_amplitude: f64,
    pub fs: Vec<f64>,
    /// `|S21|^2` (dB).
    pub gain_db: Vec<f64>,
    pub degenerate: Vec<bool>,
    /// Largest non-degenerate gain (dB).
    pub peak_gain_db: f64,
    /// Widest contiguous run of points within 3 dB of the peak: `(f_lo, f_hi)`.
    pub band_3db: (f64, f64),
    /// Peak-to-peak deviation from a 500 MHz moving median (dB).
    pub ripple_db: f64,
}

impl GainProfile {
    pub fn new(
        fp: f64,
        pump_amplitude: f64,
        signal_amplitude: f64,
        fs: Vec<f64>,
        gain_db: Vec<f64>,
    ) -> Result<Self> {
        if fs.len() != gain_db.len() || fs.len() < 3 {
            return Err(Error::InsufficientData("gain profile needs at least 3 points".into()));
        }
        let degenerate: Vec<bool> = fs
            .iter()
            .map(|&f| (2.0 * f - fp).abs() <= 1e-9 * fp)
            .collect();
        let usable = |k: usize| !degenerate[k] && gain_db[k].is_finite();
        let peak = (0..fs.len())
            .filter(|&k| usable(k))
            .map(|k| gain_db[k])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut best = (0.0, 0.0);
        let mut run: Option<usize> = None;
        for k in 0..=fs.len() {
            let inside = k < fs.len() && (degenerate[k] || (usable(k) && gain_db[k] >= peak - 3.0));
            match (inside, run) {
                (true, None) => run = Some(k),
                (false, Some(s)) => {
                    let (lo, hi) = (fs[s], fs[k - 1]);
                    if hi - lo > best.1 - best.0 {
                        best = (lo, hi);
                    }
                    run = None;
                }
                _ => {}
            }
        }
        let ripple_db = ripple_statistic(&fs, &gain_db, &degenerate, 500e6);
        Ok(Self {
            fp,
            pump_amplitude,
            signal_amplitude,
            fs,
            gain_db,
            degenerate,
            peak_gain_db: peak,
            band_3db: best,
            ripple_db,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.band_3db.1 - self.band_3db.0
    }
}

/// Peak-to-peak deviation of `gain` from its moving median over `window` Hz,
/// skipping degenerate points.
pub fn ripple_statistic(fs: &[f64], gain: &[f64], skip: &[bool], window: f64) -> f64 {
    let idx: Vec<usize> = (0..fs.len()).filter(|&k| !skip[k] && gain[k].is_finite()).collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &k in &idx {
        let mut local: Vec<f64> = idx
            .iter()
            .filter(|&&j| (fs[j] - fs[k]).abs() <= 0.5 * window * (1.0 + 1e-9))
            .map(|&j| gain[j])
            .collect();
        let dev = gain[k] - median(&mut local);
        lo = lo.min(dev);
        hi = hi.max(dev);
    }
    if idx.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Median spacing (Hz) of the local maxima of `gain` over `fs`, skipping
/// flagged points. Used for the period of gain ripple on a fine grid.
pub fn peak_spacing(fs: &[f64], gain: &[f64], skip: &[bool]) -> Result<f64> {
    let idx: Vec<usize> = (0..fs.len()).filter(|&k| !skip[k] && gain[k].is_finite()).collect();
    let peaks: Vec<f64> = idx
        .windows(3)
        .filter(|w| gain[w[1]] > gain[w[0]] && gain[w[1]] >= gain[w[2]])
        .map(|w| fs[w[1]])
        .collect();
    if peaks.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} gain maxima, need at least 3",
            peaks.len()
        )));
    }
    let mut spacing: Vec<f64> = peaks.windows(2).map(|p| p[1] - p[0]).collect();
    Ok(median(&mut spacing))
}
