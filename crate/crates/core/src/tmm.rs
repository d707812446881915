//! Small-signal frequency-domain analysis of the ladder with ABCD (transfer)
//! matrices: unit cells, cascades, Bloch band structure, phase mismatch of the
//! mixing processes and two-port scattering parameters.

use std::ops::Mul;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::physics::{LineSpec, LoadingProfile};
use crate::units::TWO_PI;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// ABCD matrix of a reciprocal two-port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl TransferMatrix {
    pub const IDENTITY: Self = Self {
        a: ONE,
        b: ZERO,
        c: ZERO,
        d: ONE,
    };

    pub fn series(z: Complex64) -> Self {
        Self {
            b: z,
            ..Self::IDENTITY
        }
    }

    pub fn shunt(y: Complex64) -> Self {
        Self {
            c: y,
            ..Self::IDENTITY
        }
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    /// `(A + D)/2`, the cosine of the Bloch phase for a periodic section.
    pub fn half_trace(&self) -> Complex64 {
        0.5 * (self.a + self.d)
    }

    /// Integer power by repeated squaring.
    pub fn pow(&self, mut exp: usize) -> Self {
        let mut base = *self;
        let mut acc = Self::IDENTITY;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            exp >>= 1;
        }
        acc
    }

    /// `(S11, S21)` for equal reference impedances `z0` at both ports.
    pub fn s_parameters(&self, z0: f64) -> (Complex64, Complex64) {
        let b = self.b / z0;
        let c = self.c * z0;
        let denom = self.a + b + c + self.d;
        ((self.a + b - c - self.d) / denom, 2.0 / denom)
    }
}

impl Mul for TransferMatrix {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        Self {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }
}

/// Ordered product, first element at the input port.
pub fn cascade(matrices: &[TransferMatrix]) -> TransferMatrix {
    matrices
        .iter()
        .fold(TransferMatrix::IDENTITY, |acc, &m| acc * m)
}

/// pi-section cell: `Cn/2` to ground on both sides of the SQUID branch.
///
/// Without `rj` this is the closed-form lossless cell; it fails at the branch
/// resonance `omega^2 CJ L_S0 = 1`. With `rj` the branch impedance becomes
/// `[1/(i w L_S0) + i w CJ + 1/RJ]^-1`.
pub fn cell_transfer_matrix(
    omega: f64,
    l_s0: f64,
    cj: f64,
    cn: f64,
    rj: Option<f64>,
) -> Result<TransferMatrix> {
    if omega == 0.0 {
        return Ok(TransferMatrix::IDENTITY);
    }
    match rj {
        None => {
            let pole = 1.0 - omega * omega * cj * l_s0;
            if pole.abs() < 1e-12 {
                return Err(Error::SingularFrequency(omega));
            }
            let a = ONE - 0.5 * omega * omega * l_s0 * cn / pole;
            let b = I * omega * l_s0 / pole;
            let c = I * omega * cn - 0.25 * I * omega.powi(3) * l_s0 * cn * cn / pole;
            Ok(TransferMatrix { a, b, c, d: a })
        }
        Some(rj) => {
            let y_branch = 1.0 / (I * omega * l_s0) + I * omega * cj + 1.0 / rj;
            let half = TransferMatrix::shunt(I * omega * cn * 0.5);
            Ok(half * TransferMatrix::series(1.0 / y_branch) * half)
        }
    }
}

/// Linearised ladder as seen by the transfer-matrix analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearLine {
    pub l_s0: f64,
    pub cj: f64,
    /// Branch loss; `None` for the lossless model.
    pub rj: Option<f64>,
    pub profile: LoadingProfile,
}

impl LinearLine {
    /// Lossless linearisation of a biased line.
    pub fn lossless(line: &LineSpec) -> Self {
        Self {
            l_s0: line.bias.l_s0,
            cj: line.squid.cj,
            rj: None,
            profile: line.profile,
        }
    }

    /// Linearisation keeping the junction subgap resistance.
    pub fn lossy(line: &LineSpec) -> Self {
        Self {
            rj: line.squid.rj,
            ..Self::lossless(line)
        }
    }

    fn cell(&self, omega: f64, cn: f64) -> Result<TransferMatrix> {
        cell_transfer_matrix(omega, self.l_s0, self.cj, cn, self.rj)
    }

    /// One loading period `T01^kappa T02^mu T01^kappa T03^nu`.
    pub fn period_matrix(&self, omega: f64) -> Result<TransferMatrix> {
        let mut acc = TransferMatrix::IDENTITY;
        for (cn, len) in self.profile.segments() {
            if len > 0 {
                acc = acc * self.cell(omega, cn)?.pow(len);
            }
        }
        Ok(acc)
    }

    /// The whole N-cell line.
    pub fn line_matrix(&self, omega: f64) -> Result<TransferMatrix> {
        let p = &self.profile;
        Ok(self.period_matrix(omega)?.pow(p.n_cells / p.period()))
    }

    /// Mean-capacitance `omega0`.
    pub fn omega0(&self) -> f64 {
        (self.l_s0 * self.profile.mean()).sqrt().recip()
    }
}

/// Bloch band structure on a frequency grid.
#[derive(Debug, Clone, Serialize)]
pub struct DispersionResult {
    /// Frequencies (Hz), strictly increasing.
    pub freqs: Vec<f64>,
    /// Complex Bloch wavenumber per cell (rad/cell).
    pub k: Vec<Complex64>,
    pub in_gap: Vec<bool>,
    /// Maximal `(f_lo, f_hi)` intervals of grid points inside a gap.
    pub stop_bands: Vec<(f64, f64)>,
    /// Loading wavenumber `2 pi / m` (rad/cell).
    pub k_m: f64,
    /// Analytic gap centres `(j pi / m) f0` (Hz) for j = 1, 2, ...
    pub gap_centers: Vec<f64>,
}

impl DispersionResult {
    /// Linearly interpolated `Re k` at `f` (rad/cell).
    pub fn re_k_at(&self, f: f64) -> f64 {
        let (i, t) = self.locate(f);
        if t == 0.0 {
            return self.k[i].re;
        }
        self.k[i].re * (1.0 - t) + self.k[i + 1].re * t
    }

    /// Whether `f` falls inside a detected stop-band.
    pub fn in_gap_at(&self, f: f64) -> bool {
        self.stop_bands
            .iter()
            .any(|&(lo, hi)| f >= lo && f <= hi)
    }

    fn locate(&self, f: f64) -> (usize, f64) {
        let n = self.freqs.len();
        assert!(n > 0, "empty dispersion grid");
        if f <= self.freqs[0] {
            return (0, 0.0);
        }
        if f >= self.freqs[n - 1] {
            return (n - 1, 0.0);
        }
        let i = self.freqs.partition_point(|&x| x <= f) - 1;
        let t = (f - self.freqs[i]) / (self.freqs[i + 1] - self.freqs[i]);
        (i, t)
    }
}

/// Grid from `start` to `stop` inclusive in steps of `step` (all in Hz).
pub fn frequency_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| start + i as f64 * step).collect()
}

/// Default dispersion grid: 0.1 to 30 GHz in 1 MHz steps.
pub fn default_dispersion_grid() -> Vec<f64> {
    frequency_grid(0.1e9, 30e9, 1e6)
}

struct BandTracker {
    gaps: usize,
    in_gap: bool,
}

impl BandTracker {
    /// Folds the principal `acos` of the half-trace into a Bloch phase per period
    /// that increases continuously from zero at dc.
    fn unfold(&mut self, x: Complex64) -> (Complex64, bool) {
        let principal = x.acos();
        let gap = x.re.abs() > 1.0;
        if gap && !self.in_gap {
            self.gaps += 1;
        }
        self.in_gap = gap;
        let j = self.gaps as f64;
        let decay = principal.im.abs();
        let re = if gap {
            j * std::f64::consts::PI
        } else if self.gaps % 2 == 0 {
            j * std::f64::consts::PI + principal.re
        } else {
            (j + 1.0) * std::f64::consts::PI - principal.re
        };
        (Complex64::new(re, decay), gap)
    }
}

/// Bloch dispersion of the periodically loaded line on an ascending grid.
pub fn bloch_dispersion(line: &LinearLine, freqs: &[f64]) -> Result<DispersionResult> {
    if freqs.windows(2).any(|w| w[1] <= w[0]) || freqs.first().is_some_and(|&f| f <= 0.0) {
        return Err(Error::InvalidParameter(
            "dispersion grid must be positive and strictly increasing".into(),
        ));
    }
    let m = line.profile.period();
    let mut tracker = BandTracker {
        gaps: 0,
        in_gap: false,
    };
    // Count gaps below the first grid point so the band index is right.
    if let Some(&first) = freqs.first() {
        let mut f = 1e6;
        while f < first {
            tracker.unfold(line.period_matrix(TWO_PI * f)?.half_trace());
            f += 1e6;
        }
    }
    let mut k = Vec::with_capacity(freqs.len());
    let mut in_gap = Vec::with_capacity(freqs.len());
    for &f in freqs {
        let (km, gap) = tracker.unfold(line.period_matrix(TWO_PI * f)?.half_trace());
        k.push(km / m as f64);
        in_gap.push(gap);
    }
    let mut stop_bands = Vec::new();
    let mut start = None;
    for (i, &g) in in_gap.iter().enumerate() {
        match (g, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                stop_bands.push((freqs[s], freqs[i - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        stop_bands.push((freqs[s], freqs[freqs.len() - 1]));
    }
    let f0 = line.omega0() / TWO_PI;
    let fmax = freqs.last().copied().unwrap_or(0.0);
    let gap_centers = (1..)
        .map(|j| j as f64 * std::f64::consts::PI / m as f64 * f0)
        .take_while(|&f| f <= fmax)
        .collect();
    Ok(DispersionResult {
        freqs: freqs.to_vec(),
        k,
        in_gap,
        stop_bands,
        k_m: TWO_PI / m as f64,
        gap_centers,
    })
}

/// Mismatch of one parasitic up-conversion process, with a flag when the
/// generated tone sits in a stop-band (evanescent, no coherence length).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProcessMismatch {
    pub dk: f64,
    pub xi: f64,
    pub evanescent: bool,
}

impl ProcessMismatch {
    fn new(dk: f64, evanescent: bool) -> Self {
        Self {
            dk,
            xi: coherence_length(dk),
            evanescent,
        }
    }
}

/// `pi / |dk|` in cells.
pub fn coherence_length(dk: f64) -> f64 {
    std::f64::consts::PI / dk.abs()
}

/// Phase mismatch of the amplification process and the parasitic ones versus signal frequency.
#[derive(Debug, Clone, Serialize)]
pub struct MismatchCurve {
    pub fp: f64,
    pub fs: Vec<f64>,
    /// `k(fp) - k(fs) - k(fp - fs)` (rad/cell).
    pub dk: Vec<f64>,
    /// `pi / |dk|` (cells).
    pub xi: Vec<f64>,
    /// Whether signal or idler falls in a stop-band.
    pub flagged: Vec<bool>,
    /// `k(fp+fs) - k(fp) - k(fs)`.
    pub p_plus_s: Vec<ProcessMismatch>,
    /// `k(fp+fi) - k(fp) - k(fi)`.
    pub p_plus_i: Vec<ProcessMismatch>,
    /// `k(2fp) - 2 k(fp)`.
    pub two_p: ProcessMismatch,
    pub pump_in_gap: bool,
}

pub fn phase_mismatch(disp: &DispersionResult, fp: f64, fs: &[f64]) -> Result<MismatchCurve> {
    if let Some(&bad) = fs.iter().find(|&&f| !(f > 0.0 && f < fp)) {
        return Err(Error::InvalidParameter(format!(
            "signal frequency {bad:e} Hz must lie in (0, fp)"
        )));
    }
    let k = |f: f64| disp.re_k_at(f);
    let gap = |f: f64| disp.in_gap_at(f);
    let kp = k(fp);
    let mut curve = MismatchCurve {
        fp,
        fs: fs.to_vec(),
        dk: Vec::with_capacity(fs.len()),
        xi: Vec::with_capacity(fs.len()),
        flagged: Vec::with_capacity(fs.len()),
        p_plus_s: Vec::with_capacity(fs.len()),
        p_plus_i: Vec::with_capacity(fs.len()),
        two_p: ProcessMismatch::new(k(2.0 * fp) - 2.0 * kp, gap(2.0 * fp)),
        pump_in_gap: gap(fp),
    };
    for &f in fs {
        let fi = fp - f;
        let (ks, ki) = (k(f), k(fi));
        let dk = kp - ks - ki;
        curve.dk.push(dk);
        curve.xi.push(coherence_length(dk));
        curve.flagged.push(gap(f) || gap(fi));
        curve
            .p_plus_s
            .push(ProcessMismatch::new(k(fp + f) - kp - ks, gap(fp + f)));
        curve
            .p_plus_i
            .push(ProcessMismatch::new(k(fp + fi) - kp - ki, gap(fp + fi)));
    }
    Ok(curve)
}

/// Scattering parameters of the full line.
#[derive(Debug, Clone, Serialize)]
pub struct SParameterSet {
    pub freqs: Vec<f64>,
    pub s11: Vec<Complex64>,
    pub s21: Vec<Complex64>,
    pub z0: f64,
    pub lossless: bool,
}

impl SParameterSet {
    pub fn s11_db(&self) -> Vec<f64> {
        self.s11.iter().map(|s| 20.0 * s.norm().log10()).collect()
    }

    pub fn s21_db(&self) -> Vec<f64> {
        self.s21.iter().map(|s| 20.0 * s.norm().log10()).collect()
    }
}

pub fn linear_s_parameters(line: &LinearLine, freqs: &[f64], z0: f64) -> Result<SParameterSet> {
    let mut s11 = Vec::with_capacity(freqs.len());
    let mut s21 = Vec::with_capacity(freqs.len());
    for &f in freqs {
        let (r, t) = line.line_matrix(TWO_PI * f)?.s_parameters(z0);
        s11.push(r);
        s21.push(t);
    }
    Ok(SParameterSet {
        freqs: freqs.to_vec(),
        s11,
        s21,
        z0,
        lossless: line.rj.is_none(),
    })
}

/// Median spacing (Hz) of adjacent local minima of `|S11|` inside `band`.
pub fn side_lobe_spacing(sp: &SParameterSet, band: (f64, f64)) -> Result<f64> {
    let mag: Vec<f64> = sp.s11.iter().map(|s| s.norm()).collect();
    let minima: Vec<f64> = (1..mag.len().saturating_sub(1))
        .filter(|&i| sp.freqs[i] >= band.0 && sp.freqs[i] <= band.1)
        .filter(|&i| mag[i] < mag[i - 1] && mag[i] <= mag[i + 1])
        .map(|i| sp.freqs[i])
        .collect();
    if minima.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} |S11| minima in band, need at least 3",
            minima.len()
        )));
    }
    let mut gaps: Vec<f64> = minima.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(median(&mut gaps))
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
