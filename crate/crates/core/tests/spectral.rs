use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twpa_core::error::Error;
use twpa_core::spectral::{
    dft, envelope_period, extract_tones, find_tone, fit_growth_powers, s_parameters_from,
    transducer_gain, FitCriteria, GainProfile, ToneLabel, ToneSet,
};
use twpa_core::transient::{DriveSpec, TransientTrace};
use twpa_core::units::TWO_PI;

fn trace(dt: f64, series: Vec<Vec<f64>>) -> TransientTrace {
    let m = series[0].len();
    TransientTrace {
        dt,
        t_start: 0.0,
        n_cells: series.len() - 1,
        nodes: (0..series.len()).collect(),
        current: series.iter().map(|s| s.iter().map(|v| v / 50.0).collect()).collect(),
        voltage: series,
        port_current: vec![0.0; m],
        drive: DriveSpec::default(),
    }
}

fn sine(m: usize, dt: f64, amp: f64, f: f64, phase: f64) -> Vec<f64> {
    (0..m)
        .map(|k| amp * (TWO_PI * f * k as f64 * dt + phase).sin())
        .collect()
}

#[test]
fn on_grid_sinusoid_hits_one_bin() {
    let (m, dt) = (12500, 4e-12);
    let a = 3.7e-6;
    let frame = dft(&trace(dt, vec![sine(m, dt, a, 6.7e9, 0.3)]));
    assert!((frame.resolution - 20e6).abs() < 1e-3);
    let q = frame.bin_of("s", 6.7e9).unwrap();
    assert_eq!(q, 335);
    assert!((frame.voltage[q][0].norm() - a / 2.0).abs() < 1e-12 * a);
    for (j, bin) in frame.voltage.iter().enumerate() {
        if j != q && j != m - q {
            // leakage below -200 dBc
            assert!(bin[0].norm() < 1e-10 * a, "bin {j}: {:e}", bin[0].norm());
        }
    }
}

#[test]
fn constant_is_all_dc() {
    let frame = dft(&trace(4e-12, vec![vec![0.25; 400]]));
    assert!((frame.voltage[0][0].re - 0.25).abs() < 1e-15);
    assert!(frame.voltage[1..].iter().all(|b| b[0].norm() < 1e-15));
}

#[test]
fn parseval_against_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for m in [64usize, 1000, 12500] {
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let frame = dft(&trace(4e-12, vec![x.clone()]));
        let time = x.iter().map(|v| v * v).sum::<f64>() / m as f64;
        let freq: f64 = frame.voltage.iter().map(|b| b[0].norm_sqr()).sum();
        assert!((time - freq).abs() < 1e-10 * time);
        // spot-check against a direct O(M) bin sum
        let q = m / 7;
        let direct: Complex64 = x
            .iter()
            .enumerate()
            .map(|(k, &v)| v * Complex64::from_polar(1.0, -TWO_PI * (k * q) as f64 / m as f64))
            .sum::<Complex64>()
            / m as f64;
        assert!((direct - frame.voltage[q][0]).norm() < 1e-12);
    }
}

#[test]
fn reference_tone_set_is_on_the_grid() {
    let tones = ToneSet::new(12.92e9, 6.7e9);
    let freqs: Vec<f64> = tones.entries().iter().map(|e| e.1).collect();
    let expect = [6.7e9, 6.22e9, 12.92e9, 19.62e9, 19.14e9, 25.84e9, 38.76e9];
    assert_eq!(freqs.len(), expect.len());
    for (f, e) in freqs.iter().zip(expect) {
        assert!((f - e).abs() < 1.0, "{f} vs {e}");
        let q = f / 20e6;
        assert!((q - q.round()).abs() < 1e-9);
    }
}

#[test]
fn tone_extraction_and_power() {
    let (m, dt) = (12500, 4e-12);
    let a = 1e-3;
    let frame = dft(&trace(dt, vec![sine(m, dt, a, 12.92e9, 0.0), sine(m, dt, 0.5 * a, 12.92e9, 0.0)]));
    let fields = extract_tones(&frame, &ToneSet::new(12.92e9, 6.7e9)).unwrap();
    let pump = find_tone(&fields, ToneLabel::Pump).unwrap();
    assert!((pump.voltage[0].norm() - a).abs() < 1e-12);
    // P = V^2 / (2 * 50 Ohm) for an in-phase current V / 50
    assert!((pump.power[0] - a * a / 100.0).abs() < 1e-18);
    assert!((pump.power[1] - 0.25 * a * a / 100.0).abs() < 1e-18);
    let signal = find_tone(&fields, ToneLabel::Signal).unwrap();
    assert!(signal.power.iter().all(|p| p.abs() < 1e-30));
    assert!(signal.power_dbm().iter().all(|p| *p < -120.0));
}

#[test]
fn degenerate_tones_share_a_bin() {
    let tones = ToneSet::new(12.92e9, 6.46e9);
    assert!(tones.is_degenerate());
    let labels: Vec<ToneLabel> = tones.entries().iter().map(|e| e.0).collect();
    assert!(!labels.contains(&ToneLabel::Idler));
    assert!(!labels.contains(&ToneLabel::PumpPlusIdler));
    let frame = dft(&trace(4e-12, vec![vec![0.0; 12500]]));
    let fields = extract_tones(&frame, &tones).unwrap();
    assert!(find_tone(&fields, ToneLabel::Signal).unwrap().degenerate);
    assert!(!find_tone(&fields, ToneLabel::Pump).unwrap().degenerate);
}

#[test]
fn off_grid_tone_is_refused() {
    let frame = dft(&trace(4e-12, vec![vec![0.0; 12500]]));
    let err = extract_tones(&frame, &ToneSet::new(12.92e9, 6.71e9)).unwrap_err();
    assert!(matches!(err, Error::OffGrid { .. }), "{err}");
    let too_high = extract_tones(&frame, &ToneSet::new(100e9, 30e9));
    assert!(too_high.is_err());
}

#[test]
fn scattering_trivia() {
    let z0 = 50.0;
    let v = Complex64::new(0.3, -0.2);
    let (s11, s21) = s_parameters_from(v, v / z0, v, z0).unwrap();
    assert!(s11.norm() < 1e-15);
    assert!((s21.norm() - 1.0).abs() < 1e-15);
    assert_eq!(transducer_gain(Complex64::new(1.0, 0.0)), 0.0);
    assert!((transducer_gain(Complex64::new(0.0, 10.0)) - 20.0).abs() < 1e-12);
    let zero = Complex64::default();
    assert!(matches!(
        s_parameters_from(zero, zero, zero, z0),
        Err(Error::DegenerateDrive(_))
    ));
    // open end: full reflection
    let (s11, _) = s_parameters_from(v, zero, 2.0 * v, z0).unwrap();
    assert!((s11 - 1.0).norm() < 1e-15);
}

#[test]
fn synthetic_growth_is_recovered() {
    let g = 0.003;
    let n = 1501;
    let s: Vec<f64> = (0..n).map(|k| 1e-12 * (g * k as f64).cosh().powi(2)).collect();
    let i: Vec<f64> = (0..n).map(|k| 1e-12 * (g * k as f64).sinh().powi(2)).collect();
    let fit = fit_growth_powers(&s, &i, &FitCriteria::default()).unwrap();
    assert!((fit.g - g).abs() < 0.01 * g, "{}", fit.g);
    assert!(fit.rejected.is_none(), "{:?}", fit.rejected);
    assert!(fit.residual_db < 1e-3);
    assert!((fit.fitted_gain_db - fit.envelope_gain_db).abs() < 0.01);
    assert!((fit.signal_amplitude - 1e-12).abs() < 1e-14);
}

#[test]
fn oscillating_envelope_is_rejected() {
    let n = 1501;
    let s: Vec<f64> = (0..n)
        .map(|k| 1e-12 * (1.0 + 4.0 * (k as f64 / 400.0 * std::f64::consts::PI).sin().powi(2)))
        .collect();
    let i: Vec<f64> = s.iter().map(|p| 0.5 * p).collect();
    let fit = fit_growth_powers(&s, &i, &FitCriteria::default()).unwrap();
    assert!(fit.rejected.is_some());
    assert!(fit_growth_powers(&s[..5], &i[..5], &FitCriteria::default()).is_err());
}

#[test]
fn cosine_squared_envelope_period() {
    let y: Vec<f64> = (0..1501)
        .map(|n| (std::f64::consts::PI * n as f64 / 100.0).cos().powi(2) + 1e-3)
        .collect();
    let p = envelope_period(&y, 1, 0.5).unwrap();
    assert!((p - 100.0).abs() <= 1.0, "{p}");
    assert!(envelope_period(&y[..120], 1, 0.5).is_err());
}

#[test]
fn gain_profile_statistics() {
    let fs: Vec<f64> = (0..71).map(|k| 3e9 + k as f64 * 100e6).collect();
    let gain: Vec<f64> = fs
        .iter()
        .map(|&f| {
            let x: f64 = (f - 6.5e9) / 1e9;
            if (2.0 * f - 13e9).abs() < 1.0 { 40.0 } else { 20.0 - x * x }
        })
        .collect();
    let p = GainProfile::new(13e9, 1.8e-6, 1e-8, fs, gain).unwrap();
    assert!((p.peak_gain_db - 20.0).abs() < 0.05);
    assert!(p.degenerate.iter().filter(|&&d| d).count() == 1);
    let bw = p.bandwidth();
    assert!((bw - 2.0 * 3f64.sqrt() * 1e9).abs() < 0.11e9, "{bw:e}");

    let fs: Vec<f64> = (0..41).map(|k| 4e9 + k as f64 * 100e6).collect();
    let mut bump = vec![20.0; 41];
    bump[20] = 23.0;
    bump[30] = 18.5;
    let p = GainProfile::new(12.92e9, 1.8e-6, 1e-8, fs.clone(), bump).unwrap();
    assert!((p.ripple_db - 4.5).abs() < 1e-12, "{}", p.ripple_db);
    let smooth = GainProfile::new(12.92e9, 1.8e-6, 1e-8, fs, vec![20.0; 41]).unwrap();
    assert_eq!(smooth.ripple_db, 0.0);
}

proptest! {
    #[test]
    fn dft_is_linear(seed in 0u64..1000, a in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = 256;
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
        let f = dft(&trace(1e-12, vec![x, y, z]));
        for bin in &f.voltage {
            prop_assert!((a * bin[0] + bin[1] - bin[2]).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval_random(seed in 0u64..1000, m in 8usize..600) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let frame = dft(&trace(1e-12, vec![x.clone()]));
        let time = x.iter().map(|v| v * v).sum::<f64>() / m as f64;
        let freq: f64 = frame.voltage.iter().map(|b| b[0].norm_sqr()).sum();
        prop_assert!((time - freq).abs() <= 1e-10 * time);
    }
}
