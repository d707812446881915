use num_complex::Complex64;
use proptest::prelude::*;
use twpa_core::physics::{approx_dispersion, LineSpec, LoadingProfile};
use twpa_core::tmm::{
    bloch_dispersion, cascade, cell_transfer_matrix, default_dispersion_grid, frequency_grid,
    linear_s_parameters, phase_mismatch, side_lobe_spacing, LinearLine, TransferMatrix,
};
use twpa_core::units::TWO_PI;

const L_S0: f64 = 109e-12;
const CJ: f64 = 20e-15;

fn nominal(profile: LoadingProfile) -> LinearLine {
    LinearLine {
        l_s0: L_S0,
        cj: CJ,
        rj: None,
        profile,
    }
}

fn engineered() -> LinearLine {
    nominal(LoadingProfile::engineered_default())
}

fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
    (a - b).norm() <= rel * b.norm().max(1e-300)
}

/// 2x2 complex product written out independently of the library type.
fn mat(a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut r = [[Complex64::default(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

#[test]
fn printed_cell_equals_pi_section_product() {
    let w = TWO_PI * 6e9;
    let cn = 40e-15;
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::default();
    let shunt = [[one, zero], [i * w * cn / 2.0, one]];
    let z = 1.0 / (1.0 / (i * w * L_S0) + i * w * CJ);
    let series = [[one, z], [zero, one]];
    let oracle = mat(mat(shunt, series), shunt);
    let t = cell_transfer_matrix(w, L_S0, CJ, cn, None).unwrap();
    assert!(close(t.a, oracle[0][0], 1e-12));
    assert!(close(t.b, oracle[0][1], 1e-12));
    assert!(close(t.c, oracle[1][0], 1e-12));
    assert!(close(t.d, oracle[1][1], 1e-12));
}

#[test]
fn dc_cell_is_identity_and_pole_is_rejected() {
    assert_eq!(
        cell_transfer_matrix(0.0, L_S0, CJ, 40e-15, None).unwrap(),
        TransferMatrix::IDENTITY
    );
    let t = cell_transfer_matrix(1.0, L_S0, CJ, 40e-15, None).unwrap();
    assert!((t.a - 1.0).norm() < 1e-20 && t.b.norm() < 1e-9 && t.c.norm() < 1e-12);
    let pole = 1.0 / (L_S0 * CJ).sqrt();
    assert!(cell_transfer_matrix(pole, L_S0, CJ, 40e-15, None).is_err());
}

#[test]
fn cascade_matches_power() {
    let line = engineered();
    let w = TWO_PI * 7e9;
    let period = line.period_matrix(w).unwrap();
    assert_eq!(cascade(&[period]), period);
    let repeated = cascade(&vec![period; 75]);
    let power = line.line_matrix(w).unwrap();
    for (a, b) in [
        (repeated.a, power.a),
        (repeated.b, power.b),
        (repeated.c, power.c),
        (repeated.d, power.d),
    ] {
        assert!(close(a, b, 1e-8));
    }
}

#[test]
fn period_trace_marks_first_gap() {
    let line = engineered();
    assert!(line.period_matrix(TWO_PI * 12e9).unwrap().half_trace().re.abs() > 1.0);
    assert!(line.period_matrix(TWO_PI * 10e9).unwrap().half_trace().re.abs() < 1.0);
}

#[test]
fn engineered_band_structure() {
    let line = engineered();
    let d = bloch_dispersion(&line, &default_dispersion_grid()).unwrap();
    assert_eq!(d.stop_bands.len(), 2, "{:?}", d.stop_bands);
    let (g1, g2) = (d.stop_bands[0], d.stop_bands[1]);
    assert!(12.92e9 > g1.1 && 12.92e9 - g1.1 < 1e9);
    assert!(g2.0 < 25.84e9 && 25.84e9 < g2.1);
    assert!((g2.1 - g2.0) > 2.0 * (g1.1 - g1.0));
    assert!((d.k_m - TWO_PI / 20.0).abs() < 1e-15);
    assert!(d.gap_centers.len() >= 2);
    assert!(d.in_gap_at(d.gap_centers[0]) && d.in_gap_at(d.gap_centers[1]));
    // frozen values of this grid
    assert!((g1.0 - 11.117e9).abs() < 2e6 && (g1.1 - 12.320e9).abs() < 2e6, "{g1:?}");
    assert!((g2.0 - 19.288e9).abs() < 2e6 && (g2.1 - 29.845e9).abs() < 2e6, "{g2:?}");
}

#[test]
fn band_structure_consistency() {
    let line = engineered();
    let freqs = frequency_grid(0.1e9, 30e9, 10e6);
    let d = bloch_dispersion(&line, &freqs).unwrap();
    let m = line.profile.period() as f64;
    for (i, &f) in freqs.iter().enumerate() {
        let ht = line.period_matrix(TWO_PI * f).unwrap().half_trace();
        let km = d.k[i] * m;
        if d.in_gap[i] {
            assert!(d.k[i].im > 0.0);
            let r = (km.re / std::f64::consts::PI).round() * std::f64::consts::PI;
            assert!((km.re - r).abs() < 1e-12);
            assert!((km.re.cos() * km.im.cosh() - ht.re).abs() < 1e-10 * ht.re.abs().max(1.0));
        } else {
            assert!(d.k[i].im.abs() < 1e-6);
            assert!((km.cos() - ht).norm() < 1e-10);
        }
        if i > 0 {
            assert!(d.k[i].re >= d.k[i - 1].re - 1e-12);
        }
    }
}

#[test]
fn continuum_limit_and_low_frequency_expansion() {
    let uniform = nominal(LoadingProfile::uniform(40e-15, 1500).unwrap());
    let w0 = uniform.omega0();
    let wj = 1.0 / (L_S0 * CJ).sqrt();
    let d = bloch_dispersion(&uniform, &[1e6, 13e9]).unwrap();
    assert!((d.k[0].re - TWO_PI * 1e6 / w0).abs() < 1e-3 * d.k[0].re);
    assert!(d.stop_bands.is_empty());
    let approx = approx_dispersion(TWO_PI * 13e9, w0, wj);
    assert!((approx - d.k[1].re).abs() < 0.02 * d.k[1].re, "{approx} vs {}", d.k[1].re);
    let grid = bloch_dispersion(&uniform, &default_dispersion_grid()).unwrap();
    assert!(grid.stop_bands.is_empty());
}

#[test]
fn doubled_period_halves_first_gap() {
    let long = nominal(LoadingProfile::new(8.8e-15, 62.3e-15, 80e-15, 10, 10, 10, 1600).unwrap());
    let d = bloch_dispersion(&long, &frequency_grid(0.1e9, 15e9, 2e6)).unwrap();
    let first = d.stop_bands[0];
    let centre = 0.5 * (first.0 + first.1);
    assert!((centre - 6e9).abs() < 0.6e9, "{first:?}");
}

#[test]
fn coherence_lengths() {
    let line = engineered();
    let d = bloch_dispersion(&line, &default_dispersion_grid()).unwrap();
    let mc = phase_mismatch(&d, 12.92e9, &[6.7e9, 6.22e9]).unwrap();
    assert!((mc.xi[0] - 2186.0).abs() < 0.15 * 2186.0, "{}", mc.xi[0]);
    assert!((mc.dk[0] - mc.dk[1]).abs() < 1e-6);
    let pi = mc.p_plus_i[0];
    assert!(!pi.evanescent);
    assert!((pi.xi - 75.0).abs() < 0.15 * 75.0, "{}", pi.xi);
    // frozen values
    assert!((mc.xi[0] - 2401.0).abs() < 5.0, "{}", mc.xi[0]);
    assert!((pi.xi - 73.9).abs() < 0.2, "{}", pi.xi);
    let two_p_half = std::f64::consts::PI / (2.0 * d.re_k_at(12.92e9) - d.k_m);
    assert!((two_p_half - 104.5).abs() < 0.5, "{two_p_half}");
    assert!(mc.two_p.evanescent);
    assert!(!mc.pump_in_gap);
}

#[test]
fn two_zero_crossings_at_upper_pump() {
    let line = engineered();
    let d = bloch_dispersion(&line, &default_dispersion_grid()).unwrap();
    let fs = frequency_grid(0.2e9, 12.72e9, 20e6);
    let mc = phase_mismatch(&d, 12.92e9, &fs).unwrap();
    let crossings = mc
        .dk
        .windows(2)
        .zip(mc.flagged.windows(2))
        .filter(|(w, f)| !f[0] && !f[1] && w[0].signum() != w[1].signum())
        .count();
    // one crossing on each side of fp/2
    assert_eq!(crossings, 2);
}

#[test]
fn s_parameters_and_side_lobes() {
    let line = engineered();
    let freqs = frequency_grid(3e9, 9e9, 2e6);
    let sp = linear_s_parameters(&line, &freqs, 50.0).unwrap();
    for (r, t) in sp.s11.iter().zip(&sp.s21) {
        assert!((r.norm_sqr() + t.norm_sqr() - 1.0).abs() < 1e-9);
    }
    // Bloch-impedance side-lobes grow towards the first gap: about -19 dB at
    // the bottom of the signal band, -8 dB at its top
    let db = sp.s11_db();
    let band_max = |lo: f64, hi: f64| {
        freqs
            .iter()
            .zip(&db)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .map(|(_, d)| *d)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let low = band_max(3e9, 3.5e9);
    let high = band_max(8.5e9, 9e9 + 1.0);
    assert!((low - (-19.0)).abs() < 2.0, "{low}");
    assert!((high - (-8.07)).abs() < 0.1, "{high}");
    let spacing = side_lobe_spacing(&sp, (4e9, 8e9)).unwrap();
    assert!((spacing - 160e6).abs() < 40e6, "{spacing:e}");
    let near_gap = side_lobe_spacing(
        &linear_s_parameters(&line, &frequency_grid(9.5e9, 11e9, 1e6), 50.0).unwrap(),
        (9.5e9, 11e9),
    )
    .unwrap();
    assert!(near_gap < spacing, "{near_gap:e} vs {spacing:e}");
}

#[test]
fn matched_uniform_line_has_no_side_lobes() {
    let z0 = 50.0;
    let c = L_S0 / (z0 * z0);
    let line = LinearLine {
        l_s0: L_S0,
        cj: 0.0,
        rj: None,
        profile: LoadingProfile::uniform(c, 1500).unwrap(),
    };
    let sp = linear_s_parameters(&line, &frequency_grid(0.1e9, 0.5e9, 10e6), z0).unwrap();
    // residual reflection comes only from cell discreteness, (w/w0)^2/4 at most
    let w0 = line.omega0();
    for (f, r) in sp.freqs.iter().zip(&sp.s11) {
        let x = TWO_PI * f / w0;
        assert!(r.norm() < 0.3 * x * x + 1e-12, "{f:e}: {}", r.norm());
    }
}

#[test]
fn stop_band_transmission_is_bounded_by_evanescent_decay() {
    let line = engineered();
    let f = 11.7e9;
    let d = bloch_dispersion(&line, &[f]).unwrap();
    let sp = linear_s_parameters(&line, &[f], 50.0).unwrap();
    let s21 = sp.s21[0].norm();
    let bound = (-(1500.0) * d.k[0].im).exp();
    assert!(20.0 * s21.log10() < -40.0);
    assert!(s21 <= 2.0 * bound, "{s21:e} vs {bound:e}");
}

#[test]
fn lossy_model_dissipates() {
    let spec = LineSpec::reference_design();
    let lossy = LinearLine::lossy(&spec);
    let freqs = frequency_grid(1e9, 11e9, 100e6);
    let sp = linear_s_parameters(&lossy, &freqs, 50.0).unwrap();
    assert!(!sp.lossless);
    for (r, t) in sp.s11.iter().zip(&sp.s21) {
        assert!(r.norm_sqr() + t.norm_sqr() < 1.0);
    }
}

proptest! {
    #[test]
    fn determinant_is_one(f in 0.01f64..60.0, cn in 1.0f64..100.0, lossy in any::<bool>()) {
        let w = TWO_PI * f * 1e9;
        let rj = lossy.then_some(10.5e3);
        if let Ok(t) = cell_transfer_matrix(w, L_S0, CJ, cn * 1e-15, rj) {
            prop_assert!((t.det() - 1.0).norm() < 1e-10);
        }
    }

    #[test]
    fn cascade_determinant_is_one(f in 0.1f64..30.0) {
        let line = engineered();
        let w = TWO_PI * f * 1e9;
        let t = line.period_matrix(w).unwrap();
        prop_assert!((t.det() - 1.0).norm() < 1e-10);
    }

    #[test]
    fn lossless_unitarity(f in 0.1f64..11.0) {
        let sp = linear_s_parameters(&engineered(), &[f * 1e9], 50.0).unwrap();
        prop_assert!((sp.s11[0].norm_sqr() + sp.s21[0].norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mismatch_mirror_symmetry(q in 1u32..300) {
        let line = engineered();
        let d = bloch_dispersion(&line, &frequency_grid(0.1e9, 30e9, 20e6)).unwrap();
        let fs = q as f64 * 20e6;
        let fp = 12.92e9;
        prop_assume!(fs < fp);
        let mc = phase_mismatch(&d, fp, &[fs, fp - fs]).unwrap();
        prop_assert!((mc.dk[0] - mc.dk[1]).abs() < 1e-12);
    }
}
