//! Closed-form rf-SQUID device physics: bias point, small-signal inductance,
//! nonlinearity coefficients, derived line scales and the capacitance profile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::PHI0;

/// Parameters of one rf-SQUID (linear inductor shunting an RCSJ junction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquidParams {
    /// Loop inductance (H).
    pub l: f64,
    /// Junction critical current (A).
    pub ic: f64,
    /// Junction capacitance (F).
    pub cj: f64,
    /// Subgap resistance (Ohm); `None` is lossless.
    pub rj: Option<f64>,
}

impl SquidParams {
    /// Builds the SQUID from the `Ic*RJ` product as it is usually quoted. Pass
    /// `None` for a lossless junction.
    pub fn new(l: f64, ic: f64, cj: f64, ic_rj: Option<f64>) -> Result<Self> {
        if !(l > 0.0 && ic > 0.0 && cj > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "L, Ic and CJ must be positive (L={l:e}, Ic={ic:e}, CJ={cj:e})"
            )));
        }
        let rj = match ic_rj {
            Some(v) if v > 0.0 => Some(v / ic),
            Some(v) if v.is_infinite() => None,
            Some(v) => {
                return Err(Error::InvalidParameter(format!(
                    "Ic*RJ product must be positive, got {v:e}"
                )))
            }
            None => None,
        };
        let squid = Self { l, ic, cj, rj };
        let beta_l = squid.screening();
        if beta_l >= 1.0 {
            return Err(Error::Hysteretic(beta_l));
        }
        Ok(squid)
    }

    pub fn screening(&self) -> f64 {
        screening_parameter(self.l, self.ic)
    }
}

/// `betaL = L*Ic/phi0`.
pub fn screening_parameter(l: f64, ic: f64) -> f64 {
    l * ic / PHI0
}

/// Solves `phi + betaL*sin(phi) = phi_e` for the dc junction phase.
///
/// The left side is strictly increasing for `0 <= betaL < 1`, so the root is
/// unique and lies in `[phi_e - betaL, phi_e + betaL]`. Newton steps are taken
/// while they stay inside the shrinking bracket, bisection otherwise.
pub fn solve_dc_phase(phi_e: f64, beta_l: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&beta_l));
    if beta_l == 0.0 {
        return phi_e;
    }
    let f = |x: f64| x + beta_l * x.sin() - phi_e;
    let mut lo = phi_e - beta_l;
    let mut hi = phi_e + beta_l;
    let mut x = phi_e;
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = fx / (1.0 + beta_l * x.cos());
        let mut next = x - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-14 || hi - lo < 1e-14 {
            return next;
        }
        x = next;
    }
    x
}

/// `L_S0 = L / (1 + betaL*cos(phi_dc))`.
pub fn small_signal_inductance(l: f64, beta_l: f64, phi_dc: f64) -> Result<f64> {
    let denom = 1.0 + beta_l * phi_dc.cos();
    if denom <= 0.0 {
        return Err(Error::InvalidBias(denom));
    }
    Ok(l / denom)
}

/// Non-centrosymmetric (`beta`) and Kerr (`gamma`) coefficients of the biased SQUID.
pub fn nonlinearity_coeffs(beta_l: f64, phi_dc: f64) -> Result<(f64, f64)> {
    let (s, c) = phi_dc.sin_cos();
    let denom = 1.0 + beta_l * c;
    if denom <= 0.0 {
        return Err(Error::InvalidBias(denom));
    }
    Ok((0.5 * beta_l * s / denom, beta_l / 6.0 * c / denom))
}

/// Operating point of every SQUID in the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    /// dc bias current (A).
    pub idc: f64,
    /// External flux phase `L*Idc/phi0` (rad).
    pub phi_e: f64,
    /// dc junction phase (rad).
    pub phi_dc: f64,
    /// Small-signal SQUID inductance (H).
    pub l_s0: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl BiasPoint {
    /// Bias induced by a dc current flowing through the SQUID chain.
    pub fn from_current(squid: &SquidParams, idc: f64) -> Result<Self> {
        Self::from_flux_phase(squid, squid.l * idc / PHI0, idc)
    }

    fn from_flux_phase(squid: &SquidParams, phi_e: f64, idc: f64) -> Result<Self> {
        let beta_l = squid.screening();
        let phi_dc = solve_dc_phase(phi_e, beta_l);
        let l_s0 = small_signal_inductance(squid.l, beta_l, phi_dc)?;
        let (beta, gamma) = nonlinearity_coeffs(beta_l, phi_dc)?;
        Ok(Self {
            idc,
            phi_e,
            phi_dc,
            l_s0,
            beta,
            gamma,
        })
    }
}

/// Periodic three-level ground-capacitance profile.
///
/// One period is `[C01 x kappa, C02 x mu, C01 x kappa, C03 x nu]`; cell 1 starts
/// the first `C01` segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadingProfile {
    pub c01: f64,
    pub c02: f64,
    pub c03: f64,
    pub kappa: usize,
    pub mu: usize,
    pub nu: usize,
    /// Total number of cells.
    pub n_cells: usize,
}

impl LoadingProfile {
    pub fn new(
        c01: f64,
        c02: f64,
        c03: f64,
        kappa: usize,
        mu: usize,
        nu: usize,
        n_cells: usize,
    ) -> Result<Self> {
        let profile = Self {
            c01,
            c02,
            c03,
            kappa,
            mu,
            nu,
            n_cells,
        };
        let m = profile.period();
        if m == 0 {
            return Err(Error::Profile("period 2*kappa + mu + nu is zero".into()));
        }
        if n_cells == 0 || n_cells % m != 0 {
            return Err(Error::Profile(format!(
                "N = {n_cells} is not a positive multiple of the period m = {m}"
            )));
        }
        let used = [(c01, kappa > 0), (c02, mu > 0), (c03, nu > 0)];
        if used.iter().any(|&(c, on)| on && !(c > 0.0)) {
            return Err(Error::Profile("capacitances must be positive".into()));
        }
        Ok(profile)
    }

    /// Constant capacitance `c` on every cell (period 1).
    pub fn uniform(c: f64, n_cells: usize) -> Result<Self> {
        Self::new(c, c, c, 0, 1, 0, n_cells)
    }

    /// The loading used throughout: 8.8/62.3/80 fF with kappa = mu = nu = 5.
    pub fn engineered_default() -> Self {
        Self::new(8.8e-15, 62.3e-15, 80e-15, 5, 5, 5, 1500).expect("valid default profile")
    }

    /// `m = 2*kappa + mu + nu`.
    pub fn period(&self) -> usize {
        2 * self.kappa + self.mu + self.nu
    }

    /// One loading period as `(capacitance, run length)` segments.
    pub fn segments(&self) -> [(f64, usize); 4] {
        [
            (self.c01, self.kappa),
            (self.c02, self.mu),
            (self.c01, self.kappa),
            (self.c03, self.nu),
        ]
    }

    /// Capacitance of cell `n` (0-based).
    pub fn capacitance(&self, n: usize) -> f64 {
        let mut r = n % self.period();
        for (c, len) in self.segments() {
            if r < len {
                return c;
            }
            r -= len;
        }
        unreachable!("offset inside period")
    }

    /// `C_1 .. C_N`.
    pub fn sequence(&self) -> Vec<f64> {
        (0..self.n_cells).map(|n| self.capacitance(n)).collect()
    }

    /// Closed-form average `(2*kappa*C01 + mu*C02 + nu*C03) / m`.
    pub fn mean(&self) -> f64 {
        let k = self.kappa as f64;
        (2.0 * k * self.c01 + self.mu as f64 * self.c02 + self.nu as f64 * self.c03)
            / self.period() as f64
    }

    pub fn is_uniform(&self) -> bool {
        self.segments()
            .iter()
            .filter(|(_, len)| *len > 0)
            .all(|(c, _)| *c == self.mean())
    }
}

/// Characteristic scales of the equivalent uniform line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales {
    /// Mean ground capacitance (F).
    pub c_mean: f64,
    /// `(L_S0*C_mean)^-1/2` (rad/s).
    pub omega0: f64,
    /// Plasma frequency `(L_S0*CJ)^-1/2` (rad/s).
    pub omega_j: f64,
    /// Cutoff `2 (L_S0 (C_mean + 4 CJ))^-1/2` (rad/s).
    pub omega_c: f64,
    /// `sqrt(L_S0/C_mean)` (Ohm).
    pub z_mean: f64,
}

impl DerivedScales {
    pub fn compute(l_s0: f64, cj: f64, c_mean: f64) -> Self {
        Self {
            c_mean,
            omega0: (l_s0 * c_mean).sqrt().recip(),
            omega_j: (l_s0 * cj).sqrt().recip(),
            omega_c: 2.0 / (l_s0 * (c_mean + 4.0 * cj)).sqrt(),
            z_mean: (l_s0 / c_mean).sqrt(),
        }
    }

    /// Cutoff from the alternative form `(omega0^-2/4 + omegaJ^-2)^-1/2`.
    pub fn omega_c_from_scales(&self) -> f64 {
        (0.25 / self.omega0.powi(2) + 1.0 / self.omega_j.powi(2))
            .sqrt()
            .recip()
    }
}

/// Full electrical description of the biased ladder and its terminations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub squid: SquidParams,
    pub bias: BiasPoint,
    pub profile: LoadingProfile,
    /// Reference impedance (Ohm).
    pub z0: f64,
    /// Source resistance at node 1; `None` leaves the input open.
    pub rs: Option<f64>,
    /// Termination at node N+1; `None` leaves the output open.
    pub rt: Option<f64>,
}

impl LineSpec {
    pub fn new(
        squid: SquidParams,
        idc: f64,
        profile: LoadingProfile,
        z0: f64,
        rs: Option<f64>,
        rt: Option<f64>,
    ) -> Result<Self> {
        let beta_l = squid.screening();
        if beta_l >= 1.0 {
            return Err(Error::Hysteretic(beta_l));
        }
        if !(z0 > 0.0) || rs.is_some_and(|r| !(r > 0.0)) || rt.is_some_and(|r| !(r > 0.0)) {
            return Err(Error::InvalidParameter(
                "Z0, Rs and Rt must be positive".into(),
            ));
        }
        let bias = BiasPoint::from_current(&squid, idc)?;
        Ok(Self {
            squid,
            bias,
            profile,
            z0,
            rs,
            rt,
        })
    }

    /// Reference amplifier: L = 84 pH, Ic = 1.57 uA, CJ = 20 fF,
    /// Ic*RJ = 16.5 mV, Idc = 9.8 uA, 50 Ohm terminations, engineered profile.
    pub fn reference_design() -> Self {
        let squid = SquidParams::new(84e-12, 1.57e-6, 20e-15, Some(16.5e-3)).expect("valid squid");
        Self::new(
            squid,
            9.8e-6,
            LoadingProfile::engineered_default(),
            50.0,
            Some(50.0),
            Some(50.0),
        )
        .expect("valid line")
    }

    pub fn with_profile(mut self, profile: LoadingProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn beta_l(&self) -> f64 {
        self.squid.screening()
    }

    pub fn n_cells(&self) -> usize {
        self.profile.n_cells
    }

    pub fn derived(&self) -> DerivedScales {
        DerivedScales::compute(self.bias.l_s0, self.squid.cj, self.profile.mean())
    }
}

/// Low-frequency expansion `k = (w/w0)(1 + w^2/(2 wJ^2) + w^2/(24 w0^2))` in rad/cell.
/// Valid for `omega` well below both `omega0` and `omega_j`.
pub fn approx_dispersion(omega: f64, omega0: f64, omega_j: f64) -> f64 {
    let w2 = omega * omega;
    omega / omega0 * (1.0 + w2 / (2.0 * omega_j * omega_j) + w2 / (24.0 * omega0 * omega0))
}

/// Attenuation from the junction subgap resistance along `n_cells` cells, in dB.
pub fn subgap_attenuation_db(n_cells: usize, omega: f64, l_s0: f64, z0: f64, rj: Option<f64>) -> f64 {
    match rj {
        Some(rj) if rj.is_finite() => {
            10.0 * std::f64::consts::E.log10() * n_cells as f64 * omega * omega * l_s0 * l_s0
                / (z0 * rj)
        }
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::TWO_PI;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn screening_examples() {
        assert!((screening_parameter(84e-12, 1.57e-6) - 0.4007).abs() < 5e-4);
        assert_eq!(screening_parameter(84e-12, 0.0), 0.0);
        let ic = 2.3e-6;
        assert!((screening_parameter(0.5 * PHI0 / ic, ic) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn hysteretic_squid_rejected() {
        let ic = 1.2 * PHI0 / 84e-12;
        assert!(matches!(
            SquidParams::new(84e-12, ic, 20e-15, None),
            Err(Error::Hysteretic(_))
        ));
        assert!(SquidParams::new(0.0, 1e-6, 20e-15, None).is_err());
    }

    /// Plain bisection, kept independent of the Newton path.
    fn bisect_phase(phi_e: f64, beta_l: f64) -> f64 {
        let (mut lo, mut hi) = (phi_e - 1.0, phi_e + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + beta_l * mid.sin() - phi_e < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn dc_phase_examples() {
        assert_eq!(solve_dc_phase(0.0, 0.4), 0.0);
        assert!((solve_dc_phase(std::f64::consts::PI, 0.73) - std::f64::consts::PI).abs() < 1e-12);
        let phi_e = 84e-12 * 9.8e-6 / PHI0;
        assert!((phi_e - 2.501).abs() < 1e-3);
        let beta_l = screening_parameter(84e-12, 1.57e-6);
        let phi_dc = solve_dc_phase(phi_e, beta_l);
        assert!((phi_dc - bisect_phase(phi_e, beta_l)).abs() < 1e-12);
        // the quoted 2.174 is a rounded value; the root itself is 2.17053
        assert!((phi_dc - 2.17053).abs() < 1e-4, "{phi_dc}");
        assert!((phi_dc - 2.174).abs() < 5e-3);
    }

    #[test]
    fn inductance_examples() {
        let beta_l = screening_parameter(84e-12, 1.57e-6);
        let l_s0 = small_signal_inductance(84e-12, beta_l, 2.174).unwrap();
        assert!(close(l_s0, 109e-12, 0.01), "{l_s0}");
        let half_pi = std::f64::consts::FRAC_PI_2;
        assert!(close(small_signal_inductance(84e-12, 0.4, half_pi).unwrap(), 84e-12, 1e-14));
        assert_eq!(small_signal_inductance(84e-12, 0.0, 1.3).unwrap(), 84e-12);
        // cos(pi) = -1 with betaL -> 1 leaves no positive denominator
        assert!(small_signal_inductance(1e-12, 1.0, std::f64::consts::PI).is_err());
    }

    #[test]
    fn nonlinearity_examples() {
        let (b, g) = nonlinearity_coeffs(0.4, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((b - 0.2).abs() < 1e-15 && g.abs() < 1e-16);
        let (b, g) = nonlinearity_coeffs(0.4, 0.0).unwrap();
        assert_eq!(b, 0.0);
        assert!((g - 0.4 / (6.0 * 1.4)).abs() < 1e-15);
        let (b, g) = nonlinearity_coeffs(0.4007, 2.174).unwrap();
        assert!((b - 0.214).abs() < 2e-3, "{b}");
        assert!((g - (-0.049)).abs() < 2e-3, "{g}");
        assert!(g.abs() < 0.08);
    }

    #[test]
    fn reference_chain_and_scales() {
        let line = LineSpec::reference_design();
        assert!(close(line.bias.l_s0, 109e-12, 0.01));
        let d = line.derived();
        assert!(close(d.c_mean, 40e-15, 1e-3));
        assert!((d.z_mean - 52.0).abs() < 1.0);
        assert!(close(d.omega_c, d.omega_c_from_scales(), 1e-12));
        assert!(close(d.z_mean * d.z_mean * d.c_mean, line.bias.l_s0, 1e-12));
        // direct arithmetic at the nominal values L_S0 = 109 pH, C = 40 fF, CJ = 20 fF
        let nominal = DerivedScales::compute(109e-12, 20e-15, 40e-15);
        assert!((nominal.omega0 / TWO_PI / 1e9 - 76.2).abs() < 0.1);
        assert!((nominal.omega_j / TWO_PI / 1e9 - 107.8).abs() < 0.1);
        assert!((nominal.z_mean - 52.2).abs() < 0.05);
    }

    #[test]
    fn profile_layout() {
        let p = LoadingProfile::engineered_default();
        assert_eq!(p.period(), 20);
        let seq = p.sequence();
        assert_eq!(seq.len(), 1500);
        assert!(seq[..5].iter().all(|&c| c == 8.8e-15));
        assert!(seq[5..10].iter().all(|&c| c == 62.3e-15));
        assert!(seq[10..15].iter().all(|&c| c == 8.8e-15));
        assert!(seq[15..20].iter().all(|&c| c == 80e-15));
        assert_eq!(seq[20], 8.8e-15);
        assert!(LoadingProfile::new(1e-15, 1e-15, 1e-15, 5, 5, 5, 1510).is_err());
        assert!(LoadingProfile::uniform(40e-15, 7).unwrap().is_uniform());
        assert!(!p.is_uniform());
    }

    #[test]
    fn attenuation_examples() {
        let rj = 16.5e-3 / 1.57e-6;
        let w = TWO_PI * 13e9;
        let a = subgap_attenuation_db(1500, w, 109e-12, 50.0, Some(rj));
        assert!((a - 0.98).abs() < 0.02, "{a}");
        assert_eq!(subgap_attenuation_db(1500, 0.0, 109e-12, 50.0, Some(rj)), 0.0);
        assert_eq!(subgap_attenuation_db(1500, w, 109e-12, 50.0, None), 0.0);
        let a2 = subgap_attenuation_db(3000, w, 109e-12, 50.0, Some(rj));
        assert!((a2 - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn approx_dispersion_limits() {
        let (w0, wj) = (4.8e11, 6.8e11);
        let w = 1e6;
        assert!(close(approx_dispersion(w, w0, wj), w / w0, 1e-9));
        for i in 1..100 {
            let w = i as f64 * 1e9;
            assert!(approx_dispersion(w, w0, wj) >= w / w0);
        }
    }
}
