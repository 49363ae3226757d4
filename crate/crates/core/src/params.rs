//! Physical parameters, unit conversions, coupling strengths and the
//! validity diagnostics of the single-mode description.
//!
//! Rates are angular (rad/s); the free spectral range is in Hz.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Default factor used to decide a "much smaller than" comparison.
pub const DEFAULT_STRICTNESS: f64 = 10.0;

/// Angular rate from a value quoted as `rate / 2π` in Hz.
pub fn angular(hz_over_2pi: f64) -> f64 {
    TAU * hz_over_2pi
}

/// Inverse of [`angular`].
pub fn hz_over_2pi(angular_rate: f64) -> f64 {
    angular_rate / TAU
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    /// Emitter chirally coupled to a travelling-wave ring.
    #[default]
    Ring,
    /// Emitter at an anti-node of a standing-wave Fabry-Pérot resonator.
    FabryPerot,
}

impl Geometry {
    /// `c` in `g² = c β γ ν_FSR`.
    pub fn coupling_factor(self) -> f64 {
        match self {
            Geometry::Ring => 2.0,
            Geometry::FabryPerot => 4.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Emitters farther apart than λ/2π: free-space emission adds incoherently.
    #[default]
    TimedDicke,
    /// Emitters within λ/2π: a superatom with decay rate `N γ` in all directions.
    Dicke,
}

/// An ensemble of two-level emitters.
///
/// Either all emitters share `beta`, or a per-emitter list is stored and
/// `beta` is its arithmetic mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnsemble", into = "RawEnsemble")]
pub struct EmitterEnsemble {
    n_atoms: usize,
    beta_per_atom: Option<Vec<f64>>,
    beta_mean: f64,
    gamma: f64,
    regime: Regime,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsemble {
    n_atoms: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta_per_atom: Option<Vec<f64>>,
    beta_mean: f64,
    gamma: f64,
    #[serde(default)]
    regime: Regime,
}

impl TryFrom<RawEnsemble> for EmitterEnsemble {
    type Error = Error;

    fn try_from(raw: RawEnsemble) -> Result<Self> {
        let ens = match raw.beta_per_atom {
            Some(list) => {
                let ens = EmitterEnsemble::from_betas(list, raw.gamma, raw.regime)?;
                if ens.n_atoms != raw.n_atoms {
                    return Err(domain("n_atoms does not match the per-atom beta list"));
                }
                if (ens.beta_mean - raw.beta_mean).abs() > 1e-12 * raw.beta_mean.abs().max(1e-300) {
                    return Err(domain("beta_mean is not the mean of beta_per_atom"));
                }
                // keep the stored mean bit-exact
                EmitterEnsemble {
                    beta_mean: raw.beta_mean,
                    ..ens
                }
            }
            None => EmitterEnsemble::uniform(raw.n_atoms, raw.beta_mean, raw.gamma, raw.regime)?,
        };
        Ok(ens)
    }
}

impl From<EmitterEnsemble> for RawEnsemble {
    fn from(e: EmitterEnsemble) -> Self {
        RawEnsemble {
            n_atoms: e.n_atoms,
            beta_per_atom: e.beta_per_atom,
            beta_mean: e.beta_mean,
            gamma: e.gamma,
            regime: e.regime,
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(domain(format!("beta = {beta} outside [0, 1]")));
    }
    Ok(())
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(domain(format!("{name} = {x} must be positive and finite")));
    }
    Ok(())
}

impl EmitterEnsemble {
    pub fn uniform(n_atoms: usize, beta: f64, gamma: f64, regime: Regime) -> Result<Self> {
        check_beta(beta)?;
        check_positive("gamma", gamma)?;
        Ok(Self {
            n_atoms,
            beta_per_atom: None,
            beta_mean: beta,
            gamma,
            regime,
        })
    }

    pub fn from_betas(betas: Vec<f64>, gamma: f64, regime: Regime) -> Result<Self> {
        for &b in &betas {
            check_beta(b)?;
        }
        check_positive("gamma", gamma)?;
        let n = betas.len();
        let mean = if n == 0 {
            0.0
        } else {
            betas.iter().sum::<f64>() / n as f64
        };
        Ok(Self {
            n_atoms: n,
            beta_per_atom: Some(betas),
            beta_mean: mean,
            gamma,
            regime,
        })
    }

    /// Uniform ensemble with a prescribed `βN` and a (rounded) integer atom
    /// number close to `βN / beta_hint`; `β` is adjusted so `βN` is exact.
    pub fn from_beta_n(beta_n: f64, beta_hint: f64, gamma: f64, regime: Regime) -> Result<Self> {
        check_beta(beta_hint)?;
        if !(beta_n >= 0.0 && beta_n.is_finite()) {
            return Err(domain(format!("beta*N = {beta_n} must be non-negative")));
        }
        if beta_n == 0.0 {
            return Self::uniform(0, beta_hint, gamma, regime);
        }
        if beta_hint == 0.0 {
            return Err(domain("beta = 0 cannot produce a non-zero beta*N"));
        }
        let n = (beta_n / beta_hint).round().max(1.0) as usize;
        Self::uniform(n, beta_n / n as f64, gamma, regime)
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn beta(&self) -> f64 {
        self.beta_mean
    }

    pub fn betas(&self) -> Option<&[f64]> {
        self.beta_per_atom.as_deref()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn beta_n_product(&self) -> f64 {
        self.beta_mean * self.n_atoms as f64
    }

    /// Single-emitter free-space loss rate `(1 − β) γ`.
    pub fn gamma_l(&self) -> f64 {
        (1.0 - self.beta_mean) * self.gamma
    }

    /// Decay rate entering the emitter response: `γ`, or `N γ` for a Dicke superatom.
    pub fn gamma_collective(&self) -> f64 {
        match self.regime {
            Regime::TimedDicke => self.gamma,
            Regime::Dicke => self.n_atoms as f64 * self.gamma,
        }
    }

    /// Free-space loss rate of the collective excitation.
    pub fn gamma_l_collective(&self) -> f64 {
        (1.0 - self.beta_mean) * self.gamma_collective()
    }

    pub fn with_regime(mut self, regime: Regime) -> Self {
        self.regime = regime;
        self
    }
}

/// Ring or Fabry-Pérot resonator described by its roundtrip amplitude
/// transmission `t_rt` and the input-mirror amplitude reflection `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawResonator", into = "RawResonator")]
pub struct ResonatorConfig {
    nu_fsr: f64,
    t_rt: f64,
    r: f64,
    geometry: Geometry,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResonator {
    nu_fsr: f64,
    t_rt: f64,
    r: f64,
    geometry: Geometry,
}

impl TryFrom<RawResonator> for ResonatorConfig {
    type Error = Error;
    fn try_from(raw: RawResonator) -> Result<Self> {
        ResonatorConfig::new(raw.nu_fsr, raw.t_rt, raw.r, raw.geometry)
    }
}

impl From<ResonatorConfig> for RawResonator {
    fn from(c: ResonatorConfig) -> Self {
        RawResonator {
            nu_fsr: c.nu_fsr,
            t_rt: c.t_rt,
            r: c.r,
            geometry: c.geometry,
        }
    }
}

impl ResonatorConfig {
    pub fn new(nu_fsr: f64, t_rt: f64, r: f64, geometry: Geometry) -> Result<Self> {
        check_positive("nu_fsr", nu_fsr)?;
        if !(0.0..=1.0).contains(&t_rt) {
            return Err(domain(format!("t_rt = {t_rt} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(domain(format!("r = {r} outside [0, 1]")));
        }
        Ok(Self {
            nu_fsr,
            t_rt,
            r,
            geometry,
        })
    }

    /// Build from the intrinsic loss rate `κ_0` and the in-coupling rate `κ_ext`.
    pub fn from_rates(nu_fsr: f64, kappa0: f64, kappa_ext: f64, geometry: Geometry) -> Result<Self> {
        check_positive("nu_fsr", nu_fsr)?;
        let t_rt = amplitude_from_kappa(kappa0, nu_fsr)?;
        let r = amplitude_from_kappa(kappa_ext, nu_fsr)?;
        Self::new(nu_fsr, t_rt, r, geometry)
    }

    pub fn nu_fsr(&self) -> f64 {
        self.nu_fsr
    }

    pub fn t_rt(&self) -> f64 {
        self.t_rt
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    /// Mirror amplitude transmission `√(1 − r²)`.
    pub fn t(&self) -> f64 {
        (1.0 - self.r * self.r).sqrt()
    }

    pub fn kappa0(&self) -> f64 {
        kappa_from_amplitude(self.t_rt, self.nu_fsr)
    }

    pub fn kappa_ext(&self) -> f64 {
        kappa_from_amplitude(self.r, self.nu_fsr)
    }

    pub fn with_r(self, r: f64) -> Result<Self> {
        Self::new(self.nu_fsr, self.t_rt, r, self.geometry)
    }

    pub fn with_t_rt(self, t_rt: f64) -> Result<Self> {
        Self::new(self.nu_fsr, t_rt, self.r, self.geometry)
    }
}

/// `κ = ν_FSR (1 − a²) / 2` for a roundtrip amplitude factor `a`.
pub fn kappa_from_amplitude(a: f64, nu_fsr: f64) -> f64 {
    nu_fsr * (1.0 - a * a) / 2.0
}

/// `a = √(1 − 2κ/ν_FSR)`, defined for `κ/ν_FSR ∈ [0, 1/2]`.
pub fn amplitude_from_kappa(kappa: f64, nu_fsr: f64) -> Result<f64> {
    let x = kappa / nu_fsr;
    if !(0.0..=0.5).contains(&x) {
        return Err(domain(format!(
            "kappa/nu_fsr = {x} outside [0, 1/2]; no roundtrip amplitude corresponds"
        )));
    }
    Ok((1.0 - 2.0 * x).sqrt())
}

/// Probe detunings: `Δ_a = ω_a − ω` and the cavity-atom detuning `Δ_ca = ω_c − ω_a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetuningPoint {
    pub delta_a: f64,
    pub delta_ca: f64,
}

impl DetuningPoint {
    pub fn new(delta_a: f64, delta_ca: f64) -> Self {
        Self { delta_a, delta_ca }
    }

    /// Probe-cavity detuning `Δ_c = Δ_a + Δ_ca`.
    pub fn delta_c(&self) -> f64 {
        self.delta_a + self.delta_ca
    }
}

/// Single-emitter vacuum Rabi frequency for a given β-factor.
pub fn g_from_beta(beta: f64, gamma: f64, nu_fsr: f64, geometry: Geometry) -> Result<f64> {
    check_beta(beta)?;
    check_positive("gamma", gamma)?;
    check_positive("nu_fsr", nu_fsr)?;
    Ok((geometry.coupling_factor() * beta * gamma * nu_fsr).sqrt())
}

pub fn beta_from_g(g: f64, gamma: f64, nu_fsr: f64, geometry: Geometry) -> Result<f64> {
    if !(g >= 0.0 && g.is_finite()) {
        return Err(domain(format!("g = {g} must be non-negative")));
    }
    check_positive("gamma", gamma)?;
    check_positive("nu_fsr", nu_fsr)?;
    let beta = g * g / (geometry.coupling_factor() * gamma * nu_fsr);
    if beta > 1.0 {
        return Err(domain(format!(
            "g = {g} exceeds the largest coupling for this geometry (beta = {beta})"
        )));
    }
    Ok(beta)
}

/// Largest single-emitter coupling for a resonator of given length, `2√(γ ν_FSR)`.
pub fn g_max(gamma: f64, nu_fsr: f64) -> Result<f64> {
    check_positive("gamma", gamma)?;
    check_positive("nu_fsr", nu_fsr)?;
    Ok(2.0 * (gamma * nu_fsr).sqrt())
}

/// Collective coupling: the root-sum-square of the single-emitter couplings.
pub fn collective_g(ensemble: &EmitterEnsemble, resonator: &ResonatorConfig) -> f64 {
    let c = resonator.geometry().coupling_factor() * ensemble.gamma() * resonator.nu_fsr();
    let sum_beta = match ensemble.betas() {
        Some(list) => list.iter().sum::<f64>(),
        None => ensemble.beta_n_product(),
    };
    (c * sum_beta).sqrt()
}

/// `C = g² / (2 κ_0 γ_l)`.
pub fn cooperativity(g: f64, kappa0: f64, gamma_l: f64) -> Result<f64> {
    if kappa0 <= 0.0 || gamma_l <= 0.0 {
        return Err(Error::LosslessLimit(format!(
            "cooperativity diverges for kappa0 = {kappa0}, gamma_l = {gamma_l}"
        )));
    }
    Ok(g * g / (2.0 * kappa0 * gamma_l))
}

/// Cooperativity of the whole ensemble, with the regime-dependent loss rate.
pub fn ensemble_cooperativity(ensemble: &EmitterEnsemble, resonator: &ResonatorConfig) -> Result<f64> {
    cooperativity(
        collective_g(ensemble, resonator),
        resonator.kappa0(),
        ensemble.gamma_l_collective(),
    )
}

/// Single-pass optical depth `OD ≈ 4βN`.
pub fn optical_depth(beta: f64, n_atoms: usize) -> f64 {
    4.0 * beta * n_atoms as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Satisfied
        } else {
            Verdict::Violated
        }
    }

    pub fn is_satisfied(self) -> bool {
        self == Verdict::Satisfied
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityVerdicts {
    /// `g_N ≪ ν_FSR`
    pub coupling_below_fsr: Verdict,
    /// `g_N² / γ_l ≪ ν_FSR`
    pub loss_below_fsr: Verdict,
    /// `βN ≪ ν_FSR / (c γ)`, the βN form of the first condition
    pub beta_n_below_fsr_bound: Verdict,
    /// `βN ≪ γ_l / (c γ)`, the βN form of the second condition
    pub beta_n_below_loss_bound: Verdict,
}

/// Ratios that decide whether a single-mode (Tavis-Cummings) description holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub ratio_g_fsr: f64,
    pub ratio_loss_fsr: f64,
    pub beta_n_product: f64,
    /// `γ_l / (c γ)`: `(1 − β)/2` for a timed-Dicke ensemble in a ring.
    pub dicke_bound: f64,
    /// `ν_FSR / (c γ)`
    pub fsr_bound: f64,
    pub optical_depth: f64,
    pub strictness_factor: f64,
    pub verdicts: ValidityVerdicts,
}

/// `(g_N / ν_FSR, g_N² / (γ_l ν_FSR))`.
pub fn coupling_ratios(g_n: f64, gamma_l: f64, nu_fsr: f64) -> (f64, f64) {
    let loss = if g_n == 0.0 {
        0.0
    } else if gamma_l == 0.0 {
        f64::INFINITY
    } else {
        g_n * g_n / (gamma_l * nu_fsr)
    };
    (g_n / nu_fsr, loss)
}

pub fn validity_report(
    ensemble: &EmitterEnsemble,
    resonator: &ResonatorConfig,
    strictness_factor: f64,
) -> ValidityReport {
    let s = strictness_factor;
    let nu = resonator.nu_fsr();
    let c = resonator.geometry().coupling_factor();
    let gamma = ensemble.gamma();
    let gamma_l = ensemble.gamma_l_collective();
    let g_n = collective_g(ensemble, resonator);
    let (ratio_g_fsr, ratio_loss_fsr) = coupling_ratios(g_n, gamma_l, nu);
    let beta_n = ensemble.beta_n_product();

    let fsr_bound = nu / (c * gamma);
    let dicke_bound = gamma_l / (c * gamma);

    let verdicts = ValidityVerdicts {
        coupling_below_fsr: Verdict::from_bool(ratio_g_fsr < 1.0 / s),
        loss_below_fsr: Verdict::from_bool(ratio_loss_fsr < 1.0 / s),
        // g_N < ν/s  <=>  c βN γ ν < ν²/s²
        beta_n_below_fsr_bound: Verdict::from_bool(beta_n < fsr_bound / (s * s)),
        beta_n_below_loss_bound: Verdict::from_bool(beta_n == 0.0 || beta_n < dicke_bound / s),
    };

    ValidityReport {
        ratio_g_fsr,
        ratio_loss_fsr,
        beta_n_product: beta_n,
        dicke_bound,
        fsr_bound,
        optical_depth: optical_depth(ensemble.beta(), ensemble.n_atoms()),
        strictness_factor: s,
        verdicts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mhz(x: f64) -> f64 {
        angular(x * 1e6)
    }

    #[test]
    fn g_from_beta_experimental_collective() {
        // βN plays the role of β for the collective coupling
        let g = (2.0 * 12.96 * mhz(2.61) * 7.1e6).sqrt();
        assert!((hz_over_2pi(g) / 8.74e6 - 1.0).abs() < 5e-3);
    }

    #[test]
    fn decoupled_emitter_has_zero_g() {
        assert_eq!(g_from_beta(0.0, mhz(3.0), 1e8, Geometry::Ring).unwrap(), 0.0);
    }

    #[test]
    fn ring_at_unit_beta_is_gmax_over_sqrt2() {
        let (gamma, nu) = (mhz(5.0), 200e6);
        let g = g_from_beta(1.0, gamma, nu, Geometry::Ring).unwrap();
        assert!((g - (2.0 * gamma * nu).sqrt()).abs() < 1e-6);
        let gm = g_max(gamma, nu).unwrap();
        assert!((g * 2f64.sqrt() / gm - 1.0).abs() < 1e-14);
        assert!((gm - 1.585e8).abs() / 1.585e8 < 1e-3);
        let fp = g_from_beta(1.0, gamma, nu, Geometry::FabryPerot).unwrap();
        assert!((fp / gm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn g_max_scales_with_sqrt_gamma() {
        let a = g_max(1e7, 1e8).unwrap();
        let b = g_max(4e7, 1e8).unwrap();
        assert!((b / a - 2.0).abs() < 1e-14);
        assert!(g_max(0.0, 1e8).is_err());
        assert!(g_max(1e7, -1.0).is_err());
    }

    #[test]
    fn domain_errors() {
        assert!(g_from_beta(-0.1, 1.0, 1.0, Geometry::Ring).is_err());
        assert!(g_from_beta(1.1, 1.0, 1.0, Geometry::Ring).is_err());
        assert!(g_from_beta(0.5, 0.0, 1.0, Geometry::Ring).is_err());
        assert!(beta_from_g(-1.0, 1.0, 1.0, Geometry::Ring).is_err());
        assert!(beta_from_g(10.0, 1.0, 1.0, Geometry::Ring).is_err());
        assert!(EmitterEnsemble::uniform(3, 0.2, -1.0, Regime::TimedDicke).is_err());
        assert!(EmitterEnsemble::from_betas(vec![0.1, 1.5], 1.0, Regime::TimedDicke).is_err());
        assert!(ResonatorConfig::new(1e6, 1.2, 0.5, Geometry::Ring).is_err());
        assert!(amplitude_from_kappa(0.6e6, 1e6).is_err());
    }

    #[test]
    fn collective_g_sqrt_n_scaling() {
        let res = ResonatorConfig::new(7.1e6, 1.0, 1.0, Geometry::Ring).unwrap();
        let one = EmitterEnsemble::uniform(1, 0.01, mhz(2.61), Regime::TimedDicke).unwrap();
        let four = EmitterEnsemble::uniform(4, 0.01, mhz(2.61), Regime::TimedDicke).unwrap();
        assert!((collective_g(&four, &res) / collective_g(&one, &res) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn collective_g_uses_rms_not_mean() {
        let res = ResonatorConfig::new(1e8, 1.0, 1.0, Geometry::Ring).unwrap();
        let gamma = mhz(5.0);
        let het = EmitterEnsemble::from_betas(vec![0.1, 0.2], gamma, Regime::TimedDicke).unwrap();
        let uni = EmitterEnsemble::uniform(2, 0.15, gamma, Regime::TimedDicke).unwrap();
        let g1 = g_from_beta(0.1, gamma, 1e8, Geometry::Ring).unwrap();
        let g2 = g_from_beta(0.2, gamma, 1e8, Geometry::Ring).unwrap();
        let rss = (g1 * g1 + g2 * g2).sqrt();
        assert!((collective_g(&het, &res) - rss).abs() / rss < 1e-14);
        // sqrt(N) times the mean single-atom g is a different number
        let mean_g = 0.5 * (g1 + g2) * 2f64.sqrt();
        assert!((rss - mean_g).abs() / rss > 1e-3);
        // with g² ∝ β the RSS of g equals sqrt(N) g(mean β)
        assert!((collective_g(&uni, &res) - rss).abs() / rss < 1e-14);
    }

    #[test]
    fn cooperativity_scaling() {
        assert_eq!(cooperativity(0.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(matches!(cooperativity(1.0, 0.0, 1.0), Err(Error::LosslessLimit(_))));
        assert!(matches!(cooperativity(1.0, 1.0, 0.0), Err(Error::LosslessLimit(_))));

        let res = ResonatorConfig::new(7.1e6, 0.97, 0.97, Geometry::Ring).unwrap();
        let gamma = mhz(2.61);
        let c1 = ensemble_cooperativity(
            &EmitterEnsemble::uniform(1, 0.005, gamma, Regime::TimedDicke).unwrap(),
            &res,
        )
        .unwrap();
        let c_td = ensemble_cooperativity(
            &EmitterEnsemble::uniform(250, 0.005, gamma, Regime::TimedDicke).unwrap(),
            &res,
        )
        .unwrap();
        assert!((c_td / c1 - 250.0).abs() < 1e-10);
        let c_d = ensemble_cooperativity(
            &EmitterEnsemble::uniform(250, 0.005, gamma, Regime::Dicke).unwrap(),
            &res,
        )
        .unwrap();
        assert!((c_d / c1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_relations_invert() {
        let nu = 7.1e6;
        for i in 0..50 {
            let x = 0.5 * i as f64 / 50.0;
            let kappa = x * nu;
            let a = amplitude_from_kappa(kappa, nu).unwrap();
            let back = kappa_from_amplitude(a, nu);
            assert!((back - kappa).abs() <= 1e-12 * kappa.max(1e-300) + 1e-9);
        }
        let res = ResonatorConfig::from_rates(nu, 0.1e6, 0.2e6, Geometry::Ring).unwrap();
        assert!((res.kappa0() - 0.1e6).abs() < 1e-7);
        assert!((res.kappa_ext() - 0.2e6).abs() < 1e-7);
        assert!((res.t() - (1.0 - res.r().powi(2)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn survey_row_fiber_ring() {
        let (a, b) = coupling_ratios(mhz(9.2), mhz(2.61), 7.1e6);
        assert!((a / 8.1 - 1.0).abs() < 0.03);
        assert!((b / 29.0 - 1.0).abs() < 0.03);
    }

    #[test]
    fn survey_row_1p4_ghz() {
        let (a, b) = coupling_ratios(mhz(44.9), mhz(3.0), 1.4e9);
        assert!((a / 0.2 - 1.0).abs() < 0.03);
        assert!((b / 3.0 - 1.0).abs() < 0.03);
    }

    #[test]
    fn empty_ensemble_is_valid_everywhere() {
        let res = ResonatorConfig::new(7.1e6, 0.97, 0.97, Geometry::Ring).unwrap();
        let ens = EmitterEnsemble::uniform(0, 0.005, mhz(2.61), Regime::TimedDicke).unwrap();
        let rep = validity_report(&ens, &res, DEFAULT_STRICTNESS);
        assert_eq!(rep.ratio_g_fsr, 0.0);
        assert_eq!(rep.ratio_loss_fsr, 0.0);
        assert_eq!(rep.optical_depth, 0.0);
        let v = rep.verdicts;
        assert!(v.coupling_below_fsr.is_satisfied());
        assert!(v.loss_below_fsr.is_satisfied());
        assert!(v.beta_n_below_fsr_bound.is_satisfied());
        assert!(v.beta_n_below_loss_bound.is_satisfied());
    }

    #[test]
    fn optical_depth_values() {
        assert!((optical_depth(0.005, 2480) - 49.6).abs() < 1e-12);
        assert_eq!(optical_depth(0.0, 1000), 0.0);
    }

    #[test]
    fn beta_n_constructor_keeps_product() {
        let e = EmitterEnsemble::from_beta_n(12.4, 0.005, mhz(2.61), Regime::TimedDicke).unwrap();
        assert_eq!(e.n_atoms(), 2480);
        assert!((e.beta_n_product() - 12.4).abs() < 1e-12);
        let e = EmitterEnsemble::from_beta_n(0.013, 0.005, 1.0, Regime::TimedDicke).unwrap();
        assert_eq!(e.n_atoms(), 3);
        assert!((e.beta_n_product() - 0.013).abs() < 1e-15);
    }

    #[test]
    fn serde_rejects_inconsistent_mean() {
        let json = r#"{"n_atoms":2,"beta_per_atom":[0.1,0.2],"beta_mean":0.3,"gamma":1.0}"#;
        assert!(serde_json::from_str::<EmitterEnsemble>(json).is_err());
        let json = r#"{"n_atoms":2,"beta_per_atom":[0.1,0.2],"beta_mean":0.15000000000000002,"gamma":1.0}"#;
        assert!(serde_json::from_str::<EmitterEnsemble>(json).is_ok());
    }
}
