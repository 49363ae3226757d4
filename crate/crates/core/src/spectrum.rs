//! Steady-state reflection of the probed resonator.
//!
//! The cascaded model only needs the single-pass ensemble transmission `t_N`:
//! one roundtrip multiplies the field by `e^{−iΔ_c/ν_FSR} t_rt t_N`, and the
//! input mirror closes the loop.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{collective_g, DetuningPoint, EmitterEnsemble, ResonatorConfig};
use crate::transfer::{ensemble_transmission, ComplexTransmission};

const POLE_EPS: f64 = 1e-300;

/// Complex roundtrip function `φ`; `Re φ` is the roundtrip phase and
/// `Im φ` the roundtrip loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundtripState {
    pub phi: Complex64,
    /// `e^{iφ} = e^{−iΔ_c/ν_FSR} t_N t_rt r`
    pub loop_gain: Complex64,
}

impl RoundtripState {
    pub fn phase(&self) -> f64 {
        self.phi.re
    }

    /// `+∞` when the loop is fully absorbing (`r = 0` or `t_N = 0`).
    pub fn loss(&self) -> f64 {
        self.phi.im
    }
}

pub fn roundtrip_from_transmission(
    t_n: &ComplexTransmission,
    resonator: &ResonatorConfig,
    delta_c: f64,
) -> RoundtripState {
    let propagation = -delta_c / resonator.nu_fsr();
    let magnitude = t_n.value.norm() * resonator.t_rt() * resonator.r();
    let loss = if magnitude == 0.0 {
        f64::INFINITY
    } else {
        -magnitude.ln()
    };
    let loop_gain = Complex64::from_polar(1.0, propagation) * t_n.value * resonator.t_rt() * resonator.r();
    RoundtripState {
        phi: Complex64::new(propagation + t_n.unwrapped_phase, loss),
        loop_gain,
    }
}

pub fn roundtrip_phi(ensemble: &EmitterEnsemble, resonator: &ResonatorConfig, point: DetuningPoint) -> RoundtripState {
    let t_n = ensemble_transmission(ensemble, point.delta_a);
    roundtrip_from_transmission(&t_n, resonator, point.delta_c())
}

/// Power reflection for a given single-pass transmission `t_N`.
pub fn reflection_from_transmission(t_n: Complex64, resonator: &ResonatorConfig, delta_c: f64) -> Result<f64> {
    let r = resonator.r();
    let y = Complex64::from_polar(1.0, -delta_c / resonator.nu_fsr()) * resonator.t_rt() * t_n;
    let den = y * r - 1.0;
    if den.norm() < POLE_EPS {
        return Err(Error::Pole(format!("lossless resonant loop at delta_c = {delta_c}")));
    }
    Ok(((y - r) / den).norm_sqr())
}

pub fn reflection_cascaded(
    ensemble: &EmitterEnsemble,
    resonator: &ResonatorConfig,
    point: DetuningPoint,
) -> Result<f64> {
    let t_n = ensemble_transmission(ensemble, point.delta_a);
    reflection_from_transmission(t_n.value, resonator, point.delta_c())
}

/// Reflection written through the roundtrip function,
/// `|(e^{iφ}/r − r) / (e^{iφ} − 1)|²`; requires `r > 0`.
pub fn reflection_from_phi(phi: Complex64, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::Domain("the roundtrip-function form needs r > 0".into()));
    }
    let e = (Complex64::i() * phi).exp();
    let den = e - 1.0;
    if den.norm() < POLE_EPS {
        return Err(Error::Pole("e^{i phi} = 1".into()));
    }
    Ok(((e / r - r) / den).norm_sqr())
}

/// Waveguide limit `r → 0`: a single pass, `t_rt² |t_N|²`.
pub fn reflection_waveguide(ensemble: &EmitterEnsemble, resonator: &ResonatorConfig, delta_a: f64) -> f64 {
    let t_n = ensemble_transmission(ensemble, delta_a);
    resonator.t_rt().powi(2) * t_n.value.norm_sqr()
}

/// Driven, lossy Jaynes-/Tavis-Cummings reflection.
pub fn reflection_singlemode(g: f64, gamma_l: f64, kappa0: f64, kappa_ext: f64, point: DetuningPoint) -> Result<f64> {
    let atom = Complex64::new(gamma_l, point.delta_a);
    let g2 = g * g;
    let num = g2 + atom * Complex64::new(kappa0 - kappa_ext, point.delta_c());
    let den = g2 + atom * Complex64::new(kappa0 + kappa_ext, point.delta_c());
    if den.norm() < POLE_EPS {
        return Err(Error::Pole(format!(
            "single-mode response diverges at delta_a = {}, delta_c = {}",
            point.delta_a,
            point.delta_c()
        )));
    }
    Ok((num / den).norm_sqr())
}

/// Steady-state amplitudes of the driven single-mode model, normalised to
/// the input amplitude (group velocity set to one).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyStateAmplitudes {
    pub out_over_in: Complex64,
    pub atom_over_in: Complex64,
    pub cav_over_in: Complex64,
    pub atom_over_cav: Complex64,
}

pub fn steady_state_amplitudes(
    g: f64,
    gamma_l: f64,
    kappa0: f64,
    kappa_ext: f64,
    point: DetuningPoint,
) -> Result<SteadyStateAmplitudes> {
    let atom = Complex64::new(gamma_l, point.delta_a);
    if atom.norm() == 0.0 {
        return Err(Error::Domain(
            "gamma_l = 0 on atomic resonance: atom/cavity amplitude ratio has a pole".into(),
        ));
    }
    let g2 = g * g;
    let den = g2 + atom * Complex64::new(kappa0 + kappa_ext, point.delta_c());
    if den.norm() < POLE_EPS {
        return Err(Error::Pole("single-mode response diverges".into()));
    }
    let feed = (2.0 * kappa_ext).sqrt();
    let i = Complex64::i();
    Ok(SteadyStateAmplitudes {
        out_over_in: (g2 + atom * Complex64::new(kappa0 - kappa_ext, point.delta_c())) / den,
        atom_over_in: -g * feed / den,
        cav_over_in: -i * feed * atom / den,
        atom_over_cav: -i * g / atom,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    Cascaded,
    SingleModeTc,
    WaveguideLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub delta_a: f64,
    pub delta_c: f64,
    pub reflection: f64,
}

/// Everything needed to recompute a spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSnapshot {
    pub model: ModelTag,
    pub ensemble: EmitterEnsemble,
    pub resonator: ResonatorConfig,
    pub delta_ca: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub points: Vec<SpectrumPoint>,
    pub model: ModelTag,
    pub metadata: ParamSnapshot,
}

/// Reflection of one model at one detuning.
pub fn reflection(
    model: ModelTag,
    ensemble: &EmitterEnsemble,
    resonator: &ResonatorConfig,
    point: DetuningPoint,
) -> Result<f64> {
    match model {
        ModelTag::Cascaded => reflection_cascaded(ensemble, resonator, point),
        ModelTag::WaveguideLimit => Ok(reflection_waveguide(ensemble, resonator, point.delta_a)),
        ModelTag::SingleModeTc => reflection_singlemode(
            collective_g(ensemble, resonator),
            ensemble.gamma_l_collective(),
            resonator.kappa0(),
            resonator.kappa_ext(),
            point,
        ),
    }
}

/// Evaluate `model` on a strictly increasing grid of probe-atom detunings
/// at fixed cavity-atom detuning. Points are evaluated in parallel and
/// returned in grid order.
pub fn spectrum_scan(
    ensemble: &EmitterEnsemble,
    resonator: &ResonatorConfig,
    delta_ca: f64,
    delta_a_grid: &[f64],
    model: ModelTag,
) -> Result<Spectrum> {
    if let Some(i) = delta_a_grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Input(format!(
            "detuning grid is not strictly increasing at index {}",
            i + 1
        )));
    }
    let points = delta_a_grid
        .par_iter()
        .enumerate()
        .map(|(index, &delta_a)| {
            let p = DetuningPoint::new(delta_a, delta_ca);
            reflection(model, ensemble, resonator, p)
                .map(|reflection| SpectrumPoint {
                    delta_a,
                    delta_c: p.delta_c(),
                    reflection,
                })
                .map_err(|e| Error::AtGridPoint {
                    index,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        points,
        model,
        metadata: ParamSnapshot {
            model,
            ensemble: ensemble.clone(),
            resonator: *resonator,
            delta_ca,
        },
    })
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}
