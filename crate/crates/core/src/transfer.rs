//! Single-pass transmission of the guided field past one emitter and past
//! the whole ensemble.
//!
//! The phase of an ensemble transmission is tracked as the sum of the
//! principal arguments of its factors, so it is not limited to `(−π, π]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::params::{EmitterEnsemble, Regime};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexTransmission {
    pub value: Complex64,
    /// Sum of the per-factor principal arguments, in radians.
    pub unwrapped_phase: f64,
}

impl ComplexTransmission {
    pub const UNITY: ComplexTransmission = ComplexTransmission {
        value: Complex64 { re: 1.0, im: 0.0 },
        unwrapped_phase: 0.0,
    };

    pub fn norm(&self) -> f64 {
        self.value.norm()
    }
}

/// `t = 1 − 2γβ / (γ + iΔ_a)`.
pub fn t_single(beta: f64, gamma: f64, delta_a: f64) -> Complex64 {
    debug_assert!(gamma > 0.0);
    Complex64::new(1.0, 0.0) - 2.0 * gamma * beta / Complex64::new(gamma, delta_a)
}

/// Product over the emitters in order.
pub fn t_ensemble_exact(betas: &[f64], gamma: f64, delta_a: f64) -> ComplexTransmission {
    betas.iter().fold(ComplexTransmission::UNITY, |acc, &b| {
        let t = t_single(b, gamma, delta_a);
        ComplexTransmission {
            value: acc.value * t,
            unwrapped_phase: acc.unwrapped_phase + t.arg(),
        }
    })
}

/// `(1 − 2γβ/(γ + iΔ_a))^N` for identical emitters.
pub fn t_ensemble_homogeneous(beta: f64, n_atoms: usize, gamma: f64, delta_a: f64) -> ComplexTransmission {
    t_power_law(beta, n_atoms as f64, gamma, delta_a)
}

/// Same as [`t_ensemble_homogeneous`] with a real exponent, used when `βN`
/// is swept or fitted continuously at fixed `β`.
pub fn t_power_law(beta: f64, n_eff: f64, gamma: f64, delta_a: f64) -> ComplexTransmission {
    if n_eff == 0.0 {
        return ComplexTransmission::UNITY;
    }
    let t = t_single(beta, gamma, delta_a);
    let phase = n_eff * t.arg();
    ComplexTransmission {
        value: Complex64::from_polar(t.norm().powf(n_eff), phase),
        unwrapped_phase: phase,
    }
}

/// Dicke superatom: the single-emitter response with `γ → N γ`.
pub fn t_dicke(beta: f64, n_atoms: usize, gamma: f64, delta_a: f64) -> Complex64 {
    if n_atoms == 0 {
        return Complex64::new(1.0, 0.0);
    }
    t_single(beta, n_atoms as f64 * gamma, delta_a)
}

/// Transmission of an ensemble according to its regime: exact product when
/// per-emitter couplings are stored, power law for a uniform timed-Dicke
/// ensemble, superatom response for the Dicke regime.
pub fn ensemble_transmission(ensemble: &EmitterEnsemble, delta_a: f64) -> ComplexTransmission {
    let gamma = ensemble.gamma();
    match ensemble.regime() {
        Regime::Dicke => {
            let t = t_dicke(ensemble.beta(), ensemble.n_atoms(), gamma, delta_a);
            ComplexTransmission {
                value: t,
                unwrapped_phase: t.arg(),
            }
        }
        Regime::TimedDicke => match ensemble.betas() {
            Some(list) => t_ensemble_exact(list, gamma, delta_a),
            None => t_ensemble_homogeneous(ensemble.beta(), ensemble.n_atoms(), gamma, delta_a),
        },
    }
}
