//! Parameter sets for published experiments and the standard sweep regimes.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::params::{angular, Geometry, ResonatorConfig};
use crate::resonance::{MapConfig, ResonanceModel};

/// One experiment from the survey of collectively coupled cavity setups.
/// Rates are given as ordinary frequencies, `γ_l ≈ γ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveyRow {
    pub label: &'static str,
    pub g_n_hz_over_2pi: f64,
    pub gamma_hz_over_2pi: f64,
    pub nu_fsr_hz: f64,
    /// Printed `g_N / ν_FSR`.
    pub printed_g_over_fsr: f64,
    /// Printed `g_N² / (γ_l ν_FSR)`.
    pub printed_loss_ratio: f64,
}

impl SurveyRow {
    /// `(g_N / ν_FSR, g_N² / (γ_l ν_FSR))` with `g_N` and `γ_l` in rad/s.
    pub fn ratios(&self) -> (f64, f64) {
        let g = angular(self.g_n_hz_over_2pi);
        let gamma = angular(self.gamma_hz_over_2pi);
        (g / self.nu_fsr_hz, g * g / (gamma * self.nu_fsr_hz))
    }
}

pub const SURVEY: [SurveyRow; 6] = [
    SurveyRow {
        label: "cold-atom cloud, 1.4 GHz FSR",
        g_n_hz_over_2pi: 44.9e6,
        gamma_hz_over_2pi: 3e6,
        nu_fsr_hz: 1.4e9,
        printed_g_over_fsr: 0.2,
        printed_loss_ratio: 3.0,
    },
    SurveyRow {
        label: "nanofiber ring resonator, 7.1 MHz FSR",
        g_n_hz_over_2pi: 9.2e6,
        gamma_hz_over_2pi: 2.61e6,
        nu_fsr_hz: 7.1e6,
        printed_g_over_fsr: 8.1,
        printed_loss_ratio: 29.0,
    },
    SurveyRow {
        label: "BEC, 850 GHz FSR",
        g_n_hz_over_2pi: 3.5e9,
        gamma_hz_over_2pi: 3e6,
        nu_fsr_hz: 850e9,
        printed_g_over_fsr: 0.026,
        printed_loss_ratio: 30.0,
    },
    SurveyRow {
        label: "BEC, 15 GHz FSR",
        g_n_hz_over_2pi: 464.9e6,
        gamma_hz_over_2pi: 3e6,
        nu_fsr_hz: 15e9,
        printed_g_over_fsr: 0.195,
        printed_loss_ratio: 30.0,
    },
    SurveyRow {
        label: "intracavity ensemble, 5.3 GHz FSR",
        g_n_hz_over_2pi: 313e6,
        gamma_hz_over_2pi: 2.87e6,
        nu_fsr_hz: 5.3e9,
        printed_g_over_fsr: 0.374,
        printed_loss_ratio: 41.0,
    },
    SurveyRow {
        label: "BEC on a chip, 3.9 THz FSR",
        g_n_hz_over_2pi: 12e9,
        gamma_hz_over_2pi: 3e6,
        nu_fsr_hz: 3.9e12,
        printed_g_over_fsr: 0.019,
        printed_loss_ratio: 77.0,
    },
];

/// Fiber ring experiment: `γ/2π = 2.61 MHz`, `β = 0.005`, `ν_FSR = 7.1 MHz`,
/// `Δ_ca/2π = 1.12 MHz`, critically coupled with finesse about 60.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberRing {
    pub gamma: f64,
    pub beta: f64,
    pub nu_fsr: f64,
    pub delta_ca: f64,
    pub resonator: ResonatorConfig,
}

pub fn fiber_ring() -> FiberRing {
    let a = 0.95f64.sqrt();
    FiberRing {
        gamma: angular(2.61e6),
        beta: 0.005,
        nu_fsr: 7.1e6,
        delta_ca: angular(1.12e6),
        resonator: ResonatorConfig::new(7.1e6, a, a, Geometry::Ring).expect("valid preset"),
    }
}

/// `βN` of the highlighted spectrum slice and the largest reached.
pub const FIBER_RING_BETA_N_SLICE: f64 = 12.4;
pub const FIBER_RING_BETA_N_MAX: f64 = 12.96;

/// Sweep panels: single-mode TC and cascaded at `ν_FSR = 200 MHz`,
/// multimode TC and cascaded at `ν_FSR = 10 MHz`, all with `γ/2π = 5 MHz`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepPanel {
    A,
    B,
    C,
    D,
}

pub const SWEEP_GAMMA_HZ_OVER_2PI: f64 = 5e6;
pub const SWEEP_BETA: f64 = 0.005;
pub const SWEEP_MIRROR: f64 = 0.999;

impl SweepPanel {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Some(SweepPanel::A),
            "b" => Some(SweepPanel::B),
            "c" => Some(SweepPanel::C),
            "d" => Some(SweepPanel::D),
            _ => None,
        }
    }

    pub fn nu_fsr(self) -> f64 {
        match self {
            SweepPanel::A | SweepPanel::C => 200e6,
            SweepPanel::B | SweepPanel::D => 10e6,
        }
    }

    pub fn model(self) -> ResonanceModel {
        match self {
            SweepPanel::A => ResonanceModel::SingleModeTc,
            SweepPanel::B => ResonanceModel::MultimodeTc,
            SweepPanel::C | SweepPanel::D => ResonanceModel::Cascaded,
        }
    }

    pub fn resonator(self) -> ResonatorConfig {
        ResonatorConfig::new(self.nu_fsr(), SWEEP_MIRROR, SWEEP_MIRROR, Geometry::Ring).expect("valid preset")
    }

    /// Map configuration with `Δ_ca = 0` and a window of `±1.5` (200 MHz) or
    /// `±3` (10 MHz) free spectral ranges.
    pub fn map_config(self) -> MapConfig {
        let mut cfg = MapConfig::new(
            self.model(),
            angular(SWEEP_GAMMA_HZ_OVER_2PI),
            SWEEP_BETA,
            self.resonator(),
        );
        let fsr = TAU * self.nu_fsr();
        let (span, q) = match self {
            SweepPanel::A | SweepPanel::C => (1.5, 1),
            SweepPanel::B | SweepPanel::D => (3.0, 4),
        };
        cfg.delta_window = (-span * fsr, span * fsr);
        cfg.q_window = -q..=q;
        cfg
    }

    /// Default `βN` grid.
    pub fn beta_n_grid(self) -> Vec<f64> {
        match self {
            SweepPanel::A | SweepPanel::C => (1..=40).map(|i| 0.1 * i as f64).collect(),
            SweepPanel::B | SweepPanel::D => (1..=40).map(|i| 0.5 * i as f64).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn survey_rows_within_rounding() {
        for row in SURVEY {
            let (a, b) = row.ratios();
            assert!((a / row.printed_g_over_fsr - 1.0).abs() < 0.03, "{}", row.label);
            assert!((b / row.printed_loss_ratio - 1.0).abs() < 0.03, "{}", row.label);
        }
    }

    #[test]
    fn panels_parse() {
        assert_eq!(SweepPanel::parse("D"), Some(SweepPanel::D));
        assert_eq!(SweepPanel::parse("e"), None);
        assert_eq!(SweepPanel::B.model(), ResonanceModel::MultimodeTc);
    }
}
