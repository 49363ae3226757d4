//! Least-squares fits of measured reflection spectra with the cascaded model.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Geometry, ResonatorConfig};
use crate::simplex::{minimize, NelderMeadOptions};
use crate::spectrum::reflection_from_transmission;
use crate::transfer::t_power_law;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Raw,
    Normalized,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    /// Median of the largest 10% of samples.
    #[default]
    TopDecileMedian,
    Max,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuredSpectrum {
    /// Probe detuning as scanned, in Hz.
    pub detuning_hz: Vec<f64>,
    pub signal: Vec<f64>,
    pub normalization: Normalization,
    /// Divisor applied by [`normalize_spectrum`], if any.
    pub baseline: Option<f64>,
    pub baseline_method: Option<BaselineMethod>,
}

impl MeasuredSpectrum {
    pub fn new(detuning_hz: Vec<f64>, signal: Vec<f64>, normalization: Normalization) -> Result<Self> {
        if detuning_hz.len() != signal.len() {
            return Err(Error::Input(format!(
                "{} detunings but {} signal values",
                detuning_hz.len(),
                signal.len()
            )));
        }
        if detuning_hz.iter().any(|x| !x.is_finite()) || detuning_hz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Input(
                "probe detunings must be finite and strictly increasing".into(),
            ));
        }
        if let Some(bad) = signal.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::Input(format!(
                "signal value {bad} is not a finite non-negative number"
            )));
        }
        Ok(Self {
            detuning_hz,
            signal,
            normalization,
            baseline: None,
            baseline_method: None,
        })
    }

    pub fn len(&self) -> usize {
        self.signal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signal.is_empty()
    }
}

pub fn normalize_spectrum(data: &MeasuredSpectrum, method: BaselineMethod) -> Result<MeasuredSpectrum> {
    if data.is_empty() {
        return Err(Error::Input("empty spectrum".into()));
    }
    let mut sorted = data.signal.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let baseline = match method {
        BaselineMethod::Max => sorted[0],
        BaselineMethod::TopDecileMedian => {
            let k = data.len().div_ceil(10).max(1);
            let top = &sorted[..k];
            if k % 2 == 1 {
                top[k / 2]
            } else {
                0.5 * (top[k / 2 - 1] + top[k / 2])
            }
        }
    };
    if !(baseline > 0.0) {
        return Err(Error::Input(
            "signal is zero everywhere; no baseline to normalise by".into(),
        ));
    }
    Ok(MeasuredSpectrum {
        detuning_hz: data.detuning_hz.clone(),
        signal: data.signal.iter().map(|s| s / baseline).collect(),
        normalization: Normalization::Normalized,
        baseline: Some(baseline),
        baseline_method: Some(method),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitParams {
    pub beta_n_product: f64,
    /// Cavity-atom detuning, rad/s.
    pub delta_ca: f64,
    pub t_rt: f64,
    pub r: f64,
    pub amplitude_scale: f64,
    /// Probe frequency of the atomic resonance on the scan axis, Hz.
    pub frequency_offset: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParam {
    BetaNProduct,
    DeltaCa,
    TRt,
    R,
    AmplitudeScale,
    FrequencyOffset,
}

impl FitParam {
    pub const ALL: [FitParam; 6] = [
        FitParam::BetaNProduct,
        FitParam::DeltaCa,
        FitParam::TRt,
        FitParam::R,
        FitParam::AmplitudeScale,
        FitParam::FrequencyOffset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FitParam::BetaNProduct => "beta_n_product",
            FitParam::DeltaCa => "delta_ca",
            FitParam::TRt => "t_rt",
            FitParam::R => "r",
            FitParam::AmplitudeScale => "amplitude_scale",
            FitParam::FrequencyOffset => "frequency_offset",
        }
    }
}

impl FitParams {
    pub fn get(&self, p: FitParam) -> f64 {
        match p {
            FitParam::BetaNProduct => self.beta_n_product,
            FitParam::DeltaCa => self.delta_ca,
            FitParam::TRt => self.t_rt,
            FitParam::R => self.r,
            FitParam::AmplitudeScale => self.amplitude_scale,
            FitParam::FrequencyOffset => self.frequency_offset,
        }
    }

    pub fn set(&mut self, p: FitParam, v: f64) {
        match p {
            FitParam::BetaNProduct => self.beta_n_product = v,
            FitParam::DeltaCa => self.delta_ca = v,
            FitParam::TRt => self.t_rt = v,
            FitParam::R => self.r = v,
            FitParam::AmplitudeScale => self.amplitude_scale = v,
            FitParam::FrequencyOffset => self.frequency_offset = v,
        }
    }
}

/// Quantities the fit never varies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    pub gamma: f64,
    pub nu_fsr: f64,
    /// Per-emitter β; `βN / β` is the (real) exponent of the power law.
    pub beta: f64,
}

impl FitModel {
    /// Reflection at probe frequency `x_hz` on the scan axis.
    pub fn reflection(&self, p: &FitParams, x_hz: f64) -> Result<f64> {
        let res = ResonatorConfig::new(self.nu_fsr, p.t_rt, p.r, Geometry::Ring)?;
        let delta_a = TAU * (x_hz - p.frequency_offset);
        let t_n = t_power_law(self.beta, p.beta_n_product / self.beta, self.gamma, delta_a);
        Ok(p.amplitude_scale * reflection_from_transmission(t_n.value, &res, delta_a + p.delta_ca)?)
    }

    pub fn curve(&self, p: &FitParams, x_hz: &[f64]) -> Result<Vec<f64>> {
        x_hz.iter().map(|&x| self.reflection(p, x)).collect()
    }

    /// Typical size of each parameter; the optimiser works in these units.
    fn scale(&self, p: FitParam) -> f64 {
        match p {
            FitParam::BetaNProduct => 1.0,
            FitParam::DeltaCa => self.gamma,
            FitParam::TRt | FitParam::R => 0.01,
            FitParam::AmplitudeScale => 0.1,
            FitParam::FrequencyOffset => 0.1 * self.nu_fsr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSetup {
    pub model: FitModel,
    pub initial: FitParams,
    pub lower: FitParams,
    pub upper: FitParams,
    pub fixed: Vec<FitParam>,
    pub max_evaluations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl FitSetup {
    /// Mirror parameters fixed, everything else free within generous bounds.
    pub fn new(model: FitModel, initial: FitParams) -> Self {
        let fsr = TAU * model.nu_fsr;
        Self {
            model,
            initial,
            lower: FitParams {
                beta_n_product: 0.0,
                delta_ca: -fsr,
                t_rt: 0.0,
                r: 0.0,
                amplitude_scale: 0.0,
                frequency_offset: -model.nu_fsr,
            },
            upper: FitParams {
                beta_n_product: 500.0,
                delta_ca: fsr,
                t_rt: 1.0,
                r: 1.0,
                amplitude_scale: 10.0,
                frequency_offset: model.nu_fsr,
            },
            fixed: vec![FitParam::TRt, FitParam::R],
            max_evaluations: 20_000,
            restarts: 3,
            seed: 0,
        }
    }

    pub fn free(&self) -> Vec<FitParam> {
        FitParam::ALL.into_iter().filter(|p| !self.fixed.contains(p)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub estimates: FitParams,
    /// One standard deviation per free parameter.
    pub uncertainties: BTreeMap<String, f64>,
    pub uncertainty_method: String,
    pub residual_rms: f64,
    pub n_evaluations: usize,
    pub converged: bool,
}

pub const UNCERTAINTY_METHOD: &str = "curvature-based, statistical only";

fn sum_squares(model: &FitModel, p: &FitParams, data: &MeasuredSpectrum) -> f64 {
    let mut s = 0.0;
    for (&x, &y) in data.detuning_hz.iter().zip(&data.signal) {
        match model.reflection(p, x) {
            Ok(v) if v.is_finite() => s += (v - y).powi(2),
            _ => return f64::NAN,
        }
    }
    s
}

pub fn fit_spectrum(data: &MeasuredSpectrum, setup: &FitSetup) -> Result<FitResult> {
    let free = setup.free();
    if data.len() < free.len() + 6 {
        return Err(Error::Input(format!(
            "{} samples is too few for {} free parameters (need {} or more)",
            data.len(),
            free.len(),
            free.len() + 6
        )));
    }
    for p in FitParam::ALL {
        let (lo, hi, x) = (setup.lower.get(p), setup.upper.get(p), setup.initial.get(p));
        if !(lo <= hi) {
            return Err(Error::Input(format!("bounds for {} are not ordered", p.name())));
        }
        if !(lo..=hi).contains(&x) {
            return Err(Error::Input(format!(
                "initial {} = {x} lies outside its bounds",
                p.name()
            )));
        }
    }
    if !(setup.model.beta > 0.0 && setup.model.beta <= 1.0) {
        return Err(Error::Domain("per-emitter beta must be in (0, 1]".into()));
    }

    let model = &setup.model;
    let scales: Vec<f64> = free.iter().map(|&p| model.scale(p)).collect();
    let to_params = |z: &[f64]| {
        let mut p = setup.initial;
        for ((&k, &v), &s) in free.iter().zip(z).zip(&scales) {
            p.set(k, v * s);
        }
        p
    };
    let z0: Vec<f64> = free
        .iter()
        .zip(&scales)
        .map(|(&k, s)| setup.initial.get(k) / s)
        .collect();
    let zl: Vec<f64> = free.iter().zip(&scales).map(|(&k, s)| setup.lower.get(k) / s).collect();
    let zu: Vec<f64> = free.iter().zip(&scales).map(|(&k, s)| setup.upper.get(k) / s).collect();

    let objective = |z: &[f64]| sum_squares(model, &to_params(z), data);
    let mut opts = NelderMeadOptions::new(vec![0.5; free.len()]);
    opts.max_evaluations = setup.max_evaluations;
    opts.restarts = setup.restarts;
    opts.seed = setup.seed;
    // rounding noise in the model is ~1e-16 per sample
    opts.fatol = 1e-26 * data.len() as f64;
    let min = minimize(objective, &z0, &zl, &zu, &opts);
    let best = to_params(&min.x);

    let n = data.len();
    let dof = (n - free.len()) as f64;
    let s0 = min.value;
    let s2 = s0 / dof;
    let mut uncertainties = BTreeMap::new();
    for (i, &k) in free.iter().enumerate() {
        let h = 1e-3;
        // three equally spaced points inside the box
        let base = if min.x[i] + h > zu[i] {
            min.x[i] - h
        } else if min.x[i] - h < zl[i] {
            min.x[i] + h
        } else {
            min.x[i]
        };
        let at = |d: f64| {
            let mut z = min.x.clone();
            z[i] = base + d;
            objective(&z)
        };
        let curv = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
        let sigma = if curv > 0.0 {
            (2.0 * s2 / curv).sqrt() * scales[i]
        } else {
            f64::INFINITY
        };
        uncertainties.insert(k.name().to_string(), sigma);
    }

    Ok(FitResult {
        estimates: best,
        uncertainties,
        uncertainty_method: UNCERTAINTY_METHOD.to_string(),
        residual_rms: (s0 / n as f64).sqrt(),
        n_evaluations: min.evaluations,
        converged: min.converged,
    })
}
