//! Resonance positions of the coupled emitter-resonator system.
//!
//! * Cascaded model: detunings where the roundtrip phase `Re φ` is a whole
//!   multiple of `2π`.
//! * Single-mode Jaynes-/Tavis-Cummings: the two normal modes.
//! * Multimode Tavis-Cummings: roots of the secular equation
//!   `1 = (g²/ω) Σ_j 1/(ω − jω_FSR − Δ)` over `2M + 1` modes.
//!
//! Positions are reported as probe-atom detunings `Δ_a` (rad/s).

use std::f64::consts::TAU;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{collective_g, DetuningPoint, EmitterEnsemble, Regime, ResonatorConfig};
use crate::roots::{bisect, sign_change_brackets};
use crate::spectrum::{reflection_cascaded, roundtrip_phi};

/// A detuning where the cascaded roundtrip phase equals `2π q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadedRoot {
    pub q: i64,
    pub delta_a: f64,
    /// `Re φ − 2π q` at `delta_a`.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootSearch {
    /// Samples per `(window, q)` pass.
    pub grid_points: usize,
    /// Resampling factor for cells next to a local extremum of `Re φ`.
    pub refine: usize,
    /// Target `|Re φ − 2πq|` in radians.
    pub tolerance: f64,
}

impl Default for RootSearch {
    fn default() -> Self {
        Self {
            grid_points: 4001,
            refine: 64,
            tolerance: 1e-10,
        }
    }
}

/// Residual above which a bracket is taken to straddle a jump of the
/// principal-value phase rather than a root.
const ACCEPT_RESIDUAL: f64 = 1e-9;

pub fn find_resonances_cascaded(
    ensemble: &EmitterEnsemble,
    resonator: &ResonatorConfig,
    delta_ca: f64,
    q_window: RangeInclusive<i64>,
    delta_window: (f64, f64),
    search: &RootSearch,
) -> Result<Vec<CascadedRoot>> {
    let (lo, hi) = delta_window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Input(format!("invalid detuning window [{lo}, {hi}]")));
    }
    if search.grid_points < 2 {
        return Err(Error::Input("root search needs at least two grid points".into()));
    }
    let grid: Vec<f64> = (0..search.grid_points)
        .map(|i| lo + (hi - lo) * i as f64 / (search.grid_points - 1) as f64)
        .collect();
    let phase = |d: f64| roundtrip_phi(ensemble, resonator, DetuningPoint::new(d, delta_ca)).phase();

    let mut roots = Vec::new();
    for q in q_window {
        let target = TAU * q as f64;
        let f = |d: f64| phase(d) - target;
        for (a, b) in sign_change_brackets(f, &grid, search.refine) {
            let (x, res) = bisect(f, a, b, search.tolerance)?;
            if res.abs() < ACCEPT_RESIDUAL {
                roots.push(CascadedRoot {
                    q,
                    delta_a: x,
                    residual: res,
                });
            }
        }
    }
    roots.sort_by(|a, b| a.delta_a.total_cmp(&b.delta_a));
    let merge = 1e-6 * ensemble.gamma();
    roots.dedup_by(|b, a| a.q == b.q && (b.delta_a - a.delta_a).abs() < merge);
    Ok(roots)
}

/// The two main split resonances: outermost roots with `q = 0`.
pub fn central_pair(roots: &[CascadedRoot]) -> Option<(f64, f64)> {
    let zero: Vec<f64> = roots.iter().filter(|r| r.q == 0).map(|r| r.delta_a).collect();
    let lo = zero.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = zero.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (zero.len() >= 2 && lo < hi).then_some((lo, hi))
}

/// Resonances with `q ≠ 0` lying between the main split pair.
pub fn additional_resonances(roots: &[CascadedRoot]) -> Vec<CascadedRoot> {
    match central_pair(roots) {
        Some((lo, hi)) => roots
            .iter()
            .filter(|r| r.q != 0 && r.delta_a > lo && r.delta_a < hi)
            .copied()
            .collect(),
        None => vec![],
    }
}

/// Normal-mode offsets from the cavity frequency, `−(Δ_ca ± √(4g² + Δ_ca²))/2`.
pub fn jc_resonances(g: f64, delta_ca: f64) -> (f64, f64) {
    let s = (4.0 * g * g + delta_ca * delta_ca).sqrt();
    (-(delta_ca + s) / 2.0, -(delta_ca - s) / 2.0)
}

fn secular_sum(omega: f64, poles: &[f64]) -> f64 {
    poles.iter().map(|&p| 1.0 / (omega - p)).sum()
}

/// `|ω − g² Σ_j 1/(ω − ω_j)|` relative to the size of its terms.
pub fn secular_residual(omega: f64, g: f64, omega_fsr: f64, delta_a_offset: f64, m: usize) -> f64 {
    let poles = multimode_poles(omega_fsr, delta_a_offset, m);
    let sum = secular_sum(omega, &poles);
    let scale: f64 = poles.iter().map(|&p| 1.0 / (omega - p).abs()).sum::<f64>() * g * g;
    (omega - g * g * sum).abs() / (omega.abs() + scale).max(f64::MIN_POSITIVE)
}

fn multimode_poles(omega_fsr: f64, delta_a_offset: f64, m: usize) -> Vec<f64> {
    let m = m as i64;
    (-m..=m).map(|j| j as f64 * omega_fsr + delta_a_offset).collect()
}

/// All `2(M + 1)` eigenfrequencies of the multimode Tavis-Cummings model,
/// relative to the emitter frequency, in ascending order.
///
/// Mode `j` sits at `j ω_FSR + delta_a_offset`. The equation is solved in
/// the pole-free form `ω = g² Σ_j 1/(ω − ω_j)`, whose left side minus right
/// side increases monotonically between poles, so every gap holds exactly
/// one root.
pub fn tc_multimode_eigenfrequencies(g: f64, omega_fsr: f64, delta_a_offset: f64, m: usize) -> Result<Vec<f64>> {
    if !(omega_fsr > 0.0 && omega_fsr.is_finite()) {
        return Err(Error::Domain(format!("omega_fsr = {omega_fsr} must be positive")));
    }
    if !(g >= 0.0 && g.is_finite()) {
        return Err(Error::Domain(format!("g = {g} must be non-negative")));
    }
    let poles = multimode_poles(omega_fsr, delta_a_offset, m);
    if g == 0.0 {
        // decoupled limit: bare comb plus the uncoupled collective emitter
        let mut out = poles.clone();
        out.push(0.0);
        out.sort_by(f64::total_cmp);
        return Ok(out);
    }
    let g2 = g * g;
    let f = |w: f64| w - g2 * secular_sum(w, &poles);

    let mut roots = Vec::with_capacity(poles.len() + 1);

    // below the lowest pole
    let first = poles[0];
    let mut step = omega_fsr.max(g);
    let mut lo = first - step;
    while f(lo) >= 0.0 {
        step *= 2.0;
        lo = first - step;
        if !lo.is_finite() {
            return Err(Error::Bracket {
                lo: f64::NEG_INFINITY,
                hi: first,
                detail: "no root below the lowest mode".into(),
            });
        }
    }
    roots.push(open_bisect(&f, lo, first, false)?);

    for w in poles.windows(2) {
        roots.push(open_bisect(&f, w[0], w[1], true)?);
    }

    let last = *poles.last().unwrap();
    let mut step = omega_fsr.max(g);
    let mut hi = last + step;
    while f(hi) <= 0.0 {
        step *= 2.0;
        hi = last + step;
        if !hi.is_finite() {
            return Err(Error::Bracket {
                lo: last,
                hi: f64::INFINITY,
                detail: "no root above the highest mode".into(),
            });
        }
    }
    roots.push(open_bisect(&f, last, hi, true)?);
    Ok(roots)
}

/// Root above mode `k` (between modes `k` and `k + 1`) in the output of
/// [`tc_multimode_eigenfrequencies`]; `k = −M − 1` and `k = M` are the two
/// exterior roots.
pub fn multimode_gap_root(roots: &[f64], m: usize, k: i64) -> Option<f64> {
    let i = k + m as i64 + 1;
    (i >= 0).then(|| roots.get(i as usize).copied()).flatten()
}

/// Largest change of the roots above modes `|k| ≤ k_max` when the number
/// of modes on either side goes from `M` to `2M`.
pub fn multimode_truncation_shift(g: f64, omega_fsr: f64, delta_a_offset: f64, m: usize, k_max: i64) -> Result<f64> {
    if k_max >= m as i64 {
        return Err(Error::Input(format!("k_max = {k_max} must be below M = {m}")));
    }
    let a = tc_multimode_eigenfrequencies(g, omega_fsr, delta_a_offset, m)?;
    let b = tc_multimode_eigenfrequencies(g, omega_fsr, delta_a_offset, 2 * m)?;
    Ok((-k_max..=k_max)
        .map(|k| (multimode_gap_root(&a, m, k).unwrap() - multimode_gap_root(&b, 2 * m, k).unwrap()).abs())
        .fold(0.0, f64::max))
}

/// Bisection for an increasing function that runs from negative to positive
/// on `(lo, hi)`. Endpoints that are poles are never evaluated.
fn open_bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, lo_is_pole: bool) -> Result<f64> {
    let (lo0, hi0) = (lo, hi);
    if !lo_is_pole && f(lo) >= 0.0 {
        return Err(Error::Bracket {
            lo: lo0,
            hi: hi0,
            detail: "secular function not negative at the lower end".into(),
        });
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v.is_nan() {
            return Err(Error::Bracket {
                lo: lo0,
                hi: hi0,
                detail: format!("secular function undefined at {mid:e}"),
            });
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonanceModel {
    Cascaded,
    SingleModeTc,
    MultimodeTc,
}

impl ResonanceModel {
    pub fn as_str(self) -> &'static str {
        match self {
            ResonanceModel::Cascaded => "cascaded",
            ResonanceModel::SingleModeTc => "single_mode_tc",
            ResonanceModel::MultimodeTc => "multimode_tc",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub beta_n: f64,
    /// Probe-atom detuning of the resonance.
    pub delta: f64,
    pub contrast: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceBranch {
    pub model: ResonanceModel,
    /// `q` for the cascaded model, the gap index `k` for the multimode model
    /// (the root above mode `k`), `0`/`1` for the upper/lower normal mode.
    pub index: i64,
    pub points: Vec<BranchPoint>,
}

/// Parameters held fixed along a `βN` sweep.
#[derive(Clone, Debug)]
pub struct MapConfig {
    pub model: ResonanceModel,
    pub gamma: f64,
    /// Per-emitter β; the atom number follows as `βN / β`.
    pub beta: f64,
    pub resonator: ResonatorConfig,
    pub delta_ca: f64,
    pub q_window: RangeInclusive<i64>,
    pub delta_window: (f64, f64),
    /// Half the number of modes beyond the central one (multimode model).
    pub modes_half: usize,
    /// Largest jump of a branch between neighbouring `βN` samples (rad/s).
    pub continuity: f64,
    pub with_contrast: bool,
    pub search: RootSearch,
}

impl MapConfig {
    /// Defaults: no cavity-atom detuning, `q ∈ [−3, 3]`, a `±3 ν_FSR`
    /// window, 50 extra modes on either side, and a continuity threshold of
    /// a quarter free spectral range.
    pub fn new(model: ResonanceModel, gamma: f64, beta: f64, resonator: ResonatorConfig) -> Self {
        let fsr = TAU * resonator.nu_fsr();
        Self {
            model,
            gamma,
            beta,
            resonator,
            delta_ca: 0.0,
            q_window: -3..=3,
            delta_window: (-3.0 * fsr, 3.0 * fsr),
            modes_half: 50,
            continuity: 0.25 * fsr,
            with_contrast: false,
            search: RootSearch::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResonanceMap {
    pub branches: Vec<ResonanceBranch>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug)]
struct Labelled {
    index: i64,
    delta: f64,
    contrast: Option<f64>,
}

/// Resonances at one value of `βN`.
pub fn resonances_at(config: &MapConfig, beta_n: f64) -> Result<Vec<(i64, f64, Option<f64>)>> {
    let ensemble = EmitterEnsemble::from_beta_n(beta_n, config.beta, config.gamma, Regime::TimedDicke)?;
    let out = match config.model {
        ResonanceModel::Cascaded => {
            let roots = find_resonances_cascaded(
                &ensemble,
                &config.resonator,
                config.delta_ca,
                config.q_window.clone(),
                config.delta_window,
                &config.search,
            )?;
            let deltas: Vec<f64> = roots.iter().map(|r| r.delta_a).collect();
            roots
                .iter()
                .map(|r| {
                    let c = if config.with_contrast {
                        resonance_contrast(
                            &ensemble,
                            &config.resonator,
                            config.delta_ca,
                            r.delta_a,
                            &deltas,
                            config.delta_window,
                        )
                        .ok()
                    } else {
                        None
                    };
                    (r.q, r.delta_a, c)
                })
                .collect()
        }
        ResonanceModel::SingleModeTc => {
            let g = collective_g(&ensemble, &config.resonator);
            let (plus, minus) = jc_resonances(g, config.delta_ca);
            vec![(0, -config.delta_ca - plus, None), (1, -config.delta_ca - minus, None)]
        }
        ResonanceModel::MultimodeTc => {
            let g = collective_g(&ensemble, &config.resonator);
            let fsr = TAU * config.resonator.nu_fsr();
            let m = config.modes_half as i64;
            tc_multimode_eigenfrequencies(g, fsr, config.delta_ca, config.modes_half)?
                .into_iter()
                .enumerate()
                // frequencies are relative to the emitter; Δ_a = ω_a − ω
                .map(|(i, w)| (i as i64 - m - 1, -w, None))
                .filter(|&(_, d, _)| d >= config.delta_window.0 && d <= config.delta_window.1)
                .collect()
        }
    };
    Ok(out)
}

/// Resonance branches along an increasing `βN` grid, assembled by
/// nearest-neighbour continuation within `config.continuity`.
pub fn resonance_map(config: &MapConfig, beta_n_grid: &[f64]) -> Result<ResonanceMap> {
    if beta_n_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("beta*N grid must be strictly increasing".into()));
    }
    let per_step: Vec<Vec<Labelled>> = beta_n_grid
        .par_iter()
        .map(|&bn| {
            resonances_at(config, bn).map(|v| {
                v.into_iter()
                    .map(|(index, delta, contrast)| Labelled { index, delta, contrast })
                    .collect()
            })
        })
        .collect::<Result<_>>()?;

    let mut map = ResonanceMap::default();
    // branch ids still open at the previous step
    let mut open: Vec<usize> = Vec::new();
    for (&bn, found) in beta_n_grid.iter().zip(per_step) {
        let prev: Vec<(usize, i64, f64)> = open
            .iter()
            .map(|&b| {
                let br = &map.branches[b];
                (b, br.index, br.points.last().unwrap().delta)
            })
            .collect();
        let mut next_open = Vec::with_capacity(found.len());
        for (i, res) in found.iter().enumerate() {
            let mut dists: Vec<(f64, usize, f64)> = prev
                .iter()
                .filter(|p| p.1 == res.index)
                .map(|p| ((p.2 - res.delta).abs(), p.0, p.2))
                .collect();
            dists.sort_by(|x, y| x.0.total_cmp(&y.0));
            let target = match dists.first() {
                Some(&(d1, b, last)) if d1 < config.continuity => {
                    // the branch must prefer this root over every other root of the same index
                    let mutual = found
                        .iter()
                        .enumerate()
                        .all(|(j, o)| j == i || o.index != res.index || (o.delta - last).abs() > d1);
                    let clear = dists.get(1).is_none_or(|&(d2, _, _)| d2 > 2.0 * d1);
                    if mutual && !clear {
                        map.warnings.push(format!(
                            "ambiguous continuation at beta*N = {bn} (index {}, delta = {:e}); branch split",
                            res.index, res.delta
                        ));
                    }
                    (mutual && clear).then_some(b)
                }
                _ => None,
            };
            let point = BranchPoint {
                beta_n: bn,
                delta: res.delta,
                contrast: res.contrast,
            };
            let id = match target {
                Some(b) => {
                    map.branches[b].points.push(point);
                    b
                }
                None => {
                    map.branches.push(ResonanceBranch {
                        model: config.model,
                        index: res.index,
                        points: vec![point],
                    });
                    map.branches.len() - 1
                }
            };
            next_open.push(id);
        }
        open = next_open;
    }
    Ok(map)
}

/// Relative dip depth of a cascaded resonance against the reflection half a
/// local root spacing away on either side:
/// `(R_baseline − R(Δ_res)) / R_baseline`.
pub fn resonance_contrast(
    ensemble: &EmitterEnsemble,
    resonator: &ResonatorConfig,
    delta_ca: f64,
    delta_res: f64,
    all_roots: &[f64],
    window: (f64, f64),
) -> Result<f64> {
    let merge = 1e-6 * ensemble.gamma();
    let spacing = all_roots
        .iter()
        .map(|&d| (d - delta_res).abs())
        .filter(|&s| s > merge)
        .fold(f64::INFINITY, f64::min);
    if !spacing.is_finite() {
        return Err(Error::Input(
            "contrast needs at least one neighbouring resonance to set the baseline".into(),
        ));
    }
    let half = 0.5 * spacing;
    let (lo, hi) = (delta_res - half, delta_res + half);
    if lo < window.0 || hi > window.1 {
        return Err(Error::Input(format!(
            "baseline points [{lo:e}, {hi:e}] fall outside the scan window"
        )));
    }
    let r = |d: f64| reflection_cascaded(ensemble, resonator, DetuningPoint::new(d, delta_ca));
    let baseline = 0.5 * (r(lo)? + r(hi)?);
    if baseline <= 0.0 {
        return Err(Error::Domain("zero baseline reflection".into()));
    }
    Ok((baseline - r(delta_res)?) / baseline)
}
