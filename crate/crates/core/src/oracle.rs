//! Brute-force reference for the cascaded model.
//!
//! The steady state of a resonator with `N` chirally coupled emitters is
//! written as `2N + 2` linear equations in the output amplitude `φ_d`, the
//! intracavity segment amplitudes `φ_0 … φ_N` and the emitter amplitudes
//! `φ_at,1 … φ_at,N`, and solved densely. Group velocity is 1, the input
//! amplitude is 1, and positions are fractions of the roundtrip length.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DetuningPoint, EmitterEnsemble, Geometry, Regime, ResonatorConfig};
use crate::spectrum::reflection_cascaded;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldAmplitudes {
    pub phi_c: f64,
    pub phi_d: Complex64,
    pub phi_segments: Vec<Complex64>,
    pub phi_atoms: Vec<Complex64>,
    /// Emitter positions as fractions of the roundtrip length.
    pub positions: Vec<f64>,
    /// Largest equation residual relative to the largest amplitude.
    pub relative_residual: f64,
}

impl FieldAmplitudes {
    pub fn reflection(&self) -> f64 {
        (self.phi_d / self.phi_c).norm_sqr()
    }
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Pivot magnitude ratio below which the factorisation is declared singular.
const SINGULAR_RATIO: f64 = 1e-15;

fn assemble(
    betas: &[f64],
    positions: &[f64],
    gamma: f64,
    resonator: &ResonatorConfig,
    point: DetuningPoint,
) -> (DMatrix<Complex64>, DVector<Complex64>) {
    let n = betas.len();
    let dim = 2 * n + 2;
    let (r, t_rt) = (resonator.r(), resonator.t_rt());
    let t = resonator.t();
    let kl = point.delta_c() / resonator.nu_fsr();
    let loop_phase = Complex64::from_polar(1.0, -kl);

    // unknown layout: [φ_d, φ_0..φ_N, φ_at,1..φ_at,N]
    let seg = |j: usize| 1 + j;
    let atom = |j: usize| n + 2 + j;
    let mut a = DMatrix::<Complex64>::zeros(dim, dim);
    let mut b = DVector::<Complex64>::zeros(dim);

    // output mirror port
    a[(0, 0)] = -I / 2.0;
    a[(0, seg(n))] = -t_rt * t * loop_phase / 2.0;
    b[0] = -I * r / 2.0;

    // intracavity field leaving the input mirror
    a[(1, seg(0))] += I / 2.0;
    a[(1, seg(n))] += -I * t_rt * r * loop_phase / 2.0;
    b[1] = c(-t / 2.0);

    for (k, (&beta, &pos)) in betas.iter().zip(positions).enumerate() {
        let v = (2.0 * beta * gamma).sqrt();
        let gamma_l = (1.0 - beta) * gamma;
        let e = Complex64::from_polar(1.0, -pos * kl);
        let jump = 2 + 2 * k;
        a[(jump, seg(k + 1))] = -I * e;
        a[(jump, seg(k))] = I * e;
        a[(jump, atom(k))] = c(v);
        let drive = jump + 1;
        a[(drive, seg(k + 1))] = v / 2.0 * e;
        a[(drive, seg(k))] = v / 2.0 * e;
        a[(drive, atom(k))] = Complex64::new(point.delta_a, -gamma_l);
    }
    (a, b)
}

/// Solves the coupled steady-state equations for emitters at the given
/// positions (fractions of the roundtrip length, strictly increasing in
/// `[0, 1)`).
pub fn solve_coupled_system(
    betas: &[f64],
    positions: &[f64],
    gamma: f64,
    resonator: &ResonatorConfig,
    point: DetuningPoint,
) -> Result<FieldAmplitudes> {
    if betas.len() != positions.len() {
        return Err(Error::Input(format!(
            "{} couplings but {} positions",
            betas.len(),
            positions.len()
        )));
    }
    if positions.iter().any(|p| !(0.0..1.0).contains(p)) || positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("positions must increase strictly within [0, 1)".into()));
    }
    if betas.iter().any(|b| !(0.0..=1.0).contains(b)) || !(gamma > 0.0) {
        return Err(Error::Domain("need beta in [0, 1] and gamma > 0".into()));
    }
    let (a, b) = assemble(betas, positions, gamma, resonator, point);
    let lu = a.clone().lu();
    let diag = lu.u().diagonal();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for d in diag.iter() {
        lo = lo.min(d.norm());
        hi = hi.max(d.norm());
    }
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(ratio > SINGULAR_RATIO) {
        return Err(Error::Singular {
            detail: "coupled field equations at a lossless pole".into(),
            pivot_ratio: ratio,
        });
    }
    let x = lu.solve(&b).ok_or_else(|| Error::Singular {
        detail: "LU solve failed".into(),
        pivot_ratio: ratio,
    })?;

    let resid = &a * &x - &b;
    let scale = x.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    let relative_residual = resid.iter().map(|z| z.norm()).fold(0.0, f64::max) / scale;

    let n = betas.len();
    Ok(FieldAmplitudes {
        phi_c: 1.0,
        phi_d: x[0],
        phi_segments: x.rows(1, n + 1).iter().copied().collect(),
        phi_atoms: x.rows(n + 2, n).iter().copied().collect(),
        positions: positions.to_vec(),
        relative_residual,
    })
}

/// `|φ_at,n|²` for every emitter, in order along the ensemble.
pub fn atomic_excitation_profile(amps: &FieldAmplitudes) -> Vec<f64> {
    amps.phi_atoms.iter().map(|z| z.norm_sqr()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub betas: Vec<f64>,
    pub positions: Vec<f64>,
    pub gamma: f64,
    pub nu_fsr: f64,
    pub t_rt: f64,
    pub r: f64,
    pub delta_a: f64,
    pub delta_ca: f64,
}

impl OracleInstance {
    pub fn random<R: Rng>(rng: &mut R, max_atoms: usize) -> Self {
        let gamma = 2.0 * std::f64::consts::PI * 5e6;
        let n = rng.random_range(0..=max_atoms);
        let betas: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=0.5)).collect();
        let mut positions: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        positions.sort_by(f64::total_cmp);
        positions.dedup();
        while positions.len() < n {
            // vanishingly rare collision: fall back to an even spread
            positions = (0..n).map(|i| i as f64 / n as f64).collect();
        }
        // FSR from γ/2π up to ~200 γ/2π, log-uniform
        let nu_fsr = gamma / (2.0 * std::f64::consts::PI) * 10f64.powf(rng.random_range(0.0..2.3));
        Self {
            betas,
            positions,
            gamma,
            nu_fsr,
            t_rt: rng.random_range(0.0..=1.0),
            r: rng.random_range(0.0..=1.0),
            delta_a: rng.random_range(-20.0..=20.0) * gamma,
            delta_ca: rng.random_range(-20.0..=20.0) * gamma,
        }
    }

    /// `|R_oracle − R_closed|`.
    pub fn discrepancy(&self) -> Result<f64> {
        let res = ResonatorConfig::new(self.nu_fsr, self.t_rt, self.r, Geometry::Ring)?;
        let point = DetuningPoint::new(self.delta_a, self.delta_ca);
        let amps = solve_coupled_system(&self.betas, &self.positions, self.gamma, &res, point)?;
        let ens = EmitterEnsemble::from_betas(self.betas.clone(), self.gamma, Regime::TimedDicke)?;
        let closed = reflection_cascaded(&ens, &res, point)?;
        Ok((amps.reflection() - closed).abs())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub instances: usize,
    pub max_abs_error: f64,
    pub worst_case_parameters: Option<OracleInstance>,
    /// Instances at an exact pole where neither side is defined.
    pub skipped: usize,
}

/// Compares the dense solve with the closed form on seeded random instances
/// with up to 20 emitters.
pub fn oracle_check(instances: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<OracleInstance> = (0..instances).map(|_| OracleInstance::random(&mut rng, 20)).collect();
    let errors: Vec<Result<f64>> = cases.par_iter().map(|c| c.discrepancy()).collect();

    let mut report = OracleReport {
        instances,
        max_abs_error: 0.0,
        worst_case_parameters: None,
        skipped: 0,
    };
    for (case, err) in cases.into_iter().zip(errors) {
        match err {
            Ok(e) => {
                if !(e <= report.max_abs_error) {
                    report.max_abs_error = e;
                    report.worst_case_parameters = Some(case);
                }
            }
            Err(Error::Singular { .. }) | Err(Error::Pole(_)) => report.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}
