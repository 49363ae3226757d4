//! Box-constrained Nelder-Mead minimisation with restarts.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct NelderMeadOptions {
    /// Relative spread of objective values across the simplex at convergence.
    pub ftol: f64,
    /// Absolute floor added to the convergence threshold.
    pub fatol: f64,
    pub max_evaluations: usize,
    /// Initial simplex edge per coordinate.
    pub step: Vec<f64>,
    /// Fresh simplices built around the best point after the first run.
    pub restarts: usize,
    pub seed: u64,
}

impl NelderMeadOptions {
    pub fn new(step: Vec<f64>) -> Self {
        Self {
            ftol: 1e-10,
            fatol: 1e-30,
            max_evaluations: 20_000,
            step,
            restarts: 3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after every iteration, across all runs.
    pub trace: Vec<f64>,
}

struct Problem<'a, F> {
    f: F,
    lower: &'a [f64],
    upper: &'a [f64],
    evaluations: usize,
}

impl<F: Fn(&[f64]) -> f64> Problem<'_, F> {
    fn clamp(&self, x: &mut [f64]) {
        for ((v, &lo), &hi) in x.iter_mut().zip(self.lower).zip(self.upper) {
            *v = v.clamp(lo, hi);
        }
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }
}

/// Minimises `f` over the box `[lower, upper]`, starting at `x0`.
///
/// Non-finite objective values are treated as `+∞`, so such candidates are
/// never accepted.
pub fn minimize<F>(f: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(lower.len() == n && upper.len() == n && opts.step.len() == n);
    let mut p = Problem {
        f,
        lower,
        upper,
        evaluations: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start = x0.to_vec();
    p.clamp(&mut start);

    let mut trace = Vec::new();
    let axes: Vec<(usize, f64)> = (0..n).map(|i| (i, 1.0)).collect();
    let (mut best_x, mut best_f, mut converged) = run(&mut p, &start, &axes, opts, &mut trace);
    for _ in 0..opts.restarts {
        if p.evaluations >= opts.max_evaluations {
            break;
        }
        // same edge lengths, shuffled axis order and random signs
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let dirs: Vec<(usize, f64)> = order
            .into_iter()
            .map(|i| (i, if rng.random_bool(0.5) { 1.0 } else { -1.0 }))
            .collect();
        let (x, v, c) = run(&mut p, &best_x, &dirs, opts, &mut trace);
        if v <= best_f {
            best_x = x;
            best_f = v;
        }
        converged = c;
    }
    Minimum {
        x: best_x,
        value: best_f,
        evaluations: p.evaluations,
        converged,
        trace,
    }
}

fn run<F: Fn(&[f64]) -> f64>(
    p: &mut Problem<'_, F>,
    start: &[f64],
    dirs: &[(usize, f64)],
    opts: &NelderMeadOptions,
    trace: &mut Vec<f64>,
) -> (Vec<f64>, f64, bool) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for &(axis, sign) in dirs {
        let mut v = start.to_vec();
        let step = opts.step[axis];
        v[axis] += sign * step;
        // push away from a bound instead of collapsing onto it
        if v[axis] > p.upper[axis] || v[axis] < p.lower[axis] {
            v[axis] = start[axis] - sign * step;
        }
        p.clamp(&mut v);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| p.eval(x)).collect();

    loop {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();
        trace.push(values[0]);

        let (fl, fh) = (values[0], values[n]);
        if fl.is_finite() && 2.0 * (fh - fl).abs() <= opts.ftol * (fh.abs() + fl.abs()) + opts.fatol {
            return (simplex.swap_remove(0), fl, true);
        }
        if p.evaluations >= opts.max_evaluations {
            return (simplex.swap_remove(0), fl, false);
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64, p: &Problem<'_, F>| {
            let mut x: Vec<f64> = centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect();
            p.clamp(&mut x);
            x
        };

        let xr = along(1.0, p);
        let fr = p.eval(&xr);
        if fr < values[0] {
            let xe = along(2.0, p);
            let fe = p.eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let x = along(0.5, p);
            let v = p.eval(&x);
            (x, v)
        } else {
            let x = along(-0.5, p);
            let v = p.eval(&x);
            (x, v)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=n {
            let x: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            values[i] = p.eval(&x);
            simplex[i] = x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let opts = NelderMeadOptions::new(vec![0.5, 0.5]);
        let m = minimize(rosenbrock, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &opts);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn respects_bounds() {
        let opts = NelderMeadOptions::new(vec![0.1]);
        let m = minimize(|x| (x[0] - 3.0).powi(2), &[0.0], &[-1.0], &[1.0], &opts);
        assert!((m.x[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_non_finite_values() {
        let opts = NelderMeadOptions::new(vec![0.5]);
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.2).powi(2) };
        let m = minimize(f, &[1.0], &[-2.0], &[2.0], &opts);
        assert!((m.x[0] - 0.2).abs() < 1e-6);
        assert!(m.value.is_finite());
    }

    #[test]
    fn budget_exhaustion_reports_not_converged() {
        let mut opts = NelderMeadOptions::new(vec![0.5, 0.5]);
        opts.max_evaluations = 10;
        let m = minimize(rosenbrock, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &opts);
        assert!(!m.converged);
        assert!(m.value.is_finite());
    }

    #[test]
    fn seeded_runs_repeat() {
        let mut opts = NelderMeadOptions::new(vec![0.3, 0.3]);
        opts.seed = 11;
        let a = minimize(rosenbrock, &[0.0, 0.0], &[-5.0, -5.0], &[5.0, 5.0], &opts);
        let b = minimize(rosenbrock, &[0.0, 0.0], &[-5.0, -5.0], &[5.0, 5.0], &opts);
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn best_value_never_increases(
            cx in -3.0f64..3.0, cy in -3.0f64..3.0, x0 in -4.0f64..4.0, y0 in -4.0f64..4.0,
        ) {
            let f = |x: &[f64]| (x[0] - cx).powi(2) + 3.0 * (x[1] - cy).powi(2) + x[0] * x[1] * 0.5;
            let m = minimize(f, &[x0, y0], &[-5.0, -5.0], &[5.0, 5.0], &NelderMeadOptions::new(vec![0.4, 0.4]));
            for w in m.trace.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }
}
