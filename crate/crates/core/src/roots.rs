//! Bracketing root search on a sampled interval.

use crate::error::{Error, Result};

/// Bisection on `[lo, hi]` where `f(lo)` and `f(hi)` differ in sign.
///
/// Stops once `|f(mid)| < tol_f` or the bracket cannot be split further in
/// floating point. Returns the abscissa and the residual there.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, tol_f: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok((lo, 0.0));
    }
    if f_hi == 0.0 {
        return Ok((hi, 0.0));
    }
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket {
            lo,
            hi,
            detail: format!("no sign change (f(lo) = {f_lo:e}, f(hi) = {f_hi:e})"),
        });
    }
    let mut best = if f_lo.abs() < f_hi.abs() {
        (lo, f_lo)
    } else {
        (hi, f_hi)
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid.abs() < best.1.abs() {
            best = (mid, f_mid);
        }
        if f_mid.abs() < tol_f {
            return Ok((mid, f_mid));
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Sub-intervals of `grid` whose endpoint values of `f` differ in sign.
///
/// Between two samples where the discrete slope changes sign (a local
/// extremum), the interval is resampled `refine` times more finely so that
/// close root pairs hidden inside one grid cell are still bracketed.
pub fn sign_change_brackets<F>(f: F, grid: &[f64], refine: usize) -> Vec<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut out = Vec::new();
    for i in 0..grid.len().saturating_sub(1) {
        let (a, b) = (grid[i], grid[i + 1]);
        let (fa, fb) = (vals[i], vals[i + 1]);
        let extremum_nearby = refine > 1
            && ((i > 0 && (vals[i] - vals[i - 1]).signum() != (fb - fa).signum())
                || (i + 2 < grid.len() && (fb - fa).signum() != (vals[i + 2] - fb).signum()));
        if extremum_nearby {
            let mut xa = a;
            let mut ya = fa;
            for k in 1..=refine {
                let xb = if k == refine {
                    b
                } else {
                    a + (b - a) * k as f64 / refine as f64
                };
                let yb = if k == refine { fb } else { f(xb) };
                if changes_sign(ya, yb) {
                    out.push((xa, xb));
                }
                xa = xb;
                ya = yb;
            }
        } else if changes_sign(fa, fb) {
            out.push((a, b));
        }
    }
    out
}

fn changes_sign(a: f64, b: f64) -> bool {
    // a zero at the left end counts, one at the right end belongs to the next cell
    a.is_finite() && b.is_finite() && (a == 0.0 || (b != 0.0 && (a < 0.0) != (b < 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_cubic() {
        let (x, r) = bisect(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((x - 2f64.cbrt()).abs() < 1e-14);
        assert!(r.abs() < 1e-13);
    }

    #[test]
    fn bisect_requires_bracket() {
        assert!(matches!(
            bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(Error::Bracket { .. })
        ));
    }

    #[test]
    fn close_pair_inside_one_cell_is_found() {
        // roots at 0.500 and 0.501 both inside the cell [0, 1]
        let f = |x: f64| (x - 0.5) * (x - 0.501);
        let grid = [-1.0, 0.0, 1.0, 2.0];
        assert!(sign_change_brackets(f, &grid, 1).is_empty());
        let b = sign_change_brackets(f, &grid, 4096);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn root_on_grid_point_counted_once() {
        let b = sign_change_brackets(|x| x, &[-1.0, 0.0, 1.0], 1);
        assert_eq!(b.len(), 1);
    }
}
