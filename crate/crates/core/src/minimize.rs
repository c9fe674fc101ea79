//! Bounded derivative-free scalar minimization.
//!
//! A coarse scan picks the bracket holding the smallest sampled value, Brent's
//! golden-section/parabolic method refines it, and a few symmetric
//! three-point parabolic steps polish the abscissa below the `sqrt(eps)`
//! floor that comparison-based search cannot beat.

use crate::{Error, Result};

const GOLDEN: f64 = 0.381_966_011_250_105_1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Absolute tolerance on the abscissa.
    pub xtol: f64,
    /// Iteration budget for the Brent stage.
    pub max_iter: usize,
    /// Number of intervals in the initial scan.
    pub scan_points: usize,
    /// Run the parabolic polish after Brent.
    pub polish: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            xtol: 1e-12,
            max_iter: 200,
            scan_points: 48,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

fn eval<F>(f: &mut F, x: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let v = f(x)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { x })
    }
}

/// Minimizes `f` on `[lo, hi]`.
pub fn minimize_bounded<F>(mut f: F, lo: f64, hi: f64, opts: &MinimizeOptions) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter {
            name: "interval",
            reason: format!("[{lo}, {hi}] is not a finite nonempty interval"),
        });
    }
    let n = opts.scan_points.max(2);
    let step = (hi - lo) / n as f64;
    let mut best = (0usize, f64::INFINITY);
    let mut ends = [0.0; 2];
    for i in 0..=n {
        let x = if i == n { hi } else { lo + step * i as f64 };
        let v = eval(&mut f, x)?;
        if i == 0 {
            ends[0] = v;
        } else if i == n {
            ends[1] = v;
        }
        if v < best.1 {
            best = (i, v);
        }
    }
    let a = lo + step * best.0.saturating_sub(1) as f64;
    let b = if best.0 + 1 >= n {
        hi
    } else {
        lo + step * (best.0 + 1) as f64
    };

    let mut m = brent(&mut f, a, b, opts.xtol, opts.max_iter)?;
    if opts.polish {
        m = polish(&mut f, m, lo, hi)?;
    }
    // Brent stops a tolerance away from the bracket ends.
    for (x, v) in [(lo, ends[0]), (hi, ends[1])] {
        if v < m.value {
            m = Minimum {
                x,
                value: v,
                iterations: m.iterations,
            };
        }
    }
    Ok(m)
}

fn brent<F>(f: &mut F, mut a: f64, mut b: f64, xtol: f64, max_iter: usize) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = eval(f, x)?;
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);

    for iter in 1..=max_iter {
        let mid = 0.5 * (a + b);
        let tol1 = sqrt_eps * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            return Ok(Minimum {
                x,
                value: fx,
                iterations: iter,
            });
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut qq = (x - v) * (fx - fw);
            let mut p = (x - v) * qq - (x - w) * r;
            qq = 2.0 * (qq - r);
            if qq > 0.0 {
                p = -p;
            } else {
                qq = -qq;
            }
            let e_prev = e;
            if p.abs() < (0.5 * qq * e_prev).abs() && p > qq * (a - x) && p < qq * (b - x) {
                e = d;
                d = p / qq;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(mid - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= mid { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = eval(f, u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
    })
}

/// Newton steps on the central-difference derivative with shrinking stencils.
/// Exact in one step for quadratic objectives.
fn polish<F>(f: &mut F, start: Minimum, lo: f64, hi: f64) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let scale = (hi - lo).abs();
    let mut best = start;
    for rel in [1e-3, 1e-4, 1e-5] {
        let h = rel * scale;
        for _ in 0..2 {
            let x = best.x;
            if x - h < lo || x + h > hi {
                return Ok(best);
            }
            let fm = eval(f, x - h)?;
            let fp = eval(f, x + h)?;
            let curvature = fp - 2.0 * best.value + fm;
            if !(curvature > 0.0) {
                return Ok(best);
            }
            let shift = -0.5 * h * (fp - fm) / curvature;
            if shift.abs() > h {
                break;
            }
            let x_new = x + shift;
            let f_new = eval(f, x_new)?;
            let noise = 16.0 * f64::EPSILON * best.value.abs().max(f_new.abs());
            if f_new <= best.value + noise {
                best = Minimum {
                    x: x_new,
                    value: f_new,
                    iterations: best.iterations,
                };
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimum_is_exact() {
        let m = minimize_bounded(
            |x| Ok(3.0 * (x - 0.123_456_789).powi(2) + 0.5),
            -1.0,
            1.0,
            &MinimizeOptions::default(),
        )
        .unwrap();
        assert!((m.x - 0.123_456_789).abs() < 1e-12, "{}", m.x);
        assert_eq!(m.value, 3.0 * (m.x - 0.123_456_789).powi(2) + 0.5);
    }

    #[test]
    fn non_quadratic_minimum() {
        // minimum of x^4 - 3x + cosh(x) near 0.75
        let f = |x: f64| 4.0 * x.powi(3) - 3.0 + x.sinh();
        let m = minimize_bounded(
            |x| Ok(x.powi(4) - 3.0 * x + x.cosh()),
            -2.0,
            3.0,
            &MinimizeOptions::default(),
        )
        .unwrap();
        assert!(f(m.x).abs() < 1e-8, "derivative {}", f(m.x));
    }

    #[test]
    fn boundary_minimum() {
        let m = minimize_bounded(Ok, 0.5, 2.0, &MinimizeOptions::default()).unwrap();
        assert!((m.x - 0.5).abs() < 1e-9);
    }

    #[test]
    fn picks_global_of_two_wells() {
        let f = |x: f64| Ok((x * x - 1.0).powi(2) + 0.3 * x);
        let m = minimize_bounded(f, -2.0, 2.0, &MinimizeOptions::default()).unwrap();
        assert!(m.x < 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            minimize_bounded(|_| Ok(f64::NAN), 0.0, 1.0, &MinimizeOptions::default()),
            Err(Error::NonFinite { .. })
        ));
        assert!(minimize_bounded(Ok, 1.0, 0.0, &MinimizeOptions::default()).is_err());
        let opts = MinimizeOptions {
            max_iter: 2,
            ..Default::default()
        };
        assert!(matches!(
            minimize_bounded(|x| Ok((x - 0.3).powi(2)), 0.0, 1.0, &opts),
            Err(Error::NoConvergence { .. })
        ));
    }
}
