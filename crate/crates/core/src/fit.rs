//! Small dense Levenberg-Marquardt solver used by the lineshape fits.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Root-mean-square residual at the solution.
    pub rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative step size below which the iteration stops.
    pub step_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 500,
            step_tol: 1e-13,
        }
    }
}

fn cost(r: &DVector<f64>) -> f64 {
    r.norm_squared()
}

/// Minimizes the sum of squared residuals.
///
/// `residuals(p, out)` fills `out` (length `m`). `scales` gives a typical
/// magnitude per parameter, used for finite-difference steps and the
/// convergence test.
pub fn levenberg_marquardt<F>(
    residuals: F,
    m: usize,
    p0: &[f64],
    scales: &[f64],
    opts: LmOptions,
) -> LmResult
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = p0.len();
    let eval = |p: &[f64]| {
        let mut out = vec![0.0; m];
        residuals(p, &mut out);
        DVector::from_vec(out)
    };
    let jacobian = |p: &[f64]| {
        let mut jac = DMatrix::zeros(m, n);
        let mut q = p.to_vec();
        for j in 0..n {
            let h = 1e-7 * p[j].abs().max(scales[j]);
            q[j] = p[j] + h;
            let up = eval(&q);
            q[j] = p[j] - h;
            let down = eval(&q);
            q[j] = p[j];
            jac.set_column(j, &((up - down) / (2.0 * h)));
        }
        jac
    };

    let mut p = p0.to_vec();
    let mut r = eval(&p);
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    if !c.is_finite() {
        return LmResult {
            params: p,
            rms: f64::INFINITY,
            iterations,
            converged,
        };
    }

    while iterations < opts.max_iterations {
        iterations += 1;
        let jac = jacobian(&p);
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * &r;
        let mut improved = false;
        // raise the damping until a step lowers the cost
        for _ in 0..40 {
            let mut damped = a.clone();
            for k in 0..n {
                damped[(k, k)] += lambda * a[(k, k)].max(1e-300);
            }
            let Some(step) = damped.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            let rt = eval(&trial);
            let ct = cost(&rt);
            if ct.is_finite() && ct <= c {
                let small = step
                    .iter()
                    .zip(&p)
                    .zip(scales)
                    .all(|((d, x), s)| d.abs() <= opts.step_tol * (x.abs() + s));
                let flat = c - ct <= 1e-15 * c;
                p = trial;
                r = rt;
                c = ct;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if small || flat {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            // no downhill step at any damping: a (local) minimum
            converged = true;
        }
        if converged {
            break;
        }
    }

    LmResult {
        params: p,
        rms: (c / m as f64).sqrt(),
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exponential_decay() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * (-1.3 * x).exp() + 0.2).collect();
        let r = levenberg_marquardt(
            |p, out| {
                for (o, (x, y)) in out.iter_mut().zip(xs.iter().zip(&ys)) {
                    *o = p[0] * (-p[1] * x).exp() + p[2] - y;
                }
            },
            xs.len(),
            &[1.0, 0.5, 0.0],
            &[1.0, 1.0, 1.0],
            LmOptions::default(),
        );
        assert!(r.converged);
        assert!((r.params[0] - 2.5).abs() < 1e-8);
        assert!((r.params[1] - 1.3).abs() < 1e-8);
        assert!((r.params[2] - 0.2).abs() < 1e-8);
        assert!(r.rms < 1e-10);
    }
}
