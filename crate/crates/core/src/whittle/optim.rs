//! Derivative-free simplex search followed by a quasi-Newton polish with
//! central-difference gradients. Both stages only ever accept strict
//! improvements, so the best objective value is non-increasing across the
//! combined trace.

/// Nelder–Mead coefficients: reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5.
const NM_ALPHA: f64 = 1.0;
const NM_GAMMA: f64 = 2.0;
const NM_RHO: f64 = 0.5;
const NM_SIGMA: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct NmOptions {
    pub max_iter: usize,
    /// Convergence: successive objective decrease below this ...
    pub f_tol: f64,
    /// ... and simplex diameter below this.
    pub x_tol: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions {
            max_iter: 2000,
            f_tol: 1e-10,
            x_tol: 1e-8,
        }
    }
}

pub fn nelder_mead<F>(f: F, x0: &[f64], opts: &NmOptions) -> OptimResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n >= 1);
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let delta = if v[i].abs() > 1e-8 {
            0.05 * v[i].abs()
        } else {
            0.05
        };
        v[i] += delta;
        simplex.push(v);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut trace = Vec::with_capacity(opts.max_iter.min(4096));
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| {
            fv[a]
                .partial_cmp(&fv[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let sorted: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let sorted_f: Vec<f64> = order.iter().map(|&i| fv[i]).collect();
        simplex = sorted;
        fv = sorted_f;
        trace.push(fv[0]);

        let f_range = fv[n] - fv[0];
        let diameter = (1..=n)
            .map(|i| {
                simplex[0]
                    .iter()
                    .zip(&simplex[i])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0f64, f64::max);
        if f_range.abs() < opts.f_tol && diameter < opts.x_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let reflect: Vec<f64> = (0..n)
            .map(|j| centroid[j] + NM_ALPHA * (centroid[j] - simplex[n][j]))
            .collect();
        let fr = f(&reflect);

        if fr < fv[0] {
            let expand: Vec<f64> = (0..n)
                .map(|j| centroid[j] + NM_GAMMA * (reflect[j] - centroid[j]))
                .collect();
            let fe = f(&expand);
            if fe < fr {
                simplex[n] = expand;
                fv[n] = fe;
            } else {
                simplex[n] = reflect;
                fv[n] = fr;
            }
        } else if fr < fv[n - 1] {
            simplex[n] = reflect;
            fv[n] = fr;
        } else {
            let (contract, fc) = if fr < fv[n] {
                let c: Vec<f64> = (0..n)
                    .map(|j| centroid[j] + NM_RHO * (reflect[j] - centroid[j]))
                    .collect();
                let v = f(&c);
                (c, v)
            } else {
                let c: Vec<f64> = (0..n)
                    .map(|j| centroid[j] - NM_RHO * (centroid[j] - simplex[n][j]))
                    .collect();
                let v = f(&c);
                (c, v)
            };
            if fc < fv[n].min(fr) {
                simplex[n] = contract;
                fv[n] = fc;
            } else {
                // shrink toward the best vertex
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = simplex[0][j] + NM_SIGMA * (simplex[i][j] - simplex[0][j]);
                    }
                    fv[i] = f(&simplex[i]);
                }
            }
        }
    }

    let best = fv
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0);
    trace.push(fv[best]);
    OptimResult {
        x: simplex[best].clone(),
        fx: fv[best],
        iterations,
        converged,
        trace,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Central-difference step per coordinate: step_rel · (1 + |x_i|).
    pub step_rel: f64,
    pub grad_tol: f64,
    pub f_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iter: 200,
            step_rel: 1e-6,
            grad_tol: 1e-9,
            f_tol: 1e-12,
        }
    }
}

pub fn central_gradient<F>(f: &F, x: &[f64], step_rel: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut xp = x.to_vec();
    for i in 0..n {
        let h = step_rel * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// BFGS with an inverse-Hessian approximation and Armijo backtracking.
/// Steps that fail to decrease the objective are rejected, keeping the
/// trace monotone.
pub fn bfgs<F>(f: F, x0: &[f64], opts: &BfgsOptions) -> OptimResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut h: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut g = central_gradient(&f, &x, opts.step_rel);
    let mut trace = vec![fx];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let gnorm = g.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        if gnorm < opts.grad_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        // direction d = −H g
        let mut d: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| h[i][j] * g[j]).sum::<f64>())
            .collect();
        let descent: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if descent >= 0.0 {
            // reset to steepest descent if the approximation went bad
            for (di, gi) in d.iter_mut().zip(&g) {
                *di = -gi;
            }
            for i in 0..n {
                for j in 0..n {
                    h[i][j] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();

        // Armijo backtracking
        let mut step = 1.0f64;
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = fx;
        for _ in 0..40 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            f_new = f(&x_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || f_new >= fx {
            converged = gnorm < 1e-6 * (1.0 + fx.abs());
            break;
        }

        let g_new = central_gradient(&f, &x_new, opts.step_rel);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let s_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-12 * s_norm * y_norm {
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| h[i][j] * y[j]).sum::<f64>())
                .collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                        + rho * rho * yhy * s[i] * s[j]
                        + rho * s[i] * s[j];
                }
            }
        }

        let decrease = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(fx);
        if decrease < opts.f_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
    }

    OptimResult {
        x,
        fx,
        iterations,
        converged,
        trace,
    }
}
