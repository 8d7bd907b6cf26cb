//! Kernel machinery, spectral divergence, its sample analogue built from
//! kernel-weighted pre-periodograms, and the local Whittle fit.
//!
//! The sample objective at rescaled time u is
//!
//!   L_T(θ, u) = Σ_k w_k Σ_j g_j [ log det f_θ(λ_j) + Tr( I_T(u_k, λ_j) f_θ(λ_j)⁻¹ ) ]
//!
//! with kernel weights w_k = K((u − k/T)/b)/(T b) and rectangle-rule weights
//! g_j. The kernel-weighted pre-periodogram aggregate is computed once per
//! (panel, u) and reused across every θ evaluation; for the VAR family the
//! trace part collapses onto two weighted lag moments, which makes a single
//! evaluation O(N) regardless of T.

pub mod optim;

use std::f64::consts::PI;

use serde::Serialize;

use crate::cxla::{cdet, cinv, CMat, RMat};
use crate::error::{LgcError, Result};
use crate::procsim::TimeSeriesPanel;
use crate::spectra::{
    lag_fourier_at_nodes, transfer_matrix, var_spectral_density, weighted_lag_products, FreqGrid,
    VarParams, STABILITY_MARGIN,
};

use optim::{bfgs, nelder_mead, BfgsOptions, NmOptions};

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KernelKind {
    Epanechnikov,
    Uniform,
    Triangular,
}

/// Smoothing kernel on [−1, 1] with a rescaled-time bandwidth b ∈ (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSpec {
    kind: KernelKind,
    bandwidth: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth <= 1.0) {
            return Err(LgcError::Domain(format!(
                "bandwidth must lie in (0, 1], got {bandwidth}"
            )));
        }
        let spec = KernelSpec { kind, bandwidth };
        spec.verify_shape()?;
        Ok(spec)
    }

    /// Default bandwidth b = 4 T^{−2/3}, a window of about 4 T^{1/3}
    /// observations, capped at 1.
    pub fn default_bandwidth(t_len: usize) -> f64 {
        (4.0 * (t_len as f64).powf(-2.0 / 3.0)).min(1.0)
    }

    pub fn epanechnikov(bandwidth: f64) -> Result<Self> {
        KernelSpec::new(KernelKind::Epanechnikov, bandwidth)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Kernel value at x; zero outside [−1, 1].
    pub fn eval(&self, x: f64) -> f64 {
        if x.abs() > 1.0 {
            return 0.0;
        }
        match self.kind {
            KernelKind::Epanechnikov => 0.75 * (1.0 - x * x),
            KernelKind::Uniform => 0.5,
            KernelKind::Triangular => 1.0 - x.abs(),
        }
    }

    // Nonnegativity, symmetry and unit mass, checked numerically at
    // construction.
    fn verify_shape(&self) -> Result<()> {
        let n = 2000usize;
        let h = 2.0 / n as f64;
        let mut mass = 0.0;
        for i in 0..=n {
            let x = -1.0 + i as f64 * h;
            let v = self.eval(x);
            if v < 0.0 {
                return Err(LgcError::Domain("kernel must be nonnegative".into()));
            }
            if (v - self.eval(-x)).abs() > 1e-12 {
                return Err(LgcError::Domain("kernel must be symmetric".into()));
            }
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            mass += w * v * h;
        }
        // trapezoid rule is exact for the polynomial kernels used here,
        // up to float accumulation
        if (mass - 1.0).abs() > 1e-6 {
            return Err(LgcError::Domain(format!(
                "kernel mass {mass} differs from 1"
            )));
        }
        Ok(())
    }
}

/// ∫_{−1}^{1} K(v)² dv, in closed form per kind.
pub fn kernel_l2(spec: &KernelSpec) -> f64 {
    match spec.kind() {
        KernelKind::Epanechnikov => 3.0 / 5.0,
        KernelKind::Uniform => 1.0 / 2.0,
        KernelKind::Triangular => 2.0 / 3.0,
    }
}

/// Unnormalized weights w_k = K((u − k/T)/b)/(T b) for k = 1..T. The sum is
/// close to 1 in the interior and deliberately smaller near the edges.
pub fn kernel_weights(spec: &KernelSpec, u: f64, t_len: usize) -> Vec<f64> {
    let b = spec.bandwidth();
    let scale = 1.0 / (t_len as f64 * b);
    (1..=t_len)
        .map(|k| scale * spec.eval((u - k as f64 / t_len as f64) / b))
        .collect()
}

// ---------------------------------------------------------------------------
// Divergences
// ---------------------------------------------------------------------------

/// Spectral divergence Σ_j g_j [log det f_θ(λ_j) + Tr(f_true(λ_j) f_θ(λ_j)⁻¹)].
pub fn spectral_divergence(
    params: &VarParams,
    f_true: impl Fn(f64) -> CMat,
    grid: &FreqGrid,
) -> Result<f64> {
    let w = grid.weight();
    let mut total = 0.0;
    for &lambda in grid.nodes() {
        let f_model = var_spectral_density(params, lambda)?;
        let f_inv = cinv(&f_model)?;
        let det = cdet(&f_model).re;
        if det <= 0.0 {
            return Err(LgcError::SingularMatrix(format!(
                "model spectrum has non-positive determinant at λ = {lambda}"
            )));
        }
        let tr = f_true(lambda).mul(&f_inv).trace().re;
        total += w * (det.ln() + tr);
    }
    Ok(total)
}

/// Kernel-weighted pre-periodogram aggregate J(λ_j) = Σ_k w_k I_T(u_k, λ_j)
/// together with the total kernel mass. Building it is the only pass over
/// the data; every objective evaluation afterwards works from it.
pub struct WeightedPeriodogram {
    pub w_sum: f64,
    pub values: Vec<CMat>,
}

pub fn weighted_pre_periodogram(
    panel: &TimeSeriesPanel,
    u: f64,
    kernel: &KernelSpec,
    grid: &FreqGrid,
) -> Result<WeightedPeriodogram> {
    if !(0.0..=1.0).contains(&u) {
        return Err(LgcError::Domain(format!("u must lie in [0,1], got {u}")));
    }
    let weights = kernel_weights(kernel, u, panel.length());
    let (w_sum, lags) = weighted_lag_products(panel, &weights);
    let values = lag_fourier_at_nodes(&lags, grid);
    Ok(WeightedPeriodogram { w_sum, values })
}

/// Sample divergence L_T(θ, u) evaluated through the weighted aggregate.
pub fn sample_divergence(
    params: &VarParams,
    panel: &TimeSeriesPanel,
    u: f64,
    kernel: &KernelSpec,
    grid: &FreqGrid,
) -> Result<f64> {
    let agg = weighted_pre_periodogram(panel, u, kernel, grid)?;
    sample_divergence_from(params, &agg, grid)
}

/// Same objective from a prebuilt aggregate (the generic matrix path).
pub fn sample_divergence_from(
    params: &VarParams,
    agg: &WeightedPeriodogram,
    grid: &FreqGrid,
) -> Result<f64> {
    let w = grid.weight();
    let mut total = 0.0;
    for (jmat, &lambda) in agg.values.iter().zip(grid.nodes()) {
        let f_model = var_spectral_density(params, lambda)?;
        let f_inv = cinv(&f_model)?;
        let det = cdet(&f_model).re;
        if det <= 0.0 {
            return Err(LgcError::SingularMatrix(format!(
                "model spectrum has non-positive determinant at λ = {lambda}"
            )));
        }
        total += w * (agg.w_sum * det.ln() + jmat.mul(&f_inv).trace().re);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Fast objective for the VAR family
// ---------------------------------------------------------------------------

/// Cached objective for one (panel, u, kernel, grid). Exploits
/// f_θ⁻¹(λ) = 2π (I + aᵀe^{iλ}) s⁻¹ (I + a e^{−iλ}): the trace part of the
/// objective reduces to the alias-folded lag moments
/// c0 = Σ_{l ≡ 0 (N)} d_l and c1 = Σ_{l ≡ −1 (N)} d_l, so one evaluation
/// costs O(N + p³). Values agree with `sample_divergence` to roundoff.
pub struct LocalObjective {
    p: usize,
    w_sum: f64,
    c0: RMat,
    c1: RMat,
    /// e^{iλ_j} per node, for the log-determinant quadrature.
    nodes_z: Vec<(f64, f64)>,
    weight: f64,
}

impl LocalObjective {
    pub fn build(
        panel: &TimeSeriesPanel,
        u: f64,
        kernel: &KernelSpec,
        grid: &FreqGrid,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&u) {
            return Err(LgcError::Domain(format!("u must lie in [0,1], got {u}")));
        }
        let p = panel.dim();
        let weights = kernel_weights(kernel, u, panel.length());
        let (w_sum, lags) = weighted_lag_products(panel, &weights);
        let n = grid.len();
        let mut c0 = RMat::zeros(p, p);
        let mut c1 = RMat::zeros(p, p);
        for (l, dl) in lags.mats.iter().enumerate() {
            // fold the symmetric lags onto residues mod N (the −l term is
            // the transpose of the l term); c1 collects residue −1
            let r = l % n;
            if r == 0 {
                c0 = c0.add(dl);
                if l > 0 {
                    c0 = c0.add(&dl.transpose());
                }
            } else {
                if r == n - 1 {
                    c1 = c1.add(dl);
                }
                if r == 1 {
                    c1 = c1.add(&dl.transpose());
                }
            }
        }
        let nodes_z = grid.nodes().iter().map(|&l| (l.cos(), l.sin())).collect();
        Ok(LocalObjective {
            p,
            w_sum,
            c0,
            c1,
            nodes_z,
            weight: grid.weight(),
        })
    }

    pub fn w_sum(&self) -> f64 {
        self.w_sum
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Kernel-weighted local lag-0 covariance, d₀ / Σw.
    pub fn local_covariance(&self) -> Option<RMat> {
        if self.w_sum > 0.0 {
            Some(self.c0.scale(1.0 / self.w_sum))
        } else {
            None
        }
    }

    /// L_T(θ, u) for the VAR family. Returns +∞ when s is not positive
    /// definite, which the optimizer treats as an infeasible point.
    pub fn value(&self, a: &RMat, s: &RMat) -> f64 {
        let p = self.p;
        let chol = match s.cholesky() {
            Ok(l) => l,
            Err(_) => return f64::INFINITY,
        };
        let mut logdet_s = 0.0;
        for i in 0..p {
            logdet_s += chol.get(i, i).ln();
        }
        let logdet_s = 2.0 * logdet_s;
        let s_inv = match s.inverse() {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        };

        // Σ_j g_j log det f_θ(λ_j)
        //   = 2π (log det s − p log 2π) − Σ_j g_j log|det(I + a e^{iλ_j})|²
        let mut logdet_b_sum = 0.0;
        if p == 2 {
            let tr = a.get(0, 0) + a.get(1, 1);
            let det = a.get(0, 0) * a.get(1, 1) - a.get(0, 1) * a.get(1, 0);
            for &(c, s_) in &self.nodes_z {
                // det(I + a z) = 1 + tr·z + det·z², z = e^{iλ}
                let re = 1.0 + tr * c + det * (c * c - s_ * s_);
                let im = tr * s_ + det * (2.0 * c * s_);
                let m2 = re * re + im * im;
                if m2 <= 0.0 {
                    return f64::INFINITY;
                }
                logdet_b_sum += m2.ln();
            }
        } else {
            for &(c, s_) in &self.nodes_z {
                let lambda = s_.atan2(c);
                let b = transfer_matrix(a, lambda);
                let m2 = cdet(&b).norm_sqr();
                if m2 <= 0.0 {
                    return f64::INFINITY;
                }
                logdet_b_sum += m2.ln();
            }
        }
        logdet_b_sum *= self.weight;
        let logdet_part = 2.0 * PI * (logdet_s - p as f64 * (2.0 * PI).ln()) - logdet_b_sum;

        // Σ_j g_j Tr(J_j f_θ⁻¹(λ_j)) = 2π Tr(s⁻¹ (c0 + a c1 + (a c1)ᵀ + a c0 aᵀ))
        // with c1 the residue −1 moment, matching (I + a e^{−iλ}) J (I + aᵀ e^{iλ})
        let ac1 = a.mul(&self.c1);
        let m = self
            .c0
            .add(&ac1)
            .add(&ac1.transpose())
            .add(&a.mul(&self.c0).mul(&a.transpose()));
        let mut trace_part = 0.0;
        for i in 0..p {
            for j in 0..p {
                trace_part += s_inv.get(i, j) * m.get(j, i);
            }
        }
        trace_part *= 2.0 * PI;

        self.w_sum * logdet_part + trace_part
    }
}

// ---------------------------------------------------------------------------
// Local Whittle fit
// ---------------------------------------------------------------------------

/// One local Whittle fit: the estimated parameters at a rescaled time,
/// the objective value reached, and convergence bookkeeping. `cov` holds a
/// plug-in asymptotic covariance when the caller requests one.
#[derive(Debug, Clone)]
pub struct WhittleFit {
    pub at_u: f64,
    pub theta_hat: VarParams,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub cov: Option<RMat>,
}

impl WhittleFit {
    /// Coefficients in the recursion convention X_t = A X_{t−1} + ε_t,
    /// i.e. A = −a.
    pub fn var_coefficients(&self) -> RMat {
        self.theta_hat.a().scale(-1.0)
    }
}

fn search_len(p: usize) -> usize {
    p * p + p * (p + 1) / 2
}

/// Search vector: a row-major, then the lower-triangular Cholesky factor of
/// s row by row, which keeps s positive semidefinite by construction.
fn to_search(params: &VarParams) -> Result<Vec<f64>> {
    let p = params.p();
    let l = params.s().cholesky()?;
    let mut x = Vec::with_capacity(search_len(p));
    for i in 0..p {
        for j in 0..p {
            x.push(params.a().get(i, j));
        }
    }
    for i in 0..p {
        for j in 0..=i {
            x.push(l.get(i, j));
        }
    }
    Ok(x)
}

fn from_search(p: usize, x: &[f64]) -> (RMat, RMat) {
    let mut a = RMat::zeros(p, p);
    let mut idx = 0;
    for i in 0..p {
        for j in 0..p {
            a.set(i, j, x[idx]);
            idx += 1;
        }
    }
    let mut l = RMat::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            l.set(i, j, x[idx]);
            idx += 1;
        }
    }
    let s = l.mul(&l.transpose());
    (a, s)
}

// quadratic penalty outside the stable region, plus a floor on the Cholesky
// diagonal so log det s stays finite
fn search_penalty(p: usize, x: &[f64], a: &RMat) -> f64 {
    let mut pen = 0.0;
    let rho = a.spectral_radius();
    let limit = 1.0 - STABILITY_MARGIN;
    if rho > limit {
        pen += 1e6 * (rho - limit) * (rho - limit);
    }
    let mut idx = p * p;
    for i in 0..p {
        for j in 0..=i {
            if i == j {
                let d = x[idx].abs();
                if d < 1e-8 {
                    pen += 1e6 * (1e-8 - d) * (1e-8 - d) * 1e16;
                }
            }
            idx += 1;
        }
    }
    pen
}

/// Default initializer: a = 0 and s = kernel-weighted local covariance at u
/// (regularized toward the identity if degenerate).
pub fn default_init(panel: &TimeSeriesPanel, u: f64, kernel: &KernelSpec) -> Result<VarParams> {
    let p = panel.dim();
    let weights = kernel_weights(kernel, u, panel.length());
    let (w_sum, lags) = weighted_lag_products(panel, &weights);
    let mut s = if w_sum > 0.0 && !lags.mats.is_empty() {
        lags.mats[0].scale(1.0 / w_sum).symmetrize()
    } else {
        RMat::identity(p)
    };
    if s.cholesky().is_err() {
        let bump = 1e-8 + 1e-3 * s.max_abs();
        s = s.add(&RMat::identity(p).scale(bump));
        if s.cholesky().is_err() {
            s = RMat::identity(p);
        }
    }
    VarParams::new(RMat::zeros(p, p), s)
}

/// Minimize L_T(·, u) over the constrained family starting from `init`.
/// Returns the fit together with the best-objective trace: simplex search
/// first, then a quasi-Newton polish.
pub fn local_whittle_fit_traced(
    panel: &TimeSeriesPanel,
    u: f64,
    kernel: &KernelSpec,
    grid: &FreqGrid,
    init: &VarParams,
) -> Result<(WhittleFit, Vec<f64>)> {
    let p = panel.dim();
    if init.p() != p {
        return Err(LgcError::Dimension(format!(
            "init has dimension {}, panel has {p}",
            init.p()
        )));
    }
    if panel.length() < 2 * p {
        return Err(LgcError::Domain(format!(
            "estimation requires T ≥ 2p = {}, got {}",
            2 * p,
            panel.length()
        )));
    }
    let objective = LocalObjective::build(panel, u, kernel, grid)?;
    if objective.w_sum() <= 0.0 {
        return Err(LgcError::Domain(format!(
            "kernel weights vanish at u = {u} with bandwidth {}",
            kernel.bandwidth()
        )));
    }
    let x0 = to_search(init)?;
    let f = |x: &[f64]| -> f64 {
        let (a, s) = from_search(p, x);
        let pen = search_penalty(p, x, &a);
        objective.value(&a, &s) + pen
    };

    let nm = nelder_mead(f, &x0, &NmOptions::default());
    let polish = bfgs(f, &nm.x, &BfgsOptions::default());
    let (best_x, best_f) = if polish.fx <= nm.fx {
        (polish.x.clone(), polish.fx)
    } else {
        (nm.x.clone(), nm.fx)
    };

    let mut trace = nm.trace.clone();
    trace.extend(polish.trace.iter().copied().filter(|v| v.is_finite()));

    let (a, s) = from_search(p, &best_x);
    let mut converged = nm.converged || polish.converged;
    // keep the reported estimate inside the closed constraint set
    let rho = a.spectral_radius();
    let limit = 1.0 - STABILITY_MARGIN;
    let a_final = if rho >= limit {
        converged = false;
        a.scale((limit - 1e-9) / rho)
    } else {
        a
    };
    let theta_hat = VarParams::new(a_final, s.symmetrize())
        .map_err(|e| LgcError::NotConverged(format!("fit left the feasible region: {e}")))?;

    if !best_f.is_finite() {
        return Err(LgcError::NotConverged(format!(
            "objective non-finite at the reported minimum ({best_f})"
        )));
    }

    Ok((
        WhittleFit {
            at_u: u,
            theta_hat,
            objective: best_f,
            converged,
            iterations: nm.iterations + polish.iterations,
            cov: None,
        },
        trace,
    ))
}

pub fn local_whittle_fit(
    panel: &TimeSeriesPanel,
    u: f64,
    kernel: &KernelSpec,
    grid: &FreqGrid,
    init: &VarParams,
) -> Result<WhittleFit> {
    local_whittle_fit_traced(panel, u, kernel, grid, init).map(|(fit, _)| fit)
}
