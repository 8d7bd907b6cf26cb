//! Asymptotic covariance of the local Whittle estimator, curvature of the
//! causality measure, and the test statistics for the local non-causality
//! hypothesis.
//!
//! The estimator covariance follows the sandwich form V = M⁻¹ Vᶿ M⁻¹ with
//! Vᶿ_ab = 4π ∫K² · ∫ Tr[f ∂_a f_θ⁻¹ f ∂_b f_θ⁻¹] dλ evaluated with the
//! plug-in f = f_θ, and M the Hessian of the population divergence. The
//! fourth-order innovation cumulant contribution vanishes for Gaussian
//! innovations and is zero by default; a hook accepts an evaluator for
//! non-Gaussian work.

pub mod chisq;

use std::f64::consts::PI;

use serde::Serialize;

use crate::causality::{gc_measure, Partition};
use crate::cxla::{cdet, cinv, CMat, RMat, C64};
use crate::error::{LgcError, Result};
use crate::procsim::CounterRng;
use crate::spectra::{var_spectral_density, FreqGrid, VarParams};
use crate::whittle::{kernel_l2, KernelSpec, WhittleFit};

pub use chisq::{chisq_cdf, chisq_quantile, gamma_p};

/// Significance levels reported by every test.
pub const LEVELS: [f64; 4] = [0.01, 0.05, 0.10, 0.15];

/// Fourth-order spectral density of the innovations,
/// γ̃_{rtvw}(λ₁, λ₂, λ₃); zero for Gaussian processes.
pub trait FourthOrderSpectrum: Sync {
    #[allow(clippy::too_many_arguments)]
    fn eval(&self, r: usize, t: usize, v: usize, w: usize, l1: f64, l2: f64, l3: f64) -> C64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StatKind {
    SDagger,
    STildeDagger,
    SWald,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Reference {
    ChiSq { df: usize },
    QuadraticForm,
}

/// One test outcome at a rescaled time.
#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub at_u: f64,
    pub statistic: f64,
    pub kind: StatKind,
    pub reference: Reference,
    pub p_value: Option<f64>,
    /// (level, reject) pairs at the standard levels.
    pub reject_at: Vec<(f64, bool)>,
}

fn chisq_decisions(statistic: f64, df: usize) -> Result<(f64, Vec<(f64, bool)>)> {
    let p_value = 1.0 - chisq_cdf(df, statistic);
    let mut reject = Vec::with_capacity(LEVELS.len());
    for &alpha in &LEVELS {
        let critical = chisq_quantile(df, 1.0 - alpha)?;
        reject.push((alpha, statistic > critical));
    }
    Ok((p_value, reject))
}

// ---------------------------------------------------------------------------
// Plug-in covariance and curvature
// ---------------------------------------------------------------------------

fn finite_diff_inverse_densities(params: &VarParams, grid: &FreqGrid) -> Result<Vec<Vec<CMat>>> {
    let theta = params.theta();
    let p = params.p();
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let h = 1e-5 * (1.0 + theta[i].abs());
        let mut tp = theta.clone();
        tp[i] = theta[i] + h;
        let plus = VarParams::from_theta_unchecked(p, &tp)?;
        tp[i] = theta[i] - h;
        let minus = VarParams::from_theta_unchecked(p, &tp)?;
        let mut per_node = Vec::with_capacity(grid.len());
        for &lambda in grid.nodes() {
            let ip = cinv(&var_spectral_density(&plus, lambda)?)?;
            let im = cinv(&var_spectral_density(&minus, lambda)?)?;
            per_node.push(ip.sub(&im).scale(C64::new(0.5 / h, 0.0)));
        }
        out.push(per_node);
    }
    Ok(out)
}

// population divergence with the true spectrum frozen at `f_true`
fn divergence_at(theta: &[f64], p: usize, f_true: &[CMat], grid: &FreqGrid) -> Result<f64> {
    let params = VarParams::from_theta_unchecked(p, theta)?;
    let w = grid.weight();
    let mut total = 0.0;
    for (f0, &lambda) in f_true.iter().zip(grid.nodes()) {
        let f_model = var_spectral_density(&params, lambda)?;
        let det = cdet(&f_model).re;
        if det <= 0.0 {
            return Err(LgcError::SingularMatrix(format!(
                "model determinant {det} at λ = {lambda}"
            )));
        }
        total += w * (det.ln() + f0.mul(&cinv(&f_model)?).trace().re);
    }
    Ok(total)
}

fn hessian_central(
    mut f: impl FnMut(&[f64]) -> Result<f64>,
    theta: &[f64],
    step_rel: f64,
) -> Result<RMat> {
    let d = theta.len();
    let h: Vec<f64> = theta.iter().map(|t| step_rel * (1.0 + t.abs())).collect();
    let f0 = f(theta)?;
    let mut hess = RMat::zeros(d, d);
    let mut x = theta.to_vec();
    for i in 0..d {
        x[i] = theta[i] + h[i];
        let fp = f(&x)?;
        x[i] = theta[i] - h[i];
        let fm = f(&x)?;
        x[i] = theta[i];
        hess.set(i, i, (fp - 2.0 * f0 + fm) / (h[i] * h[i]));
    }
    for i in 0..d {
        for j in (i + 1)..d {
            x[i] = theta[i] + h[i];
            x[j] = theta[j] + h[j];
            let fpp = f(&x)?;
            x[j] = theta[j] - h[j];
            let fpm = f(&x)?;
            x[i] = theta[i] - h[i];
            x[j] = theta[j] + h[j];
            let fmp = f(&x)?;
            x[j] = theta[j] - h[j];
            let fmm = f(&x)?;
            x[i] = theta[i];
            x[j] = theta[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess.set(i, j, v);
            hess.set(j, i, v);
        }
    }
    Ok(hess)
}

/// Plug-in asymptotic covariance V(u) = M⁻¹ Vᶿ M⁻¹ of √(T b_T)(θ̂ − θ₀),
/// with the fourth-order cumulant term set to zero (Gaussian innovations).
pub fn asymptotic_variance(
    params: &VarParams,
    kernel: &KernelSpec,
    grid: &FreqGrid,
) -> Result<RMat> {
    asymptotic_variance_with_cumulant(params, kernel, grid, None)
}

/// Same, with an optional fourth-order innovation spectrum added to Vᶿ.
pub fn asymptotic_variance_with_cumulant(
    params: &VarParams,
    kernel: &KernelSpec,
    grid: &FreqGrid,
    fourth_order: Option<&dyn FourthOrderSpectrum>,
) -> Result<RMat> {
    let theta = params.theta();
    let d = theta.len();
    let p = params.p();
    let w = grid.weight();
    let k2 = kernel_l2(kernel);

    let f_true: Vec<CMat> = grid
        .nodes()
        .iter()
        .map(|&l| var_spectral_density(params, l))
        .collect::<Result<_>>()?;
    let dfinv = finite_diff_inverse_densities(params, grid)?;

    let mut v_theta = RMat::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let mut acc = 0.0;
            for (j, f0) in f_true.iter().enumerate() {
                acc += w * f0.mul(&dfinv[a][j]).mul(f0).mul(&dfinv[b][j]).trace().re;
            }
            let mut vab = 4.0 * PI * k2 * acc;
            if let Some(gamma) = fourth_order {
                vab += 4.0 * PI * k2 * fourth_order_term(params, grid, gamma, a, b)?;
            }
            v_theta.set(a, b, vab);
            v_theta.set(b, a, vab);
        }
    }

    // Hessian of the population divergence at θ, truth frozen at f_θ
    let m = hessian_central(|t| divergence_at(t, p, &f_true, grid), &theta, 1e-4)?.symmetrize();
    let (eigs, _) = m.sym_eigen()?;
    let max_abs = eigs.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    let min_abs = eigs.iter().fold(f64::INFINITY, |acc, e| acc.min(e.abs()));
    if !(min_abs > 0.0) || max_abs / min_abs > 1e10 {
        return Err(LgcError::SingularMatrix(format!(
            "divergence Hessian condition {:.3e}",
            max_abs / min_abs
        )));
    }
    let m_inv = m.inverse()?;
    let v = m_inv.mul(&v_theta).mul(&m_inv).symmetrize();

    // clamp tiny negative eigenvalues so V is PSD
    let (vals, vecs) = v.sym_eigen()?;
    let clamped = RMat::from_fn(d, d, |i, j| {
        (0..d)
            .map(|k| vecs.get(i, k) * vals[k].max(0.0) * vecs.get(j, k))
            .sum()
    });
    Ok(clamped.symmetrize())
}

// (1/2) Σ_{rtvw} ∫∫ ∂_a f^{rt}(λ₁) ∂_b f^{vw}(λ₂) γ̃_{rtvw}(−λ₁, λ₂, −λ₂) dλ₁ dλ₂
fn fourth_order_term(
    params: &VarParams,
    grid: &FreqGrid,
    gamma: &dyn FourthOrderSpectrum,
    a: usize,
    b: usize,
) -> Result<f64> {
    let p = params.p();
    let theta = params.theta();
    let w = grid.weight();
    let mut dfa: Vec<CMat> = Vec::with_capacity(grid.len());
    let mut dfb: Vec<CMat> = Vec::with_capacity(grid.len());
    for (i, out) in [(a, &mut dfa), (b, &mut dfb)] {
        let h = 1e-5 * (1.0 + theta[i].abs());
        let mut tp = theta.clone();
        tp[i] = theta[i] + h;
        let plus = VarParams::from_theta_unchecked(p, &tp)?;
        tp[i] = theta[i] - h;
        let minus = VarParams::from_theta_unchecked(p, &tp)?;
        for &lambda in grid.nodes() {
            let ip = cinv(&var_spectral_density(&plus, lambda)?)?;
            let im = cinv(&var_spectral_density(&minus, lambda)?)?;
            out.push(ip.sub(&im).scale(C64::new(0.5 / h, 0.0)));
        }
    }
    let mut acc = C64::new(0.0, 0.0);
    for (j1, &l1) in grid.nodes().iter().enumerate() {
        for (j2, &l2) in grid.nodes().iter().enumerate() {
            for r in 0..p {
                for t in 0..p {
                    for v in 0..p {
                        for wi in 0..p {
                            acc += dfa[j1].get(r, t)
                                * dfb[j2].get(v, wi)
                                * gamma.eval(r, t, v, wi, -l1, l2, -l2)
                                * w
                                * w;
                        }
                    }
                }
            }
        }
    }
    Ok(0.5 * acc.re)
}

/// Curvature H(u) = (1/2π) ∫ ∂²FGC/∂θ∂θᵀ dλ by central second differences
/// (step 1e-4·(1+|θᵢ|)), symmetrized. Differencing the frequency average is
/// identical to averaging the per-frequency differences.
pub fn curvature_h(params: &VarParams, part: &Partition, grid: &FreqGrid) -> Result<RMat> {
    let theta = params.theta();
    let p = params.p();
    hessian_central(
        |t| {
            let pr = VarParams::from_theta_unchecked(p, t)?;
            Ok(gc_measure(&pr, part, grid)?.gc)
        },
        &theta,
        1e-4,
    )
    .map(|h| h.symmetrize())
}

// ---------------------------------------------------------------------------
// Test statistics
// ---------------------------------------------------------------------------

/// Closed-form bivariate statistic with a χ²₁ null reference:
/// S̃† = T b_T · s₁₁⁴ (∫K²)⁻¹ / [(1 + a₁₁² − 2 a₁₁ a₂₂)(s₁₁s₂₂ − s₁₂²)²] · GC(θ̂).
/// The coefficient factors are invariant to the sign convention of a.
pub fn stat_tilde_dagger(
    fit: &WhittleFit,
    kernel: &KernelSpec,
    t_len: usize,
    grid: &FreqGrid,
) -> Result<TestResult> {
    let params = &fit.theta_hat;
    if params.p() != 2 {
        return Err(LgcError::Dimension(format!(
            "S̃† requires a bivariate model, got p = {}",
            params.p()
        )));
    }
    let part = Partition::new(1, 1)?;
    let gc = gc_measure(params, &part, grid)?.gc;
    let a11 = params.a().get(0, 0);
    let a22 = params.a().get(1, 1);
    let s11 = params.s().get(0, 0);
    let s12 = params.s().get(0, 1);
    let s22 = params.s().get(1, 1);
    let det_s = s11 * s22 - s12 * s12;
    if det_s <= 0.0 || s11 <= 0.0 {
        return Err(LgcError::SingularMatrix(format!(
            "innovation covariance determinant {det_s}"
        )));
    }
    let multiplier =
        s11.powi(4) / ((1.0 + a11 * a11 - 2.0 * a11 * a22) * det_s * det_s * kernel_l2(kernel));
    let statistic = t_len as f64 * kernel.bandwidth() * multiplier * gc;
    let (p_value, reject_at) = chisq_decisions(statistic, 1)?;
    Ok(TestResult {
        at_u: fit.at_u,
        statistic,
        kind: StatKind::STildeDagger,
        reference: Reference::ChiSq { df: 1 },
        p_value: Some(p_value),
        reject_at,
    })
}

/// General statistic S† = 2 T b_T · GC(θ̂), referenced against the
/// quadratic form Zᵀ H Z with Z ~ N(0, V). The p-value is Monte Carlo:
/// `draws` samples of the quadratic form, deterministic given `seed`.
#[allow(clippy::too_many_arguments)]
pub fn stat_dagger(
    fit: &WhittleFit,
    part: &Partition,
    kernel: &KernelSpec,
    t_len: usize,
    grid: &FreqGrid,
    v: &RMat,
    h: &RMat,
    draws: usize,
    seed: u64,
) -> Result<TestResult> {
    let params = &fit.theta_hat;
    let gc = gc_measure(params, part, grid)?.gc;
    let statistic = 2.0 * t_len as f64 * kernel.bandwidth() * gc;
    let d = v.rows();
    if h.rows() != d || !v.is_square() || !h.is_square() {
        return Err(LgcError::Dimension(
            "covariance and curvature must be square of equal size".into(),
        ));
    }
    if draws == 0 {
        return Err(LgcError::Domain("draws must be positive".into()));
    }
    let v_sqrt = v.psd_sqrt()?;
    let mut rng = CounterRng::new(seed, 0xD1A6);
    let mut exceed = 0usize;
    let mut z = vec![0.0f64; d];
    for _ in 0..draws {
        for zi in z.iter_mut() {
            *zi = rng.next_gaussian();
        }
        let x = v_sqrt.mul_vec(&z);
        let hx = h.mul_vec(&x);
        let q: f64 = x.iter().zip(&hx).map(|(xi, hi)| xi * hi).sum();
        if q >= statistic {
            exceed += 1;
        }
    }
    let p_value = exceed as f64 / draws as f64;
    let reject_at = LEVELS
        .iter()
        .map(|&alpha| (alpha, p_value < alpha))
        .collect();
    Ok(TestResult {
        at_u: fit.at_u,
        statistic,
        kind: StatKind::SDagger,
        reference: Reference::QuadraticForm,
        p_value: Some(p_value),
        reject_at,
    })
}

/// Wald statistic for the positive-value null GC = c:
/// S* = T b_T (GC − c)² / (∇GCᵀ V ∇GC), referenced against χ²_d.
#[allow(clippy::too_many_arguments)]
pub fn stat_wald(
    fit: &WhittleFit,
    part: &Partition,
    c: f64,
    gc_grad: &[f64],
    v: &RMat,
    t_len: usize,
    kernel: &KernelSpec,
    grid: &FreqGrid,
) -> Result<TestResult> {
    if !(c > 0.0) {
        return Err(LgcError::Domain(format!(
            "the Wald test requires c > 0, got {c}"
        )));
    }
    let d = gc_grad.len();
    if v.rows() != d || !v.is_square() {
        return Err(LgcError::Dimension(format!("covariance must be {d}×{d}")));
    }
    let grad_norm = gc_grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if grad_norm <= 1e-8 {
        return Err(LgcError::ZeroGradient(format!(
            "‖∇GC‖ = {grad_norm:.3e}; use the centralized statistic instead"
        )));
    }
    let gc = gc_measure(&fit.theta_hat, part, grid)?.gc;
    let vg = v.mul_vec(gc_grad);
    let denom: f64 = gc_grad.iter().zip(&vg).map(|(a, b)| a * b).sum();
    if !(denom > 1e-300) {
        return Err(LgcError::SingularMatrix(format!(
            "∇GCᵀ V ∇GC = {denom:.3e}"
        )));
    }
    let diff = gc - c;
    let statistic = t_len as f64 * kernel.bandwidth() * diff * diff / denom;
    let (p_value, reject_at) = chisq_decisions(statistic, d)?;
    Ok(TestResult {
        at_u: fit.at_u,
        statistic,
        kind: StatKind::SWald,
        reference: Reference::ChiSq { df: d },
        p_value: Some(p_value),
        reject_at,
    })
}
