//! Companion-process spectra and the frequency-domain causality measure
//! between two blocks of a VAR spectral model.
//!
//! For the block pair (effect X⁽¹⁾, cause X⁽²⁾) the frequency-wise measure is
//!
//!   FGC(λ) = log |f(λ)₁₁| − log |f(λ)₁₁ − 2π 𝔣(λ)₁₂ Σ̃₂₂⁻¹ 𝔣(λ)₂₁|
//!
//! where 𝔣 is the spectrum of (X⁽¹⁾, Y⁽²⁾) with Y⁽²⁾ the cause block
//! orthogonalized against present-and-past information, and Σ̃₂₂ the Schur
//! complement of the one-step prediction-error covariance. The scalar
//! measure is the frequency average GC = (1/2π)∫ FGC dλ ≥ 0.

use std::f64::consts::PI;

use crate::cxla::{cdet, cinv, CMat, RMat, C64};
use crate::error::{LgcError, Result};
use crate::spectra::{var_factorization, var_spectral_density, FreqGrid, VarParams};

/// Block sizes: the first `effect_dim` channels form the effect block, the
/// remaining `cause_dim` the cause block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Partition {
    effect_dim: usize,
    cause_dim: usize,
}

impl Partition {
    pub fn new(effect_dim: usize, cause_dim: usize) -> Result<Self> {
        if effect_dim < 1 || cause_dim < 1 {
            return Err(LgcError::Domain(
                "both blocks must contain at least one channel".into(),
            ));
        }
        Ok(Partition {
            effect_dim,
            cause_dim,
        })
    }

    pub fn effect_dim(&self) -> usize {
        self.effect_dim
    }

    pub fn cause_dim(&self) -> usize {
        self.cause_dim
    }

    pub fn total(&self) -> usize {
        self.effect_dim + self.cause_dim
    }

    fn check(&self, params: &VarParams) -> Result<()> {
        if self.total() != params.p() {
            return Err(LgcError::Dimension(format!(
                "partition {}+{} does not match dimension {}",
                self.effect_dim,
                self.cause_dim,
                params.p()
            )));
        }
        Ok(())
    }
}

/// Causality at one rescaled time: the scalar measure and the per-frequency
/// curve it averages.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CausalityValue {
    pub at_u: Option<f64>,
    pub gc: f64,
    pub fgc_curve: Vec<(f64, f64)>,
}

/// Schur complement Σ̃₂₂ = s₂₂ − s₂₁ s₁₁⁻¹ s₁₂ of the one-step
/// prediction-error covariance.
pub fn sigma_tilde_22(params: &VarParams, part: &Partition) -> Result<RMat> {
    part.check(params)?;
    let m = part.effect_dim();
    let p = params.p();
    let s = params.s();
    let s11 = s.block(0, m, 0, m);
    let s12 = s.block(0, m, m, p);
    let s21 = s.block(m, p, 0, m);
    let s22 = s.block(m, p, m, p);
    let s11_inv = s11
        .inverse()
        .map_err(|e| LgcError::SingularMatrix(format!("effect-block covariance: {e}")))?;
    Ok(s22.sub(&s21.mul(&s11_inv).mul(&s12)).symmetrize())
}

/// Precomputed frequency-independent pieces of the companion spectrum and
/// the causality integrand.
struct CausalityEvaluator<'a> {
    params: &'a VarParams,
    part: Partition,
    /// [−s₂₁ s₁₁⁻¹  I_M], the projection defining the companion block.
    left: CMat,
    lambda0: CMat,
    sqrt_inv_transfer: crate::spectra::VarFactorization,
    sigma_tilde_inv: CMat,
}

impl<'a> CausalityEvaluator<'a> {
    fn new(params: &'a VarParams, part: &Partition) -> Result<Self> {
        part.check(params)?;
        let m = part.effect_dim();
        let p = params.p();
        let s = params.s();
        let s11 = s.block(0, m, 0, m);
        let s21 = s.block(m, p, 0, m);
        let s11_inv = s11
            .inverse()
            .map_err(|e| LgcError::SingularMatrix(format!("effect-block covariance: {e}")))?;
        let proj = s21.mul(&s11_inv).scale(-1.0);
        let left = CMat::hstack(&proj.to_cmat(), &CMat::identity(part.cause_dim()));
        let fac = var_factorization(params)?;
        let lambda0 = fac.lambda0().clone();
        let sigma_tilde = sigma_tilde_22(params, part)?;
        let sigma_tilde_inv = cinv(&sigma_tilde.to_cmat())?;
        Ok(CausalityEvaluator {
            params,
            part: *part,
            left,
            lambda0,
            sqrt_inv_transfer: fac,
            sigma_tilde_inv,
        })
    }

    /// 𝔣(λ)₂₁ = [−s₂₁ s₁₁⁻¹  I_M] Λ(0) Λ(e^{−iλ})⁻¹ [f₁₁; f₂₁], the
    /// factorization evaluated where the density itself lives
    /// (f_θ(λ) = (1/2π) Λ(e^{−iλ}) Λ(e^{−iλ})*).
    fn cross_block(&self, lambda: f64, f: &CMat) -> Result<CMat> {
        let m = self.part.effect_dim();
        let p = self.part.total();
        let f_col = f.block(0, p, 0, m);
        let lam_inv = self.sqrt_inv_transfer.lambda_inv_at(-lambda);
        Ok(self.left.mul(&self.lambda0).mul(&lam_inv).mul(&f_col))
    }

    fn fgc_at(&self, lambda: f64) -> Result<f64> {
        let m = self.part.effect_dim();
        let f = var_spectral_density(self.params, lambda)?;
        let f11 = f.block(0, m, 0, m);
        let f21c = self.cross_block(lambda, &f)?;
        let f12c = f21c.conj_transpose();
        let correction = f12c
            .mul(&self.sigma_tilde_inv)
            .mul(&f21c)
            .scale(C64::new(2.0 * PI, 0.0));
        let residual = f11.sub(&correction);
        let defect = residual.hermitian_defect();
        if defect > 1e-9 {
            return Err(LgcError::NonHermitianResidual(defect));
        }
        let det_top = cdet(&f11.hermitize()).re;
        let det_bottom = cdet(&residual.hermitize()).re;
        if det_top <= 1e-300 {
            return Err(LgcError::SingularMatrix(format!(
                "effect-block spectrum determinant {det_top} at λ = {lambda}"
            )));
        }
        if det_bottom <= 1e-300 {
            return Err(LgcError::SingularMatrix(format!(
                "residual spectrum determinant {det_bottom} at λ = {lambda}"
            )));
        }
        Ok(det_top.ln() - det_bottom.ln())
    }
}

/// Companion cross-spectral block 𝔣(λ)₂₁ (cause-block size × effect-block
/// size). The matching 𝔣(λ)₁₂ is its conjugate transpose.
pub fn companion_cross_spectrum(params: &VarParams, part: &Partition, lambda: f64) -> Result<CMat> {
    let ev = CausalityEvaluator::new(params, part)?;
    let f = var_spectral_density(params, lambda)?;
    ev.cross_block(lambda, &f)
}

/// Companion own-spectrum 𝔣₂₂ = Σ̃₂₂ / 2π, flat in frequency.
pub fn companion_spectrum_22(params: &VarParams, part: &Partition) -> Result<CMat> {
    let sigma_tilde = sigma_tilde_22(params, part)?;
    Ok(sigma_tilde.to_cmat().scale(C64::new(1.0 / (2.0 * PI), 0.0)))
}

/// Frequency-wise causality density at one λ.
pub fn fgc(params: &VarParams, part: &Partition, lambda: f64) -> Result<f64> {
    CausalityEvaluator::new(params, part)?.fgc_at(lambda)
}

/// GC = (1/2π) Σ_j g_j FGC(λ_j), with the curve recorded at the nodes.
pub fn gc_measure(params: &VarParams, part: &Partition, grid: &FreqGrid) -> Result<CausalityValue> {
    let ev = CausalityEvaluator::new(params, part)?;
    let w = grid.weight();
    let mut curve = Vec::with_capacity(grid.len());
    let mut total = 0.0;
    for &lambda in grid.nodes() {
        let v = ev.fgc_at(lambda)?;
        curve.push((lambda, v));
        total += w * v;
    }
    Ok(CausalityValue {
        at_u: None,
        gc: total / (2.0 * PI),
        fgc_curve: curve,
    })
}

/// ∇GC by central differences with step 1e-5·(1 + |θᵢ|).
pub fn gc_gradient(params: &VarParams, part: &Partition, grid: &FreqGrid) -> Result<Vec<f64>> {
    let theta = params.theta();
    let p = params.p();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let h = 1e-5 * (1.0 + theta[i].abs());
        let mut tp = theta.clone();
        tp[i] += h;
        let plus = gc_measure(&VarParams::from_theta_unchecked(p, &tp)?, part, grid)?.gc;
        tp[i] = theta[i] - h;
        let minus = gc_measure(&VarParams::from_theta_unchecked(p, &tp)?, part, grid)?.gc;
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}
