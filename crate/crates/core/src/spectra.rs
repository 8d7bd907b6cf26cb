//! Time-varying spectral machinery: the pre-periodogram, the parametric
//! VAR(1) spectral density family, its analytic factorization, and the
//! determinant identity linking the prediction-error covariance to the
//! integrated log-spectrum.

use std::f64::consts::PI;

use crate::cxla::{cdet, cinv, psd_sqrt, CMat, RMat, C64};
use crate::error::{LgcError, Result};
use crate::procsim::TimeSeriesPanel;

/// Margin kept between fitted coefficient spectra radii and the unit circle.
pub const STABILITY_MARGIN: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Frequency grid
// ---------------------------------------------------------------------------

/// Regular rectangle-rule grid λ_j = −π + 2πj/N on [−π, π), N even. The
/// rule integrates trigonometric polynomials of degree < N exactly, which
/// makes the pre-periodogram quadratures exact once N exceeds twice the
/// maximal lag.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGrid {
    n: usize,
    nodes: Vec<f64>,
}

impl FreqGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(LgcError::Domain(format!(
                "grid size must be a positive even integer, got {n}"
            )));
        }
        let nodes = (0..n)
            .map(|j| -PI + 2.0 * PI * j as f64 / n as f64)
            .collect();
        Ok(FreqGrid { n, nodes })
    }

    /// Default grid for a sample of length T: max(512, 4T).
    pub fn default_for_len(t_len: usize) -> Self {
        FreqGrid::new(512usize.max(4 * t_len)).expect("even by construction")
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Rectangle-rule weight, identical at every node.
    pub fn weight(&self) -> f64 {
        2.0 * PI / self.n as f64
    }
}

// ---------------------------------------------------------------------------
// Parametric VAR(1) spectral family
// ---------------------------------------------------------------------------

/// Parameters of the spectral model
/// f_θ(λ) = (1/2π)(I + a e^{−iλ})⁻¹ s (I + aᵀ e^{iλ})⁻¹.
///
/// The recursion X_t = A X_{t−1} + ε_t corresponds to a = −A, so the model
/// is (I − A e^{−iλ})⁻¹-shaped; this orientation pairs with the
/// pre-periodogram's e^{−iλl} lag transform, making the local Whittle fit
/// consistent for asymmetric coefficient matrices. Causality and variance
/// quantities are invariant to the orientation. The flat parameter vector θ
/// stacks a row-major, then the upper triangle of s row by row —
/// (a11, a12, a21, a22, s11, s12, s22) in the bivariate case.
#[derive(Debug, Clone, PartialEq)]
pub struct VarParams {
    p: usize,
    a: RMat,
    s: RMat,
}

impl VarParams {
    pub fn new(a: RMat, s: RMat) -> Result<Self> {
        let p = a.rows();
        if !a.is_square() || !s.is_square() || s.rows() != p {
            return Err(LgcError::Dimension(
                "coefficient and innovation matrices must be square of equal size".into(),
            ));
        }
        let rho = a.spectral_radius();
        if !(rho < 1.0 - STABILITY_MARGIN) {
            return Err(LgcError::Domain(format!(
                "spectral radius {rho} outside the stable region (< {})",
                1.0 - STABILITY_MARGIN
            )));
        }
        if s.symmetric_defect() > 1e-9 * s.max_abs().max(1.0) {
            return Err(LgcError::Domain(
                "innovation covariance must be symmetric".into(),
            ));
        }
        s.cholesky().map_err(|_| LgcError::NotPsd(f64::NAN))?;
        Ok(VarParams { p, a, s })
    }

    /// Construction without the stability/PD checks, for finite-difference
    /// perturbations that must stay evaluable near the boundary.
    pub(crate) fn new_unchecked(a: RMat, s: RMat) -> Self {
        let p = a.rows();
        VarParams { p, a, s }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn a(&self) -> &RMat {
        &self.a
    }

    pub fn s(&self) -> &RMat {
        &self.s
    }

    pub fn theta_len(p: usize) -> usize {
        p * p + p * (p + 1) / 2
    }

    /// Flat parameter vector: row-major a, then upper triangle of s.
    pub fn theta(&self) -> Vec<f64> {
        let p = self.p;
        let mut th = Vec::with_capacity(Self::theta_len(p));
        for i in 0..p {
            for j in 0..p {
                th.push(self.a.get(i, j));
            }
        }
        for i in 0..p {
            for j in i..p {
                th.push(self.s.get(i, j));
            }
        }
        th
    }

    pub fn from_theta(p: usize, theta: &[f64]) -> Result<Self> {
        let (a, s) = Self::split_theta(p, theta)?;
        VarParams::new(a, s)
    }

    pub(crate) fn from_theta_unchecked(p: usize, theta: &[f64]) -> Result<Self> {
        let (a, s) = Self::split_theta(p, theta)?;
        Ok(VarParams::new_unchecked(a, s))
    }

    fn split_theta(p: usize, theta: &[f64]) -> Result<(RMat, RMat)> {
        if theta.len() != Self::theta_len(p) {
            return Err(LgcError::Dimension(format!(
                "theta has {} entries, expected {}",
                theta.len(),
                Self::theta_len(p)
            )));
        }
        let mut a = RMat::zeros(p, p);
        let mut idx = 0;
        for i in 0..p {
            for j in 0..p {
                a.set(i, j, theta[idx]);
                idx += 1;
            }
        }
        let mut s = RMat::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                s.set(i, j, theta[idx]);
                s.set(j, i, theta[idx]);
                idx += 1;
            }
        }
        Ok((a, s))
    }
}

/// One spectral density value at a (rescaled time, frequency) pair.
#[derive(Debug, Clone)]
pub struct SpectralMatrix {
    pub at_u: f64,
    pub at_lambda: f64,
    pub value: CMat,
}

/// f_θ(λ) = (1/2π)(I + a e^{−iλ})⁻¹ s (I + aᵀ e^{iλ})⁻¹; Hermitian PSD.
pub fn var_spectral_density(params: &VarParams, lambda: f64) -> Result<CMat> {
    let b = transfer_matrix(params.a(), -lambda);
    let binv = cinv(&b)?;
    let f = binv
        .mul(&params.s().to_cmat())
        .mul(&binv.conj_transpose())
        .scale(C64::new(1.0 / (2.0 * PI), 0.0));
    Ok(f)
}

/// I + a e^{iλ}.
pub(crate) fn transfer_matrix(a: &RMat, lambda: f64) -> CMat {
    let z = C64::new(lambda.cos(), lambda.sin());
    let p = a.rows();
    CMat::from_fn(p, p, |i, j| {
        let base = if i == j {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        };
        base + z * a.get(i, j)
    })
}

/// Analytic spectral factorization of the VAR family: Λ(z) = (I + a z)⁻¹ R
/// with R = psd_sqrt(s), so that f_θ(λ) = (1/2π) Λ(e^{−iλ}) Λ(e^{−iλ})* and
/// Σ_θ = Λ(0) Λ(0)* = s.
pub struct VarFactorization {
    lambda0: CMat,
    sqrt_inv: CMat,
    a: RMat,
}

impl VarFactorization {
    /// Λ(0) = psd_sqrt(s), the one-step prediction-error factor.
    pub fn lambda0(&self) -> &CMat {
        &self.lambda0
    }

    /// Λ(e^{iλ})⁻¹ = psd_sqrt(s)⁻¹ (I + a e^{iλ}).
    pub fn lambda_inv_at(&self, lambda: f64) -> CMat {
        self.sqrt_inv.mul(&transfer_matrix(&self.a, lambda))
    }

    /// Λ(e^{iλ}) itself, for multiply-back checks.
    pub fn lambda_at(&self, lambda: f64) -> Result<CMat> {
        cinv(&self.lambda_inv_at(lambda))
    }
}

pub fn var_factorization(params: &VarParams) -> Result<VarFactorization> {
    let lambda0 = psd_sqrt(&params.s().to_cmat())?;
    let sqrt_inv = cinv(&lambda0)?;
    Ok(VarFactorization {
        lambda0,
        sqrt_inv,
        a: params.a().clone(),
    })
}

/// Numerical residual of the determinant identity
/// det Σ = exp((1/2π) ∫ log det(2π f_θ(λ)) dλ), evaluated on the grid.
pub fn kolmogorov_check(params: &VarParams, grid: &FreqGrid) -> Result<f64> {
    if grid.len() < 256 {
        return Err(LgcError::Domain(format!(
            "kolmogorov_check requires a grid of at least 256 nodes, got {}",
            grid.len()
        )));
    }
    let p = params.p() as f64;
    let w = grid.weight();
    let mut integral = 0.0;
    for &lambda in grid.nodes() {
        let f = var_spectral_density(params, lambda)?;
        let det = cdet(&f).re * (2.0 * PI).powf(p);
        if det <= 0.0 {
            return Err(LgcError::SingularMatrix(format!(
                "non-positive determinant {det} at λ = {lambda}"
            )));
        }
        integral += w * det.ln();
    }
    let lhs = params.s().det();
    Ok((lhs - (integral / (2.0 * PI)).exp()).abs())
}

// ---------------------------------------------------------------------------
// Pre-periodogram
// ---------------------------------------------------------------------------

/// Symmetric lag products around one time center. Only l ≥ 0 is stored;
/// the matrix at −l is the transpose of the one at l.
#[derive(Debug, Clone)]
pub(crate) struct LagProducts {
    pub mats: Vec<RMat>,
    pub p: usize,
}

/// Double time-center 2uT + 1, snapped to an integer when float arithmetic
/// lands within 1e-9 of one. The floor brackets of the symmetric indices
/// flip whole covariance lags on an off-by-one, so the snap matters.
fn double_center(u: f64, t_len: usize) -> f64 {
    let c2 = 2.0 * u * t_len as f64 + 1.0;
    let r = c2.round();
    if (c2 - r).abs() < 1e-9 * c2.abs().max(1.0) {
        r
    } else {
        c2
    }
}

fn lag_products_at(panel: &TimeSeriesPanel, u: f64) -> LagProducts {
    let t_len = panel.length();
    let p = panel.dim();
    let c2 = double_center(u, t_len);
    let mut mats: Vec<RMat> = Vec::new();
    // valid l ≥ 0 require floor((c2 ± l)/2) ∈ [1, T] for both signs
    for l in 0..=(2 * t_len + 1) {
        let lp = ((c2 + l as f64) / 2.0).floor();
        let lm = ((c2 - l as f64) / 2.0).floor();
        if lp < 1.0 || lp > t_len as f64 || lm < 1.0 || lm > t_len as f64 {
            if l > 0 {
                break; // contiguous range around 0
            }
            return LagProducts { mats, p };
        }
        let (ip, im) = (lp as usize, lm as usize);
        let mut m = RMat::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                m.set(i, j, panel.value(ip, i) * panel.value(im, j));
            }
        }
        mats.push(m);
    }
    LagProducts { mats, p }
}

/// Kernel-weighted aggregate of the lag products over all time centers
/// u_k = k/T: d_l = Σ_k w_k X_{⌊k+(1+l)/2⌋} X_{⌊k+(1−l)/2⌋}ᵀ. Returns the
/// total kernel mass alongside.
pub(crate) fn weighted_lag_products(
    panel: &TimeSeriesPanel,
    weights: &[f64],
) -> (f64, LagProducts) {
    let t_len = panel.length();
    let p = panel.dim();
    assert_eq!(weights.len(), t_len);
    let mut w_sum = 0.0;
    let mut mats: Vec<RMat> = Vec::new();
    for (k0, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        w_sum += w;
        let k = (k0 + 1) as i64; // 1-based center
        let c2 = 2 * k + 1;
        let l_max = (2 * (t_len as i64 - k)).min(2 * k - 1);
        if l_max < 0 {
            continue;
        }
        if mats.len() <= l_max as usize {
            mats.resize(l_max as usize + 1, RMat::zeros(p, p));
        }
        for l in 0..=l_max {
            let ip = ((c2 + l) / 2) as usize;
            let im = ((c2 - l) / 2) as usize;
            let m = &mut mats[l as usize];
            for i in 0..p {
                let xi = panel.value(ip, i);
                for j in 0..p {
                    m.add_assign_at(i, j, w * xi * panel.value(im, j));
                }
            }
        }
    }
    (w_sum, LagProducts { mats, p })
}

/// Evaluate (1/2π) Σ_l d_l e^{−iλ_j l} at every grid node. Phases come from
/// an exact N-entry root-of-unity table (e^{−iλ_j l} = (−1)^l ω^{jl mod N}),
/// and the ±l pairing keeps each result Hermitian with a real diagonal.
pub(crate) fn lag_fourier_at_nodes(lags: &LagProducts, grid: &FreqGrid) -> Vec<CMat> {
    let p = lags.p;
    let n = grid.len();
    let omega: Vec<C64> = (0..n)
        .map(|m| {
            let phi = -2.0 * PI * m as f64 / n as f64;
            C64::new(phi.cos(), phi.sin())
        })
        .collect();
    let scale = 1.0 / (2.0 * PI);
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut h = CMat::zeros(p, p);
        if !lags.mats.is_empty() {
            let d0 = &lags.mats[0];
            for r in 0..p {
                for c in 0..p {
                    h.set(r, c, C64::new(d0.get(r, c), 0.0));
                }
            }
            for (l, dl) in lags.mats.iter().enumerate().skip(1) {
                let idx = (j * l) % n;
                let mut z = omega[idx];
                if l % 2 == 1 {
                    z = -z;
                }
                // add d_l e^{−iλl} and its conjugate transpose (the −l term)
                for r in 0..p {
                    for c in 0..p {
                        let zl = z * dl.get(r, c);
                        let cur = h.get(r, c) + zl;
                        h.set(r, c, cur);
                        let cur2 = h.get(c, r) + zl.conj();
                        h.set(c, r, cur2);
                    }
                }
            }
        }
        out.push(h.scale(C64::new(scale, 0.0)));
    }
    out
}

/// Pre-periodogram I_T(u, λ) over the whole grid: the symmetric-lag sum
/// (1/2π) Σ_l X_{⌊uT+1/2+l/2⌋} X_{⌊uT+1/2−l/2⌋}ᵀ e^{−iλl}, restricted to
/// lags whose indices fall inside 1..T. Out-of-range observations are
/// treated as zero, so edge values carry fewer terms.
pub fn pre_periodogram(
    panel: &TimeSeriesPanel,
    u: f64,
    grid: &FreqGrid,
) -> Result<Vec<SpectralMatrix>> {
    if !(0.0..=1.0).contains(&u) {
        return Err(LgcError::Domain(format!(
            "pre_periodogram requires u in [0,1], got {u}"
        )));
    }
    let lags = lag_products_at(panel, u);
    let values = lag_fourier_at_nodes(&lags, grid);
    Ok(values
        .into_iter()
        .zip(grid.nodes())
        .map(|(value, &lambda)| SpectralMatrix {
            at_u: u,
            at_lambda: lambda,
            value,
        })
        .collect())
}
