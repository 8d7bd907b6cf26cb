//! Simulation of time-varying VAR(1) processes and panel I/O.
//!
//! The generator draws Gaussian innovations from a counter-based stream
//! keyed by (seed, stream), so Monte Carlo replicates are reproducible and
//! independent of execution order.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::cxla::RMat;
use crate::error::{LgcError, Result};

// ---------------------------------------------------------------------------
// Counter-based RNG
// ---------------------------------------------------------------------------

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless-core counter RNG: the value at counter i is a fixed function of
/// (seed, stream, i). Gaussians come from Box–Muller on consecutive counters.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
    cached_gaussian: Option<f64>,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let key = splitmix64(seed ^ splitmix64(stream).rotate_left(17));
        CounterRng {
            key,
            counter: 0,
            cached_gaussian: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = splitmix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter = self.counter.wrapping_add(1);
        v
    }

    /// Uniform on (0, 1].
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64
    }

    /// Standard normal via Box–Muller.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.cached_gaussian.take() {
            return z;
        }
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_gaussian = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Derive the seed for one Monte Carlo replicate (and redraw attempt).
pub fn replicate_seed(seed: u64, replicate: u64, attempt: u64) -> u64 {
    splitmix64(
        seed ^ splitmix64(replicate.wrapping_mul(2).wrapping_add(1)) ^ attempt.rotate_left(43),
    )
}

// ---------------------------------------------------------------------------
// Coupling ramps
// ---------------------------------------------------------------------------

fn check_unit_interval(u: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&u) || !u.is_finite() {
        return Err(LgcError::Domain(format!(
            "{what} requires u in [0,1], got {u}"
        )));
    }
    Ok(())
}

/// Piecewise-linear coupling profile: 0 up to 1/π, then linear with slope
/// π/2, flat at 1/2 from 2/π on.
pub fn ramp_a12_v1(u: f64) -> Result<f64> {
    check_unit_interval(u, "ramp_a12_v1")?;
    let lo = 1.0 / std::f64::consts::PI;
    let hi = 2.0 / std::f64::consts::PI;
    Ok(if u <= lo {
        0.0
    } else if u <= hi {
        (std::f64::consts::PI * u - 1.0) / 2.0
    } else {
        0.5
    })
}

/// Late-onset coupling profile: 0 up to 5/(2π), then linear with slope π/2.
pub fn ramp_a12_v2(u: f64) -> Result<f64> {
    check_unit_interval(u, "ramp_a12_v2")?;
    let knot = 2.5 / std::f64::consts::PI;
    Ok(if u <= knot {
        0.0
    } else {
        (std::f64::consts::PI / 2.0) * (u - knot)
    })
}

// ---------------------------------------------------------------------------
// Generator specification
// ---------------------------------------------------------------------------

pub type CoeffFn = Arc<dyn Fn(f64) -> RMat + Send + Sync>;

/// Time-varying VAR(1) generator: X_t = A(t/T)·X_{t−1} + ε_t with Gaussian
/// innovations of covariance `innov_cov`.
#[derive(Clone)]
pub struct TvVarSpec {
    dim: usize,
    coeff: CoeffFn,
    innov_cov: RMat,
    innov_sqrt: RMat,
    seed: u64,
    burn_in: usize,
}

impl fmt::Debug for TvVarSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TvVarSpec")
            .field("dim", &self.dim)
            .field("seed", &self.seed)
            .field("burn_in", &self.burn_in)
            .finish()
    }
}

impl TvVarSpec {
    /// Validates local stationarity (spectral radius of A(u) < 1 on a
    /// 1000-point grid) and positive semidefiniteness of the innovation
    /// covariance.
    pub fn new(dim: usize, coeff: CoeffFn, innov_cov: RMat, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(LgcError::Domain("dim must be positive".into()));
        }
        if innov_cov.rows() != dim || innov_cov.cols() != dim {
            return Err(LgcError::Dimension(format!(
                "innov_cov must be {dim}×{dim}"
            )));
        }
        if innov_cov.symmetric_defect() > 1e-9 * innov_cov.max_abs().max(1.0) {
            return Err(LgcError::Domain("innov_cov must be symmetric".into()));
        }
        for k in 0..=1000usize {
            let u = k as f64 / 1000.0;
            let a = coeff(u);
            if a.rows() != dim || a.cols() != dim {
                return Err(LgcError::Dimension(format!("A({u}) must be {dim}×{dim}")));
            }
            let rho = a.spectral_radius();
            if !(rho < 1.0) {
                return Err(LgcError::Domain(format!(
                    "spectral radius of A({u}) is {rho}, must be < 1"
                )));
            }
        }
        let innov_sqrt = innov_cov.psd_sqrt()?;
        Ok(TvVarSpec {
            dim,
            coeff,
            innov_cov,
            innov_sqrt,
            seed,
            burn_in: 0,
        })
    }

    /// Discard a pre-sample run of `n` steps before t = 1 (default 0, i.e.
    /// the recursion starts from X₀ = 0).
    pub fn with_burn_in(mut self, n: usize) -> Self {
        self.burn_in = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn coeff_at(&self, u: f64) -> RMat {
        (self.coeff)(u)
    }

    pub fn innov_cov(&self) -> &RMat {
        &self.innov_cov
    }
}

// ---------------------------------------------------------------------------
// Observation panel
// ---------------------------------------------------------------------------

/// A T×p observation matrix with optional channel labels. Immutable after
/// construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    values: RMat,
    labels: Option<Vec<String>>,
}

impl TimeSeriesPanel {
    pub fn new(values: RMat, labels: Option<Vec<String>>) -> Result<Self> {
        if let Some(ref l) = labels {
            if l.len() != values.cols() {
                return Err(LgcError::Dimension(format!(
                    "{} labels for {} channels",
                    l.len(),
                    values.cols()
                )));
            }
        }
        if values.data().iter().any(|v| !v.is_finite()) {
            return Err(LgcError::Domain("panel contains NaN or Inf".into()));
        }
        Ok(TimeSeriesPanel { values, labels })
    }

    pub fn length(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &RMat {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Observation at 1-based time index t, as required by the symmetric
    /// index arithmetic of the pre-periodogram.
    #[inline]
    pub fn obs(&self, t: usize) -> Vec<f64> {
        debug_assert!((1..=self.length()).contains(&t));
        (0..self.dim()).map(|j| self.values.get(t - 1, j)).collect()
    }

    #[inline]
    pub fn value(&self, t: usize, channel: usize) -> f64 {
        self.values.get(t - 1, channel)
    }
}

/// Simulate the generator for `t_len` observations. X₁ = ε₁ when burn-in is
/// zero; deterministic given (spec.seed, t_len).
pub fn simulate_tvvar(spec: &TvVarSpec, t_len: usize) -> Result<TimeSeriesPanel> {
    if t_len < 2 {
        return Err(LgcError::Domain(format!("T must be ≥ 2, got {t_len}")));
    }
    let p = spec.dim;
    let mut rng = CounterRng::new(spec.seed, 0);
    let mut x = vec![0.0f64; p];
    let mut z = vec![0.0f64; p];
    let mut out = RMat::zeros(t_len, p);
    let total = spec.burn_in + t_len;
    for step in 0..total {
        // rescaled time clamped to [0,1]; burn-in steps sit at u ≈ 0
        let t_signed = step as i64 - spec.burn_in as i64 + 1;
        let u = (t_signed as f64 / t_len as f64).clamp(0.0, 1.0);
        let a = spec.coeff_at(u);
        for zi in z.iter_mut() {
            *zi = rng.next_gaussian();
        }
        let eps = spec.innov_sqrt.mul_vec(&z);
        let ax = a.mul_vec(&x);
        for i in 0..p {
            x[i] = ax[i] + eps[i];
        }
        if t_signed >= 1 {
            for i in 0..p {
                out.set((t_signed - 1) as usize, i, x[i]);
            }
        }
    }
    TimeSeriesPanel::new(out, None)
}

// ---------------------------------------------------------------------------
// CSV I/O
// ---------------------------------------------------------------------------
//
// Dialect: comma-separated, '.' decimal point, optional single header row,
// LF or CRLF line endings. Non-finite tokens are rejected. Output uses 17
// significant digits so values round-trip exactly.

fn parse_field(field: &str, row: usize, col: usize) -> Result<f64> {
    let t = field.trim();
    let v: f64 = t.parse().map_err(|_| LgcError::Parse {
        row,
        col,
        message: format!("not a number: {t:?}"),
    })?;
    if !v.is_finite() {
        return Err(LgcError::Parse {
            row,
            col,
            message: format!("non-finite value: {t:?}"),
        });
    }
    Ok(v)
}

/// Parse a panel from CSV text. The first row is treated as a header only
/// when none of its fields parse as a number.
pub fn parse_csv(text: &str) -> Result<TimeSeriesPanel> {
    let lines: Vec<&str> = text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .filter(|l| !l.trim().is_empty())
        .collect();
    if lines.is_empty() {
        return Err(LgcError::EmptyFile);
    }
    let first: Vec<&str> = lines[0].split(',').collect();
    let header = first.iter().all(|f| f.trim().parse::<f64>().is_err());
    let (labels, data_lines, row_offset) = if header {
        let labels: Vec<String> = first.iter().map(|s| s.trim().to_string()).collect();
        (Some(labels), &lines[1..], 2usize)
    } else {
        (None, &lines[..], 1usize)
    };
    if data_lines.is_empty() {
        return Err(LgcError::EmptyFile);
    }
    let cols = data_lines[0].split(',').count();
    if let Some(ref l) = labels {
        if l.len() != cols {
            return Err(LgcError::RaggedRows {
                row: 2,
                got: cols,
                expected: l.len(),
            });
        }
    }
    let mut values = RMat::zeros(data_lines.len(), cols);
    for (i, line) in data_lines.iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(LgcError::RaggedRows {
                row: i + row_offset,
                got: fields.len(),
                expected: cols,
            });
        }
        for (j, field) in fields.iter().enumerate() {
            // row numbers are 1-based file rows, counting the header if any
            values.set(i, j, parse_field(field, i + row_offset, j + 1)?);
        }
    }
    TimeSeriesPanel::new(values, labels)
}

/// Load a panel from a CSV file (rows = observations, columns = channels).
pub fn load_csv(path: impl AsRef<Path>) -> Result<TimeSeriesPanel> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text)
}

/// Render a panel as CSV with a header row and 17-significant-digit values.
pub fn render_csv(panel: &TimeSeriesPanel) -> String {
    let p = panel.dim();
    let header: Vec<String> = match panel.labels() {
        Some(l) => l.to_vec(),
        None => (1..=p).map(|j| format!("x{j}")).collect(),
    };
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for t in 0..panel.length() {
        let row: Vec<String> = (0..p)
            .map(|j| format!("{:.16e}", panel.values().get(t, j)))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn save_csv(panel: &TimeSeriesPanel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, render_csv(panel))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn const_coeff(a: RMat) -> CoeffFn {
        Arc::new(move |_| a.clone())
    }

    #[test]
    fn ramp_v1_branches() {
        assert_eq!(ramp_a12_v1(0.2).unwrap(), 0.0);
        assert_eq!(ramp_a12_v1(0.8).unwrap(), 0.5);
        assert!((ramp_a12_v1(0.5).unwrap() - (PI * 0.5 - 1.0) / 2.0).abs() < 1e-15);
        assert!((ramp_a12_v1(0.5).unwrap() - 0.285398163397448).abs() < 1e-12);
        assert!(ramp_a12_v1(-0.1).is_err());
        assert!(ramp_a12_v1(1.1).is_err());
    }

    #[test]
    fn ramp_v2_branches() {
        assert_eq!(ramp_a12_v2(0.5).unwrap(), 0.0);
        assert_eq!(ramp_a12_v2(2.5 / PI).unwrap(), 0.0);
        let v = ramp_a12_v2(1.0).unwrap();
        assert!((v - (PI / 2.0) * (1.0 - 2.5 / PI)).abs() < 1e-15);
        assert!((v - 0.320796326794897).abs() < 1e-12);
    }

    #[test]
    fn ramps_are_continuous() {
        // max jump over a fine grid stays below 1e-9
        let n = 1_000_000usize;
        let mut prev1 = ramp_a12_v1(0.0).unwrap();
        let mut prev2 = ramp_a12_v2(0.0).unwrap();
        let mut max_jump = 0.0f64;
        for k in 1..=n {
            let u = k as f64 / n as f64;
            let v1 = ramp_a12_v1(u).unwrap();
            let v2 = ramp_a12_v2(u).unwrap();
            max_jump = max_jump.max((v1 - prev1).abs()).max((v2 - prev2).abs());
            prev1 = v1;
            prev2 = v2;
        }
        // no discontinuity: adjacent differences stay within the Lipschitz
        // bound (slope ≤ π/2) plus float noise
        assert!(max_jump < (PI / 2.0) / n as f64 + 1e-9, "jump {max_jump}");
    }

    #[test]
    fn white_noise_has_identity_covariance() {
        let spec = TvVarSpec::new(2, const_coeff(RMat::zeros(2, 2)), RMat::identity(2), 7).unwrap();
        let panel = simulate_tvvar(&spec, 10_000).unwrap();
        let t = panel.length() as f64;
        let mut cov = [[0.0f64; 2]; 2];
        for k in 1..=panel.length() {
            let x = panel.obs(k);
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] += x[i] * x[j] / t;
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (cov[i][j] - target).abs() < 0.05,
                    "cov[{i}][{j}] = {}",
                    cov[i][j]
                );
            }
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let spec = TvVarSpec::new(
            2,
            const_coeff(RMat::from_rows(&[vec![0.5, 0.1], vec![0.0, 0.3]])),
            RMat::identity(2),
            42,
        )
        .unwrap();
        let a = simulate_tvvar(&spec, 500).unwrap();
        let b = simulate_tvvar(&spec, 500).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ar1_variance_matches_stationary_value() {
        let spec = TvVarSpec::new(
            2,
            const_coeff(RMat::diag(&[0.5, 0.5])),
            RMat::identity(2),
            11,
        )
        .unwrap();
        let panel = simulate_tvvar(&spec, 20_000).unwrap();
        for ch in 0..2 {
            let var: f64 = (1..=panel.length())
                .map(|t| panel.value(t, ch).powi(2))
                .sum::<f64>()
                / panel.length() as f64;
            assert!((var - 1.0 / (1.0 - 0.25)).abs() < 0.05, "var {var}");
        }
    }

    #[test]
    fn constant_var_reproduces_lyapunov_covariance() {
        // Γ(0) solves Γ = AΓAᵀ + Σ; compute by fixed-point iteration
        let a = RMat::from_rows(&[vec![0.5, 0.2], vec![0.0, 0.3]]);
        let sig = RMat::from_rows(&[vec![1.0, 0.3], vec![0.3, 0.8]]);
        let mut gamma = sig.clone();
        for _ in 0..200 {
            gamma = a.mul(&gamma).mul(&a.transpose()).add(&sig);
        }
        let spec = TvVarSpec::new(2, const_coeff(a.clone()), sig, 123).unwrap();
        let panel = simulate_tvvar(&spec, 20_000).unwrap();
        let t = panel.length() as f64;
        for i in 0..2 {
            for j in 0..2 {
                let c: f64 = (1..=panel.length())
                    .map(|k| panel.value(k, i) * panel.value(k, j))
                    .sum::<f64>()
                    / t;
                assert!(
                    (c - gamma.get(i, j)).abs() < 0.05,
                    "Γ[{i}][{j}]: sample {c}, target {}",
                    gamma.get(i, j)
                );
            }
        }
    }

    #[test]
    fn unstable_coefficient_rejected() {
        let r = TvVarSpec::new(
            2,
            const_coeff(RMat::diag(&[1.01, 0.2])),
            RMat::identity(2),
            0,
        );
        assert!(r.is_err());
    }

    #[test]
    fn csv_parse_with_header() {
        let p = parse_csv("a,b\n1,2\n3,4\n5,6\n").unwrap();
        assert_eq!(p.length(), 3);
        assert_eq!(p.dim(), 2);
        assert_eq!(p.labels().unwrap(), &["a".to_string(), "b".to_string()]);
        assert_eq!(p.value(2, 1), 4.0);
    }

    #[test]
    fn csv_ragged_and_parse_errors() {
        assert!(matches!(
            parse_csv("1,2\n3\n"),
            Err(LgcError::RaggedRows { row: 2, .. })
        ));
        match parse_csv("1,x\n") {
            Err(LgcError::Parse { row, col, .. }) => {
                assert_eq!((row, col), (1, 2));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(parse_csv(""), Err(LgcError::EmptyFile)));
        assert!(matches!(parse_csv("1,NaN\n"), Err(LgcError::Parse { .. })));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let spec = TvVarSpec::new(
            2,
            const_coeff(RMat::diag(&[0.4, -0.2])),
            RMat::identity(2),
            3,
        )
        .unwrap();
        let panel = simulate_tvvar(&spec, 50).unwrap();
        let text = render_csv(&panel);
        let back = parse_csv(&text).unwrap();
        for t in 1..=50 {
            for j in 0..2 {
                assert_eq!(panel.value(t, j), back.value(t, j));
            }
        }
    }

    #[test]
    fn crlf_accepted() {
        let p = parse_csv("a,b\r\n1,2\r\n3,4\r\n").unwrap();
        assert_eq!(p.length(), 2);
    }

    #[test]
    fn burn_in_changes_start_but_not_determinism() {
        let spec = TvVarSpec::new(
            2,
            const_coeff(RMat::diag(&[0.5, 0.5])),
            RMat::identity(2),
            9,
        )
        .unwrap();
        let cold = simulate_tvvar(&spec, 100).unwrap();
        let warm = simulate_tvvar(&spec.clone().with_burn_in(50), 100).unwrap();
        assert_ne!(cold, warm);
        let warm2 = simulate_tvvar(&spec.with_burn_in(50), 100).unwrap();
        assert_eq!(warm, warm2);
    }
}
