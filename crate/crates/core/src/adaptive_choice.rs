//! A-posteriori choice of the regularization parameter by the balancing
//! principle on the geometric grid `α_i = μ^{2i} δ² (d+2)²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tikhonov::TikhonovSolution;

/// Power-type source condition `B = φ(T*T) C`, `φ(λ) = λ^ν`, `‖C‖ ≤ ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceCondition {
    pub nu: f64,
    pub rho: f64,
}

impl SourceCondition {
    pub fn phi(&self, lambda: f64) -> f64 {
        lambda.powf(self.nu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    /// Noise level δ.
    pub delta: f64,
    /// Grid ratio μ > 1.
    pub mu: f64,
    /// Grid has `n + 1` points.
    pub n: usize,
    pub dim: usize,
    /// Selection constant C.
    pub c: f64,
    /// Upper bound γ ≥ ‖T‖², when known.
    pub gamma: Option<f64>,
    pub source: Option<SourceCondition>,
}

impl AdaptiveConfig {
    pub fn new(delta: f64, dim: usize) -> Self {
        Self {
            delta,
            mu: 1.5,
            n: 20,
            dim,
            c: 1.0,
            gamma: None,
            source: None,
        }
    }

    pub fn alpha0(&self) -> f64 {
        (self.delta * (self.dim as f64 + 2.0)).powi(2)
    }

    fn validate(&self) -> Result<()> {
        if !(self.mu > 1.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid ratio must exceed 1, got {}", self.mu)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise level must be positive, got {}", self.delta)));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidParameter(format!("selection constant must be positive, got {}", self.c)));
        }
        if !(1..=2).contains(&self.dim) {
            return Err(Error::InvalidParameter(format!("dimension {} unsupported", self.dim)));
        }
        Ok(())
    }
}

/// `α_i = μ^{2i} α₀`, `i = 0..=N`.
pub fn build_alpha_grid(cfg: &AdaptiveConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let a0 = cfg.alpha0();
    if let Some(gamma) = cfg.gamma {
        if a0 > gamma {
            return Err(Error::InvalidParameter(format!(
                "α₀ = {a0:e} exceeds γ = {gamma:e}; the noise level is too large"
            )));
        }
    }
    let ratio = cfg.mu * cfg.mu;
    let mut grid = Vec::with_capacity(cfg.n + 1);
    let mut a = a0;
    for _ in 0..=cfg.n {
        grid.push(a);
        a *= ratio;
    }
    Ok(grid)
}

#[derive(Debug, Clone, Serialize)]
pub struct AdaptiveResult {
    pub alphas: Vec<f64>,
    pub solutions: Vec<TikhonovSolution>,
    pub k: usize,
    /// `distances[i][j] = ‖B̃_i - B̃_j‖` for `j ≤ i`.
    pub distances: Vec<Vec<f64>>,
    pub c: f64,
    pub mu: f64,
    /// `6C / μ^k`; the guaranteed bound `6C / μ^l` is at least this large.
    pub bound_at_k: f64,
}

impl AdaptiveResult {
    pub fn selected(&self) -> &TikhonovSolution {
        &self.solutions[self.k]
    }

    /// Re-checks `‖B̃_k - B̃_j‖ ≤ 4C/μ^j` for all `j ≤ k` from the table.
    pub fn satisfies_rule(&self) -> bool {
        (0..=self.k).all(|j| self.distances[self.k][j] <= threshold(self.c, self.mu, j))
    }
}

fn threshold(c: f64, mu: f64, j: usize) -> f64 {
    4.0 * c / mu.powi(j as i32)
}

/// `k = max{i : ‖B̃_i - B̃_j‖ ≤ 4C/μ^j for all j ≤ i}`. Every `i` is tested,
/// so a violation at some `i` does not hide a larger admissible index.
pub fn select_adaptive(solutions: Vec<TikhonovSolution>, c: f64, mu: f64) -> Result<AdaptiveResult> {
    if solutions.is_empty() {
        return Err(Error::Empty("no solutions to select from".into()));
    }
    if !(c > 0.0) || !(mu > 1.0) {
        return Err(Error::InvalidParameter(format!("need C > 0 and μ > 1, got C = {c}, μ = {mu}")));
    }
    let distances: Vec<Vec<f64>> = (0..solutions.len())
        .map(|i| (0..=i).map(|j| solutions[i].distance(&solutions[j])).collect())
        .collect();
    let k = (0..solutions.len())
        .rev()
        .find(|&i| (0..=i).all(|j| distances[i][j] <= threshold(c, mu, j)))
        .unwrap_or(0);
    Ok(AdaptiveResult {
        alphas: solutions.iter().map(|s| s.alpha).collect(),
        solutions,
        k,
        distances,
        c,
        mu,
        bound_at_k: 6.0 * c / mu.powi(k as i32),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateDiagnostic {
    /// `Ψ⁻¹(δ) = φ(α_δ)`.
    pub psi_inv: f64,
    /// `6 μ ρ Ψ⁻¹(δ)`.
    pub bound: f64,
}

/// Closed-form `Ψ⁻¹(δ) = (δ C (d+2) / ρ)^{2ν/(2ν+1)}` for `φ(λ) = λ^ν`.
pub fn rate_diagnostic(cfg: &AdaptiveConfig) -> Result<RateDiagnostic> {
    let src = cfg
        .source
        .ok_or_else(|| Error::InvalidParameter("rate diagnostic needs a source condition".into()))?;
    if !(src.nu > 0.0 && src.nu <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "only power source functions with ν in (0, 1] are supported, got ν = {}",
            src.nu
        )));
    }
    if !(src.rho > 0.0) || !(cfg.c > 0.0) || !(cfg.delta >= 0.0) {
        return Err(Error::InvalidParameter("need ρ > 0, C > 0 and δ ≥ 0".into()));
    }
    let base = cfg.delta * cfg.c * (cfg.dim as f64 + 2.0) / src.rho;
    let psi_inv = base.powf(2.0 * src.nu / (2.0 * src.nu + 1.0));
    Ok(RateDiagnostic {
        psi_inv,
        bound: 6.0 * cfg.mu * src.rho * psi_inv,
    })
}

/// `l = max{i ∈ 0..N-1 : ρ μ^i φ(α_i) ≤ C}`, or `None` if no index qualifies.
pub fn diagnostic_l(cfg: &AdaptiveConfig, alphas: &[f64]) -> Option<usize> {
    let src = cfg.source?;
    let last = alphas.len().saturating_sub(1);
    (0..last)
        .rev()
        .find(|&i| src.rho * cfg.mu.powi(i as i32) * src.phi(alphas[i]) <= cfg.c)
}
