use serde::Serialize;

use crate::error::{Error, Result};
use crate::opalgebra::{variance, CMatrix, DensityMatrix, HermitianOperator};
use crate::quadrature::integrate_scalar;

/// Skew-information quadrature: 64 nodes to start, doubled until stable.
const ALPHA_NODES: usize = 64;
const ALPHA_MAX_NODES: usize = 8192;
const ALPHA_TOL: f64 = 1e-10;

/// Logarithmic mean `(p − q)/(ln p − ln q)`, with `L(p, p) = p` and
/// `L(p, 0) = 0`.
pub fn log_mean(p: f64, q: f64) -> f64 {
    let (hi, lo) = if p >= q { (p, q) } else { (q, p) };
    if lo <= 0.0 {
        return 0.0;
    }
    let u = lo / hi - 1.0; // in (-1, 0]
    let ratio = if u.abs() < 1e-4 {
        // u / ln(1 + u)
        1.0 + u / 2.0 - u * u / 12.0 + u * u * u / 24.0
    } else {
        u / u.ln_1p()
    };
    hi * ratio
}

/// The bracket multiplying `|O_nm|²` in Ξ:
/// `2(p_m − p_n)²/((p_n + p_m) ln²(p_m/p_n)) − p_n = 2L²/(p_n + p_m) − p_n`.
pub fn xi_bracket(p_n: f64, p_m: f64) -> f64 {
    let s = p_n + p_m;
    if s <= 0.0 {
        return 0.0;
    }
    let l = log_mean(p_n, p_m);
    2.0 * l * l / s - p_n
}

/// Var, Q, K and Ξ of one observable, from a single spectral pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkewDecomposition {
    pub var: f64,
    pub q: f64,
    pub k: f64,
    pub xi: f64,
    /// Weight of eigenvalues treated as exact zeros.
    pub clipped_mass: f64,
}

pub fn skew_decomposition(rho: &DensityMatrix, obs: &HermitianOperator) -> Result<SkewDecomposition> {
    obs.check_dim(rho.dim())?;
    let pops = rho.populations();
    let p = &pops.values;
    let o = rho.spectrum().matrix_elements(obs.matrix());
    let n = p.len();
    let mean: f64 = (0..n).map(|i| p[i] * o[(i, i)].re).sum();
    let mut diag = 0.0;
    let mut q = 0.0;
    let mut off_l = 0.0;
    let mut xi = 0.0;
    let mut off_var = 0.0;
    for i in 0..n {
        let d = o[(i, i)].re - mean;
        diag += p[i] * d * d;
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = o[(i, j)].norm_sqr();
            let l = log_mean(p[i], p[j]);
            off_var += p[i] * w;
            q += (p[i] - l) * w;
            off_l += l * w;
            xi += xi_bracket(p[i], p[j]) * w;
        }
    }
    let var = diag + off_var;
    Ok(SkewDecomposition {
        var,
        q: clip_round_off(q),
        k: diag + off_l,
        xi: if xi > 0.0 && xi <= 1e-12 { 0.0 } else { xi },
        clipped_mass: pops.clipped_mass,
    })
}

fn clip_round_off(v: f64) -> f64 {
    if (-1e-12..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::DomainError(format!("alpha must lie in (0,1), got {alpha}")));
    }
    Ok(())
}

fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Wigner–Yanase–Dyson skew information `−½ tr([O, ρ^α][O, ρ^{1−α}])`.
pub fn wyd_skew_alpha(rho: &DensityMatrix, obs: &HermitianOperator, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    obs.check_dim(rho.dim())?;
    let o = obs.matrix();
    let a = commutator(o, rho.power(alpha).matrix());
    let b = commutator(o, rho.power(1.0 - alpha).matrix());
    Ok(clip_round_off(-0.5 * (a * b).trace().re))
}

/// `Q = ∫₀¹ Q_α dα` in closed form.
pub fn wyd_skew_avg(rho: &DensityMatrix, obs: &HermitianOperator) -> Result<f64> {
    Ok(skew_decomposition(rho, obs)?.q)
}

/// Gauss–Legendre quadrature of [`wyd_skew_alpha`] over α.
pub fn wyd_skew_avg_quadrature(rho: &DensityMatrix, obs: &HermitianOperator) -> Result<f64> {
    Ok(integrate_scalar(|a| wyd_skew_alpha(rho, obs, a), ALPHA_NODES, ALPHA_MAX_NODES, ALPHA_TOL)?.value)
}

/// `K_α = tr(ρ^α δO ρ^{1−α} δO)`.
pub fn classical_k_alpha(rho: &DensityMatrix, obs: &HermitianOperator, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    obs.check_dim(rho.dim())?;
    let mean = crate::opalgebra::expectation(rho, obs)?;
    let d = obs.shift(-mean);
    let d = d.matrix();
    Ok((rho.power(alpha).matrix() * d * rho.power(1.0 - alpha).matrix() * d).trace().re)
}

/// `K = ∫₀¹ K_α dα` in closed form; equals `Var − Q`.
pub fn classical_k_avg(rho: &DensityMatrix, obs: &HermitianOperator) -> Result<f64> {
    Ok(skew_decomposition(rho, obs)?.k)
}

/// Gauss–Legendre quadrature of [`classical_k_alpha`] over α.
pub fn classical_k_quadrature(rho: &DensityMatrix, obs: &HermitianOperator) -> Result<f64> {
    Ok(integrate_scalar(|a| classical_k_alpha(rho, obs, a), ALPHA_NODES, ALPHA_MAX_NODES, ALPHA_TOL)?.value)
}

/// The correction Ξ in `F = Var + Ξ`; never positive.
pub fn xi_term(rho: &DensityMatrix, obs: &HermitianOperator) -> Result<f64> {
    Ok(skew_decomposition(rho, obs)?.xi)
}

/// `Var − Q`, the classical complement, via the centred variance.
pub fn var_minus_q(rho: &DensityMatrix, obs: &HermitianOperator) -> Result<f64> {
    Ok(variance(rho, obs)? - wyd_skew_avg(rho, obs)?)
}

/// `(x − 1)/(x + 1) − ½ ln x` for `x ∈ (0, 1)`.
///
/// With `t = (1 − x)/(1 + x)` this is `atanh t − t`, which is evaluated by
/// its series near `x = 1` to keep the sign resolvable.
pub fn scalar_log_margin(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::DomainError(format!("x must lie in (0,1), got {x}")));
    }
    let t = (1.0 - x) / (1.0 + x);
    if t < 1e-3 {
        let t2 = t * t;
        Ok(t * t2 * (1.0 / 3.0 + t2 * (1.0 / 5.0 + t2 / 7.0)))
    } else {
        Ok(t.atanh() - t)
    }
}

/// Whether `(x − 1)/(x + 1) > ½ ln x` holds at `x`.
pub fn scalar_log_inequality(x: f64) -> Result<bool> {
    Ok(scalar_log_margin(x)? > 0.0)
}
