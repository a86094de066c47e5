//! Gauss–Legendre rules on `[0, 1]` with node doubling.

use crate::error::{Error, Result};

/// Nodes and weights of an `n`-point rule mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from the Chebyshev-like initial guesses.
    pub fn unit_interval(n: usize) -> Self {
        assert!(n > 0, "quadrature needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1,1] → [0,1]
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Result of an adaptive (node-doubling) integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub nodes: usize,
    pub last_change: f64,
}

/// Doubles the node count from `start` until successive estimates differ by
/// at most `tol · max(1, |value|)`, up to `max_nodes`.
///
/// `integrate` evaluates the rule; `distance` measures the change between
/// two estimates.
pub fn integrate_doubling<T, I, D>(
    start: usize,
    max_nodes: usize,
    tol: f64,
    integrate: I,
    distance: D,
) -> Result<Integral<T>>
where
    I: Fn(&GaussLegendre) -> Result<T>,
    D: Fn(&T, &T) -> (f64, f64),
{
    let mut n = start;
    let mut prev = integrate(&GaussLegendre::unit_interval(n))?;
    let mut last_change = f64::INFINITY;
    loop {
        let next_n = n * 2;
        if next_n > max_nodes {
            return Err(Error::QuadratureNonConvergence {
                nodes: n,
                change: last_change,
            });
        }
        let next = integrate(&GaussLegendre::unit_interval(next_n))?;
        let (change, scale) = distance(&prev, &next);
        if change <= tol * scale.max(1.0) {
            return Ok(Integral {
                value: next,
                nodes: next_n,
                last_change: change,
            });
        }
        last_change = change;
        prev = next;
        n = next_n;
    }
}

/// Scalar convenience wrapper around [`integrate_doubling`].
pub fn integrate_scalar<F: Fn(f64) -> Result<f64>>(
    f: F,
    start: usize,
    max_nodes: usize,
    tol: f64,
) -> Result<Integral<f64>> {
    integrate_doubling(
        start,
        max_nodes,
        tol,
        |rule| {
            let mut acc = 0.0;
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                acc += w * f(x)?;
            }
            Ok(acc)
        },
        |a, b| ((a - b).abs(), b.abs()),
    )
}
