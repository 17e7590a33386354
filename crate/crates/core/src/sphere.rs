//! Uniform directions on the unit sphere and the centered-projection geometry.
//!
//! The centered projection `<X, Aθ/|Aθ|>` with `A = I - J/n` is rewritten in
//! the Helmert basis `u_1, …, u_n` (last vector `1/√n`), which gives the
//! weights `θ̂` on `S^{n-2}`, the partial sums `θ̃_ℓ` and the weights `θ*` such
//! that `Σ θ*_ℓ X_ℓ = Σ θ̂_k X*_k`. Everything here is `O(n)`; the full basis
//! matrix is only materialized by [`helmert_basis`].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const UNIT_NORM_TOL: f64 = 1e-12;

/// A point on `S^{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereVector(Vec<f64>);

impl SphereVector {
    /// Wraps coordinates that are already unit-norm.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidDimension("n must be at least 1".into()));
        }
        let norm = l2(&coords);
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::InvalidInput(format!(
                "vector has norm {norm}, expected 1"
            )));
        }
        Ok(Self(coords))
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn from_unnormalized(mut coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidDimension("n must be at least 1".into()));
        }
        let norm = l2(&coords);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        coords.iter_mut().for_each(|c| *c /= norm);
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for SphereVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Draws from the uniform law on `S^{n-1}` by normalizing iid standard
/// Gaussians. An all-zero draw is resampled.
pub fn sample_uniform_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SphereVector> {
    if n == 0 {
        return Err(Error::InvalidDimension("n must be at least 1".into()));
    }
    let mut v = vec![0.0; n];
    loop {
        for c in v.iter_mut() {
            *c = rng.sample(StandardNormal);
        }
        let norm = l2(&v);
        if norm > 0.0 && norm.is_finite() {
            v.iter_mut().for_each(|c| *c /= norm);
            return Ok(SphereVector(v));
        }
    }
}

/// Row-major `n × n` matrix whose `k`-th row is the Helmert vector `u_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    n: usize,
    rows: Vec<f64>,
}

impl OrthonormalBasis {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Row `k` (0-based), i.e. `u_{k+1}`.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k * self.n..(k + 1) * self.n]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i * self.n + j]
    }

    /// Dense `B x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        Ok((0..self.n)
            .map(|k| self.row(k).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `max_{i,j} |(B Bᵗ - I)_{ij}|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            let ri = self.row(i);
            for j in i..n {
                let dot: f64 = ri.iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// The Helmert basis: `u_1 = (1,-1,0,…)/√2`, `u_k` has `k` entries
/// `1/√(k(k+1))` followed by `-k/√(k(k+1))`, and `u_n = 1/√n`.
pub fn helmert_basis(n: usize) -> Result<OrthonormalBasis> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "Helmert basis needs n >= 2, got {n}"
        )));
    }
    let mut rows = vec![0.0; n * n];
    for k in 1..n {
        // row index k-1 holds u_k
        let denom = ((k * (k + 1)) as f64).sqrt();
        let row = &mut rows[(k - 1) * n..k * n];
        for v in row.iter_mut().take(k) {
            *v = 1.0 / denom;
        }
        row[k] = -(k as f64) / denom;
    }
    let last = 1.0 / (n as f64).sqrt();
    rows[(n - 1) * n..].iter_mut().for_each(|v| *v = last);
    Ok(OrthonormalBasis { n, rows })
}

/// The first `n-1` Helmert coordinates `(B x)_1, …, (B x)_{n-1}`, in `O(n)`.
///
/// This is also `X*_k = √(k/(k+1)) (X̄_k - X_{k+1})`.
pub fn helmert_coordinates(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    let mut prefix = 0.0;
    for k in 1..n {
        prefix += x[k - 1];
        let kf = k as f64;
        out.push((prefix - kf * x[k]) / (kf * (kf + 1.0)).sqrt());
    }
    out
}

/// `X*` of a vector; identical to [`helmert_coordinates`] but validates `n`.
pub fn x_star(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::InvalidDimension(format!(
            "X* needs n >= 2, got {}",
            x.len()
        )));
    }
    Ok(helmert_coordinates(x))
}

/// Derived weights of the centered projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteredWeights {
    /// `θ̂ ∈ S^{n-2}`, length `n-1`.
    pub theta_hat: Vec<f64>,
    /// Partial sums `θ̃_ℓ = Σ_{v=ℓ}^{n-1} θ̂_v / √(v(v+1))`, length `n-1`.
    pub theta_script: Vec<f64>,
    /// `θ*`, length `n`; equals `Aθ/|Aθ|`.
    pub theta_star: Vec<f64>,
}

impl CenteredWeights {
    pub fn sum_sq_star(&self) -> f64 {
        self.theta_star.iter().map(|v| v * v).sum()
    }
}

pub fn centered_weights(theta: &SphereVector) -> Result<CenteredWeights> {
    centered_weights_raw(theta.coords())
}

/// Same as [`centered_weights`] for any nonzero direction (it need not be
/// normalized; `θ̂` absorbs the scale).
pub fn centered_weights_raw(theta: &[f64]) -> Result<CenteredWeights> {
    let n = theta.len();
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "centered weights need n >= 2, got {n}"
        )));
    }
    if theta.iter().all(|&v| v == theta[0]) {
        return Err(Error::DegenerateDirection);
    }
    let mut theta_hat = helmert_coordinates(theta);
    let tilde_norm = l2(&theta_hat);
    if !(tilde_norm > 0.0 && tilde_norm.is_finite()) {
        return Err(Error::DegenerateDirection);
    }
    theta_hat.iter_mut().for_each(|v| *v /= tilde_norm);

    // θ̃_ℓ, accumulated right to left.
    let mut theta_script = vec![0.0; n - 1];
    let mut acc = 0.0;
    for l in (1..n).rev() {
        let lf = l as f64;
        acc += theta_hat[l - 1] / (lf * (lf + 1.0)).sqrt();
        theta_script[l - 1] = acc;
    }

    let mut theta_star = Vec::with_capacity(n);
    for l in 1..n {
        let lf = l as f64;
        let prev = if l >= 2 {
            ((lf - 1.0) / lf).sqrt() * theta_hat[l - 2]
        } else {
            0.0
        };
        theta_star.push(theta_script[l - 1] - prev);
    }
    let nf = n as f64;
    theta_star.push(-((nf - 1.0) / nf).sqrt() * theta_hat[n - 2]);

    Ok(CenteredWeights {
        theta_hat,
        theta_script,
        theta_star,
    })
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

/// `S_n(θ) = <X, θ>`.
pub fn project(x: &[f64], theta: &SphereVector) -> Result<f64> {
    check_len(theta.dim(), x.len())?;
    Ok(dot(x, theta.coords()))
}

/// `S̃_n(θ) = <X, Aθ/|Aθ|>`.
pub fn project_centered(x: &[f64], theta: &SphereVector) -> Result<f64> {
    check_len(theta.dim(), x.len())?;
    let w = centered_weights(theta)?;
    Ok(dot(x, &w.theta_star))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
