//! Two-point laws with prescribed variance and third moment, and the
//! conditional moment functionals of the surrogate variables `Y_k(θ)`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::processes::MomentTable;

/// Law taking `m` with probability `t` and `m_prime` with probability `1-t`.
///
/// Mean 0, variance `sigma2`, third moment `beta3` and fourth moment
/// `sigma2² + beta3²/sigma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointLaw {
    pub m: f64,
    pub m_prime: f64,
    pub t: f64,
    pub sigma2: f64,
    pub beta3: f64,
}

impl TwoPointLaw {
    /// `E Y^k`.
    pub fn moment(&self, k: i32) -> f64 {
        self.t * self.m.powi(k) + (1.0 - self.t) * self.m_prime.powi(k)
    }

    pub fn target_fourth_moment(&self) -> f64 {
        self.sigma2 * self.sigma2 + self.beta3 * self.beta3 / self.sigma2
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.gen::<f64>() < self.t {
            self.m
        } else {
            self.m_prime
        }
    }

    /// `E exp(i u Y)`.
    pub fn cf(&self, u: f64) -> Complex64 {
        Complex64::from_polar(self.t, u * self.m)
            + Complex64::from_polar(1.0 - self.t, u * self.m_prime)
    }
}

/// Builds the two-point law matching `(0, sigma2, beta3)`.
///
/// `m = (β₃ + s)/(2σ²)` with `s = √(β₃² + 4σ⁶)`, `m' = -σ²/m` and
/// `t = 2σ⁶ / (4σ⁶ + β₃(β₃ + s))`. For `β₃ < 0` the sum `β₃ + s` is formed as
/// `4σ⁶/(s - β₃)` and `t` as `(s - β₃)/(2s)`, which are algebraically equal
/// and free of cancellation.
pub fn two_point_from_moments(sigma2: f64, beta3: f64) -> Result<TwoPointLaw> {
    if !sigma2.is_finite() || !beta3.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite moments (sigma2 = {sigma2}, beta3 = {beta3})"
        )));
    }
    if sigma2 <= 0.0 {
        return Err(Error::InvalidVariance(sigma2));
    }
    let s6 = sigma2 * sigma2 * sigma2;
    let s = beta3.hypot(2.0 * sigma2 * sigma2.sqrt());
    let (q, t) = if beta3 >= 0.0 {
        let q = beta3 + s;
        (q, 2.0 * s6 / (s * q))
    } else {
        (4.0 * s6 / (s - beta3), (s - beta3) / (2.0 * s))
    };
    let m = q / (2.0 * sigma2);
    Ok(TwoPointLaw {
        m,
        m_prime: -sigma2 / m,
        t,
        sigma2,
        beta3,
    })
}

/// `β_{k,3}(θ)` and `β_{k,4}(θ)` for `k = 1..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaMoments {
    pub beta3: Vec<f64>,
    pub beta4: Vec<f64>,
}

/// `β_{k,3} = θ_k³ E X³ + 3 Σ_{ℓ<k} θ_ℓ θ_k² a(k-ℓ)` and
/// `β_{k,4} = θ_k⁴ + β_{k,3}²/θ_k²` (zero when `θ_k = 0`), for a unit-variance
/// process whose `a(u) = E(X_0 X_u²)` is tabulated in `table`.
pub fn beta_moments(theta: &[f64], table: &MomentTable) -> Result<BetaMoments> {
    let n = theta.len();
    if n == 0 {
        return Err(Error::InvalidDimension("empty weight vector".into()));
    }
    let needed = n - 1;
    if table.horizon() < needed {
        return Err(Error::InsufficientTable {
            horizon: table.horizon(),
            required: needed,
        });
    }
    // Σ_{ℓ<k} θ_ℓ a(k-ℓ), accumulated lag by lag; lags with a(u) = 0 are skipped.
    let mut cross = vec![0.0; n];
    for u in 1..n {
        let a = table.a[u];
        if a == 0.0 {
            continue;
        }
        for k in u..n {
            cross[k] += theta[k - u] * a;
        }
    }
    let third = table.third_moment;
    let mut beta3 = Vec::with_capacity(n);
    let mut beta4 = Vec::with_capacity(n);
    for (k, &th) in theta.iter().enumerate() {
        let t2 = th * th;
        let b3 = t2 * th * third + 3.0 * t2 * cross[k];
        beta3.push(b3);
        beta4.push(if th == 0.0 { 0.0 } else { t2 * t2 + b3 * b3 / t2 });
    }
    Ok(BetaMoments { beta3, beta4 })
}

/// One conditionally independent draw of `(Y_1(θ), …, Y_n(θ))`.
pub fn sample_surrogates<R: Rng + ?Sized>(
    theta: &[f64],
    betas: &BetaMoments,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let laws = surrogate_laws(theta, betas)?;
    Ok(laws
        .iter()
        .map(|law| law.map_or(0.0, |l| l.sample(rng)))
        .collect())
}

/// Per-coordinate two-point laws; `None` where `θ_k = 0`.
pub fn surrogate_laws(theta: &[f64], betas: &BetaMoments) -> Result<Vec<Option<TwoPointLaw>>> {
    if betas.beta3.len() != theta.len() {
        return Err(Error::LengthMismatch {
            expected: theta.len(),
            got: betas.beta3.len(),
        });
    }
    if betas.beta4.len() != theta.len() {
        return Err(Error::LengthMismatch {
            expected: theta.len(),
            got: betas.beta4.len(),
        });
    }
    theta
        .iter()
        .zip(&betas.beta3)
        .map(|(&th, &b3)| {
            if th == 0.0 {
                Ok(None)
            } else {
                two_point_from_moments(th * th, b3).map(Some)
            }
        })
        .collect()
}

/// Evaluation of the event `Γ_n(θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaEvent {
    pub holds: bool,
    /// `(T₀ max_k |β_{k,3}|, T₀³ |Σ β_{k,3}|, T₀⁴ Σ β_{k,4})`.
    pub margins: [f64; 3],
}

pub fn gamma_event(betas: &BetaMoments, t0: f64) -> Result<GammaEvent> {
    if !(t0 >= 1.0 && t0.is_finite()) {
        return Err(Error::InvalidInput(format!("T0 must be >= 1, got {t0}")));
    }
    let max_b3 = betas.beta3.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let sum_b3: f64 = betas.beta3.iter().sum();
    let sum_b4: f64 = betas.beta4.iter().sum();
    let margins = [t0 * max_b3, t0.powi(3) * sum_b3.abs(), t0.powi(4) * sum_b4];
    Ok(GammaEvent {
        holds: margins.iter().all(|&m| m <= 1.0),
        margins,
    })
}
