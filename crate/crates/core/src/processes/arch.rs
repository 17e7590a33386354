//! ARCH(∞) with polynomially decaying coefficients, simulated through the
//! finite recursion `σ²_n = c + Σ_{j≤J} c_j X²_{n-j}`.

use rand::Rng;

use super::InnovationLaw;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ArchModel {
    c: f64,
    kappa: f64,
    b: f64,
    terms: usize,
    innovation: InnovationLaw,
    burn_in: usize,
    coeffs: Vec<f64>,
}

impl ArchModel {
    /// `c_j = κ j^{-b}` for `j = 1..=terms`; the burn-in defaults to `10·terms`.
    pub fn new(c: f64, kappa: f64, b: f64, terms: usize, innovation: InnovationLaw) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidInput(format!("ARCH intercept c must be positive, got {c}")));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidInput(format!("kappa must be nonnegative, got {kappa}")));
        }
        if !(b > 1.0 && b.is_finite()) {
            return Err(Error::InvalidInput(format!("decay exponent b must exceed 1, got {b}")));
        }
        if terms == 0 {
            return Err(Error::InvalidDimension("ARCH needs at least one lag".into()));
        }
        let coeffs: Vec<f64> = (1..=terms).map(|j| kappa * (j as f64).powf(-b)).collect();
        let model = Self {
            c,
            kappa,
            b,
            terms,
            innovation,
            burn_in: 10 * terms,
            coeffs,
        };
        model.validate()?;
        Ok(model)
    }

    /// Explicit coefficient list `c_1, …, c_J`; `kappa` and `b` are kept for reporting.
    pub fn with_coeffs(c: f64, coeffs: Vec<f64>, innovation: InnovationLaw) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidDimension("ARCH needs at least one lag".into()));
        }
        if coeffs.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput("ARCH coefficients must be nonnegative".into()));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidInput(format!("ARCH intercept c must be positive, got {c}")));
        }
        let model = Self {
            c,
            kappa: f64::NAN,
            b: f64::NAN,
            terms: coeffs.len(),
            innovation,
            burn_in: 10 * coeffs.len(),
            coeffs,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in.max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.coeff_sum();
        if !(s < 1.0) {
            return Err(Error::NonStationary(s));
        }
        Ok(())
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn innovation(&self) -> &InnovationLaw {
        &self.innovation
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff_sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// `v² = E X_0² = c / (1 - Σ c_j)`.
    pub fn stationary_variance(&self) -> f64 {
        self.c / (1.0 - self.coeff_sum())
    }

    /// Whether `b > 1 + 2(p-2)/(p-4)`, the decay needed for the rate
    /// `n^{-1} log n` when `η_0 ∈ L^p`, `p ∈ (4, 6]`.
    pub fn satisfies_decay_condition(&self, p: f64) -> bool {
        p > 4.0 && self.b > 1.0 + 2.0 * (p - 2.0) / (p - 4.0)
    }

    /// `σ²` at the next time given squared history, most recent last.
    #[inline]
    pub fn next_sigma2(&self, sq_history: &[f64]) -> f64 {
        let len = sq_history.len();
        let mut s = self.c;
        for (j, cj) in self.coeffs.iter().enumerate() {
            s += cj * sq_history[len - 1 - j];
        }
        s
    }

    /// Fills a squared-value history of length `terms` by running the
    /// recursion for `burn_in` steps from the stationary mean.
    pub fn warm_history<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.warm_history_keep(self.terms, rng)
    }

    /// As [`ArchModel::warm_history`], keeping the last `max(keep, terms)`
    /// squared values (at most `terms + burn_in`).
    pub fn warm_history_keep<R: Rng + ?Sized>(&self, keep: usize, rng: &mut R) -> Vec<f64> {
        let j = self.terms;
        let mut sq = vec![self.stationary_variance(); j + self.burn_in];
        for t in j..sq.len() {
            let s2 = self.next_sigma2(&sq[..t]);
            let eta = self.innovation.sample_standardized(rng);
            sq[t] = s2 * eta * eta;
        }
        let keep = keep.max(j).min(sq.len());
        sq.split_off(sq.len() - keep)
    }

    /// Raw path `X_1..X_n` with `E X² = v²`, after burn-in.
    pub fn fill_raw_path<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        let j = self.terms;
        let mut sq = self.warm_history(rng);
        sq.reserve(out.len());
        for slot in out.iter_mut() {
            let s2 = self.next_sigma2(&sq);
            let x = s2.sqrt() * self.innovation.sample_standardized(rng);
            sq.push(x * x);
            *slot = x;
        }
        debug_assert!(sq.len() >= j);
    }

    pub fn label(&self) -> String {
        format!(
            "arch(c={},kappa={},b={},J={},burn_in={},{})",
            self.c,
            self.kappa,
            self.b,
            self.terms,
            self.burn_in,
            self.innovation.label()
        )
    }
}
