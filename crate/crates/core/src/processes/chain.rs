//! Finite Markov chains, exact kernel operations and the truncated
//! return-to-zero chain on `{-N, …, N}`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// Row-stochastic kernel on `0..S` stored sparsely, with its stationary law.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    rows: Vec<Vec<(usize, f64)>>,
    pi: Vec<f64>,
    pi_cdf: Vec<f64>,
}

impl MarkovChain {
    pub fn from_dense(kernel: &[Vec<f64>]) -> Result<Self> {
        let s = kernel.len();
        let rows = kernel
            .iter()
            .map(|row| {
                if row.len() != s {
                    return Err(Error::LengthMismatch {
                        expected: s,
                        got: row.len(),
                    });
                }
                Ok(row
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p != 0.0)
                    .map(|(j, p)| (j, *p))
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_sparse(rows)
    }

    pub fn from_sparse(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let s = rows.len();
        if s == 0 {
            return Err(Error::InvalidDimension("chain needs at least one state".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            let mut total = 0.0;
            for &(j, p) in row {
                if j >= s {
                    return Err(Error::InvalidInput(format!(
                        "row {i} points to state {j} outside 0..{s}"
                    )));
                }
                if !(p >= 0.0 && p.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "row {i} has invalid probability {p}"
                    )));
                }
                total += p;
            }
            if (total - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidInput(format!(
                    "row {i} sums to {total}, expected 1"
                )));
            }
        }
        let pi = solve_stationary(&rows)?;
        let mut acc = 0.0;
        let pi_cdf = pi
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { rows, pi, pi_cdf })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn transition(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .filter(|(k, _)| *k == j)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    /// `(K g)(y) = Σ_z K(y, z) g(z)`.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, p)| p * g[j]).sum())
            .collect()
    }

    /// `μ K`.
    pub fn push_forward(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, row) in self.rows.iter().enumerate() {
            let m = mu[i];
            if m == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j] += m * p;
            }
        }
        out
    }

    /// `Σ_y π(y) g(y)`.
    pub fn expect(&self, g: &[f64]) -> f64 {
        self.pi.iter().zip(g).map(|(p, v)| p * v).sum()
    }

    /// `‖π K - π‖_∞`.
    pub fn stationary_residual(&self) -> f64 {
        self.push_forward(&self.pi)
            .iter()
            .zip(&self.pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen::<f64>() * self.pi_cdf[self.len() - 1];
        self.pi_cdf
            .partition_point(|&c| c <= u)
            .min(self.len() - 1)
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        let row = &self.rows[state];
        let mut u: f64 = rng.gen();
        for &(j, p) in &row[..row.len() - 1] {
            if u < p {
                return j;
            }
            u -= p;
        }
        row[row.len() - 1].0
    }
}

/// Stationary law of a row-stochastic kernel.
///
/// Solves `(Kᵗ - I) π = 0` with the last equation replaced by `Σ π = 1`, then
/// applies one power-iteration step `π ← π K` and renormalizes.
pub fn stationary_distribution(chain: &MarkovChain) -> Result<Vec<f64>> {
    solve_stationary(&chain.rows)
}

fn solve_stationary(rows: &[Vec<(usize, f64)>]) -> Result<Vec<f64>> {
    let s = rows.len();
    let mut m = DMatrix::<f64>::zeros(s, s);
    for (i, row) in rows.iter().enumerate() {
        for &(j, p) in row {
            // transpose: equation j gets coefficient p on unknown i
            m[(j, i)] += p;
        }
    }
    for i in 0..s {
        m[(i, i)] -= 1.0;
    }
    for i in 0..s {
        m[(s - 1, i)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(s);
    rhs[s - 1] = 1.0;
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericFailure("stationary system is singular".into()))?;
    let mut pi: Vec<f64> = sol.iter().copied().collect();
    if pi.iter().any(|p| !p.is_finite()) {
        return Err(Error::NumericFailure(
            "stationary solve produced non-finite values".into(),
        ));
    }
    if pi.iter().any(|&p| p < -1e-10) {
        return Err(Error::NumericFailure(
            "stationary solve produced negative mass (chain not irreducible?)".into(),
        ));
    }
    // one power-iteration refinement
    let mut next = vec![0.0; s];
    for (i, row) in rows.iter().enumerate() {
        for &(j, p) in row {
            next[j] += pi[i].max(0.0) * p;
        }
    }
    let total: f64 = next.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NumericFailure("stationary vector has zero mass".into()));
    }
    next.iter_mut().for_each(|p| *p /= total);
    pi = next;
    Ok(pi)
}

/// The return-to-zero chain on `{-N, …, N}`.
///
/// From 0 the chain moves to `±1` with probability 1/2 each. From `±n`,
/// `0 < n < N`, it moves outward with probability `a_n` and back to 0
/// otherwise. The boundary states `±N` keep the outward mass `a_{N-1}` on
/// themselves and send `1 - a_{N-1}` to 0, so both `f₁` and `f₂` stay
/// harmonic (`K f = 0`) on the truncated state space.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedChain {
    half_width: usize,
    a: Vec<f64>,
    f_coeffs: (f64, f64),
    chain: MarkovChain,
}

impl TruncatedChain {
    /// `a` holds `a_0, …, a_{N-1}` with `a_0 = 1/2` and `a_i ∈ [1/2, 1)`.
    pub fn new(half_width: usize, a: Vec<f64>, f_coeffs: (f64, f64)) -> Result<Self> {
        if half_width < 2 {
            return Err(Error::InvalidDimension(format!(
                "half width must be at least 2, got {half_width}"
            )));
        }
        if a.len() != half_width {
            return Err(Error::LengthMismatch {
                expected: half_width,
                got: a.len(),
            });
        }
        if a[0] != 0.5 {
            return Err(Error::InvalidInput(format!("a_0 must be 1/2, got {}", a[0])));
        }
        if let Some((i, v)) = a.iter().enumerate().find(|(_, v)| !(**v >= 0.5 && **v < 1.0)) {
            return Err(Error::InvalidInput(format!("a_{i} = {v} is outside [1/2, 1)")));
        }
        let n = half_width as i64;
        let size = 2 * half_width + 1;
        let idx = |y: i64| (y + n) as usize;
        let mut rows = vec![Vec::new(); size];
        rows[idx(0)] = vec![(idx(-1), 0.5), (idx(1), 0.5)];
        for k in 1..=n {
            let ak = if k < n { a[k as usize] } else { a[(n - 1) as usize] };
            for sign in [-1i64, 1] {
                let y = sign * k;
                let out = if k < n { sign * (k + 1) } else { y };
                rows[idx(y)] = vec![(idx(out), ak), (idx(0), 1.0 - ak)];
            }
        }
        let chain = MarkovChain::from_sparse(rows)?;
        Ok(Self {
            half_width,
            a,
            f_coeffs,
            chain,
        })
    }

    /// `a_i = 1 - (3 + (1+ε)/log i)/i` where that value lies in `[1/2, 1)` and
    /// `i ≥ formula_from`; `a_i = 1/2` otherwise.
    pub fn default_schedule(half_width: usize, epsilon: f64, formula_from: usize) -> Vec<f64> {
        (0..half_width)
            .map(|i| {
                if i < formula_from.max(2) {
                    return 0.5;
                }
                let fi = i as f64;
                let v = 1.0 - (3.0 + (1.0 + epsilon) / fi.ln()) / fi;
                if (0.5..1.0).contains(&v) {
                    v
                } else {
                    0.5
                }
            })
            .collect()
    }

    /// Chain with the default schedule and `f = f₁`.
    pub fn with_default_schedule(half_width: usize, epsilon: f64) -> Result<Self> {
        Self::new(
            half_width,
            Self::default_schedule(half_width, epsilon, 2),
            (1.0, 0.0),
        )
    }

    pub fn with_f_coeffs(mut self, alpha: f64, beta: f64) -> Self {
        self.f_coeffs = (alpha, beta);
        self
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn f_coeffs(&self) -> (f64, f64) {
        self.f_coeffs
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }

    pub fn index_of(&self, y: i64) -> usize {
        (y + self.half_width as i64) as usize
    }

    pub fn state_of(&self, idx: usize) -> i64 {
        idx as i64 - self.half_width as i64
    }

    /// `f₁(±1) = ±1`, zero elsewhere.
    pub fn f1(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.chain.len()];
        f[self.index_of(1)] = 1.0;
        f[self.index_of(-1)] = -1.0;
        f
    }

    /// `f₂(0) = 1`, `f₂(±1) = 0`, `f₂(±(n+1)) = 1 - 1/a_n` for `n > 0`.
    pub fn f2(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.chain.len()];
        f[self.index_of(0)] = 1.0;
        for k in 2..=self.half_width {
            let v = 1.0 - 1.0 / self.a[k - 1];
            f[self.index_of(k as i64)] = v;
            f[self.index_of(-(k as i64))] = v;
        }
        f
    }

    pub fn f(&self) -> Vec<f64> {
        let (alpha, beta) = self.f_coeffs;
        self.f1()
            .iter()
            .zip(self.f2())
            .map(|(a, b)| alpha * a + beta * b)
            .collect()
    }

    pub fn functional(&self) -> Result<MarkovFunctional> {
        let (alpha, beta) = self.f_coeffs;
        MarkovFunctional::new(self.chain.clone(), self.f()).map(|mf| {
            mf.with_label(format!(
                "markov(N={},f={alpha}*f1+{beta}*f2)",
                self.half_width
            ))
        })
    }
}

/// `X_i = scale · f(Y_i)` for a stationary chain `Y`, with the scale chosen so
/// that `E X_0² = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovFunctional {
    chain: MarkovChain,
    f: Vec<f64>,
    scale: f64,
    label: String,
}

impl MarkovFunctional {
    pub fn new(chain: MarkovChain, f: Vec<f64>) -> Result<Self> {
        if f.len() != chain.len() {
            return Err(Error::LengthMismatch {
                expected: chain.len(),
                got: f.len(),
            });
        }
        let second: f64 = chain.expect(&f.iter().map(|v| v * v).collect::<Vec<_>>());
        if !(second > 0.0 && second.is_finite()) {
            return Err(Error::InvalidInput(
                "functional has zero stationary second moment".into(),
            ));
        }
        Ok(Self {
            chain,
            f,
            scale: 1.0 / second.sqrt(),
            label: "markov".into(),
        })
    }

    pub fn with_label(mut self, label: String) -> Self {
        self.label = label;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }

    pub fn raw_f(&self) -> &[f64] {
        &self.f
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Normalized values `x(y) = scale · f(y)`.
    pub fn values(&self) -> Vec<f64> {
        self.f.iter().map(|v| v * self.scale).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.f.iter().fold(0.0f64, |m, v| m.max(v.abs())) * self.scale
    }

    pub fn fill_path<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        if out.is_empty() {
            return;
        }
        let mut y = self.chain.sample_stationary(rng);
        out[0] = self.scale * self.f[y];
        for slot in out.iter_mut().skip(1) {
            y = self.chain.step(y, rng);
            *slot = self.scale * self.f[y];
        }
    }
}
