//! Kolmogorov distance to the standard normal: empirical estimates,
//! characteristic-function inversion for conditionally iid projections, and
//! the smoothing integral `∫ |f_θ(t) - e^{-t²/2}| dt / t`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::processes::{InnovationLaw, MartingaleModel, ModelKind};
use crate::rng::{blocked, StreamKey, StreamRole};
use crate::sphere::{centered_weights, sample_uniform_sphere, SphereVector};

/// Paths per independently seeded block in Monte Carlo estimators.
pub const PATH_BLOCK: usize = 1024;

/// `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    Empirical,
    CfInversion,
    /// Exact sup over the atoms of a finitely supported law.
    Enumeration,
}

impl DistanceMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Empirical => "empirical",
            Self::CfInversion => "cf_inversion",
            Self::Enumeration => "enumeration",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub value: f64,
    /// `1/(2√m)` for empirical estimates (a DKW-scale proxy, not an
    /// asymptotic standard deviation); the quadrature residual bound for
    /// inversion; 0 for enumeration.
    pub se: f64,
    pub method: DistanceMethod,
    pub sample_size: usize,
}

/// One-sample Kolmogorov–Smirnov statistic against `N(0,1)`.
pub fn kolmogorov_vs_normal(samples: &[f64]) -> Result<KappaEstimate> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(i) = samples.iter().position(|v| v.is_nan()) {
        return Err(Error::InvalidSample(format!("NaN at position {i}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let p = normal_cdf(x);
        d = d.max((i + 1) as f64 / m - p).max(p - i as f64 / m);
    }
    Ok(KappaEstimate {
        value: d.clamp(0.0, 1.0),
        se: 0.5 / m.sqrt(),
        method: DistanceMethod::Empirical,
        sample_size: sorted.len(),
    })
}

/// `√(ln(2/α) / (2m))`: with probability at least `1-α` the empirical
/// distance of `m` draws from their true law is below this value.
pub fn dkw_threshold(m: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * m as f64)).sqrt()
}

/// Settings for characteristic-function inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfGrid {
    /// Fixed upper integration limit; `None` selects it adaptively.
    pub t_max: Option<f64>,
    /// FFT length; the `t`-step is `2π / (n_fft · dx)`.
    pub n_fft: usize,
    /// Spacing of the `x`-grid.
    pub dx: f64,
    /// The sup is taken over `[-x_range, x_range]`.
    pub x_range: f64,
    /// Largest residual accepted before reporting an accuracy error.
    pub tolerance: f64,
    /// Finitely supported laws with at most this many weights are enumerated.
    pub enumeration_max_n: usize,
    /// Cap on the adaptive `t_max`.
    pub t_cap: f64,
}

impl Default for CfGrid {
    fn default() -> Self {
        Self {
            t_max: None,
            n_fft: 1 << 16,
            dx: 1.0 / 256.0,
            x_range: 8.0,
            tolerance: 1e-6,
            enumeration_max_n: 20,
            t_cap: 1e4,
        }
    }
}

impl CfGrid {
    pub const QUADRATURE: &'static str = "trapezoid-fft";

    pub fn t_step(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.n_fft as f64 * self.dx)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_fft < 64 || !self.n_fft.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "n_fft must be a power of two and at least 64, got {}",
                self.n_fft
            )));
        }
        if let Some(t) = self.t_max {
            if !(t >= 1.0) {
                return Err(Error::InvalidInput(format!("t_max must be at least 1, got {t}")));
            }
        }
        if !(self.dx > 0.0 && self.x_range > 0.0) {
            return Err(Error::InvalidInput("dx and x_range must be positive".into()));
        }
        if 2.0 * self.x_range / self.dx >= self.n_fft as f64 / 2.0 {
            return Err(Error::InvalidInput("x-grid does not fit in half the FFT period".into()));
        }
        Ok(())
    }
}

/// `Π_j φ(θ_j t)` for a unit-variance innovation.
pub fn product_cf(theta: &[f64], law: &InnovationLaw, t: f64) -> Complex64 {
    match law {
        InnovationLaw::Rademacher => {
            Complex64::new(theta.iter().map(|w| (w * t).cos()).product(), 0.0)
        }
        InnovationLaw::StandardGaussian => {
            let s: f64 = theta.iter().map(|w| w * w).sum();
            Complex64::new((-0.5 * s * t * t).exp(), 0.0)
        }
        InnovationLaw::TwoPoint(_) => theta
            .iter()
            .map(|w| law.cf_standardized(w * t))
            .product(),
    }
}

/// `sup_x |P(Σ θ_j ξ_j ≤ x) - Φ(x)|` for iid unit-variance `ξ_j`.
pub fn cf_product_kolmogorov(theta: &[f64], law: &InnovationLaw, grid: &CfGrid) -> Result<KappaEstimate> {
    if theta.is_empty() {
        return Err(Error::InvalidDimension("empty weight vector".into()));
    }
    grid.validate()?;
    if let Some(atoms) = law.atoms() {
        if theta.len() <= grid.enumeration_max_n {
            return Ok(KappaEstimate {
                value: enumerate_kolmogorov(theta, &atoms),
                se: 0.0,
                method: DistanceMethod::Enumeration,
                sample_size: 0,
            });
        }
    }
    invert_kolmogorov(|t| product_cf(theta, law, t), grid)
}

/// Exact sup over the `2^n` atoms of `Σ θ_j ξ_j` with two-point `ξ_j`.
pub fn enumerate_kolmogorov(theta: &[f64], atoms: &[(f64, f64); 2]) -> f64 {
    let mut support: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    for w in theta {
        let mut next = Vec::with_capacity(support.len() * 2);
        for &(v, p) in &support {
            for &(a, q) in atoms {
                if q > 0.0 {
                    next.push((v + w * a, p * q));
                }
            }
        }
        support = next;
    }
    support.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum = 0.0;
    let mut sup = 0.0f64;
    for (v, p) in support {
        let phi = normal_cdf(v);
        sup = sup.max((cum - phi).abs());
        cum += p;
        sup = sup.max((cum - phi).abs());
    }
    sup.min(1.0)
}

/// `F(x) - Φ(x) = -(1/π) ∫_0^∞ Im(e^{-itx} (φ(t) - e^{-t²/2})) / t dt`,
/// discretized by the trapezoid rule with step `h` and evaluated on the
/// `x`-grid by one FFT. Since both laws are centered, the rule's sawtooth
/// error cancels; the residual reported compares against step `2h`.
pub fn invert_kolmogorov<F>(phi: F, grid: &CfGrid) -> Result<KappaEstimate>
where
    F: Fn(f64) -> Complex64,
{
    grid.validate()?;
    let h = grid.t_step();
    let m = grid.n_fft;
    let x0 = -grid.x_range;
    let diff_at = |t: f64| phi(t) - Complex64::new((-0.5 * t * t).exp(), 0.0);

    // integrand samples c_i = D(t_i)/t_i, i = 1..=count
    let mut c: Vec<Complex64> = Vec::new();
    let mut tail = 0.0f64;
    match grid.t_max {
        Some(t_max) => {
            let count = (t_max / h).ceil() as usize;
            c.extend((1..=count).map(|i| {
                let t = i as f64 * h;
                diff_at(t) / t
            }));
            tail = phi(count as f64 * h).norm();
        }
        None => {
            const SMALL: f64 = 1e-12;
            const T_MIN: f64 = 7.5;
            const WINDOW: f64 = 4.0;
            let mut quiet_since: Option<f64> = None;
            let mut i = 1usize;
            loop {
                let t = i as f64 * h;
                let f = phi(t);
                let d = f - Complex64::new((-0.5 * t * t).exp(), 0.0);
                c.push(d / t);
                if f.norm() < SMALL {
                    let start = *quiet_since.get_or_insert(t);
                    if t >= T_MIN && t - start >= WINDOW {
                        break;
                    }
                } else {
                    quiet_since = None;
                }
                if t >= grid.t_cap {
                    tail = f.norm();
                    break;
                }
                i += 1;
            }
        }
    }
    let count = c.len();
    let fine = fft_diff(&c, h, x0, m, 1);
    let coarse = fft_diff(&c, h, x0, m, 2);
    let points = (2.0 * grid.x_range / grid.dx).round() as usize + 1;
    let mut residual = 0.0f64;
    for j in 0..points {
        residual = residual.max((fine[j] - coarse[j % (m / 2)]).abs());
    }
    residual += tail / std::f64::consts::PI;
    if !(residual <= grid.tolerance) {
        return Err(Error::Accuracy { residual });
    }

    let direct = |x: f64| -> f64 {
        let mut s = 0.0;
        for (i, ci) in c.iter().enumerate() {
            let t = (i + 1) as f64 * h;
            let weight = if i + 1 == count { 0.5 } else { 1.0 };
            s += weight * (ci * Complex64::from_polar(1.0, -t * x)).im;
        }
        -h * s / std::f64::consts::PI
    };

    let abs: Vec<f64> = fine[..points].iter().map(|v| v.abs()).collect();
    let mut peaks: Vec<usize> = (0..points)
        .filter(|&j| {
            let left = if j > 0 { abs[j - 1] } else { f64::NEG_INFINITY };
            let right = if j + 1 < points { abs[j + 1] } else { f64::NEG_INFINITY };
            abs[j] >= left && abs[j] >= right
        })
        .collect();
    peaks.sort_by(|a, b| abs[*b].total_cmp(&abs[*a]));
    peaks.truncate(3);
    let mut best = abs.iter().copied().fold(0.0f64, f64::max);
    for j in peaks {
        let xj = x0 + j as f64 * grid.dx;
        let lo = xj - grid.dx;
        let hi = xj + grid.dx;
        best = best.max(golden_max(|x| direct(x).abs(), lo, hi, 1e-9));
    }
    Ok(KappaEstimate {
        value: best.clamp(0.0, 1.0),
        se: residual,
        method: DistanceMethod::CfInversion,
        sample_size: 0,
    })
}

/// `-(step/π) Im Σ_i c_{stride·i} e^{-i t x_j}` on `x_j = x0 + j·2π/(m h)`,
/// using every `stride`-th sample and an FFT of length `m / stride`.
fn fft_diff(c: &[Complex64], h: f64, x0: f64, m: usize, stride: usize) -> Vec<f64> {
    let len = m / stride;
    let step = h * stride as f64;
    let last = c.len() / stride * stride;
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let mut i = stride;
    while i <= last {
        let t = i as f64 * h;
        let weight = if i == last { 0.5 } else { 1.0 };
        buf[(i / stride) % len] += c[i - 1] * weight * Complex64::from_polar(1.0, -t * x0);
        i += stride;
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(len).process(&mut buf);
    buf.iter().map(|g| -step * g.im / std::f64::consts::PI).collect()
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    f1.max(f2).max(f(0.5 * (a + b)))
}

/// Projections `Σ w_i X_i` of `r_x` independent paths, in block order.
pub fn projected_samples(model: &MartingaleModel, weights: &[f64], r_x: usize, key: StreamKey) -> Vec<f64> {
    let n = weights.len();
    let blocks = blocked(r_x, PATH_BLOCK, |range| {
        let mut rng = key.with_role(StreamRole::Paths).with_sub(range.start / PATH_BLOCK).rng();
        let mut path = vec![0.0; n];
        range
            .map(|_| {
                model.fill_path(&mut path, &mut rng);
                path.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>()
            })
            .collect::<Vec<f64>>()
    });
    blocks.concat()
}

/// Projection weights: `θ`, or `Aθ/‖Aθ‖` when centered.
pub fn projection_weights(theta: &SphereVector, centered: bool) -> Result<Vec<f64>> {
    if centered {
        Ok(centered_weights(theta)?.theta_star)
    } else {
        Ok(theta.coords().to_vec())
    }
}

/// Empirical `κ_θ` from `r_x` paths at fixed `θ`.
pub fn conditional_kappa_mc(
    model: &MartingaleModel,
    theta: &SphereVector,
    r_x: usize,
    key: StreamKey,
    centered: bool,
) -> Result<KappaEstimate> {
    if r_x < 100 {
        return Err(Error::InvalidInput(format!("R_X must be at least 100, got {r_x}")));
    }
    let w = projection_weights(theta, centered)?;
    let samples = projected_samples(model, &w, r_x, key);
    kolmogorov_vs_normal(&samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KappaMethod {
    Empirical { r_x: usize },
    Cf(CfGrid),
}

impl KappaMethod {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Empirical { .. } => "empirical",
            Self::Cf(_) => "cf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSummary {
    pub n: usize,
    pub mean: f64,
    /// Between-θ standard error `sd/√R_θ`.
    pub se: f64,
    pub values: Vec<f64>,
    pub centered: bool,
}

/// Draws `θ` for replicate `r`, redrawing on the probability-zero degenerate
/// direction when centered.
pub fn draw_theta(master: u64, n: usize, r: usize, centered: bool) -> Result<SphereVector> {
    if centered && n < 2 {
        return Err(Error::InvalidDimension("centered projections need n >= 2".into()));
    }
    for sub in 0..16 {
        let mut rng = StreamKey::new(master, n, r, StreamRole::Theta).with_sub(sub).rng();
        let theta = sample_uniform_sphere(n, &mut rng)?;
        if !centered || centered_weights(&theta).is_ok() {
            return Ok(theta);
        }
    }
    Err(Error::DegenerateDirection)
}

/// `E κ_θ` over `r_theta` fresh directions.
pub fn expected_kappa(
    model: &MartingaleModel,
    n: usize,
    r_theta: usize,
    method: &KappaMethod,
    master: u64,
    centered: bool,
) -> Result<KappaSummary> {
    if r_theta < 10 {
        return Err(Error::InvalidInput(format!("R_theta must be at least 10, got {r_theta}")));
    }
    if n == 0 {
        return Err(Error::InvalidDimension("n must be positive".into()));
    }
    let law = match (method, model.kind()) {
        (KappaMethod::Cf(_), ModelKind::Iid(law)) => Some(*law),
        (KappaMethod::Cf(_), _) => {
            return Err(Error::UnsupportedCf(format!(
                "characteristic-function method needs an iid model, got {}",
                model.label()
            )))
        }
        _ => None,
    };
    let per_theta = blocked(r_theta, 1, |range| -> Result<f64> {
        let r = range.start;
        let theta = draw_theta(master, n, r, centered)?;
        match method {
            KappaMethod::Empirical { r_x } => {
                let key = StreamKey::new(master, n, r, StreamRole::Paths);
                Ok(conditional_kappa_mc(model, &theta, *r_x, key, centered)?.value)
            }
            KappaMethod::Cf(grid) => {
                let w = projection_weights(&theta, centered)?;
                Ok(cf_product_kolmogorov(&w, law.as_ref().unwrap(), grid)?.value)
            }
        }
    });
    let values = per_theta.into_iter().collect::<Result<Vec<f64>>>()?;
    let (mean, se) = mean_se(&values);
    Ok(KappaSummary {
        n,
        mean,
        se,
        values,
        centered,
    })
}

pub(crate) fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// `∫_0^{T0} |f(t) - e^{-t²/2}| / t dt` by composite Simpson, doubling the
/// panel count until two successive values agree to `1e-10` (relative).
pub fn smoothing_integral<F>(f: F, t0: f64, zero_limit: f64) -> Result<f64>
where
    F: Fn(f64) -> Complex64,
{
    if !(t0 >= 1.0 && t0.is_finite()) {
        return Err(Error::InvalidInput(format!("T0 must be at least 1, got {t0}")));
    }
    let integrand = |t: f64| {
        if t == 0.0 {
            zero_limit
        } else {
            (f(t) - Complex64::new((-0.5 * t * t).exp(), 0.0)).norm() / t
        }
    };
    let simpson = |panels: usize| {
        let h = t0 / panels as f64;
        let mut s = integrand(0.0) + integrand(t0);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * integrand(i as f64 * h);
        }
        s * h / 3.0
    };
    let mut panels = 256;
    let mut prev = simpson(panels / 2);
    loop {
        let cur = simpson(panels);
        let residual = (cur - prev).abs();
        if residual <= 1e-10 * cur.abs().max(1e-2) {
            return Ok(cur);
        }
        if panels >= 1 << 20 {
            return Err(Error::Accuracy { residual });
        }
        prev = cur;
        panels *= 2;
    }
}

/// The smoothing integral with the exact product characteristic function.
pub fn cf_distance_integral(theta: &[f64], law: &InnovationLaw, t0: f64) -> Result<f64> {
    smoothing_integral(|t| product_cf(theta, law, t), t0, 0.0)
}

/// The smoothing integral with the empirical characteristic function of
/// `r_x` projected paths.
pub fn cf_distance_integral_mc(
    model: &MartingaleModel,
    theta: &SphereVector,
    t0: f64,
    r_x: usize,
    key: StreamKey,
) -> Result<f64> {
    if r_x < 100 {
        return Err(Error::InvalidInput(format!("R_X must be at least 100, got {r_x}")));
    }
    let samples = projected_samples(model, theta.coords(), r_x, key);
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    smoothing_integral(
        |t| {
            let (mut re, mut im) = (0.0, 0.0);
            for s in &samples {
                let (sn, cs) = (t * s).sin_cos();
                re += cs;
                im += sn;
            }
            Complex64::new(re / m, im / m)
        },
        t0,
        mean.abs(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment_match::two_point_from_moments;
    use crate::rng::seeded;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn ks_basic_cases() {
        assert_eq!(kolmogorov_vs_normal(&[0.0]).unwrap().value, 0.5);
        assert!(matches!(kolmogorov_vs_normal(&[]), Err(Error::EmptySample)));
        assert!(matches!(kolmogorov_vs_normal(&[0.0, f64::NAN]), Err(Error::InvalidSample(_))));
        let nd = Normal::new(0.0, 1.0).unwrap();
        let m = 100;
        let q: Vec<f64> = (1..=m).map(|i| nd.inverse_cdf((i as f64 - 0.5) / m as f64)).collect();
        let v = kolmogorov_vs_normal(&q).unwrap().value;
        assert!(v <= 0.005 + 1e-9, "{v}");
        let mut rev = q.clone();
        rev.reverse();
        assert_eq!(kolmogorov_vs_normal(&rev).unwrap().value, v);
    }

    #[test]
    fn ks_gaussian_within_dkw() {
        let thr = dkw_threshold(10_000, 0.01);
        assert_abs_diff_eq!(thr, 0.0163, epsilon = 1e-4);
        let mut ok = 0;
        for trial in 0..100 {
            let mut rng = seeded(1000 + trial);
            let s: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
            if kolmogorov_vs_normal(&s).unwrap().value <= thr {
                ok += 1;
            }
        }
        assert!(ok >= 99, "{ok}");
    }

    #[test]
    fn enumeration_small_cases() {
        let grid = CfGrid::default();
        let k1 = cf_product_kolmogorov(&[1.0], &InnovationLaw::Rademacher, &grid).unwrap();
        assert_abs_diff_eq!(k1.value, normal_cdf(1.0) - 0.5, epsilon = 1e-12);
        let w = std::f64::consts::FRAC_1_SQRT_2;
        let k2 = cf_product_kolmogorov(&[w, w], &InnovationLaw::Rademacher, &grid).unwrap();
        // atoms -√2, 0, √2 with masses 1/4, 1/2, 1/4
        let s2 = std::f64::consts::SQRT_2;
        let expected = [
            normal_cdf(-s2),
            (0.25 - normal_cdf(-s2)).abs(),
            (0.25 - 0.5f64).abs(),
            (0.75 - 0.5f64).abs(),
            (0.75 - normal_cdf(s2)).abs(),
            (1.0 - normal_cdf(s2)).abs(),
        ]
        .iter()
        .copied()
        .fold(0.0, f64::max);
        assert_abs_diff_eq!(k2.value, expected, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_innovation_is_exactly_normal() {
        let mut rng = seeded(3);
        let theta = sample_uniform_sphere(50, &mut rng).unwrap();
        let k = cf_product_kolmogorov(theta.coords(), &InnovationLaw::StandardGaussian, &CfGrid::default())
            .unwrap();
        assert!(k.value < 1e-6, "{}", k.value);
        let integral = cf_distance_integral(theta.coords(), &InnovationLaw::StandardGaussian, 4.0).unwrap();
        assert!(integral < 1e-8);
    }

    #[test]
    fn inversion_matches_enumeration() {
        // force the inversion path on sizes where enumeration is available
        let forced = CfGrid {
            enumeration_max_n: 0,
            ..CfGrid::default()
        };
        let skew = InnovationLaw::TwoPoint(two_point_from_moments(1.0, 0.7).unwrap());
        for (n, seed) in [(10usize, 1u64), (12, 2), (16, 3)] {
            let theta = sample_uniform_sphere(n, &mut seeded(seed)).unwrap();
            for law in [InnovationLaw::Rademacher, skew] {
                let exact = enumerate_kolmogorov(theta.coords(), &law.atoms().unwrap());
                match cf_product_kolmogorov(theta.coords(), &law, &forced) {
                    Ok(inv) => assert!(
                        (inv.value - exact).abs() <= 1e-4 + 0.5 * max_atom(theta.coords(), &law),
                        "n={n}: {} vs {exact}",
                        inv.value
                    ),
                    Err(Error::Accuracy { .. }) => {}
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    fn max_atom(theta: &[f64], law: &InnovationLaw) -> f64 {
        let atoms = law.atoms().unwrap();
        let p = atoms[0].1.max(atoms[1].1);
        theta.iter().map(|_| p).product()
    }

    #[test]
    fn inversion_large_n_smooth() {
        let theta = sample_uniform_sphere(64, &mut seeded(5)).unwrap();
        let k = cf_product_kolmogorov(theta.coords(), &InnovationLaw::Rademacher, &CfGrid::default()).unwrap();
        assert_eq!(k.method, DistanceMethod::CfInversion);
        assert!(k.value > 0.0 && k.value < 0.05, "{}", k.value);
        assert!(k.se <= 1e-6);
        // refining the grid changes nothing beyond the tolerance
        let fine = CfGrid {
            n_fft: 1 << 17,
            dx: 1.0 / 512.0,
            ..CfGrid::default()
        };
        let k2 = cf_product_kolmogorov(theta.coords(), &InnovationLaw::Rademacher, &fine).unwrap();
        assert_abs_diff_eq!(k.value, k2.value, epsilon = 1e-6);
    }

    #[test]
    fn mc_agrees_with_cf() {
        let n = 64;
        let theta = sample_uniform_sphere(n, &mut seeded(8)).unwrap();
        let model = MartingaleModel::iid(InnovationLaw::Rademacher);
        let r_x = 20_000;
        let mc = conditional_kappa_mc(&model, &theta, r_x, StreamKey::new(4, n, 0, StreamRole::Paths), false)
            .unwrap();
        let cf = cf_product_kolmogorov(theta.coords(), &InnovationLaw::Rademacher, &CfGrid::default()).unwrap();
        assert!((mc.value - cf.value).abs() <= 3.0 * dkw_threshold(r_x, 0.01));
        let again = conditional_kappa_mc(&model, &theta, r_x, StreamKey::new(4, n, 0, StreamRole::Paths), false)
            .unwrap();
        assert_eq!(mc, again);
    }

    #[test]
    fn expected_kappa_errors() {
        let arch = crate::processes::ArchModel::new(1.0, 0.3, 4.0, 4, InnovationLaw::StandardGaussian).unwrap();
        let m = MartingaleModel::arch(arch).unwrap();
        let r = expected_kappa(&m, 16, 10, &KappaMethod::Cf(CfGrid::default()), 1, false);
        assert!(matches!(r, Err(Error::UnsupportedCf(_))));
        let g = MartingaleModel::iid(InnovationLaw::StandardGaussian);
        assert!(expected_kappa(&g, 16, 5, &KappaMethod::Cf(CfGrid::default()), 1, false).is_err());
        assert!(expected_kappa(&g, 1, 10, &KappaMethod::Cf(CfGrid::default()), 1, true).is_err());
    }

    #[test]
    fn smoothing_integral_zero_branch_and_decrease() {
        let v = smoothing_integral(|t| Complex64::new((-0.5 * t * t).exp(), 0.0), 2.0, 0.0).unwrap();
        assert_eq!(v, 0.0);
        let mut prev = f64::INFINITY;
        for n in [16usize, 32, 64, 128] {
            let mut acc = 0.0;
            for r in 0..20 {
                let theta = draw_theta(77, n, r, false).unwrap();
                acc += cf_distance_integral(theta.coords(), &InnovationLaw::Rademacher, 4.0 * (n as f64).ln().sqrt())
                    .unwrap();
            }
            acc /= 20.0;
            assert!(acc < prev, "n={n}: {acc} >= {prev}");
            prev = acc;
        }
    }
}
