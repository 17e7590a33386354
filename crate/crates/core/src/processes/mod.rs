//! Stationary martingale-difference generators: iid innovations, ARCH(∞) and
//! harmonic functionals of a return-to-zero Markov chain.

mod arch;
mod chain;
mod spec;

pub use arch::ArchModel;
pub use chain::{stationary_distribution, MarkovChain, MarkovFunctional, TruncatedChain};
pub use spec::{ModelSpec, MODEL_KEYS};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moment_match::TwoPointLaw;

/// Mean-zero innovation law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InnovationLaw {
    Rademacher,
    StandardGaussian,
    TwoPoint(TwoPointLaw),
}

impl InnovationLaw {
    pub fn variance(&self) -> f64 {
        match self {
            Self::Rademacher | Self::StandardGaussian => 1.0,
            Self::TwoPoint(l) => l.moment(2),
        }
    }

    /// Third moment of the unit-variance version.
    pub fn std_third_moment(&self) -> f64 {
        match self {
            Self::Rademacher | Self::StandardGaussian => 0.0,
            Self::TwoPoint(l) => l.moment(3) / l.moment(2).powf(1.5),
        }
    }

    /// Fourth moment of the unit-variance version.
    pub fn std_fourth_moment(&self) -> f64 {
        match self {
            Self::Rademacher => 1.0,
            Self::StandardGaussian => 3.0,
            Self::TwoPoint(l) => l.moment(4) / l.moment(2).powi(2),
        }
    }

    pub fn sample_standardized<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::StandardGaussian => rng.sample(StandardNormal),
            Self::TwoPoint(l) => l.sample(rng) / l.moment(2).sqrt(),
        }
    }

    /// Characteristic function of the unit-variance version.
    pub fn cf_standardized(&self, u: f64) -> Complex64 {
        match self {
            Self::Rademacher => Complex64::new(u.cos(), 0.0),
            Self::StandardGaussian => Complex64::new((-0.5 * u * u).exp(), 0.0),
            Self::TwoPoint(l) => l.cf(u / l.moment(2).sqrt()),
        }
    }

    /// Atoms `(value, probability)` of the unit-variance version, when discrete.
    pub fn atoms(&self) -> Option<[(f64, f64); 2]> {
        match self {
            Self::Rademacher => Some([(-1.0, 0.5), (1.0, 0.5)]),
            Self::StandardGaussian => None,
            Self::TwoPoint(l) => {
                let s = l.moment(2).sqrt();
                Some([(l.m / s, l.t), (l.m_prime / s, 1.0 - l.t)])
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Rademacher => "rademacher".into(),
            Self::StandardGaussian => "gaussian".into(),
            Self::TwoPoint(l) => format!("twopoint(sigma2={},beta3={})", l.sigma2, l.beta3),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Iid(InnovationLaw),
    Arch(ArchModel),
    MarkovFunctional(MarkovFunctional),
}

/// A stationary martingale-difference sequence normalized to `E X_0² = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleModel {
    kind: ModelKind,
    scale: f64,
}

impl MartingaleModel {
    pub fn iid(law: InnovationLaw) -> Self {
        Self {
            kind: ModelKind::Iid(law),
            scale: 1.0,
        }
    }

    pub fn arch(model: ArchModel) -> Result<Self> {
        model.validate()?;
        let scale = 1.0 / model.stationary_variance().sqrt();
        Ok(Self {
            kind: ModelKind::Arch(model),
            scale,
        })
    }

    pub fn markov(functional: MarkovFunctional) -> Self {
        let scale = functional.scale();
        Self {
            kind: ModelKind::MarkovFunctional(functional),
            scale,
        }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Multiplier applied to the raw process to reach unit variance.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn label(&self) -> String {
        match &self.kind {
            ModelKind::Iid(l) => format!("iid({})", l.label()),
            ModelKind::Arch(a) => a.label(),
            ModelKind::MarkovFunctional(m) => m.label().to_string(),
        }
    }

    /// Fills `out` with a stationary unit-variance path.
    pub fn fill_path<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        match &self.kind {
            ModelKind::Iid(l) => out.iter_mut().for_each(|x| *x = l.sample_standardized(rng)),
            ModelKind::Arch(a) => {
                a.fill_raw_path(out, rng);
                out.iter_mut().for_each(|x| *x *= self.scale);
            }
            ModelKind::MarkovFunctional(m) => m.fill_path(out, rng),
        }
    }
}

/// Draws `X_1, …, X_n` from a stationary model.
pub fn simulate_path<R: Rng + ?Sized>(model: &MartingaleModel, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidDimension("path length must be positive".into()));
    }
    if let ModelKind::Arch(a) = &model.kind {
        a.validate()?;
    }
    let mut out = vec![0.0; n];
    model.fill_path(&mut out, rng);
    Ok(out)
}

/// `(K g)(y)` for the chain behind a truncated model.
pub fn kernel_apply(chain: &TruncatedChain, g: &[f64]) -> Result<Vec<f64>> {
    if g.len() != chain.chain().len() {
        return Err(Error::LengthMismatch {
            expected: chain.chain().len(),
            got: g.len(),
        });
    }
    Ok(chain.chain().apply(g))
}

/// `a(u) = E(X_0 X_u²)` and `Cov(X_0², X_u²)` for `u = 0..=horizon`, plus `E X_0³`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub a: Vec<f64>,
    pub third_moment: f64,
    pub cov_sq: Vec<f64>,
}

impl MomentTable {
    pub fn horizon(&self) -> usize {
        self.a.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentMethod {
    Exact,
    /// Time averages along one stationary path of `path_len` steps.
    MonteCarlo { path_len: usize },
}

pub fn moment_table<R: Rng + ?Sized>(
    model: &MartingaleModel,
    umax: usize,
    method: MomentMethod,
    rng: &mut R,
) -> Result<MomentTable> {
    match (method, &model.kind) {
        (MomentMethod::Exact, ModelKind::Iid(l)) => {
            let mut a = vec![0.0; umax + 1];
            let mut cov_sq = vec![0.0; umax + 1];
            a[0] = l.std_third_moment();
            cov_sq[0] = l.std_fourth_moment() - 1.0;
            Ok(MomentTable {
                a,
                third_moment: l.std_third_moment(),
                cov_sq,
            })
        }
        (MomentMethod::Exact, ModelKind::MarkovFunctional(m)) => Ok(exact_markov_table(m, umax)),
        (MomentMethod::Exact, ModelKind::Arch(_)) => Err(Error::UnsupportedMethod(
            "exact moment table is not available for ARCH models".into(),
        )),
        (MomentMethod::MonteCarlo { path_len }, _) => {
            if path_len == 0 {
                return Err(Error::InvalidInput("Monte Carlo path length must be positive".into()));
            }
            let path = simulate_path(model, path_len + umax, rng)?;
            Ok(empirical_table(&path, umax, path_len))
        }
    }
}

fn exact_markov_table(m: &MarkovFunctional, umax: usize) -> MomentTable {
    let chain = m.chain();
    let x = m.values();
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    let mean_sq = chain.expect(&x2);
    let mut g = x2.clone();
    let mut a = Vec::with_capacity(umax + 1);
    let mut cov_sq = Vec::with_capacity(umax + 1);
    for u in 0..=umax {
        if u > 0 {
            g = chain.apply(&g);
        }
        let xg: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a * b).collect();
        a.push(chain.expect(&xg));
        let x2g: Vec<f64> = x2.iter().zip(&g).map(|(a, b)| a * b).collect();
        cov_sq.push(chain.expect(&x2g) - mean_sq * mean_sq);
    }
    MomentTable {
        third_moment: a[0],
        a,
        cov_sq,
    }
}

fn empirical_table(path: &[f64], umax: usize, len: usize) -> MomentTable {
    let mean_sq = path[..len].iter().map(|v| v * v).sum::<f64>() / len as f64;
    let mut a = Vec::with_capacity(umax + 1);
    let mut cov_sq = Vec::with_capacity(umax + 1);
    for u in 0..=umax {
        let mut sa = 0.0;
        let mut sc = 0.0;
        for t in 0..len {
            let x = path[t];
            let y2 = path[t + u] * path[t + u];
            sa += x * y2;
            sc += x * x * y2;
        }
        a.push(sa / len as f64);
        cov_sq.push(sc / len as f64 - mean_sq * mean_sq);
    }
    MomentTable {
        third_moment: a[0],
        a,
        cov_sq,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment_match::two_point_from_moments;
    use crate::rng::seeded;
    use approx::assert_abs_diff_eq;

    fn sample_var(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn iid_gaussian_unit_variance() {
        let p = simulate_path(&MartingaleModel::iid(InnovationLaw::StandardGaussian), 100_000, &mut seeded(1))
            .unwrap();
        assert!((sample_var(&p) - 1.0).abs() < 0.02);
    }

    #[test]
    fn two_point_innovation_standardized() {
        let law = InnovationLaw::TwoPoint(two_point_from_moments(2.0, 1.5).unwrap());
        assert_abs_diff_eq!(law.variance(), 2.0, epsilon = 1e-12);
        let p = simulate_path(&MartingaleModel::iid(law), 200_000, &mut seeded(2)).unwrap();
        assert!((sample_var(&p) - 1.0).abs() < 0.03);
        let m3 = p.iter().map(|v| v * v * v).sum::<f64>() / p.len() as f64;
        assert!((m3 - law.std_third_moment()).abs() < 0.05);
        let atoms = law.atoms().unwrap();
        let mean: f64 = atoms.iter().map(|(v, p)| v * p).sum();
        let var: f64 = atoms.iter().map(|(v, p)| v * v * p).sum();
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(var, 1.0, epsilon = 1e-12);
        let phi = law.cf_standardized(0.7);
        let direct: Complex64 = atoms
            .iter()
            .map(|(v, p)| Complex64::from_polar(*p, 0.7 * v))
            .sum();
        assert_abs_diff_eq!((phi - direct).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn markov_f1_uncorrelated() {
        let tc = TruncatedChain::with_default_schedule(200, 0.1).unwrap();
        let model = MartingaleModel::markov(tc.functional().unwrap());
        let p = simulate_path(&model, 100_000, &mut seeded(4)).unwrap();
        let n = p.len();
        let lag1 = p.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1) as f64;
        let var = p.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((lag1 / var).abs() < 0.02);
        assert!((sample_var(&p) - 1.0).abs() < 5.0 / (n as f64).sqrt() * 3.0);
    }

    #[test]
    fn arch_burn_in_insensitive() {
        let arch = ArchModel::new(1.0, 0.3, 4.0, 32, InnovationLaw::StandardGaussian).unwrap();
        let long = arch.clone().with_burn_in(2000);
        let n = 100_000;
        let p1 = simulate_path(&MartingaleModel::arch(arch).unwrap(), n, &mut seeded(5)).unwrap();
        let p2 = simulate_path(&MartingaleModel::arch(long).unwrap(), n, &mut seeded(6)).unwrap();
        let sq1: Vec<f64> = p1.iter().map(|v| v * v).collect();
        let sq2: Vec<f64> = p2.iter().map(|v| v * v).collect();
        // batch-means standard error of each sample second moment
        let se = |sq: &[f64]| {
            let batches: Vec<f64> = sq.chunks(1000).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
            (sample_var(&batches) / batches.len() as f64).sqrt()
        };
        let m1 = sq1.iter().sum::<f64>() / n as f64;
        let m2 = sq2.iter().sum::<f64>() / n as f64;
        let se = (se(&sq1).powi(2) + se(&sq2).powi(2)).sqrt();
        assert!((m1 - m2).abs() < 3.0 * se, "{m1} vs {m2}, se {se}");
    }

    #[test]
    fn moment_tables() {
        let t = moment_table(&MartingaleModel::iid(InnovationLaw::Rademacher), 5, MomentMethod::Exact, &mut seeded(0))
            .unwrap();
        assert_eq!(t.third_moment, 0.0);
        assert!(t.a.iter().all(|v| *v == 0.0));
        assert!(t.cov_sq.iter().all(|v| *v == 0.0));

        let tc = TruncatedChain::with_default_schedule(60, 0.1).unwrap();
        let model = MartingaleModel::markov(tc.functional().unwrap());
        let t = moment_table(&model, 10, MomentMethod::Exact, &mut seeded(0)).unwrap();
        assert!(t.a.iter().all(|v| v.abs() < 1e-12));

        let arch = ArchModel::new(1.0, 0.3, 4.0, 8, InnovationLaw::StandardGaussian).unwrap();
        let r = moment_table(&MartingaleModel::arch(arch).unwrap(), 3, MomentMethod::Exact, &mut seeded(0));
        assert!(matches!(r, Err(Error::UnsupportedMethod(_))));
    }

    #[test]
    fn exact_table_matches_path_enumeration() {
        let chain = MarkovChain::from_dense(&[
            vec![0.2, 0.5, 0.3],
            vec![0.6, 0.1, 0.3],
            vec![0.25, 0.25, 0.5],
        ])
        .unwrap();
        let f = vec![1.3, -0.4, 2.0];
        let mf = MarkovFunctional::new(chain.clone(), f).unwrap();
        let x = mf.values();
        let umax = 4;
        let t = moment_table(&MartingaleModel::markov(mf), umax, MomentMethod::Exact, &mut seeded(0)).unwrap();
        let pi = chain.stationary();
        let k = |i: usize, j: usize| chain.transition(i, j);
        let mut a = vec![0.0; umax + 1];
        let mut e_x2x2 = vec![0.0; umax + 1];
        let total_paths = 3usize.pow(umax as u32 + 1);
        for code in 0..total_paths {
            let mut states = Vec::with_capacity(umax + 1);
            let mut c = code;
            for _ in 0..=umax {
                states.push(c % 3);
                c /= 3;
            }
            let mut prob = pi[states[0]];
            for w in states.windows(2) {
                prob *= k(w[0], w[1]);
            }
            for u in 0..=umax {
                a[u] += prob * x[states[0]] * x[states[u]] * x[states[u]];
                e_x2x2[u] += prob * x[states[0]].powi(2) * x[states[u]].powi(2);
            }
        }
        for u in 0..=umax {
            assert_abs_diff_eq!(t.a[u], a[u], epsilon = 1e-10);
            assert_abs_diff_eq!(t.cov_sq[u], e_x2x2[u] - 1.0, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(t.third_moment, a[0], epsilon = 1e-12);
    }

    #[test]
    fn monte_carlo_table_close_to_exact() {
        let law = InnovationLaw::TwoPoint(two_point_from_moments(1.0, 0.8).unwrap());
        let model = MartingaleModel::iid(law);
        let t = moment_table(&model, 3, MomentMethod::MonteCarlo { path_len: 200_000 }, &mut seeded(8)).unwrap();
        assert!((t.third_moment - 0.8).abs() < 0.03);
        assert!(t.a[1..].iter().all(|v| v.abs() < 0.03));
    }

    #[test]
    fn kernel_apply_checks_length() {
        let tc = TruncatedChain::with_default_schedule(5, 0.1).unwrap();
        assert!(kernel_apply(&tc, &[0.0; 3]).is_err());
        let ones = kernel_apply(&tc, &[1.0; 11]).unwrap();
        assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn paths_are_deterministic() {
        let arch = ArchModel::new(1.0, 0.3, 4.0, 16, InnovationLaw::StandardGaussian).unwrap();
        let model = MartingaleModel::arch(arch).unwrap();
        let a = simulate_path(&model, 500, &mut seeded(42)).unwrap();
        let b = simulate_path(&model, 500, &mut seeded(42)).unwrap();
        assert_eq!(a, b);
    }
}
