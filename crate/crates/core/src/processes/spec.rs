//! Plain key-value model description used by configuration files and the CLI.

use serde::{Deserialize, Serialize};

use super::{ArchModel, InnovationLaw, MartingaleModel, TruncatedChain};
use crate::error::{Error, Result};
use crate::moment_match::two_point_from_moments;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// `iid`, `arch` or `markov`.
    pub model: String,
    /// `rademacher`, `gaussian` or `twopoint:<sigma2>,<beta3>`.
    pub innovation: String,
    pub c: f64,
    pub kappa: f64,
    pub b: f64,
    #[serde(rename = "J")]
    pub terms: usize,
    pub burn_in: Option<usize>,
    #[serde(rename = "N")]
    pub half_width: usize,
    pub epsilon: f64,
    /// `f1`, `f2` or `<alpha>,<beta>`.
    pub f: String,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            model: "iid".into(),
            innovation: "rademacher".into(),
            c: 1.0,
            kappa: 0.3,
            b: 4.0,
            terms: 32,
            burn_in: None,
            half_width: 200,
            epsilon: 0.1,
            f: "f1".into(),
        }
    }
}

pub const MODEL_KEYS: [&str; 10] = [
    "model", "innovation", "c", "kappa", "b", "J", "burn_in", "N", "epsilon", "f",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{value}`")))
}

impl ModelSpec {
    /// Sets one field; unknown keys are a configuration error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model" => {
                let v = value.trim().to_ascii_lowercase();
                // shorthand such as `iid-rademacher` or `arch-gaussian`
                match v.split_once('-') {
                    Some((m, law)) => {
                        self.model = m.to_string();
                        self.innovation = law.to_string();
                    }
                    None => self.model = v,
                }
            }
            "innovation" => self.innovation = value.trim().to_ascii_lowercase(),
            "c" => self.c = parse_num(key, value)?,
            "kappa" => self.kappa = parse_num(key, value)?,
            "b" => self.b = parse_num(key, value)?,
            "J" => self.terms = parse_num(key, value)?,
            "burn_in" => self.burn_in = Some(parse_num(key, value)?),
            "N" => self.half_width = parse_num(key, value)?,
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "f" => self.f = value.trim().to_ascii_lowercase(),
            _ => return Err(Error::Config(format!("unknown model key `{key}`"))),
        }
        Ok(())
    }

    pub fn is_model_key(key: &str) -> bool {
        MODEL_KEYS.contains(&key)
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut out = vec![("model".to_string(), self.model.clone())];
        if self.model != "markov" {
            out.push(("innovation".to_string(), self.innovation.clone()));
        }
        match self.model.as_str() {
            "arch" => {
                out.push(("c".into(), self.c.to_string()));
                out.push(("kappa".into(), self.kappa.to_string()));
                out.push(("b".into(), self.b.to_string()));
                out.push(("J".into(), self.terms.to_string()));
                out.push((
                    "burn_in".into(),
                    self.burn_in.unwrap_or(10 * self.terms).to_string(),
                ));
            }
            "markov" => {
                out.push(("N".into(), self.half_width.to_string()));
                out.push(("epsilon".into(), self.epsilon.to_string()));
                out.push(("f".into(), self.f.clone()));
                out.push(("boundary".into(), "hold-or-return".into()));
            }
            _ => {}
        }
        out
    }

    pub fn innovation_law(&self) -> Result<InnovationLaw> {
        let s = self.innovation.as_str();
        match s {
            "rademacher" => Ok(InnovationLaw::Rademacher),
            "gaussian" | "normal" | "standard_gaussian" => Ok(InnovationLaw::StandardGaussian),
            _ => {
                if let Some(rest) = s.strip_prefix("twopoint:") {
                    let parts: Vec<&str> = rest.split(',').collect();
                    if parts.len() != 2 {
                        return Err(Error::Config(
                            "key `innovation`: expected twopoint:<sigma2>,<beta3>".into(),
                        ));
                    }
                    let sigma2: f64 = parse_num("innovation", parts[0])?;
                    let beta3: f64 = parse_num("innovation", parts[1])?;
                    let law = two_point_from_moments(sigma2, beta3)
                        .map_err(|e| Error::Config(format!("key `innovation`: {e}")))?;
                    Ok(InnovationLaw::TwoPoint(law))
                } else {
                    Err(Error::Config(format!("key `innovation`: unknown law `{s}`")))
                }
            }
        }
    }

    pub fn f_coeffs(&self) -> Result<(f64, f64)> {
        match self.f.as_str() {
            "f1" => Ok((1.0, 0.0)),
            "f2" => Ok((0.0, 1.0)),
            other => {
                let parts: Vec<&str> = other.split(',').collect();
                if parts.len() != 2 {
                    return Err(Error::Config(format!(
                        "key `f`: expected f1, f2 or <alpha>,<beta>, got `{other}`"
                    )));
                }
                let coeffs = (parse_num("f", parts[0])?, parse_num("f", parts[1])?);
                if coeffs == (0.0, 0.0) {
                    return Err(Error::Config("key `f`: both coefficients are zero".into()));
                }
                Ok(coeffs)
            }
        }
    }

    pub fn build(&self) -> Result<MartingaleModel> {
        match self.model.as_str() {
            "iid" => Ok(MartingaleModel::iid(self.innovation_law()?)),
            "arch" => {
                let mut arch = ArchModel::new(self.c, self.kappa, self.b, self.terms, self.innovation_law()?)
                    .map_err(|e| match e {
                        Error::NonStationary(_) => e,
                        other => Error::Config(format!("ARCH parameters (c, kappa, b, J): {other}")),
                    })?;
                if let Some(burn) = self.burn_in {
                    if burn == 0 {
                        return Err(Error::Config("key `burn_in`: must be positive".into()));
                    }
                    arch = arch.with_burn_in(burn);
                }
                MartingaleModel::arch(arch)
            }
            "markov" => {
                let (alpha, beta) = self.f_coeffs()?;
                let chain = TruncatedChain::with_default_schedule(self.half_width, self.epsilon)
                    .map_err(|e| Error::Config(format!("key `N`: {e}")))?
                    .with_f_coeffs(alpha, beta);
                Ok(MartingaleModel::markov(chain.functional()?))
            }
            other => Err(Error::Config(format!("key `model`: unknown model `{other}`"))),
        }
    }

    /// The truncated chain described by this spec.
    pub fn chain(&self) -> Result<TruncatedChain> {
        let (alpha, beta) = self.f_coeffs()?;
        Ok(TruncatedChain::with_default_schedule(self.half_width, self.epsilon)
            .map_err(|e| Error::Config(format!("key `N`: {e}")))?
            .with_f_coeffs(alpha, beta))
    }

    /// The ARCH model described by this spec.
    pub fn arch(&self) -> Result<ArchModel> {
        let arch = ArchModel::new(self.c, self.kappa, self.b, self.terms, self.innovation_law()?)?;
        Ok(match self.burn_in {
            Some(b) => arch.with_burn_in(b),
            None => arch,
        })
    }
}
