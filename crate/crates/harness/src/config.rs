//! Experiment configuration, read from and echoed back as TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use specband_core::{PolicyConfig64, PolicyKind, Similarity, WeightLaw};

use crate::error::{HarnessError, IoContext, Result};

/// Serde through `Display` / `FromStr`, for the core enums.
mod via_str {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum GraphSource {
    /// Fresh Barabási–Albert graph (and edge weights) for every run.
    Ba {
        n: usize,
        m: usize,
        #[serde(with = "via_str", default = "default_weight_law")]
        weight_law: WeightLaw,
    },
    /// kNN graph over item factors of a low-rank completed ratings matrix.
    KnnFromRatings {
        path: PathBuf,
        #[serde(default = "default_rank")]
        rank: usize,
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default = "default_knn")]
        k: usize,
        #[serde(default = "default_als_iters")]
        iters: usize,
        #[serde(default)]
        als_seed: u64,
        #[serde(with = "via_str", default = "default_similarity")]
        similarity: Similarity,
    },
    EdgeList {
        path: PathBuf,
    },
}

fn default_weight_law() -> WeightLaw {
    WeightLaw::Uniform
}
fn default_rank() -> usize {
    10
}
fn default_mu() -> f64 {
    0.1
}
fn default_knn() -> usize {
    10
}
fn default_als_iters() -> usize {
    50
}
fn default_similarity() -> Similarity {
    Similarity::Cosine
}

/// `C` in the config: a number, or `"exact"` for `||α*||` under the policy's prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormBound {
    Exact,
    Value(f64),
}

impl Serialize for NormBound {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NormBound::Exact => s.serialize_str("exact"),
            NormBound::Value(c) => s.serialize_f64(*c),
        }
    }
}

impl<'de> Deserialize<'de> for NormBound {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Int(i64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(c) => Ok(NormBound::Value(c)),
            Repr::Int(c) => Ok(NormBound::Value(c as f64)),
            Repr::Str(s) if s == "exact" => Ok(NormBound::Exact),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "norm_bound must be a number or \"exact\", got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    #[serde(with = "via_str")]
    pub kind: PolicyKind,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Sub-Gaussian constant `R` assumed by the policy; defaults to the environment noise.
    pub noise_bound: Option<f64>,
    /// `C`; when unset, synthetic runs use the exact norm of `α*` and ratings runs use 1.
    pub norm_bound: Option<NormBound>,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_delta() -> f64 {
    0.001
}
fn default_lambda() -> f64 {
    1.0
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            delta: default_delta(),
            lambda: default_lambda(),
            noise_bound: None,
            norm_bound: None,
            rng_seed: 0,
        }
    }

    /// Core policy config for one run; `norm_bound` is the already-resolved `C`.
    pub fn to_policy_config(&self, noise: f64, norm_bound: f64, horizon: u64, rng_seed: u64) -> PolicyConfig64 {
        PolicyConfig64 {
            kind: self.kind,
            delta: self.delta,
            noise_bound: self.noise_bound.unwrap_or(noise),
            norm_bound,
            lambda_reg: self.lambda,
            horizon,
            rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: u64,
    pub num_runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Support size of the synthetic `α*` (ignored for ratings graphs).
    #[serde(default = "default_smooth_k")]
    pub smooth_k: usize,
    /// Environment noise level `R`.
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub graph: GraphSource,
    pub policies: Vec<PolicySpec>,
}

fn default_smooth_k() -> usize {
    3
}
fn default_noise() -> f64 {
    0.01
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// The BA protocol with all four policies at their defaults.
    pub fn synthetic_default() -> Self {
        Self {
            horizon: 200,
            num_runs: 10,
            base_seed: 0,
            smooth_k: default_smooth_k(),
            noise: default_noise(),
            output_dir: default_output_dir(),
            graph: GraphSource::Ba {
                n: 250,
                m: 3,
                weight_law: WeightLaw::Uniform,
            },
            policies: PolicyKind::ALL.into_iter().map(PolicySpec::new).collect(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.horizon < 1 {
            return bad("horizon must be at least 1".into());
        }
        if self.num_runs < 1 {
            return bad("num_runs must be at least 1".into());
        }
        if self.policies.is_empty() {
            return bad("at least one policy is required".into());
        }
        if self.noise.is_nan() || self.noise < 0.0 {
            return bad(format!("noise must be non-negative, got {}", self.noise));
        }
        if self.smooth_k == 0 {
            return bad("smooth_k must be at least 1".into());
        }
        match &self.graph {
            GraphSource::Ba { n, m, .. } if *m == 0 || n <= m => {
                return bad(format!("BA graph needs 1 <= m < n, got n={n}, m={m}"));
            }
            GraphSource::Ba { n, .. } if self.smooth_k > *n => {
                return bad(format!("smooth_k={} exceeds n={n}", self.smooth_k));
            }
            GraphSource::KnnFromRatings { rank, k, .. } if *rank == 0 || *k == 0 => {
                return bad("ratings graph needs rank >= 1 and k >= 1".into());
            }
            _ => {}
        }
        for p in &self.policies {
            let c = match p.norm_bound {
                Some(NormBound::Value(c)) => c,
                // placeholder; the exact value is only known per run
                _ => 1.0,
            };
            p.to_policy_config(self.noise, c, self.horizon, p.rng_seed).validate()?;
        }
        Ok(())
    }

    /// Copy with every optional field made explicit.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        let default_c = match cfg.graph {
            GraphSource::KnnFromRatings { .. } => NormBound::Value(1.0),
            _ => NormBound::Exact,
        };
        for p in cfg.policies.iter_mut() {
            p.noise_bound.get_or_insert(self.noise);
            p.norm_bound.get_or_insert(default_c);
        }
        cfg
    }

    /// Every parameter, defaults included, as TOML.
    pub fn resolved_toml(&self) -> Result<String> {
        Ok(toml::to_string(&self.resolved())?)
    }

    /// SHA-256 of the resolved TOML.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.resolved_toml()?.as_bytes())))
    }

    /// Seed of run `i`.
    pub fn run_seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            horizon = 5
            num_runs = 2
            [graph]
            source = "ba"
            n = 20
            m = 2
            [[policies]]
            kind = "sucb"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.smooth_k, 3);
        assert_eq!(cfg.policies[0].delta, 0.001);
        assert_eq!(cfg.policies[0].lambda, 1.0);
        assert_eq!(
            cfg.graph,
            GraphSource::Ba {
                n: 20,
                m: 2,
                weight_law: WeightLaw::Uniform
            }
        );
        let again = ExperimentConfig::from_toml_str(&cfg.resolved_toml().unwrap()).unwrap();
        assert_eq!(again.policies[0].norm_bound, Some(NormBound::Exact));
        assert_eq!(again.policies[0].noise_bound, Some(0.01));
        assert_eq!(cfg.resolved(), again);
        assert_eq!(cfg.hash().unwrap(), again.hash().unwrap());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = ExperimentConfig::synthetic_default();
        cfg.policies.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::synthetic_default();
        cfg.num_runs = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::synthetic_default();
        cfg.policies[0].delta = 1.5;
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_toml_str(
            "horizon = 1\nnum_runs = 1\npolicies = []\n[graph]\nsource = \"ba\"\nn = 5\nm = 2\n"
        )
        .is_err());
        assert!(ExperimentConfig::from_toml_str(
            "horizon = 1\nnum_runs = 1\n[graph]\nsource = \"ba\"\nn = 5\nm = 2\n[[policies]]\nkind = \"greedy\"\n"
        )
        .is_err());
    }

    #[test]
    fn norm_bound_forms() {
        let parse = |v: &str| {
            let text = format!(
                "horizon = 1\nnum_runs = 1\n[graph]\nsource = \"ba\"\nn = 5\nm = 2\n[[policies]]\nkind = \"lts\"\nnorm_bound = {v}\n"
            );
            ExperimentConfig::from_toml_str(&text).map(|c| c.policies[0].norm_bound)
        };
        assert_eq!(parse("2.5").unwrap(), Some(NormBound::Value(2.5)));
        assert_eq!(parse("3").unwrap(), Some(NormBound::Value(3.0)));
        assert_eq!(parse("\"exact\"").unwrap(), Some(NormBound::Exact));
        assert!(parse("\"tight\"").is_err());
    }

    #[test]
    fn run_seeds_are_offsets() {
        let mut cfg = ExperimentConfig::synthetic_default();
        cfg.base_seed = 40;
        assert_eq!(cfg.run_seed(0), 40);
        assert_eq!(cfg.run_seed(3), 43);
    }
}
