//! Experiment configuration file (TOML).
//!
//! ```toml
//! [channel]
//! K = 4
//! two_class = { strong = 1.0, weak = 0.2 }   # or: beta = [1.0, 1.0, 0.2, 0.2]
//! power = "10dB"                              # or a linear number
//! slot_length = 100
//!
//! [cache]
//! memory = 0.6
//! file_bits = 1000
//!
//! [policy]
//! name = "lyapunov"    # lyapunov | unicast-opp | tdma-cc
//! alpha = 1.0
//! V = 100.0
//! d = 0.01
//! gamma_max = 1.0
//! sigma_max = 1
//!
//! [run]
//! slots = 200000
//! seed = 1
//! warmup_fraction = 0.1
//! window = 1000
//!
//! [sweep]              # every axis is optional
//! K = [4, 8]
//! V = [10.0, 100.0]
//! alpha = [0.0, 1.0]
//! seeds = [1, 2, 3]
//! policies = ["lyapunov", "unicast-opp", "tdma-cc"]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::caching::CacheParams;
use crate::channel::{db_to_linear, ChannelParams};
use crate::error::{Error, Result};
use crate::lyapunov::PolicyParams;
use crate::sim::{PolicyKind, RunConfig};
use crate::subset::MAX_USERS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PowerSpec {
    Linear(f64),
    Text(String),
}

impl PowerSpec {
    /// Linear power; strings may carry a `dB` suffix.
    pub fn linear(&self) -> Result<f64> {
        let value = match self {
            PowerSpec::Linear(x) => *x,
            PowerSpec::Text(s) => {
                let t = s.trim();
                let (num, db) = match t.strip_suffix("dB").or_else(|| t.strip_suffix("db")) {
                    Some(rest) => (rest.trim(), true),
                    None => (t, false),
                };
                let x: f64 = num
                    .parse()
                    .map_err(|_| Error::config("channel.power", format!("cannot parse `{s}`")))?;
                if db {
                    db_to_linear(x)
                } else {
                    x
                }
            }
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::config("channel.power", format!("must be positive, got {value}")));
        }
        Ok(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoClass {
    pub strong: f64,
    pub weak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(rename = "K")]
    pub num_users: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_class: Option<TwoClass>,
    pub power: PowerSpec,
    pub slot_length: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheSection {
    pub memory: f64,
    pub file_bits: u64,
}

fn default_d() -> f64 {
    0.01
}
fn default_gamma_max() -> f64 {
    1.0
}
fn default_sigma_max() -> u32 {
    1
}
fn default_alpha() -> f64 {
    1.0
}
fn default_v() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub name: String,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(rename = "V", default = "default_v")]
    pub v: f64,
    #[serde(default = "default_d")]
    pub d: f64,
    #[serde(default = "default_gamma_max")]
    pub gamma_max: f64,
    #[serde(default = "default_sigma_max")]
    pub sigma_max: u32,
}

fn default_warmup() -> f64 {
    0.1
}
fn default_window() -> u64 {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub slots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_warmup")]
    pub warmup_fraction: f64,
    #[serde(default = "default_window")]
    pub window: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(rename = "K", default, skip_serializing_if = "Vec::is_empty")]
    pub num_users: Vec<usize>,
    #[serde(rename = "V", default, skip_serializing_if = "Vec::is_empty")]
    pub v: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub policies: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelSection,
    pub cache: CacheSection,
    pub policy: PolicySection,
    pub run: RunSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let path = e.span().map(|s| format!("bytes {}..{}", s.start, s.end));
            Error::config(path.unwrap_or_else(|| "<file>".into()), e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field; sweep points are checked by expanding them.
    pub fn validate(&self) -> Result<()> {
        self.expand().map(|_| ())
    }

    fn pathloss(&self, k: usize) -> Result<Vec<f64>> {
        match (&self.channel.beta, &self.channel.two_class) {
            (Some(_), Some(_)) => Err(Error::config(
                "channel",
                "give either `beta` or `two_class`, not both",
            )),
            (Some(beta), None) => {
                if beta.len() != k {
                    return Err(Error::config(
                        "channel.beta",
                        format!("has {} entries but K = {k}", beta.len()),
                    ));
                }
                Ok(beta.clone())
            }
            (None, Some(tc)) => {
                let strong = k.div_ceil(2);
                Ok((0..k).map(|i| if i < strong { tc.strong } else { tc.weak }).collect())
            }
            (None, None) => Ok(vec![1.0; k]),
        }
    }

    fn run_config(&self, k: usize, v: f64, alpha: f64, seed: u64, policy: PolicyKind) -> Result<RunConfig> {
        if k == 0 || k > MAX_USERS {
            return Err(Error::config(
                "channel.K",
                format!("must lie in 1..={MAX_USERS} (2^K - 1 codeword queues), got {k}"),
            ));
        }
        let power = self.channel.power.linear()?;
        let channel = ChannelParams::new(self.pathloss(k)?, power, self.channel.slot_length)
            .map_err(|e| Error::config("channel", e.to_string()))?;
        let cache = CacheParams::new(self.cache.memory, self.cache.file_bits, k)
            .map_err(|e| Error::config("cache", e.to_string()))?;
        let params = PolicyParams::new(
            alpha,
            v,
            self.policy.d,
            self.policy.gamma_max,
            self.policy.sigma_max,
        )
        .map_err(|e| Error::config("policy", e.to_string()))?;
        let rc = RunConfig {
            policy,
            channel,
            cache,
            params,
            slots: self.run.slots,
            seed,
            warmup_fraction: self.run.warmup_fraction,
            window: self.run.window,
        };
        rc.validate()?;
        Ok(rc)
    }

    /// All runs of the sweep, ordered by policy, K, V, alpha, seed.
    pub fn expand(&self) -> Result<Vec<RunConfig>> {
        let policies: Vec<PolicyKind> = if self.sweep.policies.is_empty() {
            vec![self.policy.name.parse()?]
        } else {
            self.sweep
                .policies
                .iter()
                .map(|p| p.parse())
                .collect::<Result<_>>()?
        };
        let ks = axis(&self.sweep.num_users, self.channel.num_users);
        let vs = axis(&self.sweep.v, self.policy.v);
        let alphas = axis(&self.sweep.alpha, self.policy.alpha);
        let seeds = axis(&self.sweep.seeds, self.run.seed);

        let mut out = Vec::new();
        for &policy in &policies {
            for &k in &ks {
                for &v in &vs {
                    for &alpha in &alphas {
                        for &seed in &seeds {
                            out.push(self.run_config(k, v, alpha, seed, policy)?);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Applies command-line overrides of the policy and seed.
    pub fn override_with(&mut self, policy: Option<&str>, seed: Option<u64>) -> Result<()> {
        if let Some(p) = policy {
            p.parse::<PolicyKind>()?;
            self.policy.name = p.to_string();
            self.sweep.policies.clear();
        }
        if let Some(s) = seed {
            self.run.seed = s;
            self.sweep.seeds.clear();
        }
        self.validate()
    }
}

fn axis<T: Copy>(values: &[T], default: T) -> Vec<T> {
    if values.is_empty() {
        vec![default]
    } else {
        values.to_vec()
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[channel]
K = 4
two_class = { strong = 1.0, weak = 0.2 }
power = "10dB"
slot_length = 100

[cache]
memory = 0.6
file_bits = 1000

[policy]
name = "lyapunov"

[run]
slots = 1000
"#;

    #[test]
    fn parses_reference_setup() {
        let cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
        let runs = cfg.expand().unwrap();
        assert_eq!(runs.len(), 1);
        let r = &runs[0];
        assert_eq!(r.channel.pathloss(), &[1.0, 1.0, 0.2, 0.2]);
        assert!((r.channel.power() - 10.0).abs() < 1e-12);
        assert_eq!(r.channel.slot_length(), 100);
        assert_eq!(r.cache.memory(), 0.6);
        assert_eq!(r.params.gamma_max, 1.0);
        assert_eq!(r.warmup_fraction, 0.1);
    }

    #[test]
    fn rejects_zero_users() {
        let err = ExperimentConfig::from_toml_str(&BASE.replace("K = 4", "K = 0")).unwrap_err();
        assert!(err.to_string().contains("channel.K"), "{err}");
    }

    #[test]
    fn rejects_too_many_users() {
        let err = ExperimentConfig::from_toml_str(&BASE.replace("K = 4", "K = 17")).unwrap_err();
        assert!(err.to_string().contains("1..=16"), "{err}");
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = BASE.replace("slots = 1000", "slots = 1000\nbogus = 3");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn power_forms() {
        assert!((PowerSpec::Text("10dB".into()).linear().unwrap() - 10.0).abs() < 1e-12);
        assert!((PowerSpec::Text("20 dB".into()).linear().unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(PowerSpec::Linear(3.5).linear().unwrap(), 3.5);
        assert!(PowerSpec::Text("loud".into()).linear().is_err());
        assert!(PowerSpec::Linear(-1.0).linear().is_err());
    }

    #[test]
    fn sweep_cardinality() {
        let text = format!(
            "{BASE}\n[sweep]\nK = [4, 8]\nseeds = [1, 2, 3]\npolicies = [\"lyapunov\", \"unicast-opp\", \"tdma-cc\"]\n"
        );
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.expand().unwrap().len(), 18);
    }

    #[test]
    fn beta_length_must_match_swept_k() {
        let text = BASE.replace("two_class = { strong = 1.0, weak = 0.2 }", "beta = [1.0, 1.0, 0.2, 0.2]");
        assert!(ExperimentConfig::from_toml_str(&text).is_ok());
        let swept = format!("{text}\n[sweep]\nK = [2]\n");
        let err = ExperimentConfig::from_toml_str(&swept).unwrap_err();
        assert!(err.to_string().contains("channel.beta"), "{err}");
    }

    #[test]
    fn overrides() {
        let mut cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
        cfg.override_with(Some("tdma-cc"), Some(42)).unwrap();
        let r = &cfg.expand().unwrap()[0];
        assert_eq!(r.policy, PolicyKind::TdmaCodedCaching);
        assert_eq!(r.seed, 42);
        assert!(cfg.override_with(Some("round-robin"), None).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
    }
}
