//! Experiment configuration: a small sectioned `key = value` format, its
//! canonical serialization, and a content digest.
//!
//! Parsing starts from the defaults and applies the file on top, so a config
//! only needs the keys it wants to change. The digest is computed over the
//! canonical serialization — fixed section and key order, normalized number
//! formatting — so it is invariant under reordering, comments, and
//! whitespace, and `parse(canonical(c))` reproduces both the config and its
//! digest.

use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::impatience::BehaviorParams;
use crate::optimizer::{GridSpec, ObjectiveWeights};
use crate::sim::{
    BulletinMode, ChainShape, PolicyFilter, ReactionCadence, SimConfig, SweepSpec,
};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    // [system]
    pub lambda_total: f64,
    pub split: f64,
    /// Initial utilization targets; per-cell rates derive as λ_side/ρ.
    pub rho_i: f64,
    pub rho_j: f64,
    /// Absolute initial rates; when set they win over the ρ targets and stay
    /// fixed across sweep cells.
    pub mu_i: Option<f64>,
    pub mu_j: Option<f64>,
    // [behavior]
    pub t_local: f64,
    pub d: f64,
    pub eta: f64,
    pub r: f64,
    // [policy]
    pub policy_enabled: bool,
    pub policy_step: f64,
    pub policy_min: f64,
    pub policy_max: f64,
    // [weights]
    pub tau: f64,
    pub phi: f64,
    pub psi: f64,
    // [sim]
    pub horizon: f64,
    pub warmup: f64,
    pub seed: u64,
    pub bulletins: BulletinMode,
    pub reactions: ReactionCadence,
    // [sweep]
    pub intervals: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub replications: usize,
    // [grid]
    pub grid_start: f64,
    pub grid_stop: f64,
    pub grid_step: f64,
    // [chain]
    pub chain_factors: Vec<f64>,
    pub chain_probs: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            lambda_total: 0.8,
            split: 0.5,
            rho_i: 0.75,
            rho_j: 0.8,
            mu_i: None,
            mu_j: None,
            t_local: 2.0,
            d: 1.0,
            eta: 0.1,
            r: 3.0,
            policy_enabled: false,
            policy_step: 0.5,
            policy_min: 0.5,
            policy_max: 24.0,
            tau: 1.0,
            phi: 1.0,
            psi: 1.0,
            horizon: 400.0,
            warmup: 40.0,
            seed: 42,
            bulletins: BulletinMode::Alternate,
            reactions: ReactionCadence::Bulletin,
            intervals: vec![3.0, 5.0, 7.0, 9.0],
            lambdas: vec![3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0],
            replications: 300,
            grid_start: 0.5,
            grid_stop: 15.0,
            grid_step: 0.5,
            chain_factors: vec![0.8, 1.0, 1.2],
            chain_probs: vec![0.25, 0.5, 0.25],
        }
    }
}

fn bad_value(line: usize, key: &str, value: &str, want: &str) -> Error {
    Error::ParseError {
        line,
        msg: format!("key `{key}`: cannot read `{value}` as {want}"),
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| bad_value(line, key, value, "a number"))
}

fn parse_u64(line: usize, key: &str, value: &str) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| bad_value(line, key, value, "a nonnegative integer"))
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| bad_value(line, key, value, "a nonnegative integer"))
}

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|item| {
            item.trim()
                .parse::<f64>()
                .map_err(|_| bad_value(line, key, value, "a comma-separated list of numbers"))
        })
        .collect()
}

fn parse_flag(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(bad_value(line, key, value, "on or off")),
    }
}

/// Parse a config file's text: defaults plus overrides, then validation.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut section: Option<String> = None;
    let mut warmup_set = false;
    let mut horizon_set = false;
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return Err(Error::ParseError {
                    line,
                    msg: format!("unterminated section header `{content}`"),
                });
            };
            let name = name.trim();
            if ![
                "system", "behavior", "policy", "weights", "sim", "sweep", "grid", "chain",
            ]
            .contains(&name)
            {
                return Err(Error::ParseError {
                    line,
                    msg: format!("unknown section `[{name}]`"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::ParseError {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        let Some(section) = section.as_deref() else {
            return Err(Error::ParseError {
                line,
                msg: format!("key `{key}` appears before any [section] header"),
            });
        };
        match (section, key) {
            ("system", "lambda_total") => cfg.lambda_total = parse_f64(line, key, value)?,
            ("system", "split") => cfg.split = parse_f64(line, key, value)?,
            ("system", "rho_i") => cfg.rho_i = parse_f64(line, key, value)?,
            ("system", "rho_j") => cfg.rho_j = parse_f64(line, key, value)?,
            ("system", "mu_i") => cfg.mu_i = Some(parse_f64(line, key, value)?),
            ("system", "mu_j") => cfg.mu_j = Some(parse_f64(line, key, value)?),
            ("behavior", "t_local") => cfg.t_local = parse_f64(line, key, value)?,
            ("behavior", "d") => cfg.d = parse_f64(line, key, value)?,
            ("behavior", "eta") => cfg.eta = parse_f64(line, key, value)?,
            ("behavior", "r") => cfg.r = parse_f64(line, key, value)?,
            ("policy", "enabled") => cfg.policy_enabled = parse_flag(line, key, value)?,
            ("policy", "step") => cfg.policy_step = parse_f64(line, key, value)?,
            ("policy", "mu_min") => cfg.policy_min = parse_f64(line, key, value)?,
            ("policy", "mu_max") => cfg.policy_max = parse_f64(line, key, value)?,
            ("weights", "tau") => cfg.tau = parse_f64(line, key, value)?,
            ("weights", "phi") => cfg.phi = parse_f64(line, key, value)?,
            ("weights", "psi") => cfg.psi = parse_f64(line, key, value)?,
            ("sim", "horizon") => {
                cfg.horizon = parse_f64(line, key, value)?;
                horizon_set = true;
            }
            ("sim", "warmup") => {
                cfg.warmup = parse_f64(line, key, value)?;
                warmup_set = true;
            }
            ("sim", "seed") => cfg.seed = parse_u64(line, key, value)?,
            ("sim", "bulletins") => {
                cfg.bulletins = match value {
                    "alternate" => BulletinMode::Alternate,
                    "fsd" => BulletinMode::FsdOnly,
                    "icd" => BulletinMode::IcdOnly,
                    "off" => BulletinMode::Off,
                    _ => return Err(bad_value(line, key, value, "alternate, fsd, icd, or off")),
                }
            }
            ("sim", "reactions") => {
                cfg.reactions = match value {
                    "bulletin" => ReactionCadence::Bulletin,
                    "arrival" => ReactionCadence::Arrival,
                    _ => return Err(bad_value(line, key, value, "bulletin or arrival")),
                }
            }
            ("sweep", "intervals") => cfg.intervals = parse_list(line, key, value)?,
            ("sweep", "lambdas") => cfg.lambdas = parse_list(line, key, value)?,
            ("sweep", "replications") => cfg.replications = parse_usize(line, key, value)?,
            ("grid", "start") => cfg.grid_start = parse_f64(line, key, value)?,
            ("grid", "stop") => cfg.grid_stop = parse_f64(line, key, value)?,
            ("grid", "step") => cfg.grid_step = parse_f64(line, key, value)?,
            ("chain", "factors") => cfg.chain_factors = parse_list(line, key, value)?,
            ("chain", "probs") => cfg.chain_probs = parse_list(line, key, value)?,
            _ => {
                return Err(Error::ParseError {
                    line,
                    msg: format!("unknown key `{key}` in section `[{section}]`"),
                })
            }
        }
    }
    // a run that sets its own horizon but stays silent on warmup gets the
    // conventional tenth of the horizon
    if horizon_set && !warmup_set {
        cfg.warmup = cfg.horizon * 0.1;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn list_str(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let invariant = |ok: bool, msg: String| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::ValidationError(msg))
            }
        };
        invariant(
            self.lambda_total >= 0.0 && self.lambda_total.is_finite(),
            format!("lambda_total = {} must be finite and nonnegative", self.lambda_total),
        )?;
        invariant(
            self.split > 0.0 && self.split < 1.0,
            format!("split = {} must lie strictly inside (0, 1)", self.split),
        )?;
        for (rho, name) in [(self.rho_i, "rho_i"), (self.rho_j, "rho_j")] {
            invariant(
                rho > 0.0 && rho < 1.0,
                format!("{name} = {rho} must lie strictly inside (0, 1): the queues must be stable"),
            )?;
        }
        for (mu, lambda, name) in [
            (self.mu_i, self.lambda_total * self.split, "mu_i"),
            (self.mu_j, self.lambda_total * (1.0 - self.split), "mu_j"),
        ] {
            if let Some(mu) = mu {
                invariant(
                    mu > lambda,
                    format!("{name} = {mu} violates stability: it must exceed its arrival rate {lambda}"),
                )?;
            }
        }
        BehaviorParams::new(self.t_local, self.d, self.eta, self.r)?;
        invariant(
            self.warmup >= 0.0 && self.horizon > self.warmup,
            format!(
                "need horizon > warmup >= 0, got horizon = {}, warmup = {}",
                self.horizon, self.warmup
            ),
        )?;
        invariant(
            self.policy_step > 0.0 && self.policy_min > 0.0 && self.policy_max > self.policy_min,
            format!(
                "policy lattice needs step > 0 and 0 < mu_min < mu_max, got step = {}, mu_min = {}, mu_max = {}",
                self.policy_step, self.policy_min, self.policy_max
            ),
        )?;
        ObjectiveWeights::new(self.tau, self.phi, self.psi)?;
        invariant(
            self.replications >= 1,
            "replications must be at least 1".to_string(),
        )?;
        invariant(
            !self.intervals.is_empty() && self.intervals.iter().all(|r| *r > 0.0),
            format!("intervals = [{}] must be nonempty and positive", list_str(&self.intervals)),
        )?;
        invariant(
            !self.lambdas.is_empty() && self.lambdas.iter().all(|l| *l > 0.0),
            format!("lambdas = [{}] must be nonempty and positive", list_str(&self.lambdas)),
        )?;
        GridSpec::new(self.grid_start, self.grid_stop, self.grid_step)?;
        self.chain_shape().chain_for(1.0)?;
        Ok(())
    }

    pub fn chain_shape(&self) -> ChainShape {
        ChainShape {
            factors: self.chain_factors.clone(),
            probs: self.chain_probs.clone(),
        }
    }

    pub fn behavior(&self) -> Result<BehaviorParams> {
        BehaviorParams::new(self.t_local, self.d, self.eta, self.r)
    }

    pub fn weights(&self) -> Result<ObjectiveWeights> {
        ObjectiveWeights::new(self.tau, self.phi, self.psi)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid_start, self.grid_stop, self.grid_step)
    }

    /// Initial service rates for a given total arrival rate: the absolute
    /// overrides when present, otherwise derived from the ρ targets.
    pub fn initial_rates(&self, lambda_total: f64) -> (f64, f64) {
        let li = lambda_total * self.split;
        let lj = lambda_total * (1.0 - self.split);
        let derive = |mu: Option<f64>, lambda: f64, rho: f64| {
            mu.unwrap_or(if lambda > 0.0 { lambda / rho } else { 1.0 })
        };
        (
            derive(self.mu_i, li, self.rho_i),
            derive(self.mu_j, lj, self.rho_j),
        )
    }

    /// One replication's configuration at the config's own λ and r.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let cfg = SimConfig {
            lambda_total: self.lambda_total,
            split_to_i: self.split,
            mu_init: self.initial_rates(self.lambda_total),
            bp: self.behavior()?,
            horizon: self.horizon,
            warmup: self.warmup,
            seed: self.seed,
            policy_enabled: self.policy_enabled,
            policy_step: self.policy_step,
            policy_bounds: (self.policy_min, self.policy_max),
            weights: self.weights()?,
            bulletin_mode: self.bulletins,
            cadence: self.reactions,
            chain_shape: self.chain_shape(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The full experiment grid this config describes.
    pub fn sweep_spec(&self, policy: PolicyFilter) -> Result<SweepSpec> {
        let mut template = self.sim_config()?;
        template.policy_enabled = false;
        Ok(SweepSpec {
            template,
            intervals: self.intervals.clone(),
            lambdas: self.lambdas.clone(),
            replications: self.replications,
            policy,
            rho_init: if self.mu_i.is_some() || self.mu_j.is_some() {
                None
            } else {
                Some((self.rho_i, self.rho_j))
            },
        })
    }

    /// Fixed-order serialization: parsing it back reproduces the config, and
    /// the digest is taken over exactly these bytes.
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &str| {
            out.push_str(line);
            out.push('\n');
        };
        push("[system]");
        push(&format!("lambda_total = {}", self.lambda_total));
        push(&format!("split = {}", self.split));
        push(&format!("rho_i = {}", self.rho_i));
        push(&format!("rho_j = {}", self.rho_j));
        if let Some(mu) = self.mu_i {
            push(&format!("mu_i = {mu}"));
        }
        if let Some(mu) = self.mu_j {
            push(&format!("mu_j = {mu}"));
        }
        push("");
        push("[behavior]");
        push(&format!("t_local = {}", self.t_local));
        push(&format!("d = {}", self.d));
        push(&format!("eta = {}", self.eta));
        push(&format!("r = {}", self.r));
        push("");
        push("[policy]");
        push(&format!(
            "enabled = {}",
            if self.policy_enabled { "on" } else { "off" }
        ));
        push(&format!("step = {}", self.policy_step));
        push(&format!("mu_min = {}", self.policy_min));
        push(&format!("mu_max = {}", self.policy_max));
        push("");
        push("[weights]");
        push(&format!("tau = {}", self.tau));
        push(&format!("phi = {}", self.phi));
        push(&format!("psi = {}", self.psi));
        push("");
        push("[sim]");
        push(&format!("horizon = {}", self.horizon));
        push(&format!("warmup = {}", self.warmup));
        push(&format!("seed = {}", self.seed));
        push(&format!(
            "bulletins = {}",
            match self.bulletins {
                BulletinMode::Alternate => "alternate",
                BulletinMode::FsdOnly => "fsd",
                BulletinMode::IcdOnly => "icd",
                BulletinMode::Off => "off",
            }
        ));
        push(&format!(
            "reactions = {}",
            match self.reactions {
                ReactionCadence::Bulletin => "bulletin",
                ReactionCadence::Arrival => "arrival",
            }
        ));
        push("");
        push("[sweep]");
        push(&format!("intervals = {}", list_str(&self.intervals)));
        push(&format!("lambdas = {}", list_str(&self.lambdas)));
        push(&format!("replications = {}", self.replications));
        push("");
        push("[grid]");
        push(&format!("start = {}", self.grid_start));
        push(&format!("stop = {}", self.grid_stop));
        push(&format!("step = {}", self.grid_step));
        push("");
        push("[chain]");
        push(&format!("factors = {}", list_str(&self.chain_factors)));
        push(&format!("probs = {}", list_str(&self.chain_probs)));
        out
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_string().as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text_yields_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.digest(), ExperimentConfig::default().digest());
    }

    #[test]
    fn overrides_apply_and_round_trip() {
        let text = "
[system]
lambda_total = 4
split = 0.6
mu_i = 5.5

[behavior]
eta = 0.25
r = 7

[sim]
horizon = 1000
seed = 99
bulletins = fsd
reactions = arrival

[sweep]
intervals = 3, 9
replications = 12
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.lambda_total, 4.0);
        assert_eq!(cfg.split, 0.6);
        assert_eq!(cfg.mu_i, Some(5.5));
        assert_eq!(cfg.mu_j, None);
        assert_eq!(cfg.eta, 0.25);
        assert_eq!(cfg.r, 7.0);
        assert_eq!(cfg.horizon, 1000.0);
        // warmup follows the horizon when not set explicitly
        assert_eq!(cfg.warmup, 100.0);
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.bulletins, BulletinMode::FsdOnly);
        assert_eq!(cfg.reactions, ReactionCadence::Arrival);
        assert_eq!(cfg.intervals, vec![3.0, 9.0]);
        assert_eq!(cfg.replications, 12);

        let reparsed = parse_config(&cfg.canonical_string()).unwrap();
        assert_eq!(reparsed, cfg);
        assert_eq!(reparsed.digest(), cfg.digest());
    }

    #[test]
    fn digest_ignores_ordering_comments_and_whitespace() {
        let a = "
[behavior]
r = 5
eta = 0.2

[sim]
seed = 7
";
        let b = "
# the same run, written differently
[sim]
seed   =   7   # base seed

[behavior]
eta = 0.2
r = 5.0
";
        let ca = parse_config(a).unwrap();
        let cb = parse_config(b).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(ca.digest(), cb.digest());

        let different = parse_config("[sim]\nseed = 8").unwrap();
        assert_ne!(ca.digest(), different.digest());
    }

    #[test]
    fn parse_errors_carry_line_and_field() {
        let err = parse_config("[system]\nlambda_total 4").unwrap_err();
        match err {
            Error::ParseError { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("key = value"), "{msg}");
            }
            other => panic!("expected a parse error, got {other}"),
        }

        let err = parse_config("[system]\nbogus = 1").unwrap_err();
        match err {
            Error::ParseError { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("bogus"), "{msg}");
            }
            other => panic!("expected a parse error, got {other}"),
        }

        let err = parse_config("[nope]").unwrap_err();
        assert!(err.to_string().contains("unknown section"));

        let err = parse_config("seed = 7").unwrap_err();
        assert!(err.to_string().contains("before any [section]"));

        let err = parse_config("[sim]\nseed = 7.5").unwrap_err();
        match err {
            Error::ParseError { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("seed"), "{msg}");
            }
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn validation_names_the_violated_invariant() {
        let err = parse_config("[system]\nsplit = 1.5").unwrap_err();
        assert!(matches!(err, Error::ValidationError(_)));
        assert!(err.to_string().contains("split"));

        let err = parse_config("[system]\nlambda_total = 12\nmu_i = 5").unwrap_err();
        assert!(err.to_string().contains("stability"), "{err}");

        let err = parse_config("[sim]\nhorizon = 10\nwarmup = 10").unwrap_err();
        assert!(err.to_string().contains("horizon > warmup"), "{err}");

        let err = parse_config("[sweep]\nreplications = 0").unwrap_err();
        assert!(err.to_string().contains("replications"), "{err}");

        let err = parse_config("[chain]\nprobs = 0.5, 0.6").unwrap_err();
        assert!(matches!(err, Error::InvalidChain(_)), "{err}");
    }

    #[test]
    fn exit_codes_split_config_errors_from_runtime_errors() {
        let parse = parse_config("[sim]\nseed").unwrap_err();
        assert_eq!(parse.exit_code(), 1);
        let validation = parse_config("[system]\nsplit = 0").unwrap_err();
        assert_eq!(validation.exit_code(), 1);
    }

    #[test]
    fn initial_rates_derive_from_utilization_targets() {
        let cfg = parse_config("[system]\nlambda_total = 6").unwrap();
        let (mu_i, mu_j) = cfg.initial_rates(6.0);
        assert!((mu_i - 3.0 / 0.75).abs() < 1e-12);
        assert!((mu_j - 3.0 / 0.8).abs() < 1e-12);

        // absolute overrides win and ignore the sweep's λ
        let fixed = parse_config("[system]\nlambda_total = 6\nmu_i = 9\nmu_j = 11").unwrap();
        assert_eq!(fixed.initial_rates(6.0), (9.0, 11.0));
        assert_eq!(fixed.initial_rates(14.0), (9.0, 11.0));
    }

    #[test]
    fn conversions_plumb_through() {
        let cfg = parse_config(
            "[system]\nlambda_total = 4\n[policy]\nenabled = on\nstep = 0.25\n[sweep]\nreplications = 5",
        )
        .unwrap();
        let sim = cfg.sim_config().unwrap();
        assert_eq!(sim.lambda_total, 4.0);
        assert!(sim.policy_enabled);
        assert_eq!(sim.policy_step, 0.25);
        let spec = cfg.sweep_spec(PolicyFilter::Both).unwrap();
        assert_eq!(spec.replications, 5);
        assert_eq!(spec.rho_init, Some((0.75, 0.8)));
        assert!(!spec.template.policy_enabled);
        let grid = cfg.grid_spec().unwrap();
        assert_eq!(grid.values().len(), 30);
    }

    proptest! {
        #[test]
        fn canonical_round_trip_is_lossless(
            lambda in 0.1f64..20.0,
            split in 0.05f64..0.95,
            eta in 0.0f64..1.0,
            r in 0.5f64..12.0,
            horizon in 10.0f64..5000.0,
            seed in 0u64..u64::MAX / 2,
            reps in 1usize..500,
        ) {
            let cfg = ExperimentConfig {
                lambda_total: lambda,
                split,
                eta,
                r,
                horizon,
                warmup: horizon * 0.1,
                seed,
                replications: reps,
                ..ExperimentConfig::default()
            };
            cfg.validate().unwrap();
            let reparsed = parse_config(&cfg.canonical_string()).unwrap();
            prop_assert_eq!(&reparsed, &cfg);
            prop_assert_eq!(reparsed.digest(), cfg.digest());
        }
    }
}
