//! Flat key/value configuration with fail-fast validation: unknown keys are
//! rejected and every module precondition is checked at load time.

use std::f64::consts::FRAC_PI_4;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use rqpsi::game::{GameParams, PartyUtilities, UtilityTable};
use rqpsi::protocol::ProtocolParams;
use rqpsi::strategies::{parse_alice, parse_bob, StrategyProfile};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(msg) | CliError::Io(msg) => msg,
        }
    }
}

fn default_theta() -> f64 {
    FRAC_PI_4
}
fn default_threshold() -> f64 {
    0.05
}
fn default_trials() -> u64 {
    1
}
fn default_u_tn() -> f64 {
    1.0
}
fn default_u_tt() -> f64 {
    0.5
}
fn default_u_nn() -> f64 {
    0.0
}
fn default_u_nt() -> f64 {
    -0.5
}
fn default_strategy() -> String {
    "honest".to_string()
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// The raw config document. Field names follow the protocol parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(rename = "N")]
    pub modulus: usize,
    pub n: usize,
    pub m: usize,
    pub u: usize,
    pub l: usize,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_u_tn")]
    pub u_tn: f64,
    #[serde(default = "default_u_tt")]
    pub u_tt: f64,
    #[serde(default = "default_u_nn")]
    pub u_nn: f64,
    #[serde(default = "default_u_nt")]
    pub u_nt: f64,
    #[serde(default = "default_strategy")]
    pub alice: String,
    #[serde(default = "default_strategy")]
    pub bob: String,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Secret element for the membership command; drawn from the seed when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let config = Self::parse(&text)?;
        config.validate()?;
        Ok((config, text))
    }

    /// Every module precondition, checked up front. Messages name the
    /// violated condition.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.modulus < 2 {
            return fail(format!("N >= 2 violated: N={}", self.modulus));
        }
        if self.n == 0 || self.m == 0 {
            return fail(format!("n, m >= 1 violated: n={}, m={}", self.n, self.m));
        }
        if self.modulus <= 2 * self.n.max(self.m) {
            return fail(format!(
                "N > 2*max(n,m) violated: N={}, max(n,m)={}",
                self.modulus,
                self.n.max(self.m)
            ));
        }
        if self.l < 2 * self.n {
            return fail(format!("l >= 2n violated: l={}, n={}", self.l, self.n));
        }
        if self.u > self.n.min(self.m) {
            return fail(format!("u <= min(n,m) violated: u={}", self.u));
        }
        if !(0.0..=FRAC_PI_4).contains(&self.theta) {
            return fail(format!("theta in [0, pi/4] violated: theta={}", self.theta));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return fail(format!("noise in [0, 1] violated: noise={}", self.noise));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return fail(format!("threshold in [0, 1] violated: threshold={}", self.threshold));
        }
        if self.trials == 0 {
            return fail("trials >= 1 violated: trials=0".to_string());
        }
        self.utilities()?;
        self.profile()?;
        if let Some(k) = self.k {
            if k == 0 || k >= self.modulus {
                return fail(format!("k in Z_N^* violated: k={k}, N={}", self.modulus));
            }
        }
        Ok(())
    }

    pub fn utilities(&self) -> Result<UtilityTable, CliError> {
        let u = PartyUtilities {
            u_tt: self.u_tt,
            u_tn: self.u_tn,
            u_nt: self.u_nt,
            u_nn: self.u_nn,
        };
        UtilityTable::new(u, u).map_err(|e| {
            CliError::Config(format!("utility order R1 (U_TN > U_TT > U_NN > U_NT) violated: {e}"))
        })
    }

    pub fn profile(&self) -> Result<StrategyProfile, CliError> {
        let alice = parse_alice(&self.alice)
            .map_err(|e| CliError::Config(format!("alice strategy descriptor invalid: {e}")))?;
        let bob = parse_bob(&self.bob)
            .map_err(|e| CliError::Config(format!("bob strategy descriptor invalid: {e}")))?;
        Ok(StrategyProfile { alice, bob })
    }

    pub fn protocol_params(&self) -> ProtocolParams {
        ProtocolParams {
            l: self.l,
            theta: self.theta,
            noise: self.noise,
            threshold: self.threshold,
        }
    }

    pub fn game_params(&self) -> GameParams {
        GameParams {
            modulus: self.modulus,
            n: self.n,
            m: self.m,
            u_choices: vec![self.u],
            l: self.l,
            theta: self.theta,
            noise: self.noise,
            threshold: self.threshold,
        }
    }
}
