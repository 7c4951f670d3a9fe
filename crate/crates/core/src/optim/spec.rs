use serde::{Deserialize, Serialize};

use super::rules::{AdaptiveKind, AdaptiveRule, MomentumKind, MomentumRule, RuleKind, UpdateRule};
use crate::error::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 0.5;
const DEFAULT_BETA1: f64 = 0.9;
const DEFAULT_BETA2: f64 = 0.99;
const DEFAULT_EPSILON: f64 = 1e-8;
const ADAGRAD_EPSILON: f64 = 1e-10;

/// The four classic (φ, ψ) presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Sgd,
    Adagrad,
    Adam,
    #[serde(rename = "rmsprop")]
    RmsProp,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Sgd, Family::Adagrad, Family::Adam, Family::RmsProp];

    pub fn name(self) -> &'static str {
        match self {
            Family::Sgd => "sgd",
            Family::Adagrad => "adagrad",
            Family::Adam => "adam",
            Family::RmsProp => "rmsprop",
        }
    }

    pub fn momentum(self) -> MomentumRule {
        match self {
            Family::Sgd | Family::Adagrad => MomentumRule::Identity,
            Family::Adam => MomentumRule::AdamEma { beta1: DEFAULT_BETA1 },
            // RMSProp is Adam with β1 = 0.
            Family::RmsProp => MomentumRule::AdamEma { beta1: 0.0 },
        }
    }

    pub fn adaptive(self) -> AdaptiveRule {
        match self {
            Family::Sgd => AdaptiveRule::Identity,
            Family::Adagrad => AdaptiveRule::Adagrad {
                epsilon: ADAGRAD_EPSILON,
            },
            Family::Adam | Family::RmsProp => AdaptiveRule::AdamEma {
                beta2: DEFAULT_BETA2,
                epsilon: DEFAULT_EPSILON,
            },
        }
    }

    /// Default additive step size.
    pub fn default_eta(self) -> f64 {
        match self {
            Family::Sgd | Family::Adagrad => 0.01,
            Family::Adam | Family::RmsProp => 0.001,
        }
    }

    /// Default (η_in, η_out) for the multiplicative or hybrid rule, where one is known.
    pub fn default_inner_outer(self, rule: RuleKind) -> Option<(f64, f64)> {
        match (self, rule) {
            (Family::Sgd, RuleKind::Multiplicative) => Some((3.0, 0.3)),
            (Family::Sgd, RuleKind::Hybrid) => Some((6.0, 0.6)),
            (Family::Adagrad, RuleKind::Multiplicative) => Some((10.0, 0.02)),
            (Family::Adagrad, RuleKind::Hybrid) => Some((8.0, 0.1)),
            (Family::RmsProp, RuleKind::Multiplicative) => Some((0.4, 0.2)),
            (Family::RmsProp, RuleKind::Hybrid) => Some((0.01, 0.1)),
            _ => None,
        }
    }

    /// Spec with every rate at its default.
    pub fn preset(self, rule: RuleKind) -> Result<OptimizerSpec> {
        let eta = self.default_eta();
        let update = match rule {
            RuleKind::Additive => UpdateRule::Additive { eta },
            RuleKind::Multiplicative | RuleKind::Hybrid => {
                let (eta_in, eta_out) = self.default_inner_outer(rule).ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "no default eta_in/eta_out for {} with the {} rule",
                        self.name(),
                        rule.name()
                    ))
                })?;
                if rule == RuleKind::Multiplicative {
                    UpdateRule::Multiplicative { eta_in, eta_out }
                } else {
                    UpdateRule::Hybrid {
                        eta,
                        eta_in,
                        eta_out,
                        gamma: DEFAULT_GAMMA,
                    }
                }
            }
        };
        Ok(OptimizerSpec::new(self, update))
    }
}

/// Full optimizer description: φ, ψ and ξ with all their constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct OptimizerSpec {
    pub momentum: MomentumRule,
    pub adaptive: AdaptiveRule,
    pub update: UpdateRule,
}

impl OptimizerSpec {
    pub fn new(family: Family, update: UpdateRule) -> Self {
        Self {
            momentum: family.momentum(),
            adaptive: family.adaptive(),
            update,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.momentum.validate()?;
        self.adaptive.validate()?;
        self.update.validate()
    }

    /// The preset family this (φ, ψ) pair corresponds to, if any.
    pub fn family(&self) -> Option<Family> {
        match (self.momentum, self.adaptive) {
            (MomentumRule::Identity, AdaptiveRule::Identity) => Some(Family::Sgd),
            (MomentumRule::Identity, AdaptiveRule::Adagrad { .. }) => Some(Family::Adagrad),
            (MomentumRule::AdamEma { beta1: 0.0 }, AdaptiveRule::AdamEma { .. }) => {
                Some(Family::RmsProp)
            }
            (MomentumRule::AdamEma { .. }, AdaptiveRule::AdamEma { .. }) => Some(Family::Adam),
            _ => None,
        }
    }

    pub fn rule(&self) -> RuleKind {
        self.update.kind()
    }

    /// Short label such as `sgd/hybrid`.
    pub fn label(&self) -> String {
        let family = self.family().map_or("custom", Family::name);
        format!("{family}/{}", self.rule().name())
    }
}

/// Flat, human-editable form of [`OptimizerSpec`] used in config files and JSON output.
///
/// Either `family` or both `momentum` and `adaptive` must be given. Rates that the rule
/// does not use must be absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    momentum: Option<MomentumKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adaptive: Option<AdaptiveKind>,
    rule: Option<RuleKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta_out: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
}

fn unused(field: &str, rule: &str) -> Error {
    Error::InvalidConfig(format!("field `{field}` is not used by {rule} and must be omitted"))
}

fn missing(field: &str, context: &str) -> Error {
    Error::InvalidConfig(format!("missing field `{field}` ({context})"))
}

impl TryFrom<SpecRepr> for OptimizerSpec {
    type Error = Error;

    fn try_from(r: SpecRepr) -> Result<Self> {
        let rule = r.rule.ok_or_else(|| missing("rule", "additive, multiplicative or hybrid"))?;

        let (momentum_kind, adaptive_kind) = match (r.family, r.momentum, r.adaptive) {
            (Some(f), None, None) => {
                let kinds = (f.momentum().kind(), f.adaptive().kind());
                if f == Family::RmsProp && r.beta1.is_some() {
                    return Err(unused("beta1", "rmsprop"));
                }
                kinds
            }
            (None, Some(m), Some(a)) => (m, a),
            (Some(_), _, _) => {
                return Err(Error::InvalidConfig(
                    "give either `family` or `momentum` + `adaptive`, not both".into(),
                ))
            }
            (None, _, _) => return Err(missing("family", "or both `momentum` and `adaptive`")),
        };

        let momentum = match momentum_kind {
            MomentumKind::Identity => {
                if r.beta1.is_some() && r.family != Some(Family::RmsProp) {
                    return Err(unused("beta1", "identity momentum"));
                }
                MomentumRule::Identity
            }
            MomentumKind::AdamEma => MomentumRule::AdamEma {
                beta1: if r.family == Some(Family::RmsProp) {
                    0.0
                } else {
                    r.beta1.unwrap_or(DEFAULT_BETA1)
                },
            },
        };

        let adaptive = match adaptive_kind {
            AdaptiveKind::Identity => {
                if r.beta2.is_some() {
                    return Err(unused("beta2", "identity adaptive rate"));
                }
                if r.epsilon.is_some() {
                    return Err(unused("epsilon", "identity adaptive rate"));
                }
                AdaptiveRule::Identity
            }
            AdaptiveKind::Adagrad => {
                if r.beta2.is_some() {
                    return Err(unused("beta2", "adagrad"));
                }
                AdaptiveRule::Adagrad {
                    epsilon: r.epsilon.unwrap_or(ADAGRAD_EPSILON),
                }
            }
            AdaptiveKind::AdamEma => AdaptiveRule::AdamEma {
                beta2: r.beta2.unwrap_or(DEFAULT_BETA2),
                epsilon: r.epsilon.unwrap_or(DEFAULT_EPSILON),
            },
        };

        let default_eta = r.family.map(Family::default_eta);
        let defaults = r.family.and_then(|f| f.default_inner_outer(rule));
        let eta = || r.eta.or(default_eta).ok_or_else(|| missing("eta", "no family default"));
        let inner = || {
            r.eta_in
                .or(defaults.map(|d| d.0))
                .ok_or_else(|| missing("eta_in", "no default for this family and rule"))
        };
        let outer = || {
            r.eta_out
                .or(defaults.map(|d| d.1))
                .ok_or_else(|| missing("eta_out", "no default for this family and rule"))
        };

        let update = match rule {
            RuleKind::Additive => {
                for (name, v) in [("eta_in", r.eta_in), ("eta_out", r.eta_out), ("gamma", r.gamma)] {
                    if v.is_some() {
                        return Err(unused(name, "the additive rule"));
                    }
                }
                UpdateRule::Additive { eta: eta()? }
            }
            RuleKind::Multiplicative => {
                for (name, v) in [("eta", r.eta), ("gamma", r.gamma)] {
                    if v.is_some() {
                        return Err(unused(name, "the multiplicative rule"));
                    }
                }
                UpdateRule::Multiplicative {
                    eta_in: inner()?,
                    eta_out: outer()?,
                }
            }
            RuleKind::Hybrid => UpdateRule::Hybrid {
                eta: eta()?,
                eta_in: inner()?,
                eta_out: outer()?,
                gamma: r.gamma.unwrap_or(DEFAULT_GAMMA),
            },
        };

        let spec = OptimizerSpec {
            momentum,
            adaptive,
            update,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<OptimizerSpec> for SpecRepr {
    fn from(spec: OptimizerSpec) -> Self {
        let mut r = SpecRepr {
            rule: Some(spec.rule()),
            ..Default::default()
        };
        match spec.family() {
            Some(f) => r.family = Some(f),
            None => {
                r.momentum = Some(spec.momentum.kind());
                r.adaptive = Some(spec.adaptive.kind());
            }
        }
        if let MomentumRule::AdamEma { beta1 } = spec.momentum {
            if spec.family() != Some(Family::RmsProp) {
                r.beta1 = Some(beta1);
            }
        }
        match spec.adaptive {
            AdaptiveRule::Identity => {}
            AdaptiveRule::Adagrad { epsilon } => r.epsilon = Some(epsilon),
            AdaptiveRule::AdamEma { beta2, epsilon } => {
                r.beta2 = Some(beta2);
                r.epsilon = Some(epsilon);
            }
        }
        match spec.update {
            UpdateRule::Additive { eta } => r.eta = Some(eta),
            UpdateRule::Multiplicative { eta_in, eta_out } => {
                r.eta_in = Some(eta_in);
                r.eta_out = Some(eta_out);
            }
            UpdateRule::Hybrid {
                eta,
                eta_in,
                eta_out,
                gamma,
            } => {
                r.eta = Some(eta);
                r.eta_in = Some(eta_in);
                r.eta_out = Some(eta_out);
                r.gamma = Some(gamma);
            }
        }
        r
    }
}
