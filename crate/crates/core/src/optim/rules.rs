//! Momentum (φ), adaptive-rate (ψ) and update (ξ) rules.
//!
//! φ and ψ read the current gradient and mutate the run's [`OptimizerState`];
//! ξ is a pure function of the parameters, the momentum and the adaptive rate and
//! returns the step Δθ that the caller subtracts from θ.

use serde::{Deserialize, Serialize};

use super::state::OptimizerState;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumKind {
    Identity,
    AdamEma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveKind {
    Identity,
    Adagrad,
    AdamEma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Additive,
    Multiplicative,
    Hybrid,
}

impl RuleKind {
    pub const ALL: [RuleKind; 3] = [RuleKind::Additive, RuleKind::Multiplicative, RuleKind::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Additive => "additive",
            RuleKind::Multiplicative => "multiplicative",
            RuleKind::Hybrid => "hybrid",
        }
    }
}

/// Momentum rule φ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentumRule {
    /// m_t = g_t.
    Identity,
    /// Bias-corrected exponential moving average of the gradients.
    AdamEma { beta1: f64 },
}

impl MomentumRule {
    pub fn kind(&self) -> MomentumKind {
        match self {
            MomentumRule::Identity => MomentumKind::Identity,
            MomentumRule::AdamEma { .. } => MomentumKind::AdamEma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MomentumRule::Identity => Ok(()),
            MomentumRule::AdamEma { beta1 } => check_decay("beta1", beta1),
        }
    }
}

/// Adaptive learning-rate rule ψ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdaptiveRule {
    /// l_t = 1 for every coordinate.
    Identity,
    /// l_t = 1 / (sqrt(Σ g²) + ε).
    Adagrad { epsilon: f64 },
    /// l_t = 1 / (sqrt(v̂_t) + ε) with v̂_t the bias-corrected squared-gradient EMA.
    AdamEma { beta2: f64, epsilon: f64 },
}

impl AdaptiveRule {
    pub fn kind(&self) -> AdaptiveKind {
        match self {
            AdaptiveRule::Identity => AdaptiveKind::Identity,
            AdaptiveRule::Adagrad { .. } => AdaptiveKind::Adagrad,
            AdaptiveRule::AdamEma { .. } => AdaptiveKind::AdamEma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AdaptiveRule::Identity => Ok(()),
            AdaptiveRule::Adagrad { epsilon } => check_epsilon(epsilon),
            AdaptiveRule::AdamEma { beta2, epsilon } => {
                check_decay("beta2", beta2)?;
                check_epsilon(epsilon)
            }
        }
    }
}

/// Update rule ξ, producing the step Δθ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateRule {
    Additive {
        eta: f64,
    },
    Multiplicative {
        eta_in: f64,
        eta_out: f64,
    },
    Hybrid {
        eta: f64,
        eta_in: f64,
        eta_out: f64,
        gamma: f64,
    },
}

impl UpdateRule {
    pub fn kind(&self) -> RuleKind {
        match self {
            UpdateRule::Additive { .. } => RuleKind::Additive,
            UpdateRule::Multiplicative { .. } => RuleKind::Multiplicative,
            UpdateRule::Hybrid { .. } => RuleKind::Hybrid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            UpdateRule::Additive { eta } => check_eta(eta),
            UpdateRule::Multiplicative { eta_in, eta_out } => {
                check_eta_in(eta_in)?;
                check_eta_out(eta_out)
            }
            UpdateRule::Hybrid {
                eta,
                eta_in,
                eta_out,
                gamma,
            } => {
                check_eta(eta)?;
                check_eta_in(eta_in)?;
                check_eta_out(eta_out)?;
                check_gamma(gamma)
            }
        }
    }

    /// Δθ for the given parameters, momentum and adaptive rate.
    pub fn delta(&self, theta: &[f64], m: &[f64], l: &[f64]) -> Result<Vec<f64>> {
        match *self {
            UpdateRule::Additive { eta } => additive_update(theta, m, l, eta),
            UpdateRule::Multiplicative { eta_in, eta_out } => {
                multiplicative_update(theta, m, l, eta_in, eta_out)
            }
            UpdateRule::Hybrid {
                eta,
                eta_in,
                eta_out,
                gamma,
            } => hybrid_update(theta, m, l, eta, eta_in, eta_out, gamma),
        }
    }
}

fn check_decay(name: &'static str, beta: f64) -> Result<()> {
    if beta.is_finite() && (0.0..1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::InvalidRate {
            name,
            value: beta,
            reason: "must lie in [0, 1)",
        })
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRate {
            name: "epsilon",
            value: epsilon,
            reason: "must be positive",
        })
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() && eta >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRate {
            name: "eta",
            value: eta,
            reason: "must be finite and non-negative",
        })
    }
}

fn check_eta_in(eta_in: f64) -> Result<()> {
    if eta_in.is_finite() && eta_in > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRate {
            name: "eta_in",
            value: eta_in,
            reason: "must be positive",
        })
    }
}

fn check_eta_out(eta_out: f64) -> Result<()> {
    if eta_out > 0.0 && eta_out <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidRate {
            name: "eta_out",
            value: eta_out,
            reason: "must lie in (0, 1]",
        })
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::InvalidRate {
            name: "gamma",
            value: gamma,
            reason: "must lie in [0, 1]",
        })
    }
}

fn check_same_len(expected: usize, others: &[usize]) -> Result<()> {
    match others.iter().find(|&&n| n != expected) {
        Some(&found) => Err(Error::DimensionMismatch { expected, found }),
        None => Ok(()),
    }
}

pub(crate) fn check_finite_gradient(g: &[f64]) -> Result<()> {
    match g.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFiniteGradient {
            index,
            value: g[index],
        }),
        None => Ok(()),
    }
}

/// Momentum m_t for step `state.t` (which the caller has already incremented).
pub fn momentum_phi(rule: &MomentumRule, state: &mut OptimizerState, g: &[f64]) -> Result<Vec<f64>> {
    state.check_dim(g.len())?;
    check_finite_gradient(g)?;
    match *rule {
        MomentumRule::Identity => Ok(g.to_vec()),
        MomentumRule::AdamEma { beta1 } => {
            let correction = 1.0 - beta1.powf(state.t as f64);
            Ok(state
                .m_raw
                .iter_mut()
                .zip(g)
                .map(|(m, &gi)| {
                    *m = beta1 * *m + (1.0 - beta1) * gi;
                    *m / correction
                })
                .collect())
        }
    }
}

/// Adaptive rate l_t for step `state.t` (which the caller has already incremented).
pub fn adaptive_psi(rule: &AdaptiveRule, state: &mut OptimizerState, g: &[f64]) -> Result<Vec<f64>> {
    state.check_dim(g.len())?;
    check_finite_gradient(g)?;
    match *rule {
        AdaptiveRule::Identity => Ok(vec![1.0; g.len()]),
        AdaptiveRule::Adagrad { epsilon } => Ok(state
            .v_raw
            .iter_mut()
            .zip(g)
            .map(|(v, &gi)| {
                *v += gi * gi;
                1.0 / (v.sqrt() + epsilon)
            })
            .collect()),
        AdaptiveRule::AdamEma { beta2, epsilon } => {
            let correction = 1.0 - beta2.powf(state.t as f64);
            Ok(state
                .v_raw
                .iter_mut()
                .zip(g)
                .map(|(v, &gi)| {
                    *v = beta2 * *v + (1.0 - beta2) * gi * gi;
                    1.0 / ((*v / correction).sqrt() + epsilon)
                })
                .collect())
        }
    }
}

/// Δθ_i = η·m_i·l_i.
pub fn additive_update(theta: &[f64], m: &[f64], l: &[f64], eta: f64) -> Result<Vec<f64>> {
    check_same_len(theta.len(), &[m.len(), l.len()])?;
    Ok(m.iter().zip(l).map(|(&mi, &li)| eta * mi * li).collect())
}

/// Δθ_i = |θ_i|·tanh(η_in·m_i·l_i)·η_out, so |Δθ_i| ≤ η_out·|θ_i|.
///
/// `tanh` rounds to exactly ±1 for arguments beyond ~19, so with `eta_out = 1` a
/// saturated step lands on zero, which is then a fixed point. It never crosses zero.
pub fn multiplicative_update(
    theta: &[f64],
    m: &[f64],
    l: &[f64],
    eta_in: f64,
    eta_out: f64,
) -> Result<Vec<f64>> {
    check_same_len(theta.len(), &[m.len(), l.len()])?;
    check_eta_out(eta_out)?;
    Ok(theta
        .iter()
        .zip(m.iter().zip(l))
        .map(|(&th, (&mi, &li))| {
            let squash = (eta_in * mi * li).tanh();
            let scale = th.abs() * eta_out;
            let d = scale * squash;
            debug_assert!(d.abs() <= eta_out * th.abs(), "multiplicative bound violated");
            d
        })
        .collect())
}

/// Δθ = γ·multiplicative + (1−γ)·additive.
#[allow(clippy::too_many_arguments)]
pub fn hybrid_update(
    theta: &[f64],
    m: &[f64],
    l: &[f64],
    eta: f64,
    eta_in: f64,
    eta_out: f64,
    gamma: f64,
) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    let mult = multiplicative_update(theta, m, l, eta_in, eta_out)?;
    let add = additive_update(theta, m, l, eta)?;
    Ok(mult
        .iter()
        .zip(&add)
        .map(|(&dm, &da)| gamma * dm + (1.0 - gamma) * da)
        .collect())
}
