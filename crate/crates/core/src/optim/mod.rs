//! Optimizers assembled from a momentum rule, an adaptive-rate rule and an update rule.
//!
//! Every step follows the same loop body:
//!
//! ```text
//! t   += 1
//! m_t  = φ(g_1..g_t)
//! l_t  = ψ(g_1..g_t)
//! Δθ   = ξ(θ, m_t, l_t)
//! θ   -= Δθ
//! ```
//!
//! SGD, Adagrad, Adam and RMSProp are the four [`Family`] presets for (φ, ψ); each can be
//! paired with any [`UpdateRule`].

mod rules;
mod spec;
mod state;

pub use rules::{
    adaptive_psi, additive_update, hybrid_update, momentum_phi, multiplicative_update, AdaptiveKind,
    AdaptiveRule, MomentumKind, MomentumRule, RuleKind, UpdateRule,
};
pub use spec::{Family, OptimizerSpec, DEFAULT_GAMMA};
pub use state::{init_state, OptimizerState};

use crate::error::{Error, Result};

/// One optimizer step. Mutates `state` and `theta` in place and returns the applied Δθ.
///
/// If the resulting parameters would contain a non-finite value, `theta` is left untouched
/// and a divergence error carrying the step index is returned.
pub fn step(spec: &OptimizerSpec, state: &mut OptimizerState, theta: &mut [f64], g: &[f64]) -> Result<Vec<f64>> {
    state.check_dim(theta.len())?;
    state.check_dim(g.len())?;
    rules::check_finite_gradient(g)?;

    state.t += 1;
    let m = momentum_phi(&spec.momentum, state, g)?;
    let l = adaptive_psi(&spec.adaptive, state, g)?;
    let delta = spec.update.delta(theta, &m, &l)?;

    let next: Vec<f64> = theta.iter().zip(&delta).map(|(th, d)| th - d).collect();
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { iteration: state.t });
    }
    theta.copy_from_slice(&next);
    Ok(delta)
}

/// A spec bundled with the state of the single run it drives.
#[derive(Debug, Clone)]
pub struct Optimizer {
    spec: OptimizerSpec,
    state: OptimizerState,
}

impl Optimizer {
    pub fn new(spec: OptimizerSpec, dim: usize) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            state: init_state(dim)?,
        })
    }

    pub fn spec(&self) -> &OptimizerSpec {
        &self.spec
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn step(&mut self, theta: &mut [f64], g: &[f64]) -> Result<Vec<f64>> {
        step(&self.spec, &mut self.state, theta, g)
    }
}
