//! Two-dimensional benchmark objectives with analytic gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionId {
    /// β(x₁−α)² + 10β(x₂−α)²
    Convex2d,
    /// (α−x₁)² + β(x₂−x₁²)²
    Rosenbrock,
}

impl FunctionId {
    pub fn name(self) -> &'static str {
        match self {
            FunctionId::Convex2d => "convex2d",
            FunctionId::Rosenbrock => "rosenbrock",
        }
    }
}

/// A benchmark objective instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub function: FunctionId,
    pub alpha: f64,
    pub beta: f64,
}

impl Objective {
    pub fn new(function: FunctionId, alpha: f64, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {beta}")));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be finite, got {alpha}")));
        }
        Ok(Self { function, alpha, beta })
    }

    pub fn eval(&self, x: Point) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        match self.function {
            FunctionId::Convex2d => b * (x[0] - a).powi(2) + 10.0 * b * (x[1] - a).powi(2),
            FunctionId::Rosenbrock => (a - x[0]).powi(2) + b * (x[1] - x[0] * x[0]).powi(2),
        }
    }

    pub fn grad(&self, x: Point) -> Point {
        let (a, b) = (self.alpha, self.beta);
        match self.function {
            FunctionId::Convex2d => [2.0 * b * (x[0] - a), 20.0 * b * (x[1] - a)],
            FunctionId::Rosenbrock => {
                let r = x[1] - x[0] * x[0];
                [-2.0 * (a - x[0]) - 4.0 * b * x[0] * r, 2.0 * b * r]
            }
        }
    }

    /// Global minimiser. For Rosenbrock this is `[α, α²]`, which is `[α, α]` at α = 1.
    pub fn minimum(&self) -> Point {
        match self.function {
            FunctionId::Convex2d => [self.alpha, self.alpha],
            FunctionId::Rosenbrock => [self.alpha, self.alpha * self.alpha],
        }
    }

    pub fn distance_to_minimum(&self, x: Point) -> f64 {
        let m = self.minimum();
        (x[0] - m[0]).hypot(x[1] - m[1])
    }
}

pub fn convex2d(alpha: f64, beta: f64) -> Result<Objective> {
    Objective::new(FunctionId::Convex2d, alpha, beta)
}

pub fn rosenbrock(alpha: f64, beta: f64) -> Result<Objective> {
    Objective::new(FunctionId::Rosenbrock, alpha, beta)
}

pub fn distance_to_minimum(x: Point, objective: &Objective) -> f64 {
    objective.distance_to_minimum(x)
}

/// Central-difference gradient estimate with step `h`.
pub fn finite_difference_grad(objective: &Objective, x: Point, h: f64) -> Result<Point> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidStep(h));
    }
    let mut out = [0.0; 2];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut plus = x;
        let mut minus = x;
        plus[i] += h;
        minus[i] -= h;
        *slot = (objective.eval(plus) - objective.eval(minus)) / (2.0 * h);
    }
    Ok(out)
}

/// Problem instance plus starting point and iteration budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub function: FunctionId,
    pub alpha: f64,
    pub beta: f64,
    pub x0: Point,
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if !self.x0.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("x0 must be finite".into()));
        }
        self.objective().map(|_| ())
    }

    pub fn objective(&self) -> Result<Objective> {
        Objective::new(self.function, self.alpha, self.beta)
    }

    /// Convex tuning task: x0 = [50, 50], α = 1, β = 20, 100 iterations.
    pub fn convex2d_tuning() -> Self {
        Self {
            function: FunctionId::Convex2d,
            alpha: 1.0,
            beta: 20.0,
            x0: [50.0, 50.0],
            iterations: 100,
            seed: 0,
        }
    }

    /// Rosenbrock tuning task: x0 = [0.5, 3], α = 1, β = 20, 100 iterations.
    pub fn rosenbrock_tuning() -> Self {
        Self {
            function: FunctionId::Rosenbrock,
            alpha: 1.0,
            beta: 20.0,
            x0: [0.5, 3.0],
            iterations: 100,
            seed: 0,
        }
    }
}
