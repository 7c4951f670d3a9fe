//! Single trials, the randomized-configuration robustness protocol and the
//! initial-point surface scan.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::objectives::{FunctionId, Point, TaskConfig};
use crate::optim::{Optimizer, OptimizerSpec};

/// Number of initial points per axis in a surface scan.
pub const SCAN_POINTS: usize = 25;

/// Serialises non-finite floats as `null` so JSON output stays valid.
pub(crate) fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn vec_finite_or_null<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
}

/// Trajectory of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    /// Distance to the minimum at the start and after every completed step.
    pub distances: Vec<f64>,
    /// Parameter values matching `distances`.
    pub points: Vec<Point>,
    #[serde(serialize_with = "finite_or_null")]
    pub final_distance: f64,
    pub initial_distance: f64,
    /// `final_distance / initial_distance`; `+inf` for a diverged run.
    #[serde(serialize_with = "finite_or_null")]
    pub score: f64,
    pub diverged: bool,
    pub iterations_run: usize,
}

fn normalised_score(final_distance: f64, initial_distance: f64) -> f64 {
    if initial_distance > 0.0 {
        final_distance / initial_distance
    } else if final_distance == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Run `task.iterations` full-gradient steps from `task.x0`.
///
/// A step that yields a non-finite gradient or parameter ends the run early; the record is
/// then flagged as diverged with `final_distance = score = +inf`.
pub fn run_trial(task: &TaskConfig, spec: &OptimizerSpec) -> Result<TrialRecord> {
    task.validate()?;
    let objective = task.objective()?;
    let mut opt = Optimizer::new(*spec, 2)?;

    let mut theta = task.x0;
    let initial_distance = objective.distance_to_minimum(theta);
    let mut distances = Vec::with_capacity(task.iterations + 1);
    let mut points = Vec::with_capacity(task.iterations + 1);
    distances.push(initial_distance);
    points.push(theta);

    let mut diverged = false;
    for _ in 0..task.iterations {
        let g = objective.grad(theta);
        match opt.step(&mut theta, &g) {
            Ok(_) => {}
            Err(Error::Divergence { .. } | Error::NonFiniteGradient { .. }) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
        let d = objective.distance_to_minimum(theta);
        if !d.is_finite() {
            diverged = true;
            break;
        }
        distances.push(d);
        points.push(theta);
    }

    let iterations_run = distances.len() - 1;
    let final_distance = if diverged {
        f64::INFINITY
    } else {
        distances[iterations_run]
    };
    Ok(TrialRecord {
        distances,
        points,
        final_distance,
        initial_distance,
        score: normalised_score(final_distance, initial_distance),
        diverged,
        iterations_run,
    })
}

/// Either a constant or a normal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Sampler {
    Fixed(f64),
    Normal { mean: f64, std: f64 },
}

impl Sampler {
    fn validate(&self, field: &str) -> Result<()> {
        match *self {
            Sampler::Fixed(v) if v.is_finite() => Ok(()),
            Sampler::Normal { mean, std } if mean.is_finite() && std.is_finite() && std >= 0.0 => Ok(()),
            _ => Err(Error::InvalidConfig(format!(
                "`{field}` needs a finite value or finite mean with non-negative std"
            ))),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Sampler::Fixed(v) => v,
            Sampler::Normal { mean, std } => Normal::new(mean, std)
                .expect("validated normal parameters")
                .sample(rng),
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            Sampler::Fixed(v) => v,
            Sampler::Normal { mean, .. } => mean,
        }
    }
}

/// Distribution over task configurations for the robustness protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalDistribution {
    pub function: FunctionId,
    pub x0: [Sampler; 2],
    pub alpha: Sampler,
    pub beta: Sampler,
    pub iterations: Sampler,
}

impl EvalDistribution {
    /// Convex evaluation column: x0 ~ N(50, 5), α ~ N(1, 1), β ~ N(20, 2), T ~ N(100, 10).
    pub fn convex2d() -> Self {
        Self {
            function: FunctionId::Convex2d,
            x0: [
                Sampler::Normal { mean: 50.0, std: 5.0 },
                Sampler::Normal { mean: 50.0, std: 5.0 },
            ],
            alpha: Sampler::Normal { mean: 1.0, std: 1.0 },
            beta: Sampler::Normal { mean: 20.0, std: 2.0 },
            iterations: Sampler::Normal { mean: 100.0, std: 10.0 },
        }
    }

    /// Rosenbrock evaluation column: x0 ~ (N(0.5, 0.1), N(3, 1)), α = 1, β ~ N(60, 6), T ~ N(100, 10).
    pub fn rosenbrock() -> Self {
        Self {
            function: FunctionId::Rosenbrock,
            x0: [
                Sampler::Normal { mean: 0.5, std: 0.1 },
                Sampler::Normal { mean: 3.0, std: 1.0 },
            ],
            alpha: Sampler::Fixed(1.0),
            beta: Sampler::Normal { mean: 60.0, std: 6.0 },
            iterations: Sampler::Normal { mean: 100.0, std: 10.0 },
        }
    }

    pub fn fixed(task: &TaskConfig) -> Self {
        Self {
            function: task.function,
            x0: [Sampler::Fixed(task.x0[0]), Sampler::Fixed(task.x0[1])],
            alpha: Sampler::Fixed(task.alpha),
            beta: Sampler::Fixed(task.beta),
            iterations: Sampler::Fixed(task.iterations as f64),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.x0[0].validate("x0[0]")?;
        self.x0[1].validate("x0[1]")?;
        self.alpha.validate("alpha")?;
        self.beta.validate("beta")?;
        self.iterations.validate("iterations")?;
        // Rejection sampling for β only terminates reliably with a positive centre.
        if self.beta.mean() <= 0.0 {
            return Err(Error::InvalidConfig("`beta` must be centred on a positive value".into()));
        }
        Ok(())
    }
}

/// Round half away from zero, clamp to at least one iteration.
pub fn iterations_from_draw(draw: f64) -> usize {
    let r = draw.round();
    if r.is_nan() || r < 1.0 {
        1
    } else {
        r as usize
    }
}

/// Independent RNG stream for trial `index` under master `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draw task `index` of the evaluation set. Deterministic in `(seed, index)`.
pub fn sample_eval_config(dist: &EvalDistribution, seed: u64, index: u64) -> TaskConfig {
    let mut rng = trial_rng(seed, index);
    let x0 = [dist.x0[0].sample(&mut rng), dist.x0[1].sample(&mut rng)];
    let alpha = dist.alpha.sample(&mut rng);
    let mut beta = dist.beta.sample(&mut rng);
    while beta <= 0.0 {
        beta = dist.beta.sample(&mut rng);
    }
    let iterations = iterations_from_draw(dist.iterations.sample(&mut rng));
    TaskConfig {
        function: dist.function,
        alpha,
        beta,
        x0,
        iterations,
        seed: index,
    }
}

/// Aggregate of a robustness evaluation. Diverged trials are excluded from mean/std.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreStats {
    #[serde(serialize_with = "finite_or_null")]
    pub mean: f64,
    /// Sample standard deviation (n−1 denominator); 0 for a single trial.
    #[serde(serialize_with = "finite_or_null")]
    pub std: f64,
    pub std_kind: &'static str,
    /// Trials run.
    pub n: usize,
    /// Trials contributing to mean/std.
    pub n_finite: usize,
    pub diverged: usize,
    #[serde(serialize_with = "vec_finite_or_null")]
    pub scores: Vec<f64>,
}

impl ScoreStats {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let finite: Vec<f64> = scores.iter().copied().filter(|s| s.is_finite()).collect();
        let k = finite.len();
        let mean = if k == 0 {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / k as f64
        };
        let std = match k {
            0 => f64::NAN,
            1 => 0.0,
            _ => (finite.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt(),
        };
        Self {
            mean,
            std,
            std_kind: "sample",
            n: scores.len(),
            n_finite: k,
            diverged: scores.len() - k,
            scores,
        }
    }
}

/// One sampled task and its trial outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessTrial {
    pub task: TaskConfig,
    pub record: TrialRecord,
}

/// Run `n` sampled tasks with a fixed spec, in parallel on the current rayon pool.
pub fn robustness_trials(
    dist: &EvalDistribution,
    spec: &OptimizerSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<RobustnessTrial>> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    dist.validate()?;
    spec.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let task = sample_eval_config(dist, seed, i);
            run_trial(&task, spec).map(|record| RobustnessTrial { task, record })
        })
        .collect()
}

pub fn evaluate_robustness(dist: &EvalDistribution, spec: &OptimizerSpec, n: usize, seed: u64) -> Result<ScoreStats> {
    let trials = robustness_trials(dist, spec, n, seed)?;
    Ok(ScoreStats::from_scores(trials.iter().map(|t| t.record.score).collect()))
}

/// Scores over a 25×25 grid of initial points; `scores[i][j]` starts at `(x0_axis[i], x1_axis[j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreGrid {
    pub x0_axis: Vec<f64>,
    pub x1_axis: Vec<f64>,
    pub scores: Vec<Vec<f64>>,
}

impl ScoreGrid {
    pub fn max_score(&self) -> f64 {
        self.scores.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn linspace(range: (f64, f64), n: usize) -> Vec<f64> {
    let (lo, hi) = range;
    (0..n)
        .map(|k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
        .collect()
}

/// Scan ranges of ±20% around the starting point of `task`, per coordinate.
pub fn default_scan_ranges(task: &TaskConfig) -> [(f64, f64); 2] {
    task.x0.map(|c| {
        let w = 0.2 * c.abs();
        (c - w, c + w)
    })
}

/// One trial per initial point of a 25×25 grid, all other task fields held fixed.
pub fn surface_scan(
    task_base: &TaskConfig,
    spec: &OptimizerSpec,
    x0_range: (f64, f64),
    x1_range: (f64, f64),
) -> Result<ScoreGrid> {
    for (lo, hi) in [x0_range, x1_range] {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidConfig(format!("invalid scan range [{lo}, {hi}]")));
        }
    }
    task_base.validate()?;
    let x0_axis = linspace(x0_range, SCAN_POINTS);
    let x1_axis = linspace(x1_range, SCAN_POINTS);

    let flat: Vec<f64> = (0..SCAN_POINTS * SCAN_POINTS)
        .into_par_iter()
        .map(|k| {
            let task = TaskConfig {
                x0: [x0_axis[k / SCAN_POINTS], x1_axis[k % SCAN_POINTS]],
                ..*task_base
            };
            run_trial(&task, spec).map(|r| r.score)
        })
        .collect::<Result<_>>()?;

    Ok(ScoreGrid {
        x0_axis,
        x1_axis,
        scores: flat.chunks(SCAN_POINTS).map(<[f64]>::to_vec).collect(),
    })
}
