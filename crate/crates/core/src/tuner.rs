//! Learning-rate grid search on a fixed tuning task.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{finite_or_null, run_trial};
use crate::objectives::TaskConfig;
use crate::optim::{Family, OptimizerSpec, RuleKind, UpdateRule, DEFAULT_GAMMA};

/// How points are placed between `lo` and `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum Spacing {
    /// 1·10^k and 5·10^k for every decade k.
    #[default]
    OneFive,
    /// `lo·10^(k·step)` for k = 0, 1, ...
    Log10(f64),
}


/// A learning-rate grid on `[lo, hi]`. Both endpoints are always included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub spacing: Spacing,
}

impl GridSpec {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            spacing: Spacing::OneFive,
        }
    }

    pub const fn log10(lo: f64, hi: f64, step: f64) -> Self {
        Self {
            lo,
            hi,
            spacing: Spacing::Log10(step),
        }
    }

    /// Single-point grid.
    pub const fn point(v: f64) -> Self {
        Self::new(v, v)
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        build_grid(self)
    }
}

// Relative slack so that a point landing on an endpoint up to rounding is not emitted twice.
const GRID_SLACK: f64 = 1e-9;

/// Nearest double to `mantissa·10^exp`, avoiding the error of `10f64.powi` for negative powers.
fn decimal(mantissa: u32, exp: i32) -> f64 {
    format!("{mantissa}e{exp}").parse().expect("well-formed float literal")
}

pub fn build_grid(spec: &GridSpec) -> Result<Vec<f64>> {
    let GridSpec { lo, hi, spacing } = *spec;
    if !(lo.is_finite() && lo > 0.0) {
        return Err(Error::InvalidGrid(format!("lo must be positive, got {lo}")));
    }
    if !(hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidGrid(format!("need lo <= hi, got [{lo}, {hi}]")));
    }
    let upper = hi * (1.0 - GRID_SLACK);
    let mut out = vec![lo];
    match spacing {
        Spacing::Log10(step) => {
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::InvalidGrid(format!("log10 step must be positive, got {step}")));
            }
            for k in 1.. {
                let v = lo * 10f64.powf(k as f64 * step);
                if v >= upper {
                    break;
                }
                out.push(v);
            }
        }
        Spacing::OneFive => {
            let lower = lo * (1.0 + GRID_SLACK);
            let mut exp = lo.log10().floor() as i32;
            'decades: loop {
                for mantissa in [1, 5] {
                    let v = decimal(mantissa, exp);
                    if v >= upper {
                        break 'decades;
                    }
                    if v > lower {
                        out.push(v);
                    }
                }
                exp += 1;
            }
        }
    }
    if hi > lo {
        out.push(hi);
    }
    Ok(out)
}

/// Search ranges per rate; which ones apply depends on the rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateGrids {
    #[serde(default = "RateGrids::default_eta")]
    pub eta: GridSpec,
    #[serde(default = "RateGrids::default_eta_in")]
    pub eta_in: GridSpec,
    #[serde(default = "RateGrids::default_eta_out")]
    pub eta_out: GridSpec,
}

impl RateGrids {
    fn default_eta() -> GridSpec {
        GridSpec::new(1e-6, 5e2)
    }

    fn default_eta_in() -> GridSpec {
        GridSpec::new(1e-1, 5e1)
    }

    fn default_eta_out() -> GridSpec {
        GridSpec::new(1e-4, 1.0)
    }
}

impl Default for RateGrids {
    /// η ∈ [1e−6, 5e2], η_in ∈ [1e−1, 5e1], η_out ∈ [1e−4, 1], each on the 1–5 decade grid.
    fn default() -> Self {
        Self {
            eta: Self::default_eta(),
            eta_in: Self::default_eta_in(),
            eta_out: Self::default_eta_out(),
        }
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaderboardEntry {
    pub spec: OptimizerSpec,
    #[serde(serialize_with = "finite_or_null")]
    pub final_distance: f64,
    pub diverged: bool,
}

impl LeaderboardEntry {
    /// (η, η_in, η_out), with unused rates as 0.
    pub fn rates(&self) -> (f64, f64, f64) {
        match self.spec.update {
            UpdateRule::Additive { eta } => (eta, 0.0, 0.0),
            UpdateRule::Multiplicative { eta_in, eta_out } => (0.0, eta_in, eta_out),
            UpdateRule::Hybrid { eta, eta_in, eta_out, .. } => (eta, eta_in, eta_out),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub best_spec: OptimizerSpec,
    #[serde(serialize_with = "finite_or_null")]
    pub best_final_distance: f64,
    /// Every grid point, ascending by final distance; ties go to smaller η, then η_in, then η_out.
    #[serde(skip)]
    pub leaderboard: Vec<LeaderboardEntry>,
}

impl TuneResult {
    pub fn all_diverged(&self) -> bool {
        self.leaderboard.iter().all(|e| e.diverged)
    }

    pub fn diverged_count(&self) -> usize {
        self.leaderboard.iter().filter(|e| e.diverged).count()
    }
}

fn rank(a: &LeaderboardEntry, b: &LeaderboardEntry) -> Ordering {
    let (ea, ia, oa) = a.rates();
    let (eb, ib, ob) = b.rates();
    a.final_distance
        .total_cmp(&b.final_distance)
        .then(ea.total_cmp(&eb))
        .then(ia.total_cmp(&ib))
        .then(oa.total_cmp(&ob))
}

/// Candidate update rules covering the Cartesian product of the relevant grids.
pub fn candidate_rules(rule: RuleKind, grids: &RateGrids, gamma: f64) -> Result<Vec<UpdateRule>> {
    let etas = || grids.eta.values();
    let inner_outer = || -> Result<Vec<(f64, f64)>> {
        let ins = grids.eta_in.values()?;
        let outs = grids.eta_out.values()?;
        Ok(ins
            .iter()
            .flat_map(|&i| outs.iter().map(move |&o| (i, o)))
            .collect())
    };
    Ok(match rule {
        RuleKind::Additive => etas()?.into_iter().map(|eta| UpdateRule::Additive { eta }).collect(),
        RuleKind::Multiplicative => inner_outer()?
            .into_iter()
            .map(|(eta_in, eta_out)| UpdateRule::Multiplicative { eta_in, eta_out })
            .collect(),
        RuleKind::Hybrid => {
            let pairs = inner_outer()?;
            etas()?
                .into_iter()
                .flat_map(|eta| {
                    pairs.iter().map(move |&(eta_in, eta_out)| UpdateRule::Hybrid {
                        eta,
                        eta_in,
                        eta_out,
                        gamma,
                    })
                })
                .collect()
        }
    })
}

/// Exhaustive grid search for `family` + `rule` on `task`, with γ fixed at 0.5 for hybrids.
pub fn grid_search(task: &TaskConfig, family: Family, rule: RuleKind, grids: &RateGrids) -> Result<TuneResult> {
    grid_search_with_gamma(task, family, rule, grids, DEFAULT_GAMMA)
}

pub fn grid_search_with_gamma(
    task: &TaskConfig,
    family: Family,
    rule: RuleKind,
    grids: &RateGrids,
    gamma: f64,
) -> Result<TuneResult> {
    task.validate()?;
    let specs: Vec<OptimizerSpec> = candidate_rules(rule, grids, gamma)?
        .into_iter()
        .map(|u| OptimizerSpec::new(family, u))
        .collect();
    search_specs(task, specs)
}

/// Evaluate arbitrary candidate specs on `task` and rank them.
pub fn search_specs(task: &TaskConfig, specs: Vec<OptimizerSpec>) -> Result<TuneResult> {
    if specs.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    let mut leaderboard: Vec<LeaderboardEntry> = specs
        .into_par_iter()
        .map(|spec| {
            run_trial(task, &spec).map(|r| LeaderboardEntry {
                spec,
                final_distance: r.final_distance,
                diverged: r.diverged,
            })
        })
        .collect::<Result<_>>()?;
    leaderboard.sort_by(rank);
    let best = &leaderboard[0];
    Ok(TuneResult {
        best_spec: best.spec,
        best_final_distance: best.final_distance,
        leaderboard,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], rel: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= rel * y.abs())
    }

    #[test]
    fn log10_grid_examples() {
        let g = build_grid(&GridSpec::log10(1e-1, 5e1, 0.5)).unwrap();
        assert!(close(&g, &[0.1, 0.31622777, 1.0, 3.1622777, 10.0, 31.622777, 50.0], 1e-7), "{g:?}");

        let g = build_grid(&GridSpec::log10(1e-4, 1.0, 0.5)).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], 1e-4);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!((g[7] - 0.31622777).abs() < 1e-7);

        let g = build_grid(&GridSpec::log10(1e-6, 5e2, 0.5)).unwrap();
        assert_eq!(g.len(), 19);
        assert!((g[17] - 316.227766).abs() < 1e-5);
    }

    #[test]
    fn one_five_grid_examples() {
        assert_eq!(build_grid(&GridSpec::new(1e-1, 5e1)).unwrap(), vec![0.1, 0.5, 1.0, 5.0, 10.0, 50.0]);
        assert_eq!(
            build_grid(&GridSpec::new(1e-4, 1.0)).unwrap(),
            vec![1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 0.1, 0.5, 1.0]
        );
        let g = build_grid(&GridSpec::new(1e-6, 5e2)).unwrap();
        assert_eq!(g.len(), 18);
        assert_eq!(&g[..4], &[1e-6, 5e-6, 1e-5, 5e-5]);
        assert_eq!(*g.last().unwrap(), 500.0);
        assert_eq!(build_grid(&GridSpec::new(0.3, 7.0)).unwrap(), vec![0.3, 0.5, 1.0, 5.0, 7.0]);
    }

    #[test]
    fn degenerate_grid() {
        assert_eq!(build_grid(&GridSpec::point(0.01)).unwrap(), vec![0.01]);
        assert_eq!(build_grid(&GridSpec::log10(0.01, 0.01, 0.5)).unwrap(), vec![0.01]);
    }

    #[test]
    fn grid_is_strictly_increasing() {
        let specs = [
            GridSpec::log10(1e-6, 5e2, 0.5),
            GridSpec::log10(0.3, 0.31, 0.5),
            GridSpec::log10(2.0, 2000.0, 1.0),
            GridSpec::log10(1e-3, 1e-3 * 1.0000001, 0.1),
            GridSpec::new(1e-6, 5e2),
            GridSpec::new(5e-3, 5.000001e-3),
            GridSpec::new(0.7, 123.0),
        ];
        for spec in specs {
            let g = build_grid(&spec).unwrap();
            assert_eq!(g[0], spec.lo);
            assert_eq!(*g.last().unwrap(), spec.hi);
            assert!(g.windows(2).all(|w| w[0] < w[1]), "{g:?}");
        }
    }

    #[test]
    fn invalid_grids() {
        assert!(build_grid(&GridSpec::new(0.0, 1.0)).is_err());
        assert!(build_grid(&GridSpec::new(-1.0, 1.0)).is_err());
        assert!(build_grid(&GridSpec::new(2.0, 1.0)).is_err());
        assert!(build_grid(&GridSpec::log10(1.0, 2.0, 0.0)).is_err());
        assert!(search_specs(&TaskConfig::convex2d_tuning(), vec![]).is_err());
    }

    #[test]
    fn cartesian_sizes() {
        let g = RateGrids::default();
        assert_eq!(candidate_rules(RuleKind::Additive, &g, 0.5).unwrap().len(), 18);
        assert_eq!(candidate_rules(RuleKind::Multiplicative, &g, 0.5).unwrap().len(), 6 * 9);
        assert_eq!(candidate_rules(RuleKind::Hybrid, &g, 0.5).unwrap().len(), 18 * 6 * 9);
    }

    #[test]
    fn single_point_grid_matches_direct_trial() {
        let task = TaskConfig::convex2d_tuning();
        let grids = RateGrids {
            eta: GridSpec::point(1e-3),
            eta_in: GridSpec::point(6.0),
            eta_out: GridSpec::point(0.6),
        };
        let res = grid_search(&task, Family::Sgd, RuleKind::Hybrid, &grids).unwrap();
        assert_eq!(res.leaderboard.len(), 1);
        let direct = run_trial(&task, &res.best_spec).unwrap();
        assert_eq!(res.best_final_distance, direct.final_distance);
    }

    #[test]
    fn unstable_rates_rank_last() {
        let task = TaskConfig::convex2d_tuning();
        let res = grid_search(&task, Family::Sgd, RuleKind::Additive, &RateGrids::default()).unwrap();
        assert!(res.diverged_count() > 0);
        let first_bad = res.leaderboard.iter().position(|e| e.diverged).unwrap();
        assert!(res.leaderboard[first_bad..].iter().all(|e| e.diverged));
        assert!(res.leaderboard.windows(2).all(|w| rank(&w[0], &w[1]) != Ordering::Greater));
        assert_eq!(res.best_final_distance, res.leaderboard[0].final_distance);
    }

    #[test]
    fn ties_prefer_smaller_rates() {
        let task = TaskConfig::convex2d_tuning();
        let specs = vec![
            OptimizerSpec::new(Family::Sgd, UpdateRule::Additive { eta: 20.0 }),
            OptimizerSpec::new(Family::Sgd, UpdateRule::Additive { eta: 10.0 }),
        ];
        let res = search_specs(&task, specs).unwrap();
        assert!(res.all_diverged());
        assert_eq!(res.best_spec.update, UpdateRule::Additive { eta: 10.0 });
    }
}
