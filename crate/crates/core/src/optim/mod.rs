//! Maximization of `F_t` over per-class slot counts and mean degrees for a
//! fixed number of users, slots and classes.
//!
//! The search runs Nelder-Mead on an unconstrained vector: `ln beta` for each
//! class followed by `k - 1` log-shares of the slot budget (the last class is
//! the reference share). Every evaluation rounds the shares to an integer
//! composition of `m` by largest remainder, so every candidate the objective
//! sees satisfies the slot budget exactly.

mod nelder_mead;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};

use crate::analysis::{unresolved_pmf, AnalysisOptions};
use crate::error::{Error, Result};
use crate::model::{SlotClass, SystemConfig};

/// Pruning threshold used while searching.
pub const SEARCH_PRUNE_THRESHOLD: f64 = 1e-13;
/// Pruning threshold for re-evaluating the reported optimum.
pub const FINAL_PRUNE_THRESHOLD: f64 = 1e-15;

/// Weight of the resolved fraction added to `F_t` in the search objective.
/// Far from the optimum `F_t` underflows to a flat zero and the resolved
/// fraction is the only slope; near it the term is below `f_tolerance`.
const PLATEAU_WEIGHT: f64 = 1e-9;

/// Share assigned to an empty class when encoding, relative to one slot.
const EMPTY_SHARE: f64 = 1e-9;

/// Per-class slot counts and mean degrees.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub slot_counts: Vec<usize>,
    pub mean_degrees: Vec<f64>,
}

impl Candidate {
    pub fn new(slot_counts: Vec<usize>, mean_degrees: Vec<f64>) -> Self {
        Candidate {
            slot_counts,
            mean_degrees,
        }
    }

    pub fn to_config(&self, users: usize) -> Result<SystemConfig> {
        let classes = self
            .slot_counts
            .iter()
            .zip(&self.mean_degrees)
            .map(|(&m, &b)| SlotClass::new(m, b))
            .collect();
        SystemConfig::new(users, classes)
    }

    fn cache_key(&self) -> (Vec<usize>, Vec<u64>) {
        (
            self.slot_counts.clone(),
            self.mean_degrees.iter().map(|b| b.to_bits()).collect(),
        )
    }
}

/// Splits `total` into integers proportional to `shares` by largest
/// remainder; ties go to the lower index.
pub fn largest_remainder(shares: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = shares.iter().sum();
    let exact: Vec<f64> = shares.iter().map(|s| s / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Map between candidates and the unconstrained search space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Encoding {
    pub users: usize,
    pub slots: usize,
    pub classes: usize,
}

impl Encoding {
    pub fn dim(&self) -> usize {
        2 * self.classes - 1
    }

    pub fn encode(&self, c: &Candidate) -> Vec<f64> {
        let k = self.classes;
        let mut x: Vec<f64> = c
            .mean_degrees
            .iter()
            .map(|b| b.max(f64::MIN_POSITIVE).ln())
            .collect();
        let share = |m: usize| if m == 0 { EMPTY_SHARE } else { m as f64 };
        let reference = share(c.slot_counts[k - 1]).ln();
        x.extend(
            c.slot_counts[..k - 1]
                .iter()
                .map(|&m| share(m).ln() - reference),
        );
        x
    }

    pub fn decode(&self, x: &[f64]) -> Candidate {
        let k = self.classes;
        let n = self.users as f64;
        let mean_degrees = x[..k].iter().map(|z| z.exp().min(n)).collect();
        let slot_counts = if k == 1 {
            vec![self.slots]
        } else {
            let logs = &x[k..];
            let top = logs.iter().copied().fold(0.0, f64::max);
            let mut shares: Vec<f64> = logs.iter().map(|z| (z - top).exp()).collect();
            shares.push((-top).exp());
            largest_remainder(&shares, self.slots)
        };
        Candidate {
            slot_counts,
            mean_degrees,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationProblem {
    pub users: usize,
    pub slots: usize,
    pub classes: usize,
    /// Minimum number of users to resolve.
    pub target: usize,
    pub starts: usize,
    pub seed: u64,
    /// Evaluation budget per start.
    pub max_evals: usize,
    pub x_tolerance: f64,
    pub f_tolerance: f64,
    pub search_prune: f64,
    pub final_prune: f64,
    /// Number of starts run concurrently; 1 is fully sequential.
    pub jobs: usize,
}

impl OptimizationProblem {
    pub fn new(users: usize, slots: usize, classes: usize, target: usize) -> Self {
        OptimizationProblem {
            users,
            slots,
            classes,
            target,
            starts: 8,
            seed: 0,
            max_evals: 400,
            x_tolerance: 1e-4,
            f_tolerance: 1e-6,
            search_prune: SEARCH_PRUNE_THRESHOLD,
            final_prune: FINAL_PRUNE_THRESHOLD,
            jobs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::NoUsers);
        }
        if self.classes == 0 {
            return Err(Error::NoClasses);
        }
        if self.target == 0 || self.target > self.users {
            return Err(Error::TargetOutOfRange {
                target: self.target,
                users: self.users,
            });
        }
        if self.starts == 0 {
            return Err(Error::InvalidParameter {
                name: "starts",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    pub fn encoding(&self) -> Encoding {
        Encoding {
            users: self.users,
            slots: self.slots,
            classes: self.classes,
        }
    }

    /// `F_t` of a candidate at the given pruning threshold.
    pub fn evaluate(&self, c: &Candidate, prune: f64) -> Result<(f64, f64)> {
        let profile = unresolved_pmf(
            &c.to_config(self.users)?,
            AnalysisOptions::with_prune(prune),
        )?;
        Ok((profile.f_t(self.target), profile.leaked_mass))
    }

    /// Search objective (to minimize) and `F_t` at the search threshold.
    fn search_objective(&self, c: &Candidate) -> Result<(f64, f64)> {
        let profile = unresolved_pmf(
            &c.to_config(self.users)?,
            AnalysisOptions::with_prune(self.search_prune),
        )?;
        let f = profile.f_t(self.target);
        let resolved = profile.mean_resolved() / self.users as f64;
        Ok((-(f + PLATEAU_WEIGHT * resolved), f))
    }

    /// Starting point of start `index`: mean degrees log-uniform in
    /// `[1, n/2]`, composition uniform over the simplex.
    pub fn start_point(&self, index: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let hi = (self.users as f64 / 2.0).max(1.0).ln();
        let mut x: Vec<f64> = (0..self.classes)
            .map(|_| rng.random_range(0.0..=hi))
            .collect();
        let e: Vec<f64> = (0..self.classes).map(|_| Exp1.sample(&mut rng)).collect();
        let last: f64 = e[self.classes - 1];
        x.extend(e[..self.classes - 1].iter().map(|v: &f64| (v / last).ln()));
        x
    }
}

/// Outcome of one start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartRun {
    pub start: usize,
    pub initial: Candidate,
    pub best: Candidate,
    /// `F_t` at the search pruning threshold.
    pub f_t: f64,
    pub evals: usize,
    pub converged: bool,
    /// Best objective (`F_t` plus the plateau term) after each Nelder-Mead iteration.
    pub trajectory: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub problem: OptimizationProblem,
    pub best: Candidate,
    /// `F_t` of `best` re-evaluated at the final pruning threshold.
    pub best_f_t: f64,
    pub leaked_mass: f64,
    pub best_start: usize,
    pub runs: Vec<StartRun>,
    pub total_evals: usize,
}

/// Restarts from the incumbent while they keep improving by more than `f_tolerance`.
const MAX_RESTARTS: usize = 3;

/// Runs Nelder-Mead (with restarts from the incumbent) from an encoded point.
pub fn run_start(problem: &OptimizationProblem, start: usize, x0: &[f64]) -> StartRun {
    let enc = problem.encoding();
    // Decoded candidate -> (objective, F_t).
    let mut cache: HashMap<(Vec<usize>, Vec<u64>), (f64, f64)> = HashMap::new();
    let mut objective = |x: &[f64]| -> f64 {
        let c = enc.decode(x);
        let key = c.cache_key();
        if let Some(&(v, _)) = cache.get(&key) {
            return v;
        }
        let (v, f) = match problem.search_objective(&c) {
            Ok((v, f)) => (v, f),
            Err(_) => (f64::INFINITY, 0.0),
        };
        cache.insert(key, (v, f));
        v
    };

    let mut step = vec![0.3; problem.classes];
    step.extend(std::iter::repeat_n(1.0, problem.classes - 1));
    let mut x = x0.to_vec();
    let mut evals = 0;
    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut best_f = f64::INFINITY;
    for _ in 0..=MAX_RESTARTS {
        let remaining = problem.max_evals.saturating_sub(evals);
        if remaining == 0 {
            break;
        }
        let options = NelderMeadOptions {
            x_tolerance: problem.x_tolerance,
            f_tolerance: problem.f_tolerance,
            max_evals: remaining,
            initial_step: step.clone(),
        };
        let r = nelder_mead(&mut objective, &x, &options);
        evals += r.evals;
        trajectory.extend(r.history.iter().map(|f| -f));
        converged = r.converged;
        let improved = best_f - r.f > problem.f_tolerance;
        if r.f < best_f {
            best_f = r.f;
            x = r.x;
        }
        if !improved || !converged {
            break;
        }
        step.iter_mut().for_each(|s| *s *= 0.5);
    }
    let best = enc.decode(&x);
    let f_t = match cache.get(&best.cache_key()) {
        Some(&(_, f)) => f,
        None => problem
            .evaluate(&best, problem.search_prune)
            .map_or(0.0, |(f, _)| f),
    };
    StartRun {
        start,
        initial: enc.decode(x0),
        best,
        f_t,
        evals,
        converged,
        trajectory,
    }
}

/// Picks the better of two starts: higher `F_t`, then fewer evaluations,
/// then lower start index.
fn better(a: &StartRun, b: &StartRun) -> bool {
    a.f_t > b.f_t || (a.f_t == b.f_t && (a.evals, a.start) < (b.evals, b.start))
}

fn finish(problem: &OptimizationProblem, runs: Vec<StartRun>) -> Result<OptimizationResult> {
    let winner = runs
        .iter()
        .fold(None::<&StartRun>, |acc, r| match acc {
            Some(a) if !better(r, a) => Some(a),
            _ => Some(r),
        })
        .expect("at least one start");
    let (best_f_t, leaked_mass) = problem.evaluate(&winner.best, problem.final_prune)?;
    Ok(OptimizationResult {
        problem: problem.clone(),
        best: winner.best.clone(),
        best_f_t,
        leaked_mass,
        best_start: winner.start,
        total_evals: runs.iter().map(|r| r.evals).sum(),
        runs,
    })
}

/// Multi-start search from seeded random starting points.
pub fn multistart_optimize(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    problem.validate()?;
    let one = |i: usize| run_start(problem, i, &problem.start_point(i));
    let runs: Vec<StartRun> = if problem.jobs > 1 {
        (0..problem.starts).into_par_iter().map(one).collect()
    } else {
        (0..problem.starts).map(one).collect()
    };
    finish(problem, runs)
}

/// Single search started from a given candidate.
pub fn optimize_from(
    problem: &OptimizationProblem,
    start: &Candidate,
) -> Result<OptimizationResult> {
    problem.validate()?;
    if start.slot_counts.len() != problem.classes
        || start.mean_degrees.len() != problem.classes
        || start.slot_counts.iter().sum::<usize>() != problem.slots
    {
        return Err(Error::InvalidParameter {
            name: "start candidate",
            reason: format!(
                "needs {} classes summing to {} slots",
                problem.classes, problem.slots
            ),
        });
    }
    let x0 = problem.encoding().encode(start);
    finish(problem, vec![run_start(problem, 0, &x0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_class_uses_every_slot() {
        let enc = Encoding {
            users: 50,
            slots: 100,
            classes: 1,
        };
        assert_eq!(enc.dim(), 1);
        let c = enc.decode(&[2.9f64.ln()]);
        assert_eq!(c.slot_counts, vec![100]);
        assert!((c.mean_degrees[0] - 2.9).abs() < 1e-12);
    }

    #[test]
    fn composition_round_trip() {
        let enc = Encoding {
            users: 50,
            slots: 100,
            classes: 2,
        };
        let c = Candidate::new(vec![88, 12], vec![2.4, 12.94]);
        let back = enc.decode(&enc.encode(&c));
        assert_eq!(back.slot_counts, vec![88, 12]);
        for (a, b) in back.mean_degrees.iter().zip(&c.mean_degrees) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_classes_round_trip() {
        let enc = Encoding {
            users: 50,
            slots: 100,
            classes: 3,
        };
        for counts in [[0, 100, 0], [100, 0, 0], [0, 0, 100], [99, 0, 1]] {
            let c = Candidate::new(counts.to_vec(), vec![1.0, 2.0, 3.0]);
            assert_eq!(enc.decode(&enc.encode(&c)).slot_counts, counts.to_vec());
        }
    }

    #[test]
    fn decoded_degrees_are_capped() {
        let enc = Encoding {
            users: 50,
            slots: 10,
            classes: 2,
        };
        let c = enc.decode(&[10.0, -50.0, 0.0]);
        assert_eq!(c.mean_degrees[0], 50.0);
        assert!(c.mean_degrees[1] > 0.0);
        assert_eq!(c.slot_counts.iter().sum::<usize>(), 10);
    }

    #[test]
    fn largest_remainder_ties_go_low() {
        assert_eq!(largest_remainder(&[1.0, 1.0, 1.0], 4), vec![2, 1, 1]);
        assert_eq!(largest_remainder(&[1.0, 1.0], 0), vec![0, 0]);
    }

    #[test]
    fn problem_validation() {
        let mut p = OptimizationProblem::new(50, 100, 1, 51);
        assert!(matches!(p.validate(), Err(Error::TargetOutOfRange { .. })));
        p.target = 0;
        assert!(p.validate().is_err());
        p.target = 50;
        p.starts = 0;
        assert!(p.validate().is_err());
        p.starts = 1;
        assert!(p.validate().is_ok());
        assert!(optimize_from(&p, &Candidate::new(vec![99], vec![3.0])).is_err());
    }

    #[test]
    fn start_points_are_seeded() {
        let p = OptimizationProblem::new(50, 100, 3, 48);
        assert_eq!(p.start_point(2), p.start_point(2));
        assert_ne!(p.start_point(1), p.start_point(2));
        let c = p.encoding().decode(&p.start_point(0));
        assert_eq!(c.slot_counts.iter().sum::<usize>(), 100);
        assert!(c
            .mean_degrees
            .iter()
            .all(|&b| (1.0..=25.0 + 1e-9).contains(&b)));
    }
}
