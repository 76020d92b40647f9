//! Monte Carlo contention periods and the SIC peeling decoder.
//!
//! Every trial draws its randomness from a ChaCha8 stream selected by
//! `(master seed, trial index)`: the generator is seeded with the master seed
//! through `seed_from_u64` and the trial index picks the 64-bit stream. Trials
//! are therefore reproducible one by one regardless of how they are scheduled
//! across workers.

mod decoder;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

pub use decoder::{PeelingDecoder, StepRecord};

use crate::error::{Error, Result};
use crate::model::SystemConfig;

/// RNG stream of one trial.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Identifies the random stream of one contention period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialSeed {
    pub master: u64,
    pub trial: u64,
}

impl TrialSeed {
    pub fn rng(&self) -> ChaCha8Rng {
        trial_rng(self.master, self.trial)
    }
}

/// Which users transmitted in which slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationMatrix {
    pub users: usize,
    /// Transmitting users of each slot, in slot order.
    pub slots: Vec<Vec<u32>>,
    /// Class index of each slot.
    pub slot_class: Vec<usize>,
}

impl ActivationMatrix {
    pub fn new(users: usize, slots: Vec<Vec<u32>>, slot_class: Vec<usize>) -> Self {
        assert_eq!(slots.len(), slot_class.len());
        ActivationMatrix {
            users,
            slots,
            slot_class,
        }
    }

    /// Single-class matrix.
    pub fn from_slots(users: usize, slots: Vec<Vec<u32>>) -> Self {
        let classes = vec![0; slots.len()];
        Self::new(users, slots, classes)
    }

    pub fn num_classes(&self) -> usize {
        self.slot_class.iter().max().map_or(1, |&h| h + 1)
    }

    pub fn is_active(&self, user: usize, slot: usize) -> bool {
        self.slots[slot].contains(&(user as u32))
    }
}

/// Draws the set of transmitting users of one slot: each of `candidates`
/// independently with probability `p`.
///
/// The count is drawn from the binomial and the members uniformly without
/// replacement, which is the same law as one Bernoulli draw per user.
fn draw_slot<R: Rng + ?Sized>(rng: &mut R, candidates: &[u32], p: f64) -> Vec<u32> {
    let n = candidates.len();
    if n == 0 || p <= 0.0 {
        return Vec::new();
    }
    if p >= 1.0 {
        return candidates.to_vec();
    }
    let count = Binomial::new(n as u64, p).expect("p in (0, 1)").sample(rng) as usize;
    let mut chosen: Vec<u32> = index::sample(rng, n, count)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    chosen.sort_unstable();
    chosen
}

/// Draws a contention period; slots are laid out class by class.
pub fn generate_with<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> ActivationMatrix {
    let n = config.users();
    let everyone: Vec<u32> = (0..n as u32).collect();
    let mut slots = Vec::with_capacity(config.total_slots());
    let mut slot_class = Vec::with_capacity(config.total_slots());
    for (h, class) in config.classes().iter().enumerate() {
        let p = class.access_probability(n);
        for _ in 0..class.slot_count {
            slots.push(draw_slot(rng, &everyone, p));
            slot_class.push(h);
        }
    }
    ActivationMatrix::new(n, slots, slot_class)
}

pub fn generate_trial(config: &SystemConfig, seed: TrialSeed) -> ActivationMatrix {
    generate_with(config, &mut seed.rng())
}

fn decoder_for(matrix: &ActivationMatrix) -> PeelingDecoder {
    let mut dec = PeelingDecoder::new(matrix.users, matrix.num_classes());
    for (users, &h) in matrix.slots.iter().zip(&matrix.slot_class) {
        dec.add_slot(h, users);
    }
    dec
}

/// Resolved users (ascending) after peeling the whole matrix.
pub fn peel(matrix: &ActivationMatrix) -> Vec<usize> {
    let mut dec = decoder_for(matrix);
    dec.peel();
    dec.resolved_users()
}

/// Order in which ripple slots are decoded. The resolved set does not depend
/// on it; the choice only matters for tracing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PickOrder {
    Lowest,
    Highest,
    Random(u64),
}

pub fn peel_ordered(matrix: &ActivationMatrix, order: PickOrder) -> Vec<usize> {
    let mut dec = decoder_for(matrix);
    match order {
        PickOrder::Lowest => dec.peel_with(|r| argext(r, |a, b| a < b), |_| {}),
        PickOrder::Highest => dec.peel_with(|r| argext(r, |a, b| a > b), |_| {}),
        PickOrder::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            dec.peel_with(|r| rng.random_range(0..r.len()), |_| {})
        }
    };
    dec.resolved_users()
}

fn argext(ripple: &[u32], better: impl Fn(u32, u32) -> bool) -> usize {
    let mut best = 0;
    for (i, &s) in ripple.iter().enumerate() {
        if better(s, ripple[best]) {
            best = i;
        }
    }
    best
}

/// Peels a matrix choosing ripple slots uniformly at random, the way the
/// analytical receiver model does, and reports every step.
pub fn peel_traced<R: Rng + ?Sized>(
    matrix: &ActivationMatrix,
    rng: &mut R,
    observe: impl FnMut(&StepRecord),
) -> usize {
    let mut dec = decoder_for(matrix);
    dec.peel_with(|r| rng.random_range(0..r.len()), observe);
    dec.resolved_count()
}

/// Result of one simulated contention period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialOutcome {
    pub resolved_count: usize,
    /// Users resolved after each slot prefix (entry `l` covers the first
    /// `l + 1` slots), when requested.
    pub resolution_slot_trace: Option<Vec<usize>>,
    pub seed: TrialSeed,
}

impl TrialOutcome {
    pub fn unresolved(&self, users: usize) -> usize {
        users - self.resolved_count
    }
}

/// Simulates one period. With `trace`, the decoder runs after every slot so
/// the per-prefix resolved counts are available.
pub fn run_trial(config: &SystemConfig, seed: TrialSeed, trace: bool) -> TrialOutcome {
    let matrix = generate_trial(config, seed);
    let mut dec = PeelingDecoder::new(matrix.users, config.num_classes());
    let mut prefix = trace.then(|| Vec::with_capacity(matrix.slots.len()));
    for (users, &h) in matrix.slots.iter().zip(&matrix.slot_class) {
        dec.add_slot(h, users);
        if let Some(p) = prefix.as_mut() {
            dec.peel();
            p.push(dec.resolved_count());
        }
    }
    dec.peel();
    TrialOutcome {
        resolved_count: dec.resolved_count(),
        resolution_slot_trace: prefix,
        seed,
    }
}

/// Histogram of the number of unresolved users over many trials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmpiricalPmf {
    pub users: usize,
    pub trials: u64,
    /// `counts[u]`: trials that ended with exactly `u` unresolved users.
    pub counts: Vec<u64>,
}

impl EmpiricalPmf {
    pub fn new(users: usize) -> Self {
        EmpiricalPmf {
            users,
            trials: 0,
            counts: vec![0; users + 1],
        }
    }

    pub fn record(&mut self, unresolved: usize) {
        self.counts[unresolved] += 1;
        self.trials += 1;
    }

    pub fn merge(mut self, other: &EmpiricalPmf) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.trials += other.trials;
        self
    }

    pub fn pmf(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.trials as f64)
            .collect()
    }

    pub fn probability(&self, u: usize) -> f64 {
        self.counts[u] as f64 / self.trials as f64
    }

    /// Binomial standard error of the estimate of `P_u`.
    pub fn std_error(&self, u: usize) -> f64 {
        let p = self.probability(u);
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Wilson score interval for `P_u` at `z` standard deviations.
    pub fn interval(&self, u: usize, z: f64) -> (f64, f64) {
        wilson_interval(self.counts[u], self.trials, z)
    }

    /// Empirical probability that at least `t` users were resolved.
    pub fn reliability(&self, t: usize) -> f64 {
        if t > self.users {
            return 0.0;
        }
        let hits: u64 = self.counts[..=self.users - t].iter().sum();
        hits as f64 / self.trials as f64
    }

    /// Fraction of trials in which at least one user stayed unresolved.
    pub fn failure_rate(&self) -> f64 {
        1.0 - self.probability(0)
    }
}

/// Wilson score interval for a binomial proportion `hits / trials`.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let nt = trials as f64;
    let p = hits as f64 / nt;
    let z2 = z * z;
    let denom = 1.0 + z2 / nt;
    let center = (p + z2 / (2.0 * nt)) / denom;
    let half = z * (p * (1.0 - p) / nt + z2 / (4.0 * nt * nt)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Trials run per work unit; fixed so results do not depend on `jobs`.
const TRIAL_BLOCK: u64 = 1024;

fn aggregate<F>(users: usize, trials: u64, jobs: usize, one: F) -> EmpiricalPmf
where
    F: Fn(u64) -> usize + Sync,
{
    let block = |start: u64| {
        let mut h = EmpiricalPmf::new(users);
        for i in start..(start + TRIAL_BLOCK).min(trials) {
            h.record(one(i));
        }
        h
    };
    let starts: Vec<u64> = (0..trials).step_by(TRIAL_BLOCK as usize).collect();
    if jobs > 1 {
        starts
            .par_iter()
            .map(|&s| block(s))
            .reduce(|| EmpiricalPmf::new(users), |a, b| a.merge(&b))
    } else {
        starts
            .iter()
            .fold(EmpiricalPmf::new(users), |acc, &s| acc.merge(&block(s)))
    }
}

/// Simulates `trials` independent periods and histograms the unresolved counts.
pub fn run_trials(
    config: &SystemConfig,
    trials: u64,
    seed: u64,
    jobs: usize,
) -> Result<EmpiricalPmf> {
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "must be at least 1".into(),
        });
    }
    let n = config.users();
    Ok(aggregate(n, trials, jobs, |i| {
        let matrix = generate_trial(
            config,
            TrialSeed {
                master: seed,
                trial: i,
            },
        );
        let mut dec = decoder_for(&matrix);
        dec.peel();
        dec.unresolved_count()
    }))
}

/// Mean degree for the next slot under the adaptive rule
/// `beta = (n/u) (1 + (beta* - 1) (m - (n - u) - c_u) / m)`, clamped to `[0, n]`.
pub fn adaptive_beta(
    users: usize,
    unresolved: usize,
    slots: usize,
    cloud: usize,
    beta_star: f64,
) -> f64 {
    let n = users as f64;
    let u = unresolved.max(1) as f64;
    let m = slots as f64;
    let spare = m - (n - u) - cloud as f64;
    let beta = n / u * (1.0 + (beta_star - 1.0) * spare / m);
    beta.clamp(0.0, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMode {
    /// Every slot uses `beta_star`.
    Static,
    /// Recompute the mean degree before every slot with [`adaptive_beta`].
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptivePolicy {
    pub beta_star: f64,
    pub mode: PolicyMode,
}

impl AdaptivePolicy {
    pub fn adaptive(beta_star: f64) -> Self {
        AdaptivePolicy {
            beta_star,
            mode: PolicyMode::Adaptive,
        }
    }

    pub fn fixed(beta_star: f64) -> Self {
        AdaptivePolicy {
            beta_star,
            mode: PolicyMode::Static,
        }
    }
}

/// One single-class period of `slots` slots under `policy`, decoding after
/// every slot. Returns the number of users left unresolved.
///
/// Users already resolved would only add replicas that are cancelled on
/// arrival, so only the unresolved ones are drawn.
pub fn adaptive_trial<R: Rng + ?Sized>(
    users: usize,
    slots: usize,
    policy: AdaptivePolicy,
    rng: &mut R,
) -> usize {
    let mut dec = PeelingDecoder::new(users, 1);
    for _ in 0..slots {
        let u = dec.unresolved_count();
        if u == 0 {
            break;
        }
        let beta = match policy.mode {
            PolicyMode::Static => policy.beta_star.clamp(0.0, users as f64),
            PolicyMode::Adaptive => {
                adaptive_beta(users, u, slots, dec.cloud_size(), policy.beta_star)
            }
        };
        let active = draw_slot(rng, dec.unresolved_users(), beta / users as f64);
        dec.add_slot(0, &active);
        dec.peel();
    }
    dec.unresolved_count()
}

/// Monte Carlo of the adaptive (or static) single-class scheme.
pub fn run_adaptive(
    users: usize,
    slots: usize,
    policy: AdaptivePolicy,
    trials: u64,
    seed: u64,
    jobs: usize,
) -> Result<EmpiricalPmf> {
    if users == 0 {
        return Err(Error::NoUsers);
    }
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "must be at least 1".into(),
        });
    }
    if policy.beta_star.is_nan() || policy.beta_star <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "beta*",
            reason: format!("{} is not positive", policy.beta_star),
        });
    }
    Ok(aggregate(users, trials, jobs, |i| {
        adaptive_trial(users, slots, policy, &mut trial_rng(seed, i))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SlotClass;

    #[test]
    fn zero_and_full_access() {
        let config =
            SystemConfig::new(4, vec![SlotClass::new(3, 0.0), SlotClass::new(2, 4.0)]).unwrap();
        let m = generate_trial(
            &config,
            TrialSeed {
                master: 1,
                trial: 0,
            },
        );
        assert!(m.slots[..3].iter().all(|s| s.is_empty()));
        assert!(m.slots[3..].iter().all(|s| s == &[0, 1, 2, 3]));
        assert_eq!(m.slot_class, vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn figure_one_instance() {
        // Users 1..3 mapped to 0..2.
        let m = ActivationMatrix::from_slots(3, vec![vec![0, 1], vec![0, 2], vec![], vec![1]]);
        assert_eq!(peel(&m), vec![0, 1, 2]);
    }

    #[test]
    fn stuck_collision() {
        let m = ActivationMatrix::from_slots(2, vec![vec![0, 1]]);
        assert!(peel(&m).is_empty());
    }

    #[test]
    fn adaptive_beta_anchors() {
        let (n, m) = (50, 100);
        assert!((adaptive_beta(n, n, m, 0, 2.47) - 2.47).abs() < 1e-12);
        for u in 1..=n {
            let c = m - (n - u);
            assert!(
                (adaptive_beta(n, u, m, c, 2.47) - (n as f64 / u as f64).min(n as f64)).abs()
                    < 1e-12
            );
            // beta* = 1 collapses to n/u whatever the cloud holds.
            assert!((adaptive_beta(n, u, m, 7.min(c), 1.0) - n as f64 / u as f64).abs() < 1e-12);
        }
        // u = 40, c = 20: 1.25 * (1 + 1.47 * 70 / 100)
        let v = adaptive_beta(n, 40, m, 20, 2.47);
        assert!((v - 1.25 * (1.0 + 1.47 * 0.7)).abs() < 1e-12);
        assert!(v > 1.25 && v < 1.25 * 2.47);
        // Clamped to n for tiny u.
        assert_eq!(adaptive_beta(n, 1, m, 0, 2.47), 50.0);
    }

    #[test]
    fn zero_slot_adaptive_resolves_nobody() {
        let h = run_adaptive(10, 0, AdaptivePolicy::adaptive(2.47), 50, 3, 1).unwrap();
        assert_eq!(h.counts[10], 50);
    }

    #[test]
    fn trial_counts_validated() {
        let config = SystemConfig::single(3, 3, 1.0).unwrap();
        assert!(run_trials(&config, 0, 1, 1).is_err());
        assert!(run_adaptive(3, 3, AdaptivePolicy::adaptive(0.0), 10, 1, 1).is_err());
    }

    #[test]
    fn single_trial_without_access() {
        let config = SystemConfig::single(6, 9, 0.0).unwrap();
        let h = run_trials(&config, 1, 42, 1).unwrap();
        assert_eq!(h.counts[6], 1);
        assert_eq!(h.trials, 1);
    }

    #[test]
    fn trace_ends_at_final_count() {
        let config =
            SystemConfig::new(20, vec![SlotClass::new(20, 2.5), SlotClass::new(5, 8.0)]).unwrap();
        for trial in 0..20 {
            let seed = TrialSeed { master: 9, trial };
            let out = run_trial(&config, seed, true);
            let trace = out.resolution_slot_trace.as_ref().unwrap();
            assert_eq!(trace.len(), 25);
            assert!(trace.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(*trace.last().unwrap(), out.resolved_count);
            assert_eq!(
                out.resolved_count,
                peel(&generate_trial(&config, seed)).len()
            );
        }
    }

    #[test]
    fn wilson_handles_zero_hits() {
        let (lo, hi) = wilson_interval(0, 100_000, 3.0);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 1e-3);
    }

    #[test]
    fn jobs_do_not_change_histograms() {
        let config = SystemConfig::single(20, 25, 2.6).unwrap();
        let a = run_trials(&config, 5000, 11, 1).unwrap();
        let b = run_trials(&config, 5000, 11, 4).unwrap();
        assert_eq!(a, b);
    }
}
