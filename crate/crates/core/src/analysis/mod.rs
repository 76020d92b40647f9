//! Exact finite-length analysis of the SIC peeling receiver.
//!
//! The receiver is tracked as a Markov chain over the cardinalities of the
//! per-class clouds and of the ripple, indexed by the number `u` of users
//! still unresolved. Starting from the joint trinomial distribution of the
//! initial state, each stage resolves one user: one ripple slot is consumed,
//! every other ripple slot leaves with probability `1/u`, and every slot of
//! cloud `h` drops into the ripple with probability `q_u^(h)`. Mass sitting on
//! an empty ripple at stage `u` is the probability that exactly `u` users stay
//! unresolved.

mod state;

use rayon::prelude::*;
use serde::Serialize;

pub use state::{DecoderState, StatePmf};
pub(crate) use state::{StateLayout, StateMap};

use crate::error::{Error, Result};
use crate::model::{hypergeometric, ln_pow, DegreeSpectrum, LnFactorials, SlotClass, SystemConfig};

/// Default pruning threshold for state probabilities.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-15;

/// Single transition contributions below `prune_threshold` times this are
/// never materialized.
const CONTRIBUTION_CUT: f64 = 1e-3;

/// Below this many live states a transition is never split across workers.
const PARALLEL_MIN_STATES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisOptions {
    /// States whose probability falls below this are dropped and their mass
    /// is added to the leaked total. Zero disables pruning.
    pub prune_threshold: f64,
    /// Number of chunks a transition is split into. `1` runs single-threaded
    /// and is the reference mode; other values are deterministic per value.
    pub jobs: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
            jobs: 1,
        }
    }
}

impl AnalysisOptions {
    pub fn with_prune(prune_threshold: f64) -> Self {
        AnalysisOptions {
            prune_threshold,
            ..Default::default()
        }
    }

    /// No pruning at all.
    pub fn exact() -> Self {
        Self::with_prune(0.0)
    }
}

/// Distribution of the number of ripple slots that leave when one user is
/// resolved, indexed by `a - 1` for `a = 1..=r`.
///
/// The selected slot always leaves; each of the other `r - 1` ripple slots
/// holds the same user with probability `1/u`.
pub fn ripple_departure_pmf(ripple: usize, unresolved: usize) -> Result<Vec<f64>> {
    if ripple == 0 || unresolved == 0 {
        return Err(Error::InvalidParameter {
            name: "ripple departure",
            reason: format!("needs r >= 1 and u >= 1, got r={ripple}, u={unresolved}"),
        });
    }
    Ok(LnFactorials::new(ripple).binomial_pmf(ripple - 1, 1.0 / unresolved as f64))
}

/// Probability that a cloud slot enters the ripple when one user is resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudExit {
    /// `q_u^(h)`, clamped to `[0, 1]`.
    pub q: f64,
    /// False when no slot of this class can have reduced degree >= 2 at this
    /// stage; `q` is then reported as zero.
    pub cloud_possible: bool,
}

/// Probability that a slot contains the user being resolved plus exactly one
/// other unresolved user (and otherwise only resolved users).
pub fn cloud_exit_numerator(n: usize, u: usize, spectrum: &DegreeSpectrum) -> f64 {
    if u == 0 {
        return 0.0;
    }
    (2..=n)
        .map(|d| {
            let w = spectrum.get(d);
            if w == 0.0 {
                return 0.0;
            }
            // Slot holds the resolved user (d/n), and of its d - 1 other
            // users, one is among the u - 1 unresolved and d - 2 among the
            // n - u resolved.
            let given = (crate::model::log_choose(u - 1, 1)
                + crate::model::log_choose(n - u, d - 2)
                - crate::model::log_choose(n - 1, d - 1))
            .exp();
            w * d as f64 / n as f64 * given
        })
        .sum()
}

/// Same quantity as [`cloud_exit_numerator`]: reduced degree exactly two,
/// times the chance `2/u` that the resolved user is one of the pair.
pub fn cloud_exit_numerator_alt(n: usize, u: usize, spectrum: &DegreeSpectrum) -> f64 {
    if u == 0 {
        return 0.0;
    }
    (2..=n)
        .map(|d| spectrum.get(d) * 2.0 / u as f64 * hypergeometric(n, u, d, 2))
        .sum()
}

/// Probability that a slot has reduced degree >= 2 with `u` users unresolved,
/// `1 - sum_{j<=1} sum_d Omega_d C(u,j) C(n-u,d-j) / C(n,d)`.
///
/// Degrees below two contribute exactly nothing, so the complement is taken
/// per degree to keep rounding noise out of an impossible cloud.
pub fn cloud_membership_prob(n: usize, u: usize, spectrum: &DegreeSpectrum) -> f64 {
    if u < 2 {
        return 0.0;
    }
    (2..=n)
        .map(|d| {
            let w = spectrum.get(d);
            if w == 0.0 {
                return 0.0;
            }
            let low = hypergeometric(n, u, d, 0) + hypergeometric(n, u, d, 1);
            w * (1.0 - low).max(0.0)
        })
        .sum()
}

/// `q_u^(h)`: probability that a given slot of the `h`-th cloud drops to the
/// ripple during the resolution of one user at stage `u`.
pub fn cloud_exit_prob(n: usize, u: usize, spectrum: &DegreeSpectrum) -> Result<CloudExit> {
    if u == 0 || u > n || spectrum.users() != n {
        return Err(Error::InvalidParameter {
            name: "cloud exit stage",
            reason: format!("needs 1 <= u <= n with a spectrum over 0..={n}, got u={u}"),
        });
    }
    let den = cloud_membership_prob(n, u, spectrum);
    if den <= 0.0 {
        return Ok(CloudExit {
            q: 0.0,
            cloud_possible: false,
        });
    }
    let q = (cloud_exit_numerator(n, u, spectrum) / den).clamp(0.0, 1.0);
    Ok(CloudExit {
        q,
        cloud_possible: true,
    })
}

/// Precomputed per-configuration data for running the chain.
pub(crate) struct Engine<'a> {
    config: &'a SystemConfig,
    spectra: Vec<DegreeSpectrum>,
    lnf: LnFactorials,
    layout: StateLayout,
    options: AnalysisOptions,
}

impl<'a> Engine<'a> {
    pub fn new(config: &'a SystemConfig, options: AnalysisOptions) -> Result<Self> {
        if options.prune_threshold.is_nan() || options.prune_threshold < 0.0 {
            return Err(Error::InvalidParameter {
                name: "prune threshold",
                reason: format!("{} is negative", options.prune_threshold),
            });
        }
        Ok(Engine {
            config,
            spectra: config.spectra(),
            lnf: LnFactorials::new(config.total_slots().max(config.users())),
            layout: StateLayout::new(config)?,
            options,
        })
    }

    fn prune(&self, map: StateMap, stage: usize, mut leaked: f64) -> StatePmf {
        let threshold = self.options.prune_threshold;
        let mut entries = Vec::with_capacity(map.len());
        for (k, p) in map {
            if p > 0.0 && p >= threshold {
                entries.push((k, p));
            } else {
                leaked += p;
            }
        }
        StatePmf {
            stage,
            layout: self.layout.clone(),
            entries,
            leaked_mass: leaked,
        }
    }

    /// Applies `f` to every source entry, accumulating into a fresh map.
    fn fan_out<F>(&self, entries: &[(u64, f64)], f: F) -> StateMap
    where
        F: Fn(u64, f64, &mut StateMap) + Sync,
    {
        let jobs = self.options.jobs.max(1);
        if jobs == 1 || entries.len() < PARALLEL_MIN_STATES {
            let mut out = StateMap::with_capacity_and_hasher(entries.len() * 2, Default::default());
            for &(k, p) in entries {
                f(k, p, &mut out);
            }
            return out;
        }
        let chunk = entries.len().div_ceil(jobs);
        let parts: Vec<StateMap> = entries
            .par_chunks(chunk)
            .map(|part| {
                let mut out =
                    StateMap::with_capacity_and_hasher(part.len() * 2, Default::default());
                for &(k, p) in part {
                    f(k, p, &mut out);
                }
                out
            })
            .collect();
        let mut parts = parts.into_iter();
        let mut merged = parts.next().unwrap_or_default();
        for part in parts {
            for (k, p) in part {
                *merged.entry(k).or_insert(0.0) += p;
            }
        }
        merged
    }

    pub fn initial(&self) -> StatePmf {
        let mut acc: Vec<(u64, f64)> = vec![(0, 1.0)];
        for (h, (class, spectrum)) in self.config.classes().iter().zip(&self.spectra).enumerate() {
            if class.slot_count == 0 {
                continue;
            }
            let trinomial = self.trinomial(class, spectrum);
            let shift = self.layout.shifts[h];
            let map = self.fan_out(&acc, |key, p, out| {
                for &(c, r, w) in &trinomial {
                    *out.entry(key + ((c as u64) << shift) + r as u64)
                        .or_insert(0.0) += p * w;
                }
            });
            acc = map.into_iter().collect();
        }
        self.prune(acc.into_iter().collect(), self.config.users(), 0.0)
    }

    /// Joint pmf of (cloud, ripple) counts over the slots of one class.
    fn trinomial(&self, class: &SlotClass, spectrum: &DegreeSpectrum) -> Vec<(usize, usize, f64)> {
        let m = class.slot_count;
        let p0 = spectrum.get(0);
        let p1 = spectrum.get(1);
        let pc: f64 = spectrum.probs().iter().skip(2).sum();
        let lnf = &self.lnf;
        let mut out = Vec::new();
        for c in 0..=m {
            for r in 0..=m - c {
                let z = m - c - r;
                let lw = lnf.ln_choose(m, c)
                    + lnf.ln_choose(m - c, r)
                    + ln_pow(pc, c)
                    + ln_pow(p1, r)
                    + ln_pow(p0, z);
                let w = lw.exp();
                if w > 0.0 {
                    out.push((c, r, w));
                }
            }
        }
        out
    }

    /// One resolution step from stage `u` to `u - 1`.
    pub fn step(&self, pmf: &StatePmf) -> (StatePmf, f64) {
        let u = pmf.stage;
        debug_assert!(u >= 1);
        let layout = &self.layout;
        let n = self.config.users();

        let mut terminal = 0.0;
        let mut live = Vec::with_capacity(pmf.entries.len());
        let mut max_ripple = 0;
        for &(k, p) in &pmf.entries {
            let r = layout.ripple(k);
            if r == 0 {
                terminal += p;
            } else {
                max_ripple = max_ripple.max(r);
                live.push((k, p));
            }
        }
        if live.is_empty() {
            let next = StatePmf {
                stage: u - 1,
                layout: layout.clone(),
                entries: Vec::new(),
                leaked_mass: pmf.leaked_mass,
            };
            return (next, terminal);
        }

        let leave = 1.0 / u as f64;
        let ripple_tables: Vec<Vec<f64>> = (0..=max_ripple)
            .map(|r| {
                if r == 0 {
                    Vec::new()
                } else {
                    self.lnf.binomial_pmf(r - 1, leave)
                }
            })
            .collect();
        // Contributions this small are dropped before aggregation; the
        // resulting mass deficit is booked as leaked below.
        let cut = self.options.prune_threshold * CONTRIBUTION_CUT;
        let in_mass: f64 = live.iter().map(|&(_, p)| p).sum();
        let map = self.fan_out(&live, |key, p, out| {
            let table = &ripple_tables[layout.ripple(key)];
            for (i, &w) in table.iter().enumerate() {
                if w > 0.0 && p * w >= cut {
                    *out.entry(key - (i as u64 + 1)).or_insert(0.0) += p * w;
                }
            }
        });
        let mut current: Vec<(u64, f64)> = map.into_iter().collect();

        for (h, (class, spectrum)) in self.config.classes().iter().zip(&self.spectra).enumerate() {
            if class.slot_count == 0 {
                continue;
            }
            let exit = cloud_exit_prob(n, u, spectrum).expect("stage within 1..=n");
            if exit.q == 0.0 {
                continue;
            }
            let shift = layout.shifts[h];
            let max_cloud = current
                .iter()
                .map(|&(k, _)| layout.cloud(k, h))
                .max()
                .unwrap_or(0);
            if max_cloud == 0 {
                continue;
            }
            let tables: Vec<Vec<f64>> = (0..=max_cloud)
                .map(|c| self.lnf.binomial_pmf(c, exit.q))
                .collect();
            let map = self.fan_out(&current, |key, p, out| {
                let table = &tables[layout.cloud(key, h)];
                for (b, &w) in table.iter().enumerate() {
                    if w > 0.0 && p * w >= cut {
                        let b = b as u64;
                        *out.entry(key - (b << shift) + b).or_insert(0.0) += p * w;
                    }
                }
            });
            current = map.into_iter().collect();
        }

        let out_mass: f64 = current.iter().map(|&(_, p)| p).sum();
        let dropped = if cut > 0.0 {
            (in_mass - out_mass).max(0.0)
        } else {
            0.0
        };
        let next = self.prune(
            current.into_iter().collect(),
            u - 1,
            pmf.leaked_mass + dropped,
        );
        (next, terminal)
    }

    pub fn run(&self) -> ReliabilityProfile {
        let n = self.config.users();
        let mut pmf = vec![0.0; n + 1];
        let mut state = self.initial();
        while state.stage > 0 {
            let (next, terminal) = self.step(&state);
            pmf[state.stage] = terminal;
            state = next;
        }
        pmf[0] = state.total_mass();
        ReliabilityProfile::new(self.config.clone(), pmf, state.leaked_mass)
    }
}

/// Joint distribution of the cloud and ripple cardinalities before any user
/// is resolved (`u = n`).
pub fn initial_state_pmf(config: &SystemConfig, options: AnalysisOptions) -> Result<StatePmf> {
    Ok(Engine::new(config, options)?.initial())
}

/// Advances a state pmf by one resolved user.
///
/// Returns the pmf at stage `u - 1` and the mass that terminated at stage `u`
/// because its ripple was empty.
pub fn transition(
    pmf: &StatePmf,
    config: &SystemConfig,
    options: AnalysisOptions,
) -> Result<(StatePmf, f64)> {
    if pmf.stage == 0 || pmf.stage > config.users() {
        return Err(Error::InvalidParameter {
            name: "stage",
            reason: format!(
                "transition needs 1 <= u <= {}, got {}",
                config.users(),
                pmf.stage
            ),
        });
    }
    let engine = Engine::new(config, options)?;
    if engine.layout != pmf.layout {
        return Err(Error::InvalidParameter {
            name: "state pmf",
            reason: "built for a different configuration".into(),
        });
    }
    Ok(engine.step(pmf))
}

/// Unresolved-user pmf and the reliability metrics derived from it.
#[derive(Debug, Clone, Serialize)]
pub struct ReliabilityProfile {
    pub config: SystemConfig,
    /// `pmf[u]`: probability that exactly `u` users stay unresolved.
    pub pmf: Vec<f64>,
    /// `reliability[t]`: probability that at least `t` users are resolved.
    pub reliability: Vec<f64>,
    /// Probability that a given user is not resolved.
    pub expected_per: f64,
    /// Resolved users per slot; `None` when the period has no slots.
    pub throughput: Option<f64>,
    /// Probability mass dropped by pruning.
    pub leaked_mass: f64,
}

impl ReliabilityProfile {
    pub fn new(config: SystemConfig, pmf: Vec<f64>, leaked_mass: f64) -> Self {
        let n = config.users();
        let mut reliability = vec![0.0; n + 1];
        let mut cdf = 0.0;
        for (u, p) in pmf.iter().enumerate() {
            cdf += p;
            reliability[n - u] = cdf;
        }
        let expected_per = pmf
            .iter()
            .enumerate()
            .map(|(u, p)| u as f64 / n as f64 * p)
            .sum::<f64>();
        let m = config.total_slots();
        let throughput = (m > 0).then(|| n as f64 * (1.0 - expected_per) / m as f64);
        ReliabilityProfile {
            config,
            pmf,
            reliability,
            expected_per,
            throughput,
            leaked_mass,
        }
    }

    pub fn users(&self) -> usize {
        self.config.users()
    }

    /// `F_t`; zero for `t > n`.
    pub fn f_t(&self, t: usize) -> f64 {
        self.reliability.get(t).copied().unwrap_or(0.0)
    }

    /// Mean number of resolved users, `n (1 - P)`.
    pub fn mean_resolved(&self) -> f64 {
        self.users() as f64 * (1.0 - self.expected_per)
    }
}

/// Runs the chain to completion and returns the unresolved-user pmf.
pub fn unresolved_pmf(
    config: &SystemConfig,
    options: AnalysisOptions,
) -> Result<ReliabilityProfile> {
    Ok(Engine::new(config, options)?.run())
}

/// All slots of class 0 first, then class 1, and so on.
pub fn batched_order(config: &SystemConfig) -> Vec<usize> {
    config
        .classes()
        .iter()
        .enumerate()
        .flat_map(|(h, c)| std::iter::repeat_n(h, c.slot_count))
        .collect()
}

/// Mean number of resolved users after each slot prefix.
///
/// Entry `l` is `n (1 - P)` for the configuration formed by the first `l`
/// slots of `slot_order`; entry 0 is zero.
pub fn intermediate_profile(
    config: &SystemConfig,
    slot_order: &[usize],
    options: AnalysisOptions,
) -> Result<Vec<f64>> {
    let k = config.num_classes();
    let mut counts = vec![0usize; k];
    for &h in slot_order {
        if h >= k {
            return Err(Error::SlotOrder(format!(
                "class index {h} but only {k} classes"
            )));
        }
        counts[h] += 1;
    }
    for (h, (have, class)) in counts.iter().zip(config.classes()).enumerate() {
        if *have != class.slot_count {
            return Err(Error::SlotOrder(format!(
                "class {h} appears {have} times, expected {}",
                class.slot_count
            )));
        }
    }

    let mut prefixes = Vec::with_capacity(slot_order.len());
    let mut running = vec![0usize; k];
    for &h in slot_order {
        running[h] += 1;
        prefixes.push(running.clone());
    }

    let inner = AnalysisOptions { jobs: 1, ..options };
    let eval = |counts: &Vec<usize>| -> Result<f64> {
        let sub = config.with_slot_counts(counts)?;
        Ok(unresolved_pmf(&sub, inner)?.mean_resolved())
    };
    let values: Result<Vec<f64>> = if options.jobs > 1 {
        prefixes.par_iter().map(eval).collect()
    } else {
        prefixes.iter().map(eval).collect()
    };
    let mut out = Vec::with_capacity(slot_order.len() + 1);
    out.push(0.0);
    out.extend(values?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ripple_departure_examples() {
        assert_eq!(ripple_departure_pmf(1, 7).unwrap(), vec![1.0]);
        let p = ripple_departure_pmf(3, 2).unwrap();
        assert!(p
            .iter()
            .zip([0.25, 0.5, 0.25])
            .all(|(a, b)| close(*a, b, 1e-15)));
        assert!(ripple_departure_pmf(0, 3).is_err());
        assert!(ripple_departure_pmf(2, 0).is_err());
    }

    #[test]
    fn cloud_exit_all_degree_two() {
        let n = 6;
        let mut probs = vec![0.0; n + 1];
        probs[2] = 1.0;
        let s = DegreeSpectrum::from_probs(probs).unwrap();
        let e = cloud_exit_prob(n, n, &s).unwrap();
        assert!(e.cloud_possible);
        assert!(close(e.q, 2.0 / n as f64, 1e-15));
    }

    #[test]
    fn cloud_exit_without_cloud() {
        let s = DegreeSpectrum::from_probs(vec![0.3, 0.7, 0.0, 0.0]).unwrap();
        let e = cloud_exit_prob(3, 2, &s).unwrap();
        assert_eq!(
            e,
            CloudExit {
                q: 0.0,
                cloud_possible: false
            }
        );
        // With a single unresolved user no slot can be in the cloud.
        let s = crate::model::slot_degree_pmf(5, 2.0).unwrap();
        assert!(!cloud_exit_prob(5, 1, &s).unwrap().cloud_possible);
    }

    #[test]
    fn cloud_exit_rejects_bad_stage() {
        let s = crate::model::slot_degree_pmf(5, 2.0).unwrap();
        assert!(cloud_exit_prob(5, 0, &s).is_err());
        assert!(cloud_exit_prob(5, 6, &s).is_err());
        assert!(cloud_exit_prob(4, 2, &s).is_err());
    }

    #[test]
    fn initial_single_user_single_slot() {
        let config = SystemConfig::single(1, 1, 0.5).unwrap();
        let pmf = initial_state_pmf(&config, AnalysisOptions::exact()).unwrap();
        assert_eq!(pmf.stage(), 1);
        assert!(close(pmf.get(&DecoderState::new(vec![0], 1)), 0.5, 1e-15));
        assert!(close(pmf.get(&DecoderState::new(vec![0], 0)), 0.5, 1e-15));
        assert_eq!(pmf.len(), 2);
    }

    #[test]
    fn empty_ripple_is_absorbing() {
        let config = SystemConfig::single(4, 3, 1.0).unwrap();
        let pmf =
            StatePmf::from_states(&config, 3, [(DecoderState::new(vec![1], 0), 1.0)]).unwrap();
        let (next, terminal) = transition(&pmf, &config, AnalysisOptions::exact()).unwrap();
        assert_eq!(terminal, 1.0);
        assert!(next.is_empty());
    }

    #[test]
    fn last_user_forced() {
        let config = SystemConfig::single(3, 3, 1.0).unwrap();
        let pmf =
            StatePmf::from_states(&config, 1, [(DecoderState::new(vec![0], 1), 1.0)]).unwrap();
        let (next, terminal) = transition(&pmf, &config, AnalysisOptions::exact()).unwrap();
        assert_eq!(terminal, 0.0);
        assert_eq!(next.stage(), 0);
        assert_eq!(next.sorted(), vec![(DecoderState::new(vec![0], 0), 1.0)]);
        assert!(transition(&next, &config, AnalysisOptions::exact()).is_err());
    }

    #[test]
    fn single_user_pmf() {
        let config = SystemConfig::single(1, 1, 0.5).unwrap();
        let prof = unresolved_pmf(&config, AnalysisOptions::default()).unwrap();
        assert!(close(prof.pmf[0], 0.5, 1e-15));
        assert!(close(prof.pmf[1], 0.5, 1e-15));
        assert!(close(prof.expected_per, 0.5, 1e-15));
        assert!(close(prof.throughput.unwrap(), 0.5, 1e-15));
    }

    #[test]
    fn no_slots_leaves_everyone_unresolved() {
        let config = SystemConfig::single(7, 0, 2.0).unwrap();
        let prof = unresolved_pmf(&config, AnalysisOptions::default()).unwrap();
        assert_eq!(prof.pmf[7], 1.0);
        assert!(prof.pmf[..7].iter().all(|&p| p == 0.0));
        assert_eq!(prof.throughput, None);
        assert_eq!(prof.f_t(0), 1.0);
        assert_eq!(prof.f_t(1), 0.0);
    }

    #[test]
    fn zero_degree_class_contributes_nothing() {
        let a = SystemConfig::single(5, 6, 2.0).unwrap();
        let b = SystemConfig::new(5, vec![SlotClass::new(6, 2.0), SlotClass::new(0, 4.0)]).unwrap();
        let pa = unresolved_pmf(&a, AnalysisOptions::exact()).unwrap();
        let pb = unresolved_pmf(&b, AnalysisOptions::exact()).unwrap();
        for (x, y) in pa.pmf.iter().zip(&pb.pmf) {
            assert!(close(*x, *y, 1e-15));
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let config =
            SystemConfig::new(30, vec![SlotClass::new(30, 2.6), SlotClass::new(8, 6.0)]).unwrap();
        let seq = unresolved_pmf(&config, AnalysisOptions::default()).unwrap();
        let par = unresolved_pmf(
            &config,
            AnalysisOptions {
                jobs: 4,
                ..Default::default()
            },
        )
        .unwrap();
        for (x, y) in seq.pmf.iter().zip(&par.pmf) {
            assert!(close(*x, *y, 1e-13));
        }
    }

    #[test]
    fn slot_order_validation() {
        let config =
            SystemConfig::new(4, vec![SlotClass::new(2, 1.0), SlotClass::new(1, 2.0)]).unwrap();
        let opts = AnalysisOptions::default();
        assert!(intermediate_profile(&config, &[0, 0], opts).is_err());
        assert!(intermediate_profile(&config, &[0, 1, 1], opts).is_err());
        assert!(intermediate_profile(&config, &[0, 2, 0], opts).is_err());
        let prof = intermediate_profile(&config, &[0, 1, 0], opts).unwrap();
        assert_eq!(prof.len(), 4);
        assert_eq!(prof[0], 0.0);
        assert_eq!(batched_order(&config), vec![0, 0, 1]);
    }
}
