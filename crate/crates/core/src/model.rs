//! System model: users, slot classes, initial slot-degree distributions and
//! the binomial/hypergeometric building blocks used by the analysis.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// A group of slots sharing one slot-access probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlotClass {
    /// Number of slots of this class in the contention period.
    pub slot_count: usize,
    /// Expected number of transmissions per slot; the access probability is
    /// `mean_degree / users`.
    pub mean_degree: f64,
}

impl SlotClass {
    pub fn new(slot_count: usize, mean_degree: f64) -> Self {
        SlotClass {
            slot_count,
            mean_degree,
        }
    }

    /// Per-user, per-slot access probability for `users` contenders.
    pub fn access_probability(&self, users: usize) -> f64 {
        (self.mean_degree / users as f64).clamp(0.0, 1.0)
    }
}

/// `n` contending users and an ordered list of slot classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    users: usize,
    classes: Vec<SlotClass>,
}

impl SystemConfig {
    pub fn new(users: usize, classes: Vec<SlotClass>) -> Result<Self> {
        if users == 0 {
            return Err(Error::NoUsers);
        }
        if classes.is_empty() {
            return Err(Error::NoClasses);
        }
        for (class, c) in classes.iter().enumerate() {
            if !(c.mean_degree >= 0.0 && c.mean_degree <= users as f64) {
                return Err(Error::MeanDegreeOutOfRange {
                    class,
                    beta: c.mean_degree,
                    users,
                });
            }
        }
        Ok(SystemConfig { users, classes })
    }

    /// Single-class shorthand.
    pub fn single(users: usize, slots: usize, mean_degree: f64) -> Result<Self> {
        Self::new(users, vec![SlotClass::new(slots, mean_degree)])
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn classes(&self) -> &[SlotClass] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn total_slots(&self) -> usize {
        self.classes.iter().map(|c| c.slot_count).sum()
    }

    /// Same users and mean degrees with different per-class slot counts.
    pub fn with_slot_counts(&self, counts: &[usize]) -> Result<Self> {
        if counts.len() != self.classes.len() {
            return Err(Error::InvalidParameter {
                name: "slot counts",
                reason: format!(
                    "expected {} entries, got {}",
                    self.classes.len(),
                    counts.len()
                ),
            });
        }
        let classes = self
            .classes
            .iter()
            .zip(counts)
            .map(|(c, &slot_count)| SlotClass::new(slot_count, c.mean_degree))
            .collect();
        Self::new(self.users, classes)
    }

    /// Initial-degree distribution of every class.
    pub fn spectra(&self) -> Vec<DegreeSpectrum> {
        self.classes
            .iter()
            .map(|c| slot_degree_pmf(self.users, c.mean_degree).expect("validated mean degree"))
            .collect()
    }
}

/// Initial slot-degree pmf of one class, indexed by degree `0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeSpectrum {
    probs: Vec<f64>,
}

impl DegreeSpectrum {
    /// Builds a spectrum from raw probabilities, checking that they form a pmf.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter {
                name: "degree spectrum",
                reason: "empty".into(),
            });
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter {
                name: "degree spectrum",
                reason: "entry outside [0, 1]".into(),
            });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "degree spectrum",
                reason: format!("entries sum to {total}"),
            });
        }
        Ok(DegreeSpectrum { probs })
    }

    /// Number of users `n`; degrees range over `0..=n`.
    pub fn users(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of initial degree `d`; zero above `n`.
    pub fn get(&self, d: usize) -> f64 {
        self.probs.get(d).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(j, p)| j as f64 * p)
            .sum()
    }
}

/// Binomial initial-degree pmf: `n` users each active with probability `beta / n`.
pub fn slot_degree_pmf(n: usize, beta: f64) -> Result<DegreeSpectrum> {
    if n == 0 {
        return Err(Error::NoUsers);
    }
    if !(beta >= 0.0 && beta <= n as f64) {
        return Err(Error::MeanDegreeOutOfRange {
            class: 0,
            beta,
            users: n,
        });
    }
    Ok(DegreeSpectrum {
        probs: binomial_pmf(n, beta / n as f64),
    })
}

/// `ln C(n, k)`, or negative infinity when `k > n`.
///
/// Coefficients with `n <= 120` are formed exactly in 128-bit integers before
/// taking the logarithm; larger ones go through log-gamma.
pub fn log_choose(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    if n <= 120 {
        let mut c: u128 = 1;
        for i in 0..k {
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        return (c as f64).ln();
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `x^e` in log space with the convention `0^0 = 1`.
#[inline]
pub(crate) fn ln_pow(x: f64, e: usize) -> f64 {
    if e == 0 {
        0.0
    } else if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        e as f64 * x.ln()
    }
}

/// Largest trial count whose binomial coefficients are formed exactly.
const EXACT_BINOMIAL_MAX: usize = 120;

/// Table of `ln k!` for repeated coefficient evaluation in hot loops.
#[derive(Debug, Clone)]
pub struct LnFactorials {
    table: Vec<f64>,
}

impl LnFactorials {
    pub fn new(max: usize) -> Self {
        let mut exact: u64 = 1;
        let table = (0..=max)
            .map(|k| {
                if k <= 20 {
                    exact *= k.max(1) as u64;
                    (exact as f64).ln()
                } else {
                    ln_gamma(k as f64 + 1.0)
                }
            })
            .collect();
        LnFactorials { table }
    }

    pub fn max(&self) -> usize {
        self.table.len() - 1
    }

    #[inline]
    pub fn ln_choose(&self, n: usize, k: usize) -> f64 {
        if k > n {
            return f64::NEG_INFINITY;
        }
        self.table[n] - self.table[k] - self.table[n - k]
    }

    /// Binomial pmf over `0..=trials`.
    ///
    /// Up to 120 trials the coefficients are exact integers and the terms are
    /// formed in linear space; beyond that everything goes through logs.
    pub fn binomial_pmf(&self, trials: usize, p: f64) -> Vec<f64> {
        let mut out = vec![0.0; trials + 1];
        if p <= 0.0 {
            out[0] = 1.0;
            return out;
        }
        if p >= 1.0 {
            out[trials] = 1.0;
            return out;
        }
        let q = 1.0 - p;
        if trials <= EXACT_BINOMIAL_MAX {
            let mut q_pows = vec![1.0; trials + 1];
            for i in 1..=trials {
                q_pows[i] = q_pows[i - 1] * q;
            }
            let mut coeff: u128 = 1;
            let mut p_pow = 1.0;
            for (j, o) in out.iter_mut().enumerate() {
                *o = coeff as f64 * p_pow * q_pows[trials - j];
                coeff = coeff * (trials - j) as u128 / (j + 1) as u128;
                p_pow *= p;
            }
            return out;
        }
        let (lp, lq) = (p.ln(), (-p).ln_1p());
        for (j, o) in out.iter_mut().enumerate() {
            *o = (self.ln_choose(trials, j) + j as f64 * lp + (trials - j) as f64 * lq).exp();
        }
        out
    }
}

/// Binomial pmf over `0..=trials` with success probability `p`.
pub fn binomial_pmf(trials: usize, p: f64) -> Vec<f64> {
    LnFactorials::new(trials).binomial_pmf(trials, p)
}

/// Probability that a slot of initial degree `d` holds exactly `j` of the `u`
/// unresolved users: `C(u, j) C(n - u, d - j) / C(n, d)`.
pub fn hypergeometric(n: usize, u: usize, d: usize, j: usize) -> f64 {
    if j > d || j > u || d - j > n - u || d > n {
        return 0.0;
    }
    (log_choose(u, j) + log_choose(n - u, d - j) - log_choose(n, d)).exp()
}

/// Reduced-degree pmf of a slot with initial degree `d` once `n - u` users are
/// resolved, indexed by `j = 0..=min(d, u)`; entries below
/// `max(0, d - (n - u))` are zero.
pub fn reduced_degree_pmf(n: usize, u: usize, d: usize) -> Result<Vec<f64>> {
    if u > n || d > n {
        return Err(Error::InvalidParameter {
            name: "reduced degree arguments",
            reason: format!("need u <= n and d <= n, got n={n}, u={u}, d={d}"),
        });
    }
    Ok((0..=d.min(u)).map(|j| hypergeometric(n, u, d, j)).collect())
}
