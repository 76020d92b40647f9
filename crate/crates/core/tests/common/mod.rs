//! Exhaustive enumeration oracles. Nothing here touches the analysis or the
//! incremental decoder: every activation pattern is weighted by its
//! Bernoulli probability and decoded by naive rescanning.

#![allow(dead_code)]

use std::collections::HashMap;

use frameless_core::{DecoderState, SlotClass, SystemConfig};

/// Slot classes in batched order.
fn slot_classes(config: &SystemConfig) -> Vec<usize> {
    config
        .classes()
        .iter()
        .enumerate()
        .flat_map(|(h, c)| std::iter::repeat_n(h, c.slot_count))
        .collect()
}

/// Probability of every user subset (bitmask) transmitting in a slot of each class.
fn subset_weights(config: &SystemConfig) -> Vec<Vec<f64>> {
    let n = config.users();
    config
        .classes()
        .iter()
        .map(|c| {
            let p = c.mean_degree / n as f64;
            (0u32..1 << n)
                .map(|mask| {
                    let d = mask.count_ones() as i32;
                    p.powi(d) * (1.0 - p).powi(n as i32 - d)
                })
                .collect()
        })
        .collect()
}

/// Calls `visit(masks, weight)` for every activation pattern with nonzero weight.
fn for_each_pattern(config: &SystemConfig, mut visit: impl FnMut(&[u32], f64)) {
    let classes = slot_classes(config);
    let weights = subset_weights(config);
    let n = config.users();
    let mut masks = vec![0u32; classes.len()];
    fn rec(
        i: usize,
        w: f64,
        n: usize,
        classes: &[usize],
        weights: &[Vec<f64>],
        masks: &mut Vec<u32>,
        visit: &mut dyn FnMut(&[u32], f64),
    ) {
        if w == 0.0 {
            return;
        }
        if i == classes.len() {
            visit(masks, w);
            return;
        }
        for mask in 0u32..1 << n {
            masks[i] = mask;
            rec(
                i + 1,
                w * weights[classes[i]][mask as usize],
                n,
                classes,
                weights,
                masks,
                visit,
            );
        }
    }
    rec(0, 1.0, n, &classes, &weights, &mut masks, &mut visit);
}

/// Resolved-user mask after rescanning for singleton slots until none is left.
pub fn naive_peel(masks: &[u32]) -> u32 {
    let mut resolved = 0u32;
    loop {
        let single = masks
            .iter()
            .map(|&m| m & !resolved)
            .find(|m| m.count_ones() == 1);
        match single {
            Some(m) => resolved |= m,
            None => return resolved,
        }
    }
}

/// Exact pmf of the number of unresolved users by enumeration.
pub fn enumerate_unresolved_pmf(config: &SystemConfig) -> Vec<f64> {
    let n = config.users();
    let mut pmf = vec![0.0; n + 1];
    for_each_pattern(config, |masks, w| {
        let resolved = naive_peel(masks).count_ones() as usize;
        pmf[n - resolved] += w;
    });
    pmf
}

fn state_of(masks: &[u32], classes: &[usize], k: usize, resolved: u32) -> DecoderState {
    let mut cloud = vec![0u32; k];
    let mut ripple = 0;
    for (&m, &h) in masks.iter().zip(classes) {
        match (m & !resolved).count_ones() {
            0 => {}
            1 => ripple += 1,
            _ => cloud[h] += 1,
        }
    }
    DecoderState::new(cloud, ripple)
}

/// Distribution of the receiver state at every stage `u`, with ripple slots
/// decoded in uniformly random order; index `u` of the result.
pub fn enumerate_stage_states(config: &SystemConfig) -> Vec<HashMap<DecoderState, f64>> {
    let n = config.users();
    let k = config.num_classes();
    let classes = slot_classes(config);
    let mut stages = vec![HashMap::new(); n + 1];
    fn walk(
        masks: &[u32],
        classes: &[usize],
        k: usize,
        n: usize,
        resolved: u32,
        w: f64,
        stages: &mut Vec<HashMap<DecoderState, f64>>,
    ) {
        let u = n - resolved.count_ones() as usize;
        let state = state_of(masks, classes, k, resolved);
        *stages[u].entry(state.clone()).or_insert(0.0) += w;
        if state.ripple_size == 0 || u == 0 {
            return;
        }
        let ripple: Vec<u32> = masks
            .iter()
            .map(|&m| m & !resolved)
            .filter(|m| m.count_ones() == 1)
            .collect();
        let share = w / ripple.len() as f64;
        for user in ripple {
            walk(masks, classes, k, n, resolved | user, share, stages);
        }
    }
    for_each_pattern(config, |masks, w| {
        walk(masks, &classes, k, n, 0, w, &mut stages)
    });
    stages
}

const BETAS: [f64; 4] = [0.5, 1.0, 1.7, 3.0];

/// Every configuration with n <= 4, m <= 4, k <= 2 over a coarse degree grid.
pub fn small_configs() -> Vec<SystemConfig> {
    let mut out = Vec::new();
    for n in 1..=4usize {
        for m in 0..=4usize {
            for &b in &BETAS {
                if b <= n as f64 {
                    out.push(SystemConfig::single(n, m, b).unwrap());
                }
            }
            for m1 in 0..=m {
                for &b1 in &BETAS {
                    for &b2 in &[0.8, 2.5, n as f64] {
                        if b1 <= n as f64 && b2 <= n as f64 {
                            let classes = vec![SlotClass::new(m1, b1), SlotClass::new(m - m1, b2)];
                            out.push(SystemConfig::new(n, classes).unwrap());
                        }
                    }
                }
            }
        }
    }
    out
}
