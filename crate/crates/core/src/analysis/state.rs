use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::model::SystemConfig;

/// Cardinalities of the per-class clouds and of the ripple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DecoderState {
    pub cloud_sizes: Vec<u32>,
    pub ripple_size: u32,
}

impl DecoderState {
    pub fn new(cloud_sizes: Vec<u32>, ripple_size: u32) -> Self {
        DecoderState {
            cloud_sizes,
            ripple_size,
        }
    }
}

/// Bit layout of a packed state key. The ripple occupies the low bits so a
/// cloud-to-ripple move is `key - (b << shift[h]) + b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct StateLayout {
    pub ripple_mask: u64,
    pub shifts: Vec<u32>,
    pub masks: Vec<u64>,
}

fn bits_for(max: usize) -> u32 {
    usize::BITS - max.leading_zeros()
}

impl StateLayout {
    pub fn new(config: &SystemConfig) -> Result<Self> {
        // A caller-built state may have r + sum(c) > m, in which case a
        // transition can push the ripple up to 2m; the spare bit keeps that
        // from spilling into the cloud fields.
        let ripple_bits = bits_for(config.total_slots()) + 1;
        let mut offset = ripple_bits;
        let mut shifts = Vec::with_capacity(config.num_classes());
        let mut masks = Vec::with_capacity(config.num_classes());
        for class in config.classes() {
            let bits = bits_for(class.slot_count);
            shifts.push(offset);
            masks.push(if bits == 0 { 0 } else { (1u64 << bits) - 1 });
            offset += bits;
        }
        if offset > 64 {
            return Err(Error::StateSpaceTooLarge { bits: offset });
        }
        Ok(StateLayout {
            ripple_mask: (1u64 << ripple_bits) - 1,
            shifts,
            masks,
        })
    }

    #[inline]
    pub fn ripple(&self, key: u64) -> usize {
        (key & self.ripple_mask) as usize
    }

    #[inline]
    pub fn cloud(&self, key: u64, class: usize) -> usize {
        ((key >> self.shifts[class]) & self.masks[class]) as usize
    }

    pub fn pack(&self, state: &DecoderState) -> u64 {
        self.shifts
            .iter()
            .zip(&state.cloud_sizes)
            .fold(state.ripple_size as u64, |key, (&s, &c)| {
                key | ((c as u64) << s)
            })
    }

    pub fn unpack(&self, key: u64) -> DecoderState {
        DecoderState {
            cloud_sizes: (0..self.shifts.len())
                .map(|h| self.cloud(key, h) as u32)
                .collect(),
            ripple_size: self.ripple(key) as u32,
        }
    }
}

pub(crate) type StateMap = FxHashMap<u64, f64>;

/// Sparse distribution over decoder states at the stage where `stage` users
/// are still unresolved.
#[derive(Debug, Clone)]
pub struct StatePmf {
    pub(crate) stage: usize,
    pub(crate) layout: StateLayout,
    pub(crate) entries: Vec<(u64, f64)>,
    pub(crate) leaked_mass: f64,
}

impl StatePmf {
    /// Builds a pmf from explicit states; useful for driving single transitions.
    pub fn from_states(
        config: &SystemConfig,
        stage: usize,
        states: impl IntoIterator<Item = (DecoderState, f64)>,
    ) -> Result<Self> {
        let layout = StateLayout::new(config)?;
        let mut map = StateMap::default();
        for (s, p) in states {
            if s.cloud_sizes.len() != config.num_classes() {
                return Err(Error::InvalidParameter {
                    name: "decoder state",
                    reason: format!("expected {} cloud sizes", config.num_classes()),
                });
            }
            let in_range = s
                .cloud_sizes
                .iter()
                .zip(config.classes())
                .all(|(&c, class)| c as usize <= class.slot_count)
                && s.ripple_size as usize <= config.total_slots();
            if !in_range {
                return Err(Error::InvalidParameter {
                    name: "decoder state",
                    reason: format!("{s:?} exceeds the slot counts"),
                });
            }
            if p > 0.0 {
                *map.entry(layout.pack(&s)).or_insert(0.0) += p;
            }
        }
        Ok(StatePmf {
            stage,
            layout,
            entries: map.into_iter().collect(),
            leaked_mass: 0.0,
        })
    }

    /// Number of unresolved users at this stage.
    pub fn stage(&self) -> usize {
        self.stage
    }

    /// Mass pruned so far, accumulated across all stages that produced this pmf.
    pub fn leaked_mass(&self) -> f64 {
        self.leaked_mass
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (DecoderState, f64)> + '_ {
        self.entries
            .iter()
            .map(|&(k, p)| (self.layout.unpack(k), p))
    }

    pub fn get(&self, state: &DecoderState) -> f64 {
        let key = self.layout.pack(state);
        self.entries
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    /// Entries sorted by state, for stable output.
    pub fn sorted(&self) -> Vec<(DecoderState, f64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }
}
