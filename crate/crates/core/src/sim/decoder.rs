/// Incremental SIC peeling decoder.
///
/// Slots are added one at a time; each slot keeps its reduced degree (number
/// of still-unresolved users in it). Slots of reduced degree one form the
/// ripple, slots of reduced degree two or more form the per-class clouds.
/// Replicas of users that are already resolved are cancelled on arrival.
#[derive(Debug, Clone)]
pub struct PeelingDecoder {
    resolved: Vec<bool>,
    resolved_count: usize,
    /// Unresolved users, kept compact for sampling; `unresolved_pos` indexes it.
    unresolved: Vec<u32>,
    unresolved_pos: Vec<usize>,
    user_slots: Vec<Vec<u32>>,
    slot_users: Vec<Vec<u32>>,
    slot_class: Vec<usize>,
    reduced: Vec<u32>,
    ripple: Vec<u32>,
    ripple_pos: Vec<usize>,
    cloud: Vec<usize>,
}

/// Cardinalities observed around one resolution step, for conditional
/// frequency checks against the analytical transition law.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    /// Unresolved users before the step.
    pub unresolved: usize,
    /// Ripple size before the step.
    pub ripple: usize,
    /// Per-class cloud sizes before the step.
    pub cloud: Vec<usize>,
    /// Ripple slots that left (including the one decoded).
    pub ripple_left: usize,
    /// Per-class cloud slots that entered the ripple.
    pub cloud_left: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl PeelingDecoder {
    pub fn new(users: usize, classes: usize) -> Self {
        PeelingDecoder {
            resolved: vec![false; users],
            resolved_count: 0,
            unresolved: (0..users as u32).collect(),
            unresolved_pos: (0..users).collect(),
            user_slots: vec![Vec::new(); users],
            slot_users: Vec::new(),
            slot_class: Vec::new(),
            reduced: Vec::new(),
            ripple: Vec::new(),
            ripple_pos: Vec::new(),
            cloud: vec![0; classes.max(1)],
        }
    }

    pub fn users(&self) -> usize {
        self.resolved.len()
    }

    pub fn resolved_count(&self) -> usize {
        self.resolved_count
    }

    pub fn unresolved_count(&self) -> usize {
        self.users() - self.resolved_count
    }

    pub fn unresolved_users(&self) -> &[u32] {
        &self.unresolved
    }

    pub fn is_resolved(&self, user: usize) -> bool {
        self.resolved[user]
    }

    pub fn ripple_size(&self) -> usize {
        self.ripple.len()
    }

    pub fn cloud_size(&self) -> usize {
        self.cloud.iter().sum()
    }

    pub fn class_cloud_sizes(&self) -> &[usize] {
        &self.cloud
    }

    pub fn slot_count(&self) -> usize {
        self.slot_users.len()
    }

    /// Resolved users in ascending order.
    pub fn resolved_users(&self) -> Vec<usize> {
        (0..self.users()).filter(|&u| self.resolved[u]).collect()
    }

    /// Registers a received slot without decoding anything yet.
    pub fn add_slot(&mut self, class: usize, users: &[u32]) {
        let slot = self.slot_users.len() as u32;
        let mut degree = 0;
        for &x in users {
            if !self.resolved[x as usize] {
                degree += 1;
                self.user_slots[x as usize].push(slot);
            }
        }
        self.slot_users.push(users.to_vec());
        self.slot_class.push(class);
        self.reduced.push(degree);
        self.ripple_pos.push(NONE);
        match degree {
            0 => {}
            1 => self.ripple_insert(slot),
            _ => self.cloud[class] += 1,
        }
    }

    fn ripple_insert(&mut self, slot: u32) {
        self.ripple_pos[slot as usize] = self.ripple.len();
        self.ripple.push(slot);
    }

    fn ripple_remove(&mut self, slot: u32) {
        let pos = self.ripple_pos[slot as usize];
        let last = *self.ripple.last().expect("slot is in the ripple");
        self.ripple.swap_remove(pos);
        if last != slot {
            self.ripple_pos[last as usize] = pos;
        }
        self.ripple_pos[slot as usize] = NONE;
    }

    fn mark_resolved(&mut self, user: usize) {
        self.resolved[user] = true;
        self.resolved_count += 1;
        let pos = self.unresolved_pos[user];
        let last = *self.unresolved.last().expect("user is unresolved");
        self.unresolved.swap_remove(pos);
        if last as usize != user {
            self.unresolved_pos[last as usize] = pos;
        }
        self.unresolved_pos[user] = NONE;
    }

    /// Decodes the ripple slot at `index` of the current ripple and cancels
    /// the decoded user's replicas everywhere.
    fn resolve_at(&mut self, index: usize) -> StepRecord {
        let before = StepRecord {
            unresolved: self.unresolved_count(),
            ripple: self.ripple.len(),
            cloud: self.cloud.clone(),
            ripple_left: 0,
            cloud_left: vec![0; self.cloud.len()],
        };
        let mut record = before;
        let slot = self.ripple[index] as usize;
        let user = self.slot_users[slot]
            .iter()
            .copied()
            .find(|&x| !self.resolved[x as usize])
            .expect("ripple slot holds one unresolved user") as usize;
        self.mark_resolved(user);
        let slots = std::mem::take(&mut self.user_slots[user]);
        for &t in &slots {
            let ti = t as usize;
            let d = self.reduced[ti];
            self.reduced[ti] = d - 1;
            match d {
                1 => {
                    self.ripple_remove(t);
                    record.ripple_left += 1;
                }
                2 => {
                    let h = self.slot_class[ti];
                    self.cloud[h] -= 1;
                    record.cloud_left[h] += 1;
                    self.ripple_insert(t);
                }
                _ => {}
            }
        }
        record
    }

    /// Peels until the ripple is empty, always decoding the most recently
    /// added ripple slot. Returns the number of users resolved by this call.
    pub fn peel(&mut self) -> usize {
        self.peel_with(|ripple| ripple.len() - 1, |_| {})
    }

    /// Peels until the ripple is empty. `choose` picks an index into the
    /// current ripple (slot ids); `observe` sees every step.
    pub fn peel_with<C, O>(&mut self, mut choose: C, mut observe: O) -> usize
    where
        C: FnMut(&[u32]) -> usize,
        O: FnMut(&StepRecord),
    {
        let start = self.resolved_count;
        while !self.ripple.is_empty() {
            let index = choose(&self.ripple);
            let record = self.resolve_at(index);
            observe(&record);
        }
        self.resolved_count - start
    }
}
