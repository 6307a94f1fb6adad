use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::data::{DatasetBundle, Label};

/// Moves persistently zero-weighted crowd instances into the unlabeled pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationPolicy {
    pub enabled: bool,
    /// Number of most recent encounters that must all have raw weight <= 0.
    pub window: usize,
    pub min_encounters: usize,
}

impl Default for MigrationPolicy {
    fn default() -> Self {
        Self { enabled: false, window: 5, min_encounters: 5 }
    }
}

#[derive(Debug, Clone, Default)]
struct Encounters {
    total: usize,
    recent: VecDeque<f64>,
}

/// Per-instance raw-weight history for crowd instances.
#[derive(Debug, Clone, Default)]
pub struct EncounterLog {
    window: usize,
    by_id: BTreeMap<String, Encounters>,
}

impl EncounterLog {
    pub fn new(window: usize) -> Self {
        Self { window: window.max(1), by_id: BTreeMap::new() }
    }

    pub fn record(&mut self, id: &str, raw: f64) {
        let entry = self.by_id.entry(id.to_string()).or_default();
        entry.total += 1;
        entry.recent.push_back(raw);
        while entry.recent.len() > self.window {
            entry.recent.pop_front();
        }
    }

    fn flagged(&self, id: &str, policy: &MigrationPolicy) -> bool {
        self.by_id.get(id).is_some_and(|e| {
            e.total >= policy.min_encounters && e.recent.len() >= policy.window && e.recent.iter().all(|&w| w <= 0.0)
        })
    }

    fn forget(&mut self, id: &str) {
        self.by_id.remove(id);
    }
}

/// Ids moved out of the crowd set and ids held back by the class-extinction guard.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MigrationOutcome {
    pub migrated: Vec<String>,
    pub refused: Vec<String>,
}

/// Applies the policy in crowd-set order, stripping the crowd label of each
/// migrated instance and appending it to the unlabeled pool.
///
/// Instances that are also in the reward set stay, and the last remaining
/// instance of either crowd class is never migrated.
pub fn migrate_false_labeled(
    log: &mut EncounterLog,
    policy: &MigrationPolicy,
    bundle: &mut DatasetBundle,
) -> MigrationOutcome {
    let mut outcome = MigrationOutcome::default();
    if !policy.enabled {
        return outcome;
    }
    let mut remaining = [0usize; 2];
    for inst in &bundle.crowd {
        if let Some(y) = inst.crowd_label {
            remaining[y.as_u8() as usize] += 1;
        }
    }
    let reward_ids: BTreeSet<String> = bundle.reward.iter().map(|r| r.id.clone()).collect();
    let mut keep = Vec::with_capacity(bundle.crowd.len());
    for mut inst in std::mem::take(&mut bundle.crowd) {
        if reward_ids.contains(&inst.id) || !log.flagged(&inst.id, policy) {
            keep.push(inst);
            continue;
        }
        let class = inst.crowd_label.unwrap_or(Label::Negative).as_u8() as usize;
        if remaining[class] <= 1 {
            log::warn!("refusing to migrate `{}`: last crowd instance of class {class}", inst.id);
            outcome.refused.push(inst.id.clone());
            keep.push(inst);
            continue;
        }
        remaining[class] -= 1;
        log.forget(&inst.id);
        outcome.migrated.push(inst.id.clone());
        inst.crowd_label = None;
        inst.expert_label = None;
        bundle.unlabeled.push(inst);
    }
    bundle.crowd = keep;
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Instance, SparseVec};

    fn bundle() -> DatasetBundle {
        let mk = |id: &str, y| Instance::new(id, SparseVec::zeros(2)).with_crowd(y);
        DatasetBundle {
            crowd: vec![mk("a", Label::Positive), mk("b", Label::Negative), mk("c", Label::Negative), mk("d", Label::Positive)],
            ..Default::default()
        }
    }

    #[test]
    fn disabled_is_identity() {
        let mut b = bundle();
        let mut log = EncounterLog::new(5);
        for _ in 0..10 {
            log.record("a", -1.0);
        }
        let out = migrate_false_labeled(&mut log, &MigrationPolicy::default(), &mut b);
        assert!(out.migrated.is_empty());
        assert_eq!(b, bundle());
    }

    #[test]
    fn five_negative_encounters_migrate() {
        let mut b = bundle();
        let mut log = EncounterLog::new(5);
        for _ in 0..5 {
            log.record("b", -1.0);
        }
        for _ in 0..4 {
            log.record("c", -1.0);
        }
        let policy = MigrationPolicy { enabled: true, ..Default::default() };
        let out = migrate_false_labeled(&mut log, &policy, &mut b);
        assert_eq!(out.migrated, vec!["b".to_string()]);
        assert_eq!(b.crowd.len(), 3);
        assert_eq!(b.unlabeled.len(), 1);
        assert_eq!(b.unlabeled[0].crowd_label, None);
    }

    #[test]
    fn one_positive_encounter_in_window_blocks() {
        let mut b = bundle();
        let mut log = EncounterLog::new(5);
        for w in [-1.0, -1.0, 0.3, -1.0, -1.0] {
            log.record("b", w);
        }
        let policy = MigrationPolicy { enabled: true, ..Default::default() };
        assert!(migrate_false_labeled(&mut log, &policy, &mut b).migrated.is_empty());
        // older positive encounter slides out of the window
        log.record("b", -1.0);
        log.record("b", -1.0);
        log.record("b", 0.0);
        assert_eq!(migrate_false_labeled(&mut log, &policy, &mut b).migrated, vec!["b".to_string()]);
    }

    #[test]
    fn last_positive_is_kept() {
        let mut b = bundle();
        let mut log = EncounterLog::new(1);
        log.record("a", -1.0);
        log.record("d", -1.0);
        let policy = MigrationPolicy { enabled: true, window: 1, min_encounters: 1 };
        let out = migrate_false_labeled(&mut log, &policy, &mut b);
        assert_eq!(out.migrated, vec!["a".to_string()]);
        assert_eq!(out.refused, vec!["d".to_string()]);
        assert_eq!(b.crowd.iter().filter(|i| i.crowd_label == Some(Label::Positive)).count(), 1);
    }

    #[test]
    fn reward_instances_stay() {
        let mut b = bundle();
        b.reward = vec![Instance::new("b", SparseVec::zeros(2)).with_expert(Label::Negative)];
        let mut log = EncounterLog::new(1);
        log.record("b", -1.0);
        log.record("c", -1.0);
        let policy = MigrationPolicy { enabled: true, window: 1, min_encounters: 1 };
        let out = migrate_false_labeled(&mut log, &policy, &mut b);
        assert_eq!(out.migrated, vec!["c".to_string()]);
        assert!(b.crowd.iter().any(|i| i.id == "b"));
    }
}
