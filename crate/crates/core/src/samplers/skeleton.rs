use std::collections::BTreeMap;

use crate::flows::FlowModel;
use crate::model::{GuideField, Vector};

use super::SamplerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    Start,
    Bounce,
    Refresh,
    /// Reflection off wall `j` (zero-based).
    WallHit(usize),
    /// Velocity coordinate `i` (zero-based) flipped.
    CoordFlip(usize),
    End,
}

impl EventKind {
    /// Label used in CSV output and event censuses.
    pub fn label(&self) -> String {
        match self {
            EventKind::Start => "start".into(),
            EventKind::Bounce => "bounce".into(),
            EventKind::Refresh => "refresh".into(),
            EventKind::WallHit(j) => format!("wall_{}", j + 1),
            EventKind::CoordFlip(i) => format!("flip_{}", i + 1),
            EventKind::End => "end".into(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            EventKind::Start => "start",
            EventKind::Bounce => "bounce",
            EventKind::Refresh => "refresh",
            EventKind::WallHit(_) => "wall_hit",
            EventKind::CoordFlip(_) => "coord_flip",
            EventKind::End => "end",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub position: Vector,
    pub velocity_after: Vector,
    pub kind: EventKind,
}

/// Event records of one chain. Between consecutive events the trajectory is the
/// flow of `flow` started from the earlier record.
#[derive(Debug, Clone)]
pub struct Skeleton {
    pub events: Vec<EventRecord>,
    pub flow: FlowModel,
    /// Guide field actually used by the run.
    pub guide: GuideField,
    pub config: SamplerConfig,
    pub sampler: &'static str,
}

impl Skeleton {
    pub fn dim(&self) -> usize {
        self.events[0].position.len()
    }

    pub fn t_total(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.time)
    }

    /// Index of the segment containing `t`: the last event with `time ≤ t`, excluding `End`.
    pub fn segment_index(&self, t: f64) -> usize {
        let n = self.events.len();
        let idx = self.events.partition_point(|e| e.time <= t);
        idx.saturating_sub(1).min(n.saturating_sub(2))
    }

    /// Exact state at time `t ∈ [0, T_total]`.
    pub fn state_at(&self, t: f64) -> (Vector, Vector) {
        let e = &self.events[self.segment_index(t)];
        self.flow.advance(&e.position, &e.velocity_after, t - e.time)
    }

    pub fn count(&self, family: &str) -> usize {
        self.events.iter().filter(|e| e.kind.family() == family).count()
    }

    pub fn event_census(&self) -> BTreeMap<&'static str, usize> {
        let mut census = BTreeMap::new();
        for e in &self.events {
            *census.entry(e.kind.family()).or_insert(0) += 1;
        }
        census
    }
}
