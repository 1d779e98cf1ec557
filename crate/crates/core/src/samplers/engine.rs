use crate::error::Result;
use crate::flows::FlowModel;
use crate::kernels::{coordinate_flip, wall_reflect};
use crate::model::{chain_rng, ChainRng, ConstraintSet, GuideField, State, TargetModel, Vector};

use super::{EventKind, EventRecord, SamplerConfig, Skeleton};

/// Next event proposed from the current state, measured from the current time.
pub(crate) struct Proposal {
    pub tau: f64,
    pub kind: EventKind,
}

/// Picks the earliest clock; ties go to the earlier entry, so callers list clocks by priority.
pub(crate) fn earliest(candidates: &[(f64, EventKind)]) -> Proposal {
    let mut best = Proposal {
        tau: f64::INFINITY,
        kind: EventKind::End,
    };
    for &(tau, kind) in candidates {
        if tau < best.tau {
            best = Proposal { tau, kind };
        }
    }
    best
}

pub(crate) struct Engine<'a> {
    pub target: &'a TargetModel,
    pub guide: GuideField,
    pub constraints: Option<&'a ConstraintSet>,
    pub flow: FlowModel,
    pub config: &'a SamplerConfig,
    pub name: &'static str,
}

impl Engine<'_> {
    /// Runs the event loop; `propose` sees the current `(x, v)`, the remaining time and the chain RNG.
    pub fn run<P>(self, initial: &State, mut propose: P) -> Result<Skeleton>
    where
        P: FnMut(&Vector, &Vector, f64, &mut ChainRng) -> Result<Proposal>,
    {
        let mut rng = chain_rng(self.config.seed);
        let t_total = self.config.t_total;
        let mut x = initial.position.clone();
        let mut v = initial.velocity.clone();
        let mut t = 0.0;
        let mut events = vec![EventRecord {
            time: 0.0,
            position: x.clone(),
            velocity_after: v.clone(),
            kind: EventKind::Start,
        }];
        loop {
            let remaining = t_total - t;
            let step = propose(&x, &v, remaining, &mut rng)?;
            if step.tau >= remaining {
                let (xe, ve) = self.flow.advance(&x, &v, remaining);
                events.push(EventRecord {
                    time: t_total,
                    position: xe,
                    velocity_after: ve,
                    kind: EventKind::End,
                });
                break;
            }
            let (xn, vn) = self.flow.advance(&x, &v, step.tau);
            let v_after = match step.kind {
                EventKind::Bounce => {
                    let gx = self.guide.evaluate(self.target, &xn)?;
                    self.config.bounce_kernel.bounce(&vn, &gx, &mut rng)?
                }
                EventKind::Refresh => self.config.bounce_kernel.refresh(&vn, &mut rng)?,
                EventKind::WallHit(j) => {
                    let walls = self.constraints.expect("wall hit requires constraints");
                    wall_reflect(&vn, &walls.normal(j))?
                }
                EventKind::CoordFlip(i) => coordinate_flip(&vn, i)?,
                EventKind::Start | EventKind::End => unreachable!("not a jump event"),
            };
            let t_next = t + step.tau;
            // a zero-length step would break strict ordering of event times
            if t_next <= t {
                x = xn;
                v = v_after;
                if let Some(last) = events.last_mut() {
                    last.position = x.clone();
                    last.velocity_after = v.clone();
                }
                continue;
            }
            t = t_next;
            x = xn;
            v = v_after;
            events.push(EventRecord {
                time: t,
                position: x.clone(),
                velocity_after: v.clone(),
                kind: step.kind,
            });
        }
        Ok(Skeleton {
            events,
            flow: self.flow,
            guide: self.guide,
            config: self.config.clone(),
            sampler: self.name,
        })
    }
}
