//! The blackboard every engine works against: the shared data model, the
//! shared mental model, the run trace and the logical clock.

use crate::ids::Tick;
use crate::mentality::{EmbeddedProposition, MentalModel, WorldTag};
use crate::store::TripleStore;
use crate::trace::{Trace, TraceEvent};

#[derive(Debug, Clone, Default)]
pub struct Blackboard {
    pub data: TripleStore,
    pub mental: MentalModel,
    pub trace: Trace,
    pub now: Tick,
}

impl Blackboard {
    pub fn new(data: TripleStore) -> Self {
        Blackboard {
            data,
            ..Default::default()
        }
    }

    pub fn advance(&mut self) -> Tick {
        self.now = self.now.next();
        self.now
    }

    pub fn emit(&mut self, event: TraceEvent) {
        self.trace.push(self.now, event);
    }

    /// [`MentalModel::allocate`] plus the trace line for it.
    pub fn allocate(&mut self, p: &EmbeddedProposition) -> WorldTag {
        let world = self.mental.allocate(p);
        self.emit(TraceEvent::Allocate {
            believer: p.believer.clone(),
            belief: p.belief,
            triple: p.proposition().statement(),
            world,
        });
        world
    }
}
