//! Multi-agent coordination over shared data and mental models.
//!
//! Agents exchange communicative acts under declarative interaction
//! protocols, delegate actions they cannot perform to capable providers
//! found through a matchmaker, and leave a deterministic JSON-lines trace.

pub mod action_engine;
pub mod agent;
pub mod board;
pub mod ca_engine;
pub mod descriptions;
pub mod ids;
pub mod matchmaker;
pub mod mentality;
pub mod protocol_engine;
pub mod scenario;
pub mod store;
pub mod term;
pub mod trace;
pub mod transport;

pub use agent::{Goal, RunReport, Runtime};
pub use board::Blackboard;
pub use ids::{AgentId, ConversationId, Tick};
pub use scenario::{ConfigError, Scenario};
pub use store::{Pattern, Statement, TripleSource, TripleStore};
pub use term::{Bindings, Term};
