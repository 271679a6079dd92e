//! In-process message layer. Every communicative act travels as an
//! ACL-style envelope into the receiver's inbox and onto the trace.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;

use serde_json::Value;
use thiserror::Error;

use crate::board::Blackboard;
use crate::ids::{AgentId, ConversationId, Tick};
use crate::trace::TraceEvent;

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub performative: String,
    pub sender: AgentId,
    pub receiver: AgentId,
    pub content: Value,
    pub conversation: ConversationId,
    pub reply_with: String,
    pub in_reply_to: Option<String>,
    pub tick: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("no agent `{0}` is registered with the transport")]
    UnknownReceiver(AgentId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorrelationError {
    #[error("message {index} replies to `{token}`, which no earlier message in {conv} carries")]
    DanglingReply {
        index: usize,
        token: String,
        conv: ConversationId,
    },
    #[error("message {index} reuses reply-with token `{token}`")]
    DuplicateToken { index: usize, token: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Receipt {
    /// Position of the envelope in the global log.
    pub index: usize,
    pub delivered: bool,
}

type DropRule = dyn Fn(&Envelope) -> bool;

#[derive(Default)]
pub struct Transport {
    inboxes: BTreeMap<AgentId, VecDeque<Envelope>>,
    log: Vec<(Envelope, bool)>,
    drop_rule: Option<Box<DropRule>>,
}

impl fmt::Debug for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transport")
            .field("inboxes", &self.inboxes)
            .field("log", &self.log.len())
            .field("drop_rule", &self.drop_rule.is_some())
            .finish()
    }
}

impl Transport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, agent: &AgentId) {
        self.inboxes.entry(agent.clone()).or_default();
    }

    pub fn is_registered(&self, agent: &AgentId) -> bool {
        self.inboxes.contains_key(agent)
    }

    /// Installs a fault-injection rule: matching envelopes are logged but
    /// never reach the receiver.
    pub fn drop_when(&mut self, rule: impl Fn(&Envelope) -> bool + 'static) {
        self.drop_rule = Some(Box::new(rule));
    }

    pub fn send(&mut self, env: Envelope, board: &mut Blackboard) -> Result<Receipt, TransportError> {
        let Some(inbox) = self.inboxes.get_mut(&env.receiver) else {
            return Err(TransportError::UnknownReceiver(env.receiver.clone()));
        };
        let dropped = self.drop_rule.as_ref().is_some_and(|rule| rule(&env));
        board.emit(TraceEvent::Msg {
            performative: env.performative.clone(),
            sender: env.sender.clone(),
            receiver: env.receiver.clone(),
            conv: env.conversation.clone(),
            content: env.content.clone(),
            reply_with: env.reply_with.clone(),
            in_reply_to: env.in_reply_to.clone(),
            dropped,
        });
        if !dropped {
            inbox.push_back(env.clone());
        }
        self.log.push((env, dropped));
        Ok(Receipt {
            index: self.log.len() - 1,
            delivered: !dropped,
        })
    }

    pub fn inbox(&self, agent: &AgentId) -> impl Iterator<Item = &Envelope> {
        self.inboxes.get(agent).into_iter().flatten()
    }

    pub fn take_inbox(&mut self, agent: &AgentId) -> Vec<Envelope> {
        self.inboxes
            .get_mut(agent)
            .map(|q| q.drain(..).collect())
            .unwrap_or_default()
    }

    /// Every envelope sent so far, dropped ones included, in send order.
    pub fn log(&self) -> impl Iterator<Item = &Envelope> {
        self.log.iter().map(|(e, _)| e)
    }

    pub fn dropped(&self) -> impl Iterator<Item = &Envelope> {
        self.log.iter().filter(|(_, d)| *d).map(|(e, _)| e)
    }
}

/// Checks that reply-with tokens are unique and that every in-reply-to names
/// an earlier message of the same conversation.
pub fn check_correlation<'a>(messages: impl IntoIterator<Item = &'a Envelope>) -> Result<(), CorrelationError> {
    let mut seen: HashSet<(&ConversationId, &str)> = HashSet::new();
    let mut tokens: HashSet<&str> = HashSet::new();
    for (index, env) in messages.into_iter().enumerate() {
        if let Some(token) = &env.in_reply_to {
            if !seen.contains(&(&env.conversation, token.as_str())) {
                return Err(CorrelationError::DanglingReply {
                    index,
                    token: token.clone(),
                    conv: env.conversation.clone(),
                });
            }
        }
        if !tokens.insert(&env.reply_with) {
            return Err(CorrelationError::DuplicateToken {
                index,
                token: env.reply_with.clone(),
            });
        }
        seen.insert((&env.conversation, &env.reply_with));
    }
    Ok(())
}
