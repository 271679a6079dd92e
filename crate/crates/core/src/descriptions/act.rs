use std::fmt;

use serde::{Deserialize, Serialize};

use super::condition::{Condition, Effect};
use super::DescriptionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearleClass {
    Assertive,
    Directive,
    Commissive,
    Expressive,
}

impl SearleClass {
    /// The only content shape a CA of this class may carry.
    pub fn required_content(self) -> ContentSchema {
        let none = ContentSchema::default();
        match self {
            SearleClass::Assertive => ContentSchema {
                proposition: true,
                ..none
            },
            SearleClass::Directive => ContentSchema { action: true, ..none },
            SearleClass::Commissive => ContentSchema {
                action: true,
                condition: true,
                ..none
            },
            SearleClass::Expressive => ContentSchema {
                action: true,
                reason: true,
                ..none
            },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SearleClass::Assertive => "assertive",
            SearleClass::Directive => "directive",
            SearleClass::Commissive => "commissive",
            SearleClass::Expressive => "expressive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentSchema {
    #[serde(default)]
    pub action: bool,
    #[serde(default)]
    pub proposition: bool,
    #[serde(default)]
    pub condition: bool,
    #[serde(default)]
    pub reason: bool,
}

impl fmt::Display for ContentSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = [
            (self.action, "action"),
            (self.proposition, "proposition"),
            (self.condition, "condition"),
            (self.reason, "reason"),
        ]
        .into_iter()
        .filter_map(|(on, name)| on.then_some(name))
        .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Which party executes the action carried by a CA once it is performed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionPerformer {
    Sender,
    Receiver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommunicativeActDescription {
    pub name: String,
    pub searle_class: SearleClass,
    pub content: ContentSchema,
    #[serde(default)]
    pub fp: Condition,
    #[serde(default)]
    pub re: Vec<Effect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_performer: Option<ActionPerformer>,
}

impl CommunicativeActDescription {
    pub fn validate(&self) -> Result<(), DescriptionError> {
        let schema_error = |reason: String| DescriptionError::Schema {
            name: self.name.clone(),
            reason,
        };
        let required = self.searle_class.required_content();
        if self.content != required {
            return Err(schema_error(format!(
                "{} act must carry content {required}, found {}",
                self.searle_class.as_str(),
                self.content
            )));
        }
        if self.action_performer.is_some() && !self.content.action {
            return Err(schema_error(
                "actionPerformer set on a CA without action content".into(),
            ));
        }
        Ok(())
    }

    /// Directive act whose content is exactly one action.
    pub fn is_action_directive(&self) -> bool {
        self.searle_class == SearleClass::Directive && self.content == SearleClass::Directive.required_content()
    }
}
