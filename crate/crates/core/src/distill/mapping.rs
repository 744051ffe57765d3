use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domaingen::Task;
use crate::error::{Error, Result};
use crate::ranker::RankerConfig;

/// Ordered (teacher head → student slot) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskMapping {
    pub pairs: Vec<(Task, String)>,
}

impl TaskMapping {
    pub fn new(pairs: Vec<(Task, String)>) -> Result<Self> {
        let m = Self { pairs };
        m.check_injective()?;
        Ok(m)
    }

    /// click → ctr_aux, trail → trail_aux.
    pub fn homepage() -> Self {
        Self {
            pairs: vec![
                (Task::Click, "ctr_aux".to_string()),
                (Task::Trail, "trail_aux".to_string()),
            ],
        }
    }

    /// continue_watch → cw_aux.
    pub fn radio() -> Self {
        Self {
            pairs: vec![(Task::ContinueWatch, "cw_aux".to_string())],
        }
    }

    pub fn slots(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|(_, s)| s.as_str())
    }

    pub fn check_injective(&self) -> Result<()> {
        let mut heads = BTreeSet::new();
        let mut slots = BTreeSet::new();
        for (task, slot) in &self.pairs {
            if slot.is_empty() || slot.chars().any(|c| c.is_whitespace() || c == ',') {
                return Err(Error::Config(format!("invalid slot name `{slot}`")));
            }
            if !heads.insert(*task) {
                return Err(Error::Config(format!("teacher head `{task}` is mapped twice")));
            }
            if !slots.insert(slot.as_str()) {
                return Err(Error::Config(format!("slot `{slot}` is the target of two heads")));
            }
        }
        Ok(())
    }

    /// Every mapped head must be a serving head of the teacher.
    pub fn check_teacher(&self, teacher: &RankerConfig) -> Result<()> {
        self.check_injective()?;
        for (task, _) in &self.pairs {
            match teacher.head(*task) {
                Some(h) if h.serving => {}
                _ => {
                    return Err(Error::Config(format!(
                        "mapping names teacher head `{task}`, which the teacher does not serve"
                    )))
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for TaskMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs.iter().map(|(t, s)| format!("{t}->{s}")).collect();
        f.write_str(&parts.join(","))
    }
}
