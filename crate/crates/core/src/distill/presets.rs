//! Architectures for the teacher and the two student surfaces.

use serde::{Deserialize, Serialize};

use super::mapping::TaskMapping;
use crate::domaingen::Task;
use crate::ranker::{RankerConfig, TaskHead};

/// Which student surface an experiment models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    /// Serves click, trail and discovery; distills click and trail.
    Homepage,
    /// Serves radio engagement; distills continue-watch through a
    /// non-serving head.
    Radio,
}

impl Surface {
    pub fn mapping(self) -> TaskMapping {
        match self {
            Surface::Homepage => TaskMapping::homepage(),
            Surface::Radio => TaskMapping::radio(),
        }
    }
}

pub fn teacher_config(input_dim: usize, init_seed: u64) -> RankerConfig {
    RankerConfig {
        input_dim,
        trunk: vec![192, 96],
        heads: [Task::Click, Task::Trail, Task::ContinueWatch, Task::Discovery]
            .into_iter()
            .map(|t| TaskHead::new(t, vec![32]))
            .collect(),
        init_seed,
    }
}

/// The distilled student; `without_aux()` gives its control twin.
pub fn student_config(surface: Surface, input_dim: usize, init_seed: u64) -> RankerConfig {
    let heads = match surface {
        Surface::Homepage => vec![
            TaskHead::new(Task::Click, vec![4]).with_aux("ctr_aux"),
            TaskHead::new(Task::Trail, vec![4]).with_aux("trail_aux"),
            TaskHead::new(Task::Discovery, vec![4]),
        ],
        Surface::Radio => vec![
            TaskHead::new(Task::RadioEngagement, vec![4]),
            TaskHead::new(Task::ContinueWatch, vec![4]).with_aux("cw_aux").non_serving(),
        ],
    };
    RankerConfig {
        input_dim,
        trunk: vec![4],
        heads,
        init_seed,
    }
}
