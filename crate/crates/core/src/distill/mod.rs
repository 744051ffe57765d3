//! Zero-shot teacher-label augmentation: train a teacher on the source
//! domain, score the target domain with it, and train students on the
//! target domain alone.

mod augment;
mod mapping;
mod pipeline;
mod presets;
mod teacher;

pub use augment::{augment, noise_teacher, provenance_timestamp};
pub use mapping::TaskMapping;
pub use pipeline::{
    generate, metrics_text, model_id, run_pipeline, PipelineConfig, PipelineOutcome, SeedData, TeacherLabels,
};
pub use presets::{student_config, teacher_config, Surface};
pub use teacher::train_teacher;
