//! Multimodal demonstration understanding toolkit.
//!
//! The pipeline runs from raw recordings to a simulated robot:
//!
//! 1. [`demo`] loads a recording and resolves its per-frame force series.
//! 2. [`orchestrator`] prompts a vision-language model through a
//!    [`backend::VlmClient`], modality by modality, and extracts a task plan.
//! 3. [`plan`] parses and scores plans against ground truth.
//! 4. [`dsl`] parses, validates and interprets generated skill programs
//!    against the kinematic workspace in [`sim`].
//! 5. [`eval`] drives batch evaluation and writes metric reports.

pub mod aliases;
pub mod backend;
pub mod demo;
pub mod dsl;
pub mod eval;
pub mod modality;
pub mod numfmt;
pub mod orchestrator;
pub mod plan;
pub mod sim;
pub mod skills;

pub use backend::{Message, VlmClient};
pub use demo::{load_recording, MultimodalDemo};
pub use modality::{Modality, ModalitySet};
pub use plan::{ActionPlan, ActionStep, PlanMetrics};
pub use skills::{Direction, Hand, Skill};
pub use dsl::{parse_program, Program};
pub use eval::{EvalConfig, EvalError, MetricsTable};
pub use orchestrator::{Strategy, StrategyKind};
pub use sim::{TaskSpec, WorldState};
