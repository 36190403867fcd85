//! Six-link planar biped: model, kinematics, dynamics, step planning and
//! closed-loop rollout.

pub mod dynamics;
pub mod kinematics;
pub mod model;
pub mod plan;
pub mod scenario;
pub mod track;

pub use dynamics::{impact_check, Contact, ImpactCheck};
pub use kinematics::{Biped, ComState, Joints};
pub use model::{BipedModel, FootParams, LinkParams};
pub use plan::{plan_step, PlanReport, PlannerConfig, QuinticPlan, StepTarget};
pub use scenario::{
    load_full_scenario, parse_full_scenario, run_full_scenario, BipedRunConfig, FeasibilityReport, FullRun,
};
pub use track::{rollout, Gains};
