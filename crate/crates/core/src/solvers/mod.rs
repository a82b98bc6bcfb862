//! One constructor per algorithm. Every solver exposes its update formula
//! through [`crate::engine::Solver::step`] and its certificate data through
//! the returned [`crate::engine::StepPlan`].

pub mod cp;
pub mod dr;
pub mod forward;
pub mod gist;
pub mod km;
pub mod newton;
pub mod prox;
pub mod schedule;

pub use cp::{make_cp, CpConfig, CpRegime, CpSolver};
pub use dr::{make_dr, DouglasRachfordSolver};
pub use forward::{make_fb, make_graddesc, FbMode, ForwardBackwardSolver};
pub use gist::{make_gist, GistRegime, GistSolver};
pub use km::{make_km, KmSolver};
pub use newton::{make_newton, NewtonSolver};
pub use prox::{make_prox, make_prox_full, ProxPointSolver, ProxSchedule};
pub use schedule::{ScalarSchedule, ScheduleRule};
