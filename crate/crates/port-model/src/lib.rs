//! Domain model for seaport power-logistics scheduling: static port
//! parameters, vessel-arrival tasks, the day-ahead bidding problem (full
//! mixed-integer description and its surrogate-convexified conic form), the
//! real-time re-dispatch LP, settlement arithmetic, and a full-solution
//! validator.

pub mod conic;
pub mod cost;
pub mod day_ahead;
pub mod error;
pub mod fixtures;
pub mod mixed_integer;
pub mod real_time;
pub mod types;
pub mod validate;

pub use conic::{Cone, ConicProgram, ParamMaps, SparseMat};
pub use cost::{deviation_split, evaluate_cost};
pub use day_ahead::{
    build_day_ahead_convex, check_static_feasibility, BuildOptions, ConvexDayAhead, DayAheadVars,
    EtaLayout, SurrogateFix,
};
pub use error::{PortError, Result};
pub use fixtures::{load_fixture, load_fixture_with_horizon, task_from_json, DEFAULT_HORIZON};
pub use mixed_integer::{build_day_ahead_mixed_integer, MiRow, MiVar, MixedIntegerDescription, Rel, VarKind};
pub use real_time::{build_real_time, DayAheadFix, RealTimeLp, RealTimeVars};
pub use types::{
    DiscreteAssignment, EssParams, ImbalancePrices, Placement, ScheduleSolution, StaticParams,
    Task, VesselSpec, DT, TOL,
};
pub use validate::{validate_schedule, Violation, ViolationReport};
