//! Two-sided fair re-ranking for recommender systems.
//!
//! The crate has three layers:
//!
//! - [`allocator`] divides each provider's outstanding minimum exposure
//!   across upcoming update intervals with the Talmud rule, giving a
//!   per-interval exposure target.
//! - [`regret`] maps slate quality to a regret-aware satisfaction degree and
//!   provider unfairness to a fairness degree.
//! - [`reranker`] serves users online: each slate maximises satisfaction
//!   minus dual exposure prices, and the prices follow a mirror-descent step
//!   toward the target exposure.
//!
//! [`metrics`] evaluates runs (NDCG, ESP, Gini, MMR, Var) and [`synthetic`]
//! generates skewed test markets.

pub mod allocator;
pub mod domain;
pub mod error;
pub mod metrics;
pub mod numeric;
pub mod regret;
pub mod reranker;
pub mod session_log;
pub mod simplex;
pub mod synthetic;

pub use domain::{
    position_weight, position_weights, Arrival, ArrivalSchedule, Dataset, DemandWeighting,
    ForecastMethod, RegretAnchor, PreferenceStore, ProviderCatalog, RunConfig, Slate, SolverMode,
    ValidationReport,
};
pub use error::{Error, Result};
