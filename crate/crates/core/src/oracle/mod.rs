//! Value-oracle access to monotone submodular objectives.

mod counting;
mod instance;
mod objective;

pub use counting::CountingOracle;
pub use instance::{Instance, InstanceFile};
pub use objective::{
    check_monotone_submodular, Objective, SetFunction, TableFunction, Violation, CHECK_MAX_ELEMENTS,
};
