//! Fixtures shared by the benchmarks.

use covertlink_core::scenario::{load_scenario, Scenario};

/// The shipped three-user scenario.
pub fn sec6() -> Scenario {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/paper_sec6.json");
    load_scenario(&std::fs::read_to_string(path).expect("scenario file")).expect("valid scenario")
}
