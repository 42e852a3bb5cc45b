//! Scenario catalogue, runner and report emitters behind the `clab` binary.

pub mod catalogue;
pub mod literal;
pub mod report;
pub mod scenario;

pub use report::{emit, Format};
pub use scenario::{run_scenario, RunOptions, RunReport, Scenario, Task, Verdict};

/// Process exit code for an error: 3 when a finite budget ran out, 2 otherwise.
pub fn exit_code(e: &clab_core::ClabError) -> i32 {
    if e.is_budget() {
        3
    } else {
        2
    }
}
