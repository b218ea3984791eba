//! Enumeration and logical reduction of second-order Horn metarule
//! fragments: θ-subsumption, k-bounded entailment via SLD-deduction, and
//! k-bounded derivation under linear SLD-resolution.

pub mod clause;
pub mod cli;
mod engine;
pub mod fragments;
pub mod reduction;
pub mod resolution;
pub mod subsumption;
pub mod theory;

pub use engine::{Guard, Limits};

use std::sync::Once;

static THREAD_INIT: Once = Once::new();

/// Honor METAREDUCE_THREADS for internal parallelism; defaults to the
/// machine's cores. Results are deterministic regardless of thread count.
pub fn init_threads() {
    THREAD_INIT.call_once(|| {
        if let Ok(v) = std::env::var("METAREDUCE_THREADS") {
            if let Ok(n) = v.parse::<usize>() {
                if n >= 1 {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    });
}
