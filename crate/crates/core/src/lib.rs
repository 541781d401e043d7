//! Uniformly conservative exploration for finite-horizon tabular MDPs.
//!
//! The crate is organised bottom-up:
//!
//! * [`mdp`]: the MDP type, exact dynamic-programming oracles, rollout
//!   sampling and the ergodicity / single-step-gap checkers.
//! * [`env`]: benchmark environments (inventory control, random ergodic
//!   MDPs) and uniform-random warm-start data.
//! * [`estimation`]: visit counts, the empirical model and the exploration
//!   bonus.
//! * [`planning`]: optimistic and conservative value iteration, and
//!   optimistic evaluation of the conservative policy.
//! * [`shield`]: the internal-state shield, the meta-episode controller and
//!   the ground-truth violation monitor.
//! * [`agent`]: the three agents compared in experiments.
//! * [`harness`]: experiment configuration, the multi-seed runner and
//!   CSV/JSON export.
//!
//! # Time indexing
//!
//! Steps are zero-based throughout: an episode has steps `0..H`. Value and
//! Q tables follow the terminal convention `V[H-1] = Q[H-1] = 0`, so the
//! action taken at the last step of an episode earns nothing in value terms
//! (its transition is still simulated and recorded). With `R ≡ 1` the
//! optimal value from step 0 is therefore `H - 1`, not `H`.

pub mod agent;
pub mod env;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod mdp;
pub mod planning;
pub mod rng;
pub mod shield;

pub use error::{Error, ErrorReport, Result};
