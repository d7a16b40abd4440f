//! Uniform random policy over legal actions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::path::{Action, ActionSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no legal action")]
pub struct NoLegalAction;

/// Draws uniformly from `legal` (ascending digit order). The draw depends
/// only on `seed` and `step_index`, so episodes replay exactly.
pub fn random_walk_action(legal: ActionSet, seed: u64, step_index: u64) -> Result<Action, NoLegalAction> {
    if legal.is_empty() {
        return Err(NoLegalAction);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step_index);
    let k = rng.random_range(0..legal.len());
    Ok(legal.iter().nth(k).expect("index below len"))
}
