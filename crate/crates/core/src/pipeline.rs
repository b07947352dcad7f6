//! The init, run and track chain shared by the command-line driver and the
//! acceptance suite.

use crate::error::Result;
use crate::evolution::{run, Control, Trajectory};
use crate::field::AxialField;
use crate::io::RunConfig;
use crate::modulation::{ModulationRecord, ModulationState, ProfileFamily, Tracker};

#[derive(Debug, Clone)]
pub struct TrackedRun {
    pub trajectory: Trajectory,
    pub modulation: Vec<ModulationRecord>,
}

/// Evolves `u0` under `cfg` and decomposes every `diagnostic_stride`-th
/// record, starting Newton from `guess`. A decomposition that fails after
/// the first one halts the run with the failure as the halt reason.
pub fn tracked_run(
    u0: &AxialField,
    guess: ModulationState,
    cfg: &RunConfig,
    family: &ProfileFamily,
) -> Result<TrackedRun> {
    let mut tracker = Tracker::new(family, cfg.tracker(), guess);
    let every = cfg.run.diagnostic_stride.max(1);
    let mut seen = 0u64;
    let limits = cfg.limits(family.ground().q0, guess.s);
    let trajectory = run(u0, cfg.stepper(), limits, |u, _| {
        let k = seen;
        seen += 1;
        if !k.is_multiple_of(every) {
            return Ok(Control::Continue);
        }
        match tracker.observe(u) {
            Ok(_) => Ok(Control::Continue),
            Err(e) if tracker.is_empty() => Err(e),
            Err(e) => Ok(Control::Halt(format!("modulation lost at t = {}: {e}", u.time))),
        }
    })?;
    Ok(TrackedRun { trajectory, modulation: tracker.records() })
}
