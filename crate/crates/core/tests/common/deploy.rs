//! Deploy round-trip and rollback over every shipped level.

use thunder_core::levels::LevelError;
use thunder_core::{Emulator, LevelRegistry};

use super::PROJECT;

pub const LEVELS: &[&str] = &[
    "thunder/a1openbucket",
    "thunder/a2finance",
    "thunder/a3password",
    "thunder/a4error",
    "thunder/a5power",
    "thunder/a6container",
];

pub fn fresh() -> (Emulator, LevelRegistry) {
    let mut emu = super::emulator(42);
    emu.create_project(PROJECT, "Player").unwrap();
    (emu, LevelRegistry::shipped())
}

/// Snapshot, create, destroy, snapshot: the resources must match.
pub fn check_round_trip() -> Result<(), String> {
    for name in LEVELS {
        let (mut emu, reg) = fresh();
        let level = reg.get(name).map_err(|e| e.to_string())?;
        let before = emu.snapshot().resources_view();
        emu.create_level(level, PROJECT, None)
            .map_err(|e| format!("{name}: {e}"))?;
        if emu.snapshot().resources_view() == before {
            return Err(format!("{name} created nothing"));
        }
        let record = emu.destroy_level().map_err(|e| format!("{name}: {e}"))?;
        if record.level_name != *name {
            return Err(format!("{name}: destroyed {}", record.level_name));
        }
        if emu.snapshot().resources_view() != before {
            return Err(format!("{name}: destroy left resources behind"));
        }
        if !matches!(emu.destroy_level(), Err(LevelError::Deploy(_))) {
            return Err(format!("{name}: a second destroy succeeded"));
        }
    }
    Ok(())
}

/// Fails create at every step of every level; each must leave the state
/// as it was (policy etags aside). Returns the number of faults injected.
pub fn check_fault_injection() -> Result<usize, String> {
    let mut injected = 0;
    for name in LEVELS {
        let (emu0, reg) = fresh();
        let level = reg.get(name).map_err(|e| e.to_string())?;
        if level.step_count == 0 {
            return Err(format!("{name} has no steps"));
        }
        for fail_at in 0..level.step_count {
            let mut emu = emu0.clone();
            let mut before = emu.snapshot();
            if emu.create_level(level, PROJECT, Some(fail_at)).is_ok() {
                return Err(format!("{name}: fault at {fail_at} did not fail"));
            }
            let mut after = emu.snapshot();
            for s in before.projects.values_mut().chain(after.projects.values_mut()) {
                s.policy.etag.clear();
            }
            if after != before {
                return Err(format!("{name}: fault at {fail_at} was not rolled back"));
            }
            if emu.active_deployment().is_some() {
                return Err(format!("{name}: fault at {fail_at} left a deployment"));
            }
            injected += 1;
        }
        // One past the last step is never reached.
        let mut emu = emu0.clone();
        emu.create_level(level, PROJECT, Some(level.step_count))
            .map_err(|e| format!("{name}: fault past the end: {e}"))?;
    }
    Ok(injected)
}
