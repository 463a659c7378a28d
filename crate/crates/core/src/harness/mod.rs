//! Configuration, file I/O and run orchestration.

mod config;
mod mot;
mod run;

pub use config::{RunConfig, CONFIG_KEYS};
pub use mot::{
    affinity_path, read_detections, read_mot, read_trajectories, write_detections, write_scenario,
    write_tracks, write_trajectories, Detections, MotFile, AFFINITY_HEADER,
};
pub use run::{
    ablate, ablation_presets, evaluate_run, hypothesis, parse_grid, run_scenario, run_tracker, sweep,
    AblationRow, CellResult, FrameOutput, GridAxis, ScenarioSummary,
};

use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    // Temp files are created owner-only; outputs get ordinary permissions.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(|e| Error::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
