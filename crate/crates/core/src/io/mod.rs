//! On-disk formats: run configuration, field dumps, tables and images.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub mod config;
pub mod raster;
pub mod table;
pub mod vtk;

pub use config::{OutputConfig, RunConfig};
pub use raster::{read_mask, read_pgm, seam_mismatches, tile, write_pgm};
pub use table::{
    read_history, read_tensor, write_contours, write_history, write_measures, write_tensor,
};
pub use vtk::{read_level_set, read_scalar_csv, write_scalar_csv, FieldDump};

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
