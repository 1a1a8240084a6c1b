//! Files written for an analyzed cell.

use std::path::Path;

use microtube::io::{write_contours, write_measures, write_tensor, FieldDump};
use microtube::levelset::{contour_loops, curvature, LevelSet};
use microtube::optimizer::CellAnalysis;
use microtube::stokes::PointSampler;
use microtube::Result;

/// Level set, density, curvature, cell velocities and pressures, and diffusion correctors.
pub fn cell_fields(psi: &LevelSet, cell: &CellAnalysis) -> Result<FieldDump> {
    let grid = *psi.grid();
    let mut dump = FieldDump::new(grid)
        .with_scalar("psi", psi.values())?
        .with_scalar("rho", cell.rho.field().values())?
        .with_scalar("curvature", curvature(psi).values())?;
    for s in &cell.stokes {
        let k = s.direction + 1;
        let nodes: Vec<[f64; 2]> = (0..grid.len())
            .map(|idx| {
                let (i, j) = grid.coords(idx);
                let [x, y] = grid.node_position(i, j);
                s.velocity.sample_point(x, y)
            })
            .collect();
        dump = dump
            .with_vector(&format!("u_{k}"), &nodes)?
            .with_scalar(&format!("speed_{k}"), s.velocity.node_magnitude().values())?
            .with_scalar(&format!("p_{k}"), s.pressure.to_nodes().values())?;
    }
    for c in &cell.correctors {
        let k = c.direction + 1;
        dump = dump.with_scalar(&format!("pi_{k}"), c.corrector.to_nodes().values())?;
    }
    Ok(dump)
}

/// `K.csv`, `D.csv`, `measures.csv`, `contour.csv` and `<stem>.vtk` in `dir`.
pub fn write_cell(dir: &Path, stem: &str, psi: &LevelSet, cell: &CellAnalysis) -> Result<()> {
    write_tensor(&dir.join("K.csv"), &cell.permeability.k)?;
    write_tensor(&dir.join("D.csv"), &cell.diffusion.d)?;
    write_measures(
        &dir.join("measures.csv"),
        cell.measures.perimeter,
        cell.measures.area,
    )?;
    write_contours(&dir.join("contour.csv"), &contour_loops(psi))?;
    cell_fields(psi, cell)?.write(&dir.join(format!("{stem}.vtk")))
}
