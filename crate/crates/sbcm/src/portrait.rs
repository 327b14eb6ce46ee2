use rayon::prelude::*;
use sbcm_core::reduced::{basin_cell, find_fixed_points, nullclines, CliqueReduction, GridSpec, PhasePortrait, FIXED_POINT_STARTS};
use sbcm_core::ModelParams;

use crate::error::Result;

/// Same result as `sbcm_core::reduced::phase_portrait`, with basin cells integrated in parallel.
pub fn phase_portrait_parallel(red: &CliqueReduction, params: &ModelParams, grid: &GridSpec) -> Result<PhasePortrait> {
    let fixed_points = find_fixed_points(red, params, FIXED_POINT_STARTS)?;
    let nullclines = nullclines(red, params, grid)?;
    let points: Vec<(f64, f64)> = grid.points().collect();
    let basins = points
        .par_iter()
        .map(|&(x1, x2)| basin_cell(red, params, x1, x2, &fixed_points))
        .collect::<sbcm_core::Result<Vec<_>>>()?;
    Ok(PhasePortrait {
        grid: *grid,
        fixed_points,
        nullclines,
        basins,
    })
}
