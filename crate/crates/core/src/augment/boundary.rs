use crate::error::{Error, Result};
use crate::volume::{linear_index, RegionMask};

/// Fraction of masked voxels with at least one 6-neighbor outside the mask.
/// Neighbors beyond the grid count as outside.
pub fn boundary_ratio(mask: &RegionMask) -> Result<f64> {
    if mask.voxel_count() == 0 {
        return Err(Error::EmptyMask);
    }
    let [nx, ny, nz] = mask.dims();
    let inside = |x: isize, y: isize, z: isize| {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < nx
            && (y as usize) < ny
            && (z as usize) < nz
            && mask.contains(linear_index(mask.dims(), x as usize, y as usize, z as usize))
    };
    const NEIGHBORS: [(isize, isize, isize); 6] =
        [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)];
    let mut surface = 0usize;
    for z in 0..nz as isize {
        for y in 0..ny as isize {
            for x in 0..nx as isize {
                if !inside(x, y, z) {
                    continue;
                }
                if NEIGHBORS.iter().any(|(dx, dy, dz)| !inside(x + dx, y + dy, z + dz)) {
                    surface += 1;
                }
            }
        }
    }
    Ok(surface as f64 / mask.voxel_count() as f64)
}
