//! Axis-aligned slice previews as binary PGM (P5) images.

use crate::error::{Error, Result};
use crate::volume::Volume3D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Slice `index` along `axis`, as `(width, height, row-major values)`.
///
/// The two remaining axes map to columns and rows in ascending order
/// (z: x by y, y: x by z, x: y by z).
pub fn extract_slice(vol: &Volume3D, axis: Axis, index: usize) -> Result<(usize, usize, Vec<f32>)> {
    let dims = vol.dims();
    let a = axis.index();
    if index >= dims[a] {
        return Err(Error::InvalidParameter(format!(
            "slice index {index} out of range for axis {axis:?} with {} voxels",
            dims[a]
        )));
    }
    let (col_axis, row_axis) = match axis {
        Axis::X => (1, 2),
        Axis::Y => (0, 2),
        Axis::Z => (0, 1),
    };
    let (width, height) = (dims[col_axis], dims[row_axis]);
    let mut values = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let mut p = [0usize; 3];
            p[a] = index;
            p[col_axis] = col;
            p[row_axis] = row;
            values.push(vol.get(p[0], p[1], p[2]));
        }
    }
    Ok((width, height, values))
}

/// Encode a slice as P5 PGM with min-max scaling to 0..=255. A constant
/// slice maps to all zeros.
pub fn slice_pgm(vol: &Volume3D, axis: Axis, index: usize) -> Result<Vec<u8>> {
    let (width, height, values) = extract_slice(vol, axis, index)?;
    let min = values.iter().copied().fold(f32::INFINITY, f32::min);
    let max = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let range = (max - min) as f64;
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|&v| {
        if range > 0.0 {
            ((v - min) as f64 / range * 255.0).round() as u8
        } else {
            0
        }
    }));
    Ok(out)
}
