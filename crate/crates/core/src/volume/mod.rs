//! Volumes, parcellation atlases, and region masks.
//!
//! Every volume is held as `f32` in x-fastest order regardless of the
//! on-disk datatype; the original datatype is kept so that saving
//! re-encodes to it.

mod atlas;
mod nifti;

pub use atlas::{load_atlas, parse_lut, validate_alignment, ParcellationAtlas, RegionMask};
pub use nifti::{load_nifti, read_nifti, save_nifti, write_nifti, NIFTI1_HEADER_SIZE, NIFTI1_MAGIC};

use crate::error::{Error, Result};

/// On-disk element type of a volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    U8,
    I16,
    F32,
}

impl DType {
    pub fn nifti_code(self) -> i16 {
        match self {
            DType::U8 => 2,
            DType::I16 => 4,
            DType::F32 => 16,
        }
    }

    pub fn from_nifti_code(code: i16) -> Result<Self> {
        match code {
            2 => Ok(DType::U8),
            4 => Ok(DType::I16),
            16 => Ok(DType::F32),
            other => Err(Error::UnsupportedDtype(other)),
        }
    }

    pub fn bytes_per_voxel(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::I16 => 2,
            DType::F32 => 4,
        }
    }
}

/// Linear intensity scaling stored alongside integer payloads
/// (`value = raw * slope + inter`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub slope: f32,
    pub inter: f32,
}

pub type Affine = [[f32; 4]; 4];

pub fn diagonal_affine(spacing: [f32; 3]) -> Affine {
    [
        [spacing[0], 0.0, 0.0, 0.0],
        [0.0, spacing[1], 0.0, 0.0],
        [0.0, 0.0, spacing[2], 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// A dense 3D scalar grid with voxel spacing and a voxel-to-world affine.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    dims: [usize; 3],
    spacing: [f32; 3],
    affine: Affine,
    data: Vec<f32>,
    dtype: DType,
    scaling: Option<Scaling>,
}

impl Volume3D {
    pub fn new(
        dims: [usize; 3],
        spacing: [f32; 3],
        affine: Affine,
        data: Vec<f32>,
        dtype: DType,
    ) -> Result<Self> {
        let vol = Volume3D {
            dims,
            spacing,
            affine,
            data,
            dtype,
            scaling: None,
        };
        vol.validate()?;
        Ok(vol)
    }

    /// `f32` volume with unit spacing and a diagonal affine.
    pub fn from_data(dims: [usize; 3], data: Vec<f32>) -> Result<Self> {
        let spacing = [1.0; 3];
        Self::new(dims, spacing, diagonal_affine(spacing), data, DType::F32)
    }

    pub fn zeros(dims: [usize; 3]) -> Result<Self> {
        Self::from_data(dims, vec![0.0; dims.iter().product()])
    }

    pub(crate) fn with_scaling(mut self, scaling: Option<Scaling>) -> Self {
        self.scaling = scaling;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::InvalidVolume(format!(
                "dims must be positive, got {:?}",
                self.dims
            )));
        }
        if self.data.len() != self.voxel_count() {
            return Err(Error::InvalidVolume(format!(
                "data length {} does not match dims {:?}",
                self.data.len(),
                self.dims
            )));
        }
        if self.spacing.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidVolume(format!(
                "spacing must be positive, got {:?}",
                self.spacing
            )));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData(i));
        }
        Ok(())
    }

    /// A volume sharing this one's geometry and dtype but holding `data`.
    pub fn with_data(&self, data: Vec<f32>) -> Result<Self> {
        let vol = Volume3D {
            data,
            ..self.clone_meta()
        };
        vol.validate()?;
        Ok(vol)
    }

    fn clone_meta(&self) -> Self {
        Volume3D {
            dims: self.dims,
            spacing: self.spacing,
            affine: self.affine,
            data: Vec::new(),
            dtype: self.dtype,
            scaling: self.scaling,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.spacing
    }

    pub fn affine(&self) -> &Affine {
        &self.affine
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn scaling(&self) -> Option<Scaling> {
        self.scaling
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        linear_index(self.dims, x, y, z)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.index(x, y, z)]
    }
}

#[inline]
pub(crate) fn linear_index(dims: [usize; 3], x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}
