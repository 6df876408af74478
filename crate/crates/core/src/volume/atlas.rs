use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::{load_nifti, Affine, DType, Volume3D};
use crate::error::{Error, Result};

const LABEL_INTEGER_TOL: f32 = 1e-6;
const AFFINE_TOL: f32 = 1e-4;

/// Integer label grid plus a region lookup table. Label 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct ParcellationAtlas {
    dims: [usize; 3],
    spacing: [f32; 3],
    affine: Affine,
    labels: Vec<u32>,
    lut: BTreeMap<u32, String>,
}

impl ParcellationAtlas {
    /// Build an atlas from a label volume whose voxels must be
    /// non-negative integers (within 1e-6).
    pub fn from_volume(labels: &Volume3D, lut: BTreeMap<u32, String>) -> Result<Self> {
        let ids = labels
            .data()
            .iter()
            .enumerate()
            .map(|(index, &value)| {
                let rounded = value.round();
                if (value - rounded).abs() > LABEL_INTEGER_TOL || rounded < 0.0 {
                    Err(Error::NonIntegerLabels { index, value })
                } else {
                    Ok(rounded as u32)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_labels(labels.dims(), labels.spacing(), *labels.affine(), ids, lut)
    }

    pub fn from_labels(
        dims: [usize; 3],
        spacing: [f32; 3],
        affine: Affine,
        labels: Vec<u32>,
        lut: BTreeMap<u32, String>,
    ) -> Result<Self> {
        if labels.len() != dims.iter().product::<usize>() {
            return Err(Error::InvalidVolume(format!(
                "label length {} does not match dims {dims:?}",
                labels.len()
            )));
        }
        if lut.contains_key(&0) {
            return Err(Error::InvalidLut("background id 0 listed in lut".into()));
        }
        let present: BTreeSet<u32> = labels.iter().copied().filter(|&l| l != 0).collect();
        if let Some(&missing) = present.iter().find(|id| !lut.contains_key(id)) {
            return Err(Error::UnknownRegionInVolume(missing));
        }
        Ok(ParcellationAtlas {
            dims,
            spacing,
            affine,
            labels,
            lut,
        })
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

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn lut(&self) -> &BTreeMap<u32, String> {
        &self.lut
    }

    /// Region ids in ascending order.
    pub fn region_ids(&self) -> Vec<u32> {
        self.lut.keys().copied().collect()
    }

    pub fn region_count(&self) -> usize {
        self.lut.len()
    }

    /// Label grid as a volume of the given on-disk type.
    pub fn to_volume(&self, dtype: DType) -> Result<Volume3D> {
        let data = self.labels.iter().map(|&l| l as f32).collect();
        Volume3D::new(self.dims, self.spacing, self.affine, data, dtype)
    }

    /// Mask of voxels whose label is in `ids`.
    pub fn region_mask(&self, ids: &BTreeSet<u32>) -> Result<RegionMask> {
        if let Some(&unknown) = ids.iter().find(|id| !self.lut.contains_key(id)) {
            return Err(Error::UnknownRegionId(unknown));
        }
        let bits = self.labels.iter().map(|l| ids.contains(l)).collect();
        Ok(RegionMask::from_bits(self.dims, bits))
    }

    pub fn brain_mask(&self) -> RegionMask {
        let bits = self.labels.iter().map(|&l| l != 0).collect();
        RegionMask::from_bits(self.dims, bits)
    }

    /// Number of voxels with a nonzero label.
    pub fn brain_voxel_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    /// Voxel count for every lut region (zero for regions absent from the grid).
    pub fn region_voxel_counts(&self) -> BTreeMap<u32, usize> {
        let mut counts: BTreeMap<u32, usize> = self.lut.keys().map(|&id| (id, 0)).collect();
        for l in self.labels.iter().filter(|&&l| l != 0) {
            *counts.get_mut(l).expect("labels validated against lut") += 1;
        }
        counts
    }
}

/// Load a label volume and its `id<TAB>name` lookup table.
pub fn load_atlas(label_path: impl AsRef<Path>, lut_path: impl AsRef<Path>) -> Result<ParcellationAtlas> {
    let labels = load_nifti(label_path)?;
    let lut_path = lut_path.as_ref();
    let text = fs::read_to_string(lut_path).map_err(|e| Error::io(lut_path, e))?;
    ParcellationAtlas::from_volume(&labels, parse_lut(&text)?)
}

/// Parse a TSV lookup table. Blank lines and `#` comments are skipped.
pub fn parse_lut(text: &str) -> Result<BTreeMap<u32, String>> {
    let mut lut = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (id, name) = line
            .split_once('\t')
            .ok_or_else(|| Error::InvalidLut(format!("line {}: expected id<TAB>name", lineno + 1)))?;
        let id: u32 = id
            .trim()
            .parse()
            .map_err(|_| Error::InvalidLut(format!("line {}: bad id {id:?}", lineno + 1)))?;
        if id == 0 {
            return Err(Error::InvalidLut("background id 0 listed in lut".into()));
        }
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::InvalidLut(format!("line {}: empty name", lineno + 1)));
        }
        if lut.insert(id, name.to_string()).is_some() {
            return Err(Error::DuplicateLutId(id));
        }
    }
    Ok(lut)
}

/// Succeeds iff dims are equal and affines agree element-wise within 1e-4.
pub fn validate_alignment(vol: &Volume3D, atlas: &ParcellationAtlas) -> Result<()> {
    if vol.dims() != atlas.dims() {
        return Err(Error::DimsMismatch {
            left: vol.dims(),
            right: atlas.dims(),
        });
    }
    for row in 0..4 {
        for col in 0..4 {
            let (left, right) = (vol.affine()[row][col], atlas.affine()[row][col]);
            if (left - right).abs() > AFFINE_TOL {
                return Err(Error::AffineMismatch {
                    row,
                    col,
                    left,
                    right,
                });
            }
        }
    }
    Ok(())
}

/// One boolean per voxel with a cached popcount.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    dims: [usize; 3],
    bits: Vec<bool>,
    voxel_count: usize,
}

impl RegionMask {
    pub fn from_bits(dims: [usize; 3], bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), dims.iter().product::<usize>(), "mask length");
        let voxel_count = bits.iter().filter(|&&b| b).count();
        RegionMask {
            dims,
            bits,
            voxel_count,
        }
    }

    pub fn empty(dims: [usize; 3]) -> Self {
        Self::from_bits(dims, vec![false; dims.iter().product()])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn voxel_count(&self) -> usize {
        self.voxel_count
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn intersect(&self, other: &RegionMask) -> RegionMask {
        assert_eq!(self.dims, other.dims);
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        RegionMask::from_bits(self.dims, bits)
    }
}
