//! Single-file NIfTI-1 (`.nii`) reader and writer.
//!
//! Supports datatypes u8 (2), i16 (4) and f32 (16). Byte order is detected
//! from the `dim[0]` range check; files are always written little-endian.

use std::fs;
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};

use super::{Affine, DType, Scaling, Volume3D};
use crate::error::{Error, Result};

pub const NIFTI1_HEADER_SIZE: usize = 348;
pub const NIFTI1_MAGIC: &[u8; 4] = b"n+1\0";

const MIN_VOX_OFFSET: usize = 352;

// header field offsets
const OFF_DIM: usize = 40;
const OFF_DATATYPE: usize = 70;
const OFF_BITPIX: usize = 72;
const OFF_PIXDIM: usize = 76;
const OFF_VOX_OFFSET: usize = 108;
const OFF_SCL_SLOPE: usize = 112;
const OFF_SCL_INTER: usize = 116;
const OFF_XYZT_UNITS: usize = 123;
const OFF_DESCRIP: usize = 148;
const OFF_QFORM_CODE: usize = 252;
const OFF_SFORM_CODE: usize = 254;
const OFF_QUATERN: usize = 256;
const OFF_SROW: usize = 280;
const OFF_MAGIC: usize = 344;

pub fn load_nifti(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_nifti(&bytes)
}

pub fn save_nifti(vol: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_nifti(vol)).map_err(|e| Error::io(path, e))
}

/// Decode a single-file NIfTI-1 image held in memory.
pub fn read_nifti(bytes: &[u8]) -> Result<Volume3D> {
    if bytes.len() < NIFTI1_HEADER_SIZE {
        return Err(Error::TruncatedFile {
            expected: NIFTI1_HEADER_SIZE,
            found: bytes.len(),
        });
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[OFF_MAGIC..OFF_MAGIC + 4]);
    if &magic != NIFTI1_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let dim0_le = LittleEndian::read_i16(&bytes[OFF_DIM..]);
    let dim0_be = BigEndian::read_i16(&bytes[OFF_DIM..]);
    if (1..=7).contains(&dim0_le) {
        parse::<LittleEndian>(bytes)
    } else if (1..=7).contains(&dim0_be) {
        parse::<BigEndian>(bytes)
    } else {
        Err(Error::InvalidHeader(format!(
            "dim[0] out of range in either byte order ({dim0_le} / {dim0_be})"
        )))
    }
}

fn parse<B: ByteOrder>(bytes: &[u8]) -> Result<Volume3D> {
    let i16_at = |off: usize| B::read_i16(&bytes[off..]);
    let f32_at = |off: usize| B::read_f32(&bytes[off..]);

    let sizeof_hdr = B::read_i32(bytes);
    if sizeof_hdr != NIFTI1_HEADER_SIZE as i32 {
        return Err(Error::InvalidHeader(format!("sizeof_hdr = {sizeof_hdr}")));
    }

    let mut dim = [0i16; 8];
    for (i, d) in dim.iter_mut().enumerate() {
        *d = i16_at(OFF_DIM + 2 * i);
    }
    let ndim = dim[0] as usize;
    let mut dims = [1usize; 3];
    for i in 1..=ndim {
        if dim[i] < 1 {
            return Err(Error::InvalidHeader(format!("dim[{i}] = {}", dim[i])));
        }
        if i <= 3 {
            dims[i - 1] = dim[i] as usize;
        } else if dim[i] != 1 {
            return Err(Error::InvalidHeader(format!(
                "only 3D volumes are supported (dim[{i}] = {})",
                dim[i]
            )));
        }
    }

    let dtype = DType::from_nifti_code(i16_at(OFF_DATATYPE))?;
    let bitpix = i16_at(OFF_BITPIX);
    if bitpix as usize != dtype.bytes_per_voxel() * 8 {
        return Err(Error::InvalidHeader(format!(
            "bitpix {bitpix} inconsistent with datatype {dtype:?}"
        )));
    }

    let mut pixdim = [0f32; 8];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = f32_at(OFF_PIXDIM + 4 * i);
    }
    let mut spacing = [1f32; 3];
    for axis in 0..ndim.min(3) {
        spacing[axis] = pixdim[axis + 1];
    }

    let vox_offset = f32_at(OFF_VOX_OFFSET);
    if !(vox_offset.is_finite() && vox_offset >= MIN_VOX_OFFSET as f32) {
        return Err(Error::InvalidHeader(format!("vox_offset = {vox_offset}")));
    }
    let vox_offset = vox_offset as usize;

    let slope = f32_at(OFF_SCL_SLOPE);
    let inter = f32_at(OFF_SCL_INTER);
    let scaling = (slope != 0.0 && slope.is_finite()).then_some(Scaling {
        slope,
        inter: if inter.is_finite() { inter } else { 0.0 },
    });

    let affine = if i16_at(OFF_SFORM_CODE) > 0 {
        let mut a = identity();
        for (r, row) in a.iter_mut().take(3).enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = f32_at(OFF_SROW + 16 * r + 4 * c);
            }
        }
        a
    } else if i16_at(OFF_QFORM_CODE) > 0 {
        let mut q = [0f32; 6];
        for (i, v) in q.iter_mut().enumerate() {
            *v = f32_at(OFF_QUATERN + 4 * i);
        }
        quatern_affine(q, spacing, pixdim[0])
    } else {
        super::diagonal_affine(spacing)
    };

    let n: usize = dims.iter().product();
    let nbytes = n * dtype.bytes_per_voxel();
    let expected = vox_offset + nbytes;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile {
            expected,
            found: bytes.len(),
        });
    }
    let payload = &bytes[vox_offset..expected];
    let mut data: Vec<f32> = match dtype {
        DType::U8 => payload.iter().map(|&b| b as f32).collect(),
        DType::I16 => payload.chunks_exact(2).map(|c| B::read_i16(c) as f32).collect(),
        DType::F32 => payload.chunks_exact(4).map(B::read_f32).collect(),
    };
    if let Some(s) = scaling {
        for v in &mut data {
            *v = *v * s.slope + s.inter;
        }
    }

    // f32 payloads are stored already scaled, so the scaling is dropped on save.
    let keep_scaling = if dtype == DType::F32 { None } else { scaling };
    Ok(Volume3D::new(dims, spacing, affine, data, dtype)?.with_scaling(keep_scaling))
}

fn identity() -> Affine {
    let mut a = [[0f32; 4]; 4];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    a
}

/// Affine from the quaternion representation (qform, "method 2").
fn quatern_affine(q: [f32; 6], spacing: [f32; 3], qfac: f32) -> Affine {
    let [b, c, d, qx, qy, qz] = q.map(f64::from);
    let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
    let rot = [
        [
            a * a + b * b - c * c - d * d,
            2.0 * (b * c - a * d),
            2.0 * (b * d + a * c),
        ],
        [
            2.0 * (b * c + a * d),
            a * a + c * c - b * b - d * d,
            2.0 * (c * d - a * b),
        ],
        [
            2.0 * (b * d - a * c),
            2.0 * (c * d + a * b),
            a * a + d * d - c * c - b * b,
        ],
    ];
    let qfac = if qfac < 0.0 { -1.0 } else { 1.0 };
    let scale = [spacing[0] as f64, spacing[1] as f64, qfac * spacing[2] as f64];
    let offset = [qx, qy, qz];
    let mut out = identity();
    for r in 0..3 {
        for col in 0..3 {
            out[r][col] = (rot[r][col] * scale[col]) as f32;
        }
        out[r][3] = offset[r] as f32;
    }
    out
}

/// Encode a volume as a little-endian single-file NIfTI-1 image.
pub fn write_nifti(vol: &Volume3D) -> Vec<u8> {
    type E = LittleEndian;
    let dtype = vol.dtype();
    let mut out = vec![0u8; MIN_VOX_OFFSET + vol.voxel_count() * dtype.bytes_per_voxel()];
    {
        let h = &mut out[..NIFTI1_HEADER_SIZE];
        E::write_i32(&mut h[0..], NIFTI1_HEADER_SIZE as i32);
        h[38] = b'r';
        let dims = vol.dims();
        let dim: [i16; 8] = [3, dims[0] as i16, dims[1] as i16, dims[2] as i16, 1, 1, 1, 1];
        for (i, d) in dim.iter().enumerate() {
            E::write_i16(&mut h[OFF_DIM + 2 * i..], *d);
        }
        E::write_i16(&mut h[OFF_DATATYPE..], dtype.nifti_code());
        E::write_i16(&mut h[OFF_BITPIX..], (dtype.bytes_per_voxel() * 8) as i16);
        let sp = vol.spacing();
        let pixdim = [1.0, sp[0], sp[1], sp[2], 0.0, 0.0, 0.0, 0.0];
        for (i, p) in pixdim.iter().enumerate() {
            E::write_f32(&mut h[OFF_PIXDIM + 4 * i..], *p);
        }
        E::write_f32(&mut h[OFF_VOX_OFFSET..], MIN_VOX_OFFSET as f32);
        let scaling = vol.scaling().unwrap_or(Scaling {
            slope: 1.0,
            inter: 0.0,
        });
        E::write_f32(&mut h[OFF_SCL_SLOPE..], scaling.slope);
        E::write_f32(&mut h[OFF_SCL_INTER..], scaling.inter);
        h[OFF_XYZT_UNITS] = 2; // mm
        let descrip = b"barkit";
        h[OFF_DESCRIP..OFF_DESCRIP + descrip.len()].copy_from_slice(descrip);
        E::write_i16(&mut h[OFF_QFORM_CODE..], 0);
        E::write_i16(&mut h[OFF_SFORM_CODE..], 2);
        let affine = vol.affine();
        for r in 0..3 {
            for c in 0..4 {
                E::write_f32(&mut h[OFF_SROW + 16 * r + 4 * c..], affine[r][c]);
            }
        }
        h[OFF_MAGIC..OFF_MAGIC + 4].copy_from_slice(NIFTI1_MAGIC);
    }

    let payload = &mut out[MIN_VOX_OFFSET..];
    let data = vol.data();
    match dtype {
        DType::F32 => {
            for (chunk, v) in payload.chunks_exact_mut(4).zip(data) {
                E::write_f32(chunk, *v);
            }
        }
        DType::I16 => {
            for (chunk, v) in payload.chunks_exact_mut(2).zip(data) {
                let raw = unscale(*v, vol.scaling()).clamp(i16::MIN as f32, i16::MAX as f32);
                E::write_i16(chunk, raw as i16);
            }
        }
        DType::U8 => {
            for (b, v) in payload.iter_mut().zip(data) {
                *b = unscale(*v, vol.scaling()).clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}

fn unscale(v: f32, scaling: Option<Scaling>) -> f32 {
    match scaling {
        Some(s) => ((v - s.inter) / s.slope).round(),
        None => v.round(),
    }
}
