//! MCP1 feature interchange file.
//!
//! ```text
//! offset  size            field
//! 0       4               magic "MCP1" (4D 43 50 31)
//! 4       4               frame_count, u32 LE
//! 8       4               dim, u32 LE
//! 12      8               frame_shift_seconds, f64 LE
//! 20      4*count*dim     features, f32 LE, row-major
//! ...     4*count         f0 per frame, f32 LE (0 = unvoiced)
//! ```

use std::path::{Path, PathBuf};

use super::f0::PitchTrack;
use super::features::FeatureMatrix;

pub const MCP1_MAGIC: [u8; 4] = *b"MCP1";
const HEADER_LEN: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum FeatureFileError {
    #[error("bad magic {0:02X?}, expected MCP1")]
    BadMagic([u8; 4]),
    #[error("truncated feature file: need {needed} bytes, have {actual}")]
    Truncated { needed: usize, actual: usize },
    #[error("feature dimensions overflow: {frames} frames × {dim}")]
    DimensionOverflow { frames: u64, dim: u64 },
    #[error("{0} unexpected trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("pitch track has {pitch} frames but features have {features}")]
    PitchLength { features: usize, pitch: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub fn encode_features(features: &FeatureMatrix, pitch: &PitchTrack) -> Result<Vec<u8>, FeatureFileError> {
    if pitch.len() != features.frame_count {
        return Err(FeatureFileError::PitchLength { features: features.frame_count, pitch: pitch.len() });
    }
    let overflow = || FeatureFileError::DimensionOverflow {
        frames: features.frame_count as u64,
        dim: features.dim as u64,
    };
    let count = u32::try_from(features.frame_count).map_err(|_| overflow())?;
    let dim = u32::try_from(features.dim).map_err(|_| overflow())?;

    let mut out = Vec::with_capacity(HEADER_LEN + 4 * (features.frames.len() + pitch.len()));
    out.extend_from_slice(&MCP1_MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&features.frame_shift.to_le_bytes());
    for v in &features.frames {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &f in &pitch.f0 {
        out.extend_from_slice(&(f as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8]) -> Result<(FeatureMatrix, PitchTrack), FeatureFileError> {
    if bytes.len() >= 4 && bytes[..4] != MCP1_MAGIC {
        return Err(FeatureFileError::BadMagic(bytes[..4].try_into().unwrap()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(FeatureFileError::Truncated { needed: HEADER_LEN, actual: bytes.len() });
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let frame_shift = f64::from_le_bytes(bytes[12..20].try_into().unwrap());

    let overflow = FeatureFileError::DimensionOverflow { frames: u64::from(count), dim: u64::from(dim) };
    let cells = (count as usize).checked_mul(dim as usize).ok_or_else(|| overflow_clone(&overflow))?;
    let needed = cells
        .checked_add(count as usize)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(overflow)?;
    if bytes.len() < needed {
        return Err(FeatureFileError::Truncated { needed, actual: bytes.len() });
    }
    if bytes.len() > needed {
        return Err(FeatureFileError::TrailingBytes(bytes.len() - needed));
    }

    let mut floats = bytes[HEADER_LEN..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let frames: Vec<f32> = floats.by_ref().take(cells).collect();
    let f0: Vec<f64> = floats.map(f64::from).collect();
    Ok((
        FeatureMatrix::new(frames, count as usize, dim as usize, frame_shift),
        PitchTrack::from_f0(f0, frame_shift),
    ))
}

fn overflow_clone(e: &FeatureFileError) -> FeatureFileError {
    match e {
        FeatureFileError::DimensionOverflow { frames, dim } => {
            FeatureFileError::DimensionOverflow { frames: *frames, dim: *dim }
        }
        _ => unreachable!(),
    }
}

pub fn write_features(
    path: impl AsRef<Path>,
    features: &FeatureMatrix,
    pitch: &PitchTrack,
) -> Result<(), FeatureFileError> {
    let path = path.as_ref();
    let bytes = encode_features(features, pitch)?;
    std::fs::write(path, bytes).map_err(|source| FeatureFileError::Io { path: path.to_path_buf(), source })
}

pub fn read_features(path: impl AsRef<Path>) -> Result<(FeatureMatrix, PitchTrack), FeatureFileError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| FeatureFileError::Io { path: path.to_path_buf(), source })?;
    decode_features(&bytes)
}
