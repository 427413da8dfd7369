//! Volumetric containers, thresholding and raw file I/O.
//!
//! Voxel values are stored x-fastest (i varies quickest, then j, then k) and
//! files are a little-endian payload next to a text sidecar header, so a
//! volume on disk is fully self-describing.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// What the scalar values mean. Transitions only HU -> BMD, via calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Hu,
    Bmd,
}

impl ValueKind {
    fn as_str(self) -> &'static str {
        match self {
            ValueKind::Hu => "HU",
            ValueKind::Bmd => "BMD",
        }
    }
}

/// Zero-based voxel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VoxelIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

/// 3D grid of scalar voxel values (HU or BMD) with anisotropic physical spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    dims: (usize, usize, usize),
    spacing: (f64, f64, f64),
    values: Vec<f32>,
    value_kind: ValueKind,
}

impl ScalarVolume {
    pub fn new(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        values: Vec<f32>,
        value_kind: ValueKind,
    ) -> Result<Self> {
        let (nx, ny, nz) = dims;
        if nx < 1 || ny < 1 || nz < 1 {
            return Err(Error::InvalidParameter(format!(
                "dims must all be >= 1, got {nx}x{ny}x{nz}"
            )));
        }
        if !(spacing.0 > 0.0 && spacing.1 > 0.0 && spacing.2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "spacing components must be > 0, got {spacing:?}"
            )));
        }
        if values.len() != nx * ny * nz {
            return Err(Error::DimensionMismatch(format!(
                "value count {} does not match dims {nx}x{ny}x{nz} = {}",
                values.len(),
                nx * ny * nz
            )));
        }
        Ok(ScalarVolume { dims, spacing, values, value_kind })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn spacing(&self) -> (f64, f64, f64) {
        self.spacing
    }

    pub fn value_kind(&self) -> ValueKind {
        self.value_kind
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    /// x-fastest linear index.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.index(i, j, k)]
    }

    /// Physical position of a voxel center in mm (center of voxel (0,0,0)
    /// sits at half a spacing step from the volume origin).
    pub fn voxel_center_mm(&self, i: usize, j: usize, k: usize) -> (f64, f64, f64) {
        (
            (i as f64 + 0.5) * self.spacing.0,
            (j as f64 + 0.5) * self.spacing.1,
            (k as f64 + 0.5) * self.spacing.2,
        )
    }

    /// Re-tag the values after a calibration transform. Internal to the crate
    /// so value_kind cannot change without going through calibration.
    pub(crate) fn with_values_and_kind(&self, values: Vec<f32>, kind: ValueKind) -> ScalarVolume {
        debug_assert_eq!(values.len(), self.values.len());
        ScalarVolume {
            dims: self.dims,
            spacing: self.spacing,
            values,
            value_kind: kind,
        }
    }
}

/// 3D binary image; `true` voxels are white (foreground).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryVolume {
    dims: (usize, usize, usize),
    voxels: Vec<bool>,
}

impl BinaryVolume {
    pub fn new(dims: (usize, usize, usize), voxels: Vec<bool>) -> Result<Self> {
        let (nx, ny, nz) = dims;
        if nx < 1 || ny < 1 || nz < 1 {
            return Err(Error::InvalidParameter(format!(
                "dims must all be >= 1, got {nx}x{ny}x{nz}"
            )));
        }
        if voxels.len() != nx * ny * nz {
            return Err(Error::DimensionMismatch(format!(
                "voxel count {} does not match dims {nx}x{ny}x{nz}",
                voxels.len()
            )));
        }
        Ok(BinaryVolume { dims, voxels })
    }

    pub fn empty(dims: (usize, usize, usize)) -> Result<Self> {
        let n = dims.0 * dims.1 * dims.2;
        BinaryVolume::new(dims, vec![false; n])
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn voxels(&self) -> &[bool] {
        &self.voxels
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.voxels[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, white: bool) {
        let idx = self.index(i, j, k);
        self.voxels[idx] = white;
    }

    /// Number of white (foreground) voxels.
    pub fn white_count(&self) -> usize {
        self.voxels.iter().filter(|&&w| w).count()
    }

    /// White voxel indices in x-fastest scan order.
    pub fn white_indices(&self) -> Vec<VoxelIndex> {
        let (nx, ny, nz) = self.dims;
        let mut out = Vec::new();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if self.voxels[i + nx * (j + ny * k)] {
                        out.push(VoxelIndex { i, j, k });
                    }
                }
            }
        }
        out
    }
}

/// Binarize: a voxel is white iff its value >= t.
pub fn threshold(volume: &ScalarVolume, t: f32) -> BinaryVolume {
    let voxels = volume.values().iter().map(|&v| v >= t).collect();
    BinaryVolume { dims: volume.dims(), voxels }
}

// ---------------------------------------------------------------------------
// Raw file I/O: little-endian payload + text sidecar header ("<payload>.hdr")
// ---------------------------------------------------------------------------

/// Scalar width of the payload on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    I16,
    U8,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::I16 => 2,
            Dtype::U8 => 1,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::I16 => "i16",
            Dtype::U8 => "u8",
        }
    }
}

/// Sidecar header contents. `kind` is "HU"/"BMD" for scalar volumes and
/// "MASK" for binary volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct RawHeader {
    pub dims: (usize, usize, usize),
    pub spacing_mm: (f64, f64, f64),
    pub kind: String,
    pub dtype: Dtype,
}

impl RawHeader {
    pub fn to_text(&self) -> String {
        format!(
            "dims: {} {} {}\nspacing_mm: {} {} {}\nvalue_kind: {}\ndtype: {}\norder: x-fastest\nendian: little\n",
            self.dims.0, self.dims.1, self.dims.2,
            self.spacing_mm.0, self.spacing_mm.1, self.spacing_mm.2,
            self.kind,
            self.dtype.as_str(),
        )
    }

    pub fn parse(text: &str) -> Result<RawHeader> {
        let mut dims = None;
        let mut spacing = None;
        let mut kind = None;
        let mut dtype = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, val) = line
                .split_once(':')
                .ok_or_else(|| Error::Io(format!("malformed header line: {line:?}")))?;
            let val = val.trim();
            match key.trim() {
                "dims" => {
                    let parts: Vec<usize> = val
                        .split_whitespace()
                        .map(|p| p.parse().map_err(|_| Error::Io(format!("bad dims: {val}"))))
                        .collect::<Result<_>>()?;
                    if parts.len() != 3 {
                        return Err(Error::Io(format!("dims needs 3 entries: {val}")));
                    }
                    dims = Some((parts[0], parts[1], parts[2]));
                }
                "spacing_mm" => {
                    let parts: Vec<f64> = val
                        .split_whitespace()
                        .map(|p| p.parse().map_err(|_| Error::Io(format!("bad spacing: {val}"))))
                        .collect::<Result<_>>()?;
                    if parts.len() != 3 {
                        return Err(Error::Io(format!("spacing_mm needs 3 entries: {val}")));
                    }
                    spacing = Some((parts[0], parts[1], parts[2]));
                }
                "value_kind" => kind = Some(val.to_string()),
                "dtype" => {
                    dtype = Some(match val {
                        "f32" => Dtype::F32,
                        "i16" => Dtype::I16,
                        "u8" => Dtype::U8,
                        other => return Err(Error::Io(format!("unsupported dtype: {other}"))),
                    });
                }
                "order" => {
                    if val != "x-fastest" {
                        return Err(Error::Io(format!("unsupported voxel order: {val}")));
                    }
                }
                "endian" => {
                    if val != "little" {
                        return Err(Error::Io(format!("unsupported endianness: {val}")));
                    }
                }
                other => return Err(Error::Io(format!("unknown header key: {other}"))),
            }
        }
        Ok(RawHeader {
            dims: dims.ok_or_else(|| Error::Io("header missing dims".into()))?,
            spacing_mm: spacing.ok_or_else(|| Error::Io("header missing spacing_mm".into()))?,
            kind: kind.ok_or_else(|| Error::Io("header missing value_kind".into()))?,
            dtype: dtype.ok_or_else(|| Error::Io("header missing dtype".into()))?,
        })
    }
}

/// Path of the sidecar header next to a payload file.
pub fn header_path(payload: &Path) -> PathBuf {
    let mut os = payload.as_os_str().to_os_string();
    os.push(".hdr");
    PathBuf::from(os)
}

/// Write a scalar volume: f32 little-endian payload plus sidecar header.
pub fn save_raw(volume: &ScalarVolume, path: &Path) -> Result<RawHeader> {
    let header = RawHeader {
        dims: volume.dims(),
        spacing_mm: volume.spacing(),
        kind: volume.value_kind().as_str().to_string(),
        dtype: Dtype::F32,
    };
    let mut payload = Vec::with_capacity(volume.values().len() * 4);
    for v in volume.values() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&payload)?;
    fs::write(header_path(path), header.to_text())?;
    Ok(header)
}

/// Load a scalar volume from its payload path; the sidecar header is looked
/// up next to it. i16 payloads (HU exports) are widened to f32.
pub fn load_raw(path: &Path) -> Result<ScalarVolume> {
    let header_text = fs::read_to_string(header_path(path))
        .map_err(|e| Error::Io(format!("{}: {e}", header_path(path).display())))?;
    let header = RawHeader::parse(&header_text)?;
    load_raw_with_header(path, &header)
}

pub fn load_raw_with_header(path: &Path, header: &RawHeader) -> Result<ScalarVolume> {
    let n = header.dims.0 * header.dims.1 * header.dims.2;
    let mut payload = Vec::new();
    fs::File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?
        .read_to_end(&mut payload)?;
    let expected = n * header.dtype.size();
    if payload.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "payload {} is {} bytes, header implies {expected}",
            path.display(),
            payload.len()
        )));
    }
    let values: Vec<f32> = match header.dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        Dtype::I16 => payload
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32)
            .collect(),
        Dtype::U8 => {
            return Err(Error::Io("u8 payloads are masks; use load_mask".into()));
        }
    };
    let kind = match header.kind.as_str() {
        "HU" => ValueKind::Hu,
        "BMD" => ValueKind::Bmd,
        other => return Err(Error::Io(format!("not a scalar volume (value_kind {other})"))),
    };
    ScalarVolume::new(header.dims, header.spacing_mm, values, kind)
}

/// Write a binary mask: one 0/1 byte per voxel plus sidecar header.
pub fn save_mask(mask: &BinaryVolume, spacing_mm: (f64, f64, f64), path: &Path) -> Result<RawHeader> {
    let header = RawHeader {
        dims: mask.dims(),
        spacing_mm,
        kind: "MASK".to_string(),
        dtype: Dtype::U8,
    };
    let payload: Vec<u8> = mask.voxels().iter().map(|&w| u8::from(w)).collect();
    fs::File::create(path)?.write_all(&payload)?;
    fs::write(header_path(path), header.to_text())?;
    Ok(header)
}

pub fn load_mask(path: &Path) -> Result<BinaryVolume> {
    let header_text = fs::read_to_string(header_path(path))
        .map_err(|e| Error::Io(format!("{}: {e}", header_path(path).display())))?;
    let header = RawHeader::parse(&header_text)?;
    if header.kind != "MASK" || header.dtype != Dtype::U8 {
        return Err(Error::Io(format!(
            "{} is not a mask (value_kind {}, dtype {})",
            path.display(),
            header.kind,
            header.dtype.as_str()
        )));
    }
    let n = header.dims.0 * header.dims.1 * header.dims.2;
    let payload = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if payload.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "mask payload {} is {} bytes, header implies {n}",
            path.display(),
            payload.len()
        )));
    }
    BinaryVolume::new(header.dims, payload.into_iter().map(|b| b != 0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vol(dims: (usize, usize, usize), values: Vec<f32>) -> ScalarVolume {
        ScalarVolume::new(dims, (1.0, 1.0, 1.0), values, ValueKind::Bmd).unwrap()
    }

    #[test]
    fn rejects_bad_dims_and_sizes() {
        assert!(ScalarVolume::new((0, 1, 1), (1.0, 1.0, 1.0), vec![], ValueKind::Hu).is_err());
        assert!(ScalarVolume::new((2, 1, 1), (1.0, -1.0, 1.0), vec![0.0; 2], ValueKind::Hu).is_err());
        assert!(ScalarVolume::new((2, 2, 2), (1.0, 1.0, 1.0), vec![0.0; 7], ValueKind::Hu).is_err());
    }

    #[test]
    fn threshold_all_below_is_black() {
        let v = vol((3, 3, 3), vec![0.0; 27]);
        let b = threshold(&v, 400.0);
        assert_eq!(b.white_count(), 0);
    }

    #[test]
    fn threshold_boundary_uses_geq() {
        let v = vol((2, 1, 1), vec![399.9, 400.0]);
        let b = threshold(&v, 400.0);
        assert!(!b.get(0, 0, 0));
        assert!(b.get(1, 0, 0));
    }

    #[test]
    fn threshold_extremes() {
        let v = vol((2, 2, 1), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(threshold(&v, f32::NEG_INFINITY).white_count(), 4);
        assert_eq!(threshold(&v, 5.0).white_count(), 0);
    }

    #[test]
    fn roundtrip_identity() {
        let dir = std::env::temp_dir().join("mink3d_volume_test_rt");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("zeros.raw");
        let v = ScalarVolume::new((4, 4, 4), (0.19, 0.19, 0.5), vec![0.0; 64], ValueKind::Hu).unwrap();
        save_raw(&v, &path).unwrap();
        let back = load_raw(&path).unwrap();
        assert_eq!(v, back);
    }

    #[test]
    fn x_fastest_layout_on_disk() {
        let dir = std::env::temp_dir().join("mink3d_volume_test_layout");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("seq.raw");
        let values: Vec<f32> = (0..64).map(|x| x as f32).collect();
        let v = vol((4, 4, 4), values);
        save_raw(&v, &path).unwrap();
        let back = load_raw(&path).unwrap();
        assert_eq!(back.get(1, 0, 0), 1.0);
        assert_eq!(back.get(0, 1, 0), 4.0);
        assert_eq!(back.get(0, 0, 1), 16.0);
    }

    #[test]
    fn i16_hu_payload_widens_to_f32() {
        let dir = std::env::temp_dir().join("mink3d_volume_test_i16");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("hu16.raw");
        let samples: [i16; 4] = [-1000, 0, 35, 3000];
        let mut payload = Vec::new();
        for v in samples {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, payload).unwrap();
        let header = RawHeader {
            dims: (4, 1, 1),
            spacing_mm: (0.19, 0.19, 0.5),
            kind: "HU".into(),
            dtype: Dtype::I16,
        };
        std::fs::write(header_path(&path), header.to_text()).unwrap();
        let vol = load_raw(&path).unwrap();
        assert_eq!(vol.value_kind(), ValueKind::Hu);
        assert_eq!(vol.values(), &[-1000.0, 0.0, 35.0, 3000.0]);
    }

    #[test]
    fn size_mismatch_is_error() {
        let dir = std::env::temp_dir().join("mink3d_volume_test_mismatch");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("short.raw");
        // header says 8 voxels, payload holds 7
        let header = RawHeader {
            dims: (2, 2, 2),
            spacing_mm: (1.0, 1.0, 1.0),
            kind: "HU".into(),
            dtype: Dtype::F32,
        };
        std::fs::write(&path, vec![0u8; 7 * 4]).unwrap();
        std::fs::write(header_path(&path), header.to_text()).unwrap();
        match load_raw(&path) {
            Err(Error::DimensionMismatch(_)) => {}
            other => panic!("expected dimension mismatch, got {other:?}"),
        }
    }

    #[test]
    fn mask_roundtrip() {
        let dir = std::env::temp_dir().join("mink3d_volume_test_mask");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.raw");
        let mut m = BinaryVolume::empty((3, 2, 2)).unwrap();
        m.set(1, 1, 0, true);
        m.set(2, 0, 1, true);
        save_mask(&m, (0.19, 0.19, 0.5), &path).unwrap();
        assert_eq!(load_mask(&path).unwrap(), m);
    }

    #[test]
    fn white_indices_scan_order() {
        let mut m = BinaryVolume::empty((2, 2, 1)).unwrap();
        m.set(1, 0, 0, true);
        m.set(0, 1, 0, true);
        let idx = m.white_indices();
        assert_eq!(idx[0], VoxelIndex { i: 1, j: 0, k: 0 });
        assert_eq!(idx[1], VoxelIndex { i: 0, j: 1, k: 0 });
    }
}
