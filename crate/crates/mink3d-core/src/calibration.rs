//! HU -> BMD conversion against a two-insert calibration phantom.
//!
//! The phantom carries a water-like insert (0 mg/cm^3 hydroxyapatite) and a
//! bone-like insert (200 mg/cm^3); measured attenuations of the two inserts
//! define a per-slice linear map from HU to mineral density.

use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{ScalarVolume, ValueKind};

/// Documented plausible BMD range for trabecular tissue; values outside it
/// are retained but counted so callers can warn.
pub const BMD_PLAUSIBLE_RANGE: (f64, f64) = (-300.0, 1400.0);

/// Hydroxyapatite densities and measured attenuations of the phantom inserts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomCalibration {
    /// Density of the water-like insert, mg/cm^3.
    pub ha_w: f64,
    /// Density of the bone-like insert, mg/cm^3.
    pub ha_b: f64,
    /// Measured attenuation of the water-like insert, HU.
    pub hu_w: f64,
    /// Measured attenuation of the bone-like insert, HU.
    pub hu_b: f64,
}

impl PhantomCalibration {
    /// Standard phantom (HA_W = 0, HA_B = 200) with measured insert readings.
    pub fn new(hu_w: f64, hu_b: f64) -> Result<Self> {
        PhantomCalibration::with_densities(0.0, 200.0, hu_w, hu_b)
    }

    /// Non-standard phantom densities, for calibration hardware other than
    /// the two-insert default.
    pub fn with_densities(ha_w: f64, ha_b: f64, hu_w: f64, hu_b: f64) -> Result<Self> {
        if hu_b == hu_w {
            return Err(Error::Degenerate(format!(
                "phantom insert attenuations coincide (HU_W = HU_B = {hu_w})"
            )));
        }
        Ok(PhantomCalibration { ha_w, ha_b, hu_w, hu_b })
    }

    /// Slope of the HU -> BMD map, mg/cm^3 per HU.
    pub fn slope(&self) -> f64 {
        self.ha_b / (self.hu_b - self.hu_w)
    }
}

/// BMD = [HA_B / (HU_B - HU_W)] * (HU - HU_W).
///
/// The insert readings themselves map to the exact insert densities (0 and
/// HA_B) rather than picking up a rounding ulp from the slope arithmetic:
/// the affine map is anchored at those two points by construction.
pub fn hu_to_bmd(hu: f64, calib: &PhantomCalibration) -> f64 {
    if hu == calib.hu_w {
        return 0.0;
    }
    if hu == calib.hu_b {
        return calib.ha_b;
    }
    calib.ha_b * (hu - calib.hu_w) / (calib.hu_b - calib.hu_w)
}

/// A calibrated volume plus the count of voxels that fell outside the
/// plausible trabecular BMD range (warning diagnostic, never an error).
#[derive(Debug, Clone)]
pub struct Calibrated {
    pub volume: ScalarVolume,
    pub out_of_range_voxels: usize,
}

/// Convert an HU volume to BMD, slice by slice.
///
/// `per_slice` must hold either one calibration (applied globally) or
/// exactly one per z-slice.
pub fn calibrate_volume(volume: &ScalarVolume, per_slice: &[PhantomCalibration]) -> Result<Calibrated> {
    if volume.value_kind() != ValueKind::Hu {
        return Err(Error::InvalidParameter(
            "calibrate_volume expects an HU volume".into(),
        ));
    }
    let (nx, ny, nz) = volume.dims();
    if per_slice.is_empty() || (per_slice.len() != 1 && per_slice.len() != nz) {
        return Err(Error::DimensionMismatch(format!(
            "{} calibration rows for {nz} slices (need 1 or {nz})",
            per_slice.len()
        )));
    }

    let slice_len = nx * ny;
    let mut values = Vec::with_capacity(volume.voxel_count());
    let mut out_of_range = 0usize;
    for k in 0..nz {
        let calib = if per_slice.len() == 1 { &per_slice[0] } else { &per_slice[k] };
        for &hu in &volume.values()[k * slice_len..(k + 1) * slice_len] {
            let bmd = hu_to_bmd(hu as f64, calib);
            if bmd < BMD_PLAUSIBLE_RANGE.0 || bmd > BMD_PLAUSIBLE_RANGE.1 {
                out_of_range += 1;
            }
            values.push(bmd as f32);
        }
    }
    Ok(Calibrated {
        volume: volume.with_values_and_kind(values, ValueKind::Bmd),
        out_of_range_voxels: out_of_range,
    })
}

/// Parse a calibration file.
///
/// Per-slice form: one `slice_index,HU_W,HU_B` row per slice, 0-based indices
/// in ascending order. Global form: a single `HU_W,HU_B` row.
pub fn read_calibration_file(path: &Path) -> Result<Vec<PhantomCalibration>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_calibration_table(&text)
}

pub fn parse_calibration_table(text: &str) -> Result<Vec<PhantomCalibration>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let (index, hu_w, hu_b): (Option<usize>, f64, f64) = match fields.len() {
            2 => {
                let w = parse_num(fields[0], lineno)?;
                let b = parse_num(fields[1], lineno)?;
                (None, w, b)
            }
            3 => {
                let idx = fields[0]
                    .parse()
                    .map_err(|_| Error::Io(format!("line {}: bad slice index", lineno + 1)))?;
                (Some(idx), parse_num(fields[1], lineno)?, parse_num(fields[2], lineno)?)
            }
            _ => {
                return Err(Error::Io(format!(
                    "line {}: expected `HU_W,HU_B` or `slice,HU_W,HU_B`",
                    lineno + 1
                )))
            }
        };
        if let Some(idx) = index {
            if idx != rows.len() {
                return Err(Error::Io(format!(
                    "line {}: slice index {idx} out of order (expected {})",
                    lineno + 1,
                    rows.len()
                )));
            }
        } else if !rows.is_empty() {
            return Err(Error::Io(format!(
                "line {}: global (2-field) form must be the only row",
                lineno + 1
            )));
        }
        rows.push(PhantomCalibration::new(hu_w, hu_b)?);
        if index.is_none() && rows.len() == 1 {
            // global form: nothing else may follow; checked above on next row
        }
    }
    if rows.is_empty() {
        return Err(Error::Io("calibration file holds no rows".into()));
    }
    Ok(rows)
}

fn parse_num(s: &str, lineno: usize) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Io(format!("line {}: bad number {s:?}", lineno + 1)))
}
