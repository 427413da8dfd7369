//! Synthetic trabecular-like volumes with known ground truth.
//!
//! Three structure families: parallel rods along a principal direction,
//! parallel plates normal to it, and isotropic blobs. Structure voxels sit
//! near 600 mg/cm^3 and background near 100, straddling the 400 working
//! threshold with margin, so thresholded phantoms give binary masks whose
//! orientation and anisotropy are known by construction.
//!
//! Cohorts pair each volume with a failure-load target generated by a
//! declared linear rule (density + alignment + seeded noise), providing an
//! end-to-end testbed when real specimens are unavailable.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::aniso_mf::direction_bank_default;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::volume::{save_raw, ScalarVolume, ValueKind};

pub const STRUCTURE_BMD: f64 = 600.0;
pub const BACKGROUND_BMD: f64 = 100.0;
pub const BMD_NOISE_SIGMA: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    RodLattice,
    PlateStack,
    IsotropicBlobs,
}

impl PhantomKind {
    pub fn name(self) -> &'static str {
        match self {
            PhantomKind::RodLattice => "rod_lattice",
            PhantomKind::PlateStack => "plate_stack",
            PhantomKind::IsotropicBlobs => "isotropic_blobs",
        }
    }

    pub fn parse(s: &str) -> Option<PhantomKind> {
        match s {
            "rod_lattice" | "rods" => Some(PhantomKind::RodLattice),
            "plate_stack" | "plates" => Some(PhantomKind::PlateStack),
            "isotropic_blobs" | "blobs" => Some(PhantomKind::IsotropicBlobs),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub dims: (usize, usize, usize),
    /// Principal direction (rods run along it, plates lie normal to it).
    pub direction: [f64; 3],
    /// Structure (white) fraction target in (0, 1).
    pub fraction: f64,
    /// Element thickness in voxels: rod diameter, plate thickness, blob radius.
    pub thickness: f64,
    pub seed: u64,
}

impl PhantomSpec {
    fn validate(&self) -> Result<[f64; 3]> {
        let (nx, ny, nz) = self.dims;
        if nx < 8 || ny < 8 || nz < 8 {
            return Err(Error::InvalidParameter(format!(
                "phantom dims must each be >= 8, got {nx}x{ny}x{nz}"
            )));
        }
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "structure fraction must be in (0,1), got {}",
                self.fraction
            )));
        }
        if !(self.thickness >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "element thickness must be >= 1 voxel, got {}",
                self.thickness
            )));
        }
        if self.kind == PhantomKind::RodLattice {
            // Disk packing caps the reachable fraction at pi/4.
            if self.fraction > 0.7 {
                return Err(Error::InvalidParameter(format!(
                    "rod lattice cannot reach fraction {}",
                    self.fraction
                )));
            }
        }
        let n = (self.direction[0] * self.direction[0]
            + self.direction[1] * self.direction[1]
            + self.direction[2] * self.direction[2])
            .sqrt();
        if !(n > 1e-12) {
            return Err(Error::InvalidParameter("principal direction must be nonzero".into()));
        }
        Ok([self.direction[0] / n, self.direction[1] / n, self.direction[2] / n])
    }
}

/// A generated phantom with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpecimen {
    pub id: String,
    pub volume: ScalarVolume,
    pub fl_kn: f64,
    /// Mean BMD over the whole phantom volume.
    pub mean_bmd: f64,
    /// Declared anisotropy driver of the FL rule (see `alignment_score`).
    pub alignment: f64,
    /// Noisy scalar standing in for the clinical DXA BMD measurement.
    pub dxa_bmd_surrogate: f64,
    /// Structure direction; None for isotropic blobs.
    pub orientation: Option<[f64; 3]>,
    pub white_fraction: f64,
    pub spec: PhantomSpec,
}

/// Orthonormal pair spanning the plane orthogonal to d.
fn orthonormal_basis(d: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let pick = if d[0].abs() <= d[1].abs() && d[0].abs() <= d[2].abs() {
        [1.0, 0.0, 0.0]
    } else if d[1].abs() <= d[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let mut e1 = [
        d[1] * pick[2] - d[2] * pick[1],
        d[2] * pick[0] - d[0] * pick[2],
        d[0] * pick[1] - d[1] * pick[0],
    ];
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    for v in &mut e1 {
        *v /= n1;
    }
    let e2 = [
        d[1] * e1[2] - d[2] * e1[1],
        d[2] * e1[0] - d[0] * e1[2],
        d[0] * e1[1] - d[1] * e1[0],
    ];
    (e1, e2)
}

/// Alignment driver of the FL rule: squared cosine between the structure
/// direction and the +z axis for rods, 0 for plates and blobs.
pub fn alignment_score(kind: PhantomKind, direction: [f64; 3]) -> f64 {
    match kind {
        PhantomKind::RodLattice => direction[2] * direction[2],
        _ => 0.0,
    }
}

/// Generate the phantom geometry and BMD values for a spec. Deterministic
/// per seed.
pub fn generate(spec: &PhantomSpec) -> Result<SyntheticSpecimen> {
    let d = spec.validate()?;
    let white = match spec.kind {
        PhantomKind::RodLattice => rod_white_set(spec, d),
        PhantomKind::PlateStack => plate_white_set(spec, d),
        PhantomKind::IsotropicBlobs => blob_white_set(spec)?,
    };
    let (nx, ny, nz) = spec.dims;
    let n = nx * ny * nz;

    let mut rng = Rng::for_stream(spec.seed, 0xB0D);
    let mut values = Vec::with_capacity(n);
    let mut sum = 0.0f64;
    for &w in &white {
        let level = if w { STRUCTURE_BMD } else { BACKGROUND_BMD };
        let v = level + BMD_NOISE_SIGMA * rng.normal();
        sum += v;
        values.push(v as f32);
    }
    let mean_bmd = sum / n as f64;
    let white_count = white.iter().filter(|&&w| w).count();

    let volume = ScalarVolume::new(spec.dims, (1.0, 1.0, 1.0), values, ValueKind::Bmd)?;
    let alignment = alignment_score(spec.kind, d);
    let fl_kn = ground_truth_fl(mean_bmd, alignment, &FlModel::default(), spec.seed);
    let mut dxa_rng = Rng::for_stream(spec.seed, 0xD0A);
    let dxa_bmd_surrogate = mean_bmd + 5.0 * dxa_rng.normal();
    Ok(SyntheticSpecimen {
        id: format!("phantom_{:016x}", spec.seed),
        volume,
        fl_kn,
        mean_bmd,
        alignment,
        dxa_bmd_surrogate,
        orientation: match spec.kind {
            PhantomKind::IsotropicBlobs => None,
            _ => Some(d),
        },
        white_fraction: white_count as f64 / n as f64,
        spec: spec.clone(),
    })
}

fn rod_white_set(spec: &PhantomSpec, d: [f64; 3]) -> Vec<bool> {
    let (e1, e2) = orthonormal_basis(d);
    let radius = spec.thickness / 2.0;
    // pi r^2 / step^2 = fraction
    let step = radius * (std::f64::consts::PI / spec.fraction).sqrt();
    let jitter_amp = 0.2 * step;
    let (nx, ny, nz) = spec.dims;
    let center = [nx as f64 / 2.0, ny as f64 / 2.0, nz as f64 / 2.0];

    let jitter = |a: i64, b: i64| -> (f64, f64) {
        let key = (a as u64).wrapping_mul(0x9E3779B97F4A7C15) ^ (b as u64).wrapping_mul(0xD1B54A32D192ED03);
        let mut r = Rng::for_stream(spec.seed, key);
        (r.uniform(-jitter_amp, jitter_amp), r.uniform(-jitter_amp, jitter_amp))
    };

    let mut white = vec![false; nx * ny * nz];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let rel = [
                    i as f64 + 0.5 - center[0],
                    j as f64 + 0.5 - center[1],
                    k as f64 + 0.5 - center[2],
                ];
                let u1 = rel[0] * e1[0] + rel[1] * e1[1] + rel[2] * e1[2];
                let u2 = rel[0] * e2[0] + rel[1] * e2[1] + rel[2] * e2[2];
                let na = (u1 / step).round() as i64;
                let nb = (u2 / step).round() as i64;
                let mut min_d2 = f64::INFINITY;
                for a in (na - 1)..=(na + 1) {
                    for b in (nb - 1)..=(nb + 1) {
                        let (ja, jb) = jitter(a, b);
                        let du = u1 - (a as f64 * step + ja);
                        let dv = u2 - (b as f64 * step + jb);
                        min_d2 = min_d2.min(du * du + dv * dv);
                    }
                }
                if min_d2 <= radius * radius {
                    white[i + nx * (j + ny * k)] = true;
                }
            }
        }
    }
    white
}

fn plate_white_set(spec: &PhantomSpec, d: [f64; 3]) -> Vec<bool> {
    let period = spec.thickness / spec.fraction;
    let mut rng = Rng::for_stream(spec.seed, 0x91A7E);
    let phase = rng.uniform(0.0, period);
    let (nx, ny, nz) = spec.dims;
    let mut white = vec![false; nx * ny * nz];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let s = (i as f64 + 0.5) * d[0] + (j as f64 + 0.5) * d[1] + (k as f64 + 0.5) * d[2]
                    + phase;
                let frac = s.rem_euclid(period);
                if frac < spec.thickness {
                    white[i + nx * (j + ny * k)] = true;
                }
            }
        }
    }
    white
}

fn blob_white_set(spec: &PhantomSpec) -> Result<Vec<bool>> {
    let (nx, ny, nz) = spec.dims;
    let n = nx * ny * nz;
    let target = (spec.fraction * n as f64) as usize;
    let r = spec.thickness;
    let r2 = r * r;
    let mut rng = Rng::for_stream(spec.seed, 0xB10B);
    let mut white = vec![false; n];
    let mut count = 0usize;
    let blob_volume = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
    let max_attempts = (4.0 * target as f64 / blob_volume) as usize + 200;
    for _ in 0..max_attempts {
        if count >= target {
            break;
        }
        let c = [
            rng.uniform(0.0, nx as f64),
            rng.uniform(0.0, ny as f64),
            rng.uniform(0.0, nz as f64),
        ];
        let i_lo = ((c[0] - r).floor().max(0.0)) as usize;
        let i_hi = ((c[0] + r).ceil() as usize).min(nx - 1);
        let j_lo = ((c[1] - r).floor().max(0.0)) as usize;
        let j_hi = ((c[1] + r).ceil() as usize).min(ny - 1);
        let k_lo = ((c[2] - r).floor().max(0.0)) as usize;
        let k_hi = ((c[2] + r).ceil() as usize).min(nz - 1);
        for k in k_lo..=k_hi {
            for j in j_lo..=j_hi {
                for i in i_lo..=i_hi {
                    let d2 = (i as f64 + 0.5 - c[0]).powi(2)
                        + (j as f64 + 0.5 - c[1]).powi(2)
                        + (k as f64 + 0.5 - c[2]).powi(2);
                    let idx = i + nx * (j + ny * k);
                    if d2 <= r2 && !white[idx] {
                        white[idx] = true;
                        count += 1;
                    }
                }
            }
        }
    }
    if count * 5 < target * 4 {
        return Err(Error::InvalidParameter(format!(
            "blob fraction {} unreachable (reached {:.3})",
            spec.fraction,
            count as f64 / n as f64
        )));
    }
    Ok(white)
}

/// Coefficients of the declared FL generation rule:
/// FL = base + per_100_bmd * (mean BMD / 100) + per_alignment * alignment
///      + noise_sigma * N(0,1; seed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlModel {
    pub base: f64,
    pub per_100_bmd: f64,
    pub per_alignment: f64,
    pub noise_sigma: f64,
}

impl Default for FlModel {
    fn default() -> Self {
        FlModel { base: -0.5, per_100_bmd: 1.2, per_alignment: 3.0, noise_sigma: 0.12 }
    }
}

/// The declared deterministic FL rule (kN).
pub fn ground_truth_fl(mean_bmd: f64, alignment: f64, model: &FlModel, seed: u64) -> f64 {
    let mut rng = Rng::for_stream(seed, 0xF1);
    model.base
        + model.per_100_bmd * (mean_bmd / 100.0)
        + model.per_alignment * alignment
        + model.noise_sigma * rng.normal()
}

/// Cohort recipe: alternating rod and blob phantoms with varying structure
/// fraction (density driver) and, for rods, varying orientation drawn from
/// the 13-axis bank (anisotropy driver).
#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub size: usize,
    pub dims: (usize, usize, usize),
    pub seed: u64,
    pub fraction_range: (f64, f64),
    pub thickness: f64,
    pub fl: FlModel,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            size: 30,
            dims: (28, 28, 28),
            seed: 7,
            fraction_range: (0.15, 0.35),
            thickness: 3.0,
            fl: FlModel::default(),
        }
    }
}

/// Generate a deterministic cohort of synthetic specimens.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Vec<SyntheticSpecimen>> {
    if spec.size < 2 {
        return Err(Error::InvalidParameter("cohort needs at least 2 specimens".into()));
    }
    let bank = direction_bank_default();
    let mut out = Vec::with_capacity(spec.size);
    for idx in 0..spec.size {
        let mut rng = Rng::for_stream(spec.seed, idx as u64);
        let fraction = rng.uniform(spec.fraction_range.0, spec.fraction_range.1);
        let kind = if idx % 2 == 0 { PhantomKind::RodLattice } else { PhantomKind::IsotropicBlobs };
        let direction = match kind {
            PhantomKind::RodLattice => bank.directions()[rng.below(bank.len())],
            _ => [1.0, 0.0, 0.0],
        };
        let phantom_seed = Rng::for_stream(spec.seed, 1_000_000 + idx as u64).next_u64();
        let mut specimen = generate(&PhantomSpec {
            kind,
            dims: spec.dims,
            direction,
            fraction,
            thickness: spec.thickness,
            seed: phantom_seed,
        })?;
        // Cohort-level FL rule (may differ from the per-phantom default).
        specimen.fl_kn =
            ground_truth_fl(specimen.mean_bmd, specimen.alignment, &spec.fl, phantom_seed);
        specimen.id = format!("spec{idx:03}");
        out.push(specimen);
    }
    Ok(out)
}

/// One manifest row per specimen.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub specimen_id: String,
    pub fl_kn: f64,
    pub dxa_bmd_surrogate: f64,
    pub volume_path: PathBuf,
}

/// Write the cohort volumes plus a `manifest.csv` into a directory; returns
/// the manifest path.
pub fn write_cohort(dir: &Path, cohort: &[SyntheticSpecimen]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let manifest_path = dir.join("manifest.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&manifest_path)?);
    writeln!(f, "specimen_id,FL_kN,dxa_bmd_surrogate,volume")?;
    for s in cohort {
        let vol_name = format!("{}.raw", s.id);
        save_raw(&s.volume, &dir.join(&vol_name))?;
        writeln!(f, "{},{},{},{}", s.id, s.fl_kn, s.dxa_bmd_surrogate, vol_name)?;
    }
    Ok(manifest_path)
}

/// Parse a cohort manifest; volume paths are resolved against the manifest's
/// directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if n == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Io(format!(
                "line {}: expected specimen_id,FL_kN,dxa_bmd_surrogate,volume",
                n + 1
            )));
        }
        rows.push(ManifestRow {
            specimen_id: fields[0].to_string(),
            fl_kn: fields[1]
                .parse()
                .map_err(|_| Error::Io(format!("line {}: bad FL {}", n + 1, fields[1])))?,
            dxa_bmd_surrogate: fields[2]
                .parse()
                .map_err(|_| Error::Io(format!("line {}: bad DXA value {}", n + 1, fields[2])))?,
            volume_path: base.join(fields[3]),
        });
    }
    if rows.is_empty() {
        return Err(Error::Io("manifest holds no specimens".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::threshold;

    fn rod_spec(seed: u64) -> PhantomSpec {
        PhantomSpec {
            kind: PhantomKind::RodLattice,
            dims: (24, 24, 24),
            direction: [1.0, 0.0, 0.0],
            fraction: 0.2,
            thickness: 3.0,
            seed,
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&rod_spec(5)).unwrap();
        let b = generate(&rod_spec(5)).unwrap();
        assert_eq!(a.volume, b.volume);
        assert_eq!(a.fl_kn, b.fl_kn);
        let c = generate(&rod_spec(6)).unwrap();
        assert_ne!(a.volume, c.volume);
    }

    #[test]
    fn rods_along_x_are_x_invariant() {
        let s = generate(&rod_spec(11)).unwrap();
        let mask = threshold(&s.volume, 400.0);
        let (nx, ny, nz) = mask.dims();
        for k in 0..nz {
            for j in 0..ny {
                let head = mask.get(0, j, k);
                for i in 1..nx {
                    assert_eq!(mask.get(i, j, k), head, "column ({j},{k}) not a rod");
                }
            }
        }
        assert!(s.white_fraction > 0.05 && s.white_fraction < 0.5);
    }

    #[test]
    fn blob_fraction_near_target() {
        for seed in [1, 2, 3] {
            let spec = PhantomSpec {
                kind: PhantomKind::IsotropicBlobs,
                dims: (32, 32, 32),
                direction: [1.0, 0.0, 0.0],
                fraction: 0.25,
                thickness: 3.0,
                seed,
            };
            let s = generate(&spec).unwrap();
            let rel = (s.white_fraction - 0.25).abs() / 0.25;
            assert!(rel <= 0.2, "fraction {} vs target 0.25", s.white_fraction);
        }
    }

    #[test]
    fn plates_fraction_near_target() {
        let spec = PhantomSpec {
            kind: PhantomKind::PlateStack,
            dims: (32, 32, 32),
            direction: [0.0, 0.0, 1.0],
            fraction: 0.3,
            thickness: 2.0,
            seed: 4,
        };
        let s = generate(&spec).unwrap();
        assert!((s.white_fraction - 0.3).abs() < 0.1, "fraction {}", s.white_fraction);
    }

    #[test]
    fn plates_show_in_plane_orientation() {
        use crate::aniso_mf::{angles_to_axis, compute_anisotropy, direction_bank_default};
        use crate::minkowski::MfComponent;
        let spec = PhantomSpec {
            kind: PhantomKind::PlateStack,
            dims: (24, 24, 24),
            direction: [0.0, 0.0, 1.0], // plates lie in the xy plane
            fraction: 0.25,
            thickness: 2.0,
            seed: 15,
        };
        let s = generate(&spec).unwrap();
        let mask = threshold(&s.volume, 400.0);
        let bank = direction_bank_default();
        let map = compute_anisotropy(&mask, &bank, 5, 1.25, 2.0).unwrap();
        // Principal directions of the volume component should mostly lie in
        // the plane (small z component) for plate structure.
        let mut in_plane = 0usize;
        let mut total = 0usize;
        for (vi, _) in map.voxels.iter().enumerate() {
            let rec = map.record(vi, MfComponent::Volume);
            if rec.degenerate {
                continue;
            }
            total += 1;
            let axis = angles_to_axis(rec.theta, rec.phi);
            if axis[2].abs() < 0.5 {
                in_plane += 1;
            }
        }
        assert!(
            in_plane as f64 / total as f64 > 0.7,
            "only {in_plane}/{total} plate voxels oriented in-plane"
        );
    }

    #[test]
    fn fl_rule_is_deterministic_and_monotone() {
        let model = FlModel { noise_sigma: 0.0, ..FlModel::default() };
        let a = ground_truth_fl(250.0, 0.5, &model, 9);
        let b = ground_truth_fl(250.0, 0.5, &model, 9);
        assert_eq!(a, b);
        let c = ground_truth_fl(300.0, 0.5, &model, 9);
        assert!(c > a);
        let d = ground_truth_fl(250.0, 1.0, &model, 9);
        assert!(d > a);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = rod_spec(1);
        s.fraction = 0.0;
        assert!(generate(&s).is_err());
        let mut s = rod_spec(1);
        s.dims = (4, 24, 24);
        assert!(generate(&s).is_err());
        let mut s = rod_spec(1);
        s.direction = [0.0; 3];
        assert!(generate(&s).is_err());
        let mut s = rod_spec(1);
        s.thickness = 0.5;
        assert!(generate(&s).is_err());
    }

    #[test]
    fn cohort_density_correlation_matches_rule() {
        let spec = CohortSpec { size: 30, seed: 3, ..CohortSpec::default() };
        let cohort = generate_cohort(&spec).unwrap();
        assert_eq!(cohort.len(), 30);
        let bmd: Vec<f64> = cohort.iter().map(|s| s.mean_bmd).collect();
        let fl: Vec<f64> = cohort.iter().map(|s| s.fl_kn).collect();
        let r = crate::stats_eval::pearson_r(&bmd, &fl).unwrap();
        // Configured partial dependence: r = a sigma_bmd / sigma_fl with
        // independent drivers.
        let n = bmd.len() as f64;
        let mean_bmd = bmd.iter().sum::<f64>() / n;
        let sd_bmd =
            (bmd.iter().map(|v| (v - mean_bmd) * (v - mean_bmd)).sum::<f64>() / n).sqrt();
        let mean_fl = fl.iter().sum::<f64>() / n;
        let sd_fl = (fl.iter().map(|v| (v - mean_fl) * (v - mean_fl)).sum::<f64>() / n).sqrt();
        let expected = spec.fl.per_100_bmd * (sd_bmd / 100.0) / sd_fl;
        assert!((r - expected).abs() <= 0.1, "r {r} vs expected {expected}");
    }

    #[test]
    fn cohort_roundtrip_through_manifest() {
        let spec = CohortSpec { size: 4, dims: (12, 12, 12), seed: 21, ..CohortSpec::default() };
        let cohort = generate_cohort(&spec).unwrap();
        let dir = std::env::temp_dir().join("mink3d_phantom_cohort");
        let _ = std::fs::remove_dir_all(&dir);
        let manifest = write_cohort(&dir, &cohort).unwrap();
        let rows = read_manifest(&manifest).unwrap();
        assert_eq!(rows.len(), 4);
        for (row, s) in rows.iter().zip(&cohort) {
            assert_eq!(row.specimen_id, s.id);
            let vol = crate::volume::load_raw(&row.volume_path).unwrap();
            assert_eq!(&vol, &s.volume);
        }
    }
}
