//! Directional Minkowski functionals and per-voxel anisotropy.
//!
//! Each white voxel is probed with a bank of orientation-elongated Gaussian
//! kernels. The per-direction responses feed a second-moment orientation
//! tensor M = sum_d r(d)^2 d d^T whose eigenstructure yields the fractional
//! anisotropy and the principal orientation angles (theta, phi) of the local
//! structure, separately for each of the four functionals.
//!
//! Squaring the responses keeps negative functionals (Euler characteristic
//! can be negative) symmetric in the tensor and guarantees positive
//! semidefiniteness.

use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::eigh3;
use crate::local_mf::{make_oriented_gaussian, Kernel3D};
use crate::minkowski::voxel_contributions;
use crate::volume::{BinaryVolume, VoxelIndex};

/// Bank of probing directions covering a hemisphere (antipodes collapsed;
/// the kernels are symmetric under sign flips anyway).
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionBank {
    directions: Vec<[f64; 3]>,
}

impl DirectionBank {
    pub fn new(directions: Vec<[f64; 3]>) -> Result<Self> {
        if directions.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "direction bank needs >= 3 directions, got {}",
                directions.len()
            )));
        }
        for (n, d) in directions.iter().enumerate() {
            let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "direction {n} is not unit length (norm {norm})"
                )));
            }
        }
        for a in 0..directions.len() {
            for b in (a + 1)..directions.len() {
                let da = directions[a];
                let db = directions[b];
                let dot = (da[0] * db[0] + da[1] * db[1] + da[2] * db[2]).abs();
                if dot > 1.0 - 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "directions {a} and {b} are collinear"
                    )));
                }
            }
        }
        Ok(DirectionBank { directions })
    }

    pub fn directions(&self) -> &[[f64; 3]] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// The standard long/short sigma-ratio sweep of the evaluation protocol.
pub const SIGMA_RATIO_SWEEP: [f64; 3] = [2.0, 4.0, 8.0];

/// The 13 distinct axes of the 3x3x3 voxel neighborhood (3 face, 6 edge and
/// 4 corner directions after collapsing antipodes), normalized.
pub fn direction_bank_default() -> DirectionBank {
    let raw: [[f64; 3]; 13] = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 1.0, 0.0],
        [1.0, -1.0, 0.0],
        [1.0, 0.0, 1.0],
        [1.0, 0.0, -1.0],
        [0.0, 1.0, 1.0],
        [0.0, 1.0, -1.0],
        [1.0, 1.0, 1.0],
        [1.0, 1.0, -1.0],
        [1.0, -1.0, 1.0],
        [1.0, -1.0, -1.0],
    ];
    let directions = raw
        .iter()
        .map(|d| {
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            [d[0] / n, d[1] / n, d[2] / n]
        })
        .collect();
    DirectionBank::new(directions).expect("built-in bank is valid")
}

/// Per-voxel, per-direction, per-component local MF responses.
///
/// Layout is voxel-major then bank order: the response of voxel `v` under
/// direction `d` is `values[v * bank_len + d]`, a [volume, surface,
/// mean_breadth, euler] quadruple.
#[derive(Debug, Clone)]
pub struct DirectionalResponses {
    pub voxels: Vec<VoxelIndex>,
    pub bank_len: usize,
    pub values: Vec<[f64; 4]>,
}

impl DirectionalResponses {
    pub fn response(&self, voxel_idx: usize, dir_idx: usize) -> [f64; 4] {
        self.values[voxel_idx * self.bank_len + dir_idx]
    }
}

/// Local MF of every white voxel under every direction of the bank, using
/// oriented Gaussian kernels of the given size, long-axis sigma and ratio.
pub fn directional_responses(
    vol: &BinaryVolume,
    bank: &DirectionBank,
    size: usize,
    sigma_long: f64,
    ratio: f64,
) -> Result<DirectionalResponses> {
    let kernels: Vec<Kernel3D> = bank
        .directions()
        .iter()
        .map(|&d| make_oriented_gaussian(size, sigma_long, ratio, d))
        .collect::<Result<_>>()?;

    let field = voxel_contributions(vol);
    let whites = vol.white_indices();
    let (nx, ny, nz) = vol.dims();
    let h = size / 2;
    let kd = size;

    let values: Vec<[f64; 4]> = whites
        .par_iter()
        .flat_map_iter(|&v| {
            // Gather the white voxels of this window once, then weight the
            // same gathered set under each directional kernel.
            let i_lo = v.i.saturating_sub(h);
            let i_hi = (v.i + h).min(nx - 1);
            let j_lo = v.j.saturating_sub(h);
            let j_hi = (v.j + h).min(ny - 1);
            let k_lo = v.k.saturating_sub(h);
            let k_hi = (v.k + h).min(nz - 1);
            let mut taps: Vec<(usize, [f64; 4])> = Vec::new();
            for k in k_lo..=k_hi {
                let c = k + h - v.k;
                for j in j_lo..=j_hi {
                    let b = j + h - v.j;
                    for i in i_lo..=i_hi {
                        if !vol.get(i, j, k) {
                            continue;
                        }
                        let a = i + h - v.i;
                        let contrib = field.get(i, j, k);
                        taps.push((
                            a + kd * (b + kd * c),
                            [
                                contrib[0] as f64,
                                contrib[1] as f64,
                                contrib[2] as f64,
                                contrib[3] as f64,
                            ],
                        ));
                    }
                }
            }
            kernels.iter().map(move |kernel| {
                let w = kernel.weights();
                let mut acc = [0.0f64; 4];
                for &(tap, contrib) in &taps {
                    let wt = w[tap];
                    acc[0] += wt * contrib[0];
                    acc[1] += wt * contrib[1];
                    acc[2] += wt * contrib[2];
                    acc[3] += wt * contrib[3];
                }
                acc
            })
        })
        .collect();

    Ok(DirectionalResponses { voxels: whites, bank_len: bank.len(), values })
}

/// Eigenstructure of the orientation tensor for one voxel and component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationTensor {
    /// Eigenvalues sorted descending; all >= 0 up to rounding.
    pub eigenvalues: [f64; 3],
    /// Unit eigenvector of the largest eigenvalue.
    pub principal: [f64; 3],
    /// True when every directional response was zero; orientation and FA
    /// carry no information then.
    pub degenerate: bool,
}

/// M = sum_d r(d)^2 d d^T, decomposed. `responses` holds one scalar per bank
/// direction.
pub fn orientation_tensor(responses: &[f64], bank: &DirectionBank) -> Result<OrientationTensor> {
    if responses.len() != bank.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} responses for a bank of {}",
            responses.len(),
            bank.len()
        )));
    }
    if responses.iter().all(|&r| r == 0.0) {
        return Ok(OrientationTensor {
            eigenvalues: [0.0; 3],
            principal: [1.0, 0.0, 0.0],
            degenerate: true,
        });
    }
    // Symmetric 3x3 as [a11, a12, a13, a22, a23, a33].
    let mut m = [0.0f64; 6];
    for (&r, d) in responses.iter().zip(bank.directions()) {
        let r2 = r * r;
        m[0] += r2 * d[0] * d[0];
        m[1] += r2 * d[0] * d[1];
        m[2] += r2 * d[0] * d[2];
        m[3] += r2 * d[1] * d[1];
        m[4] += r2 * d[1] * d[2];
        m[5] += r2 * d[2] * d[2];
    }
    let (eigenvalues, principal) = eigh3(&m);
    Ok(OrientationTensor { eigenvalues, principal, degenerate: false })
}

/// FA = sqrt((l1-l2)^2 + (l1-l3)^2 + (l2-l3)^2) / sqrt(2 (l1^2+l2^2+l3^2)).
///
/// Scale invariant, 0 for isotropy, 1 for a rank-one spectrum. Errors on the
/// all-zero spectrum (callers map that to FA = 0 with a degeneracy flag).
pub fn fractional_anisotropy(l1: f64, l2: f64, l3: f64) -> Result<f64> {
    let denom = 2.0 * (l1 * l1 + l2 * l2 + l3 * l3);
    if denom == 0.0 {
        return Err(Error::Degenerate("all eigenvalues are zero".into()));
    }
    let num = (l1 - l2).powi(2) + (l1 - l3).powi(2) + (l2 - l3).powi(2);
    Ok((num / denom).sqrt().min(1.0))
}

/// Orientation angles of a direction in degrees.
///
/// The vector is first sign-normalized so its first nonzero component is
/// positive (the tensor cannot distinguish antipodes). theta is the angle of
/// the xy-projection from +x and phi the elevation out of the xy plane, both
/// folded into [0, 180); a zero xy-projection gets theta = 0 by convention.
pub fn principal_angles(eigenvector: [f64; 3]) -> Result<(f64, f64)> {
    let norm2 = eigenvector.iter().map(|x| x * x).sum::<f64>();
    if norm2 == 0.0 {
        return Err(Error::Degenerate("zero eigenvector has no orientation".into()));
    }
    let mut v = eigenvector;
    for c in v {
        if c != 0.0 {
            if c < 0.0 {
                v = [-v[0], -v[1], -v[2]];
            }
            break;
        }
    }
    let fold = |deg: f64| -> f64 {
        let mut d = deg % 180.0;
        if d < 0.0 {
            d += 180.0;
        }
        d
    };
    let xy = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let theta = if xy == 0.0 { 0.0 } else { fold(v[1].atan2(v[0]).to_degrees()) };
    let phi = fold(v[2].atan2(xy).to_degrees());
    Ok((theta, phi))
}

/// Inverse of `principal_angles`: rebuild a unit axis from its angles.
///
/// Folded ranges unfold as: theta above 90 means the xy-projection pointed
/// into negative y before folding, phi above 90 means negative elevation.
/// The result is the canonical representative of the axis (up to sign).
pub fn angles_to_axis(theta_deg: f64, phi_deg: f64) -> [f64; 3] {
    let theta = if theta_deg > 90.0 { theta_deg - 180.0 } else { theta_deg }.to_radians();
    let elev = if phi_deg > 90.0 { phi_deg - 180.0 } else { phi_deg }.to_radians();
    [elev.cos() * theta.cos(), elev.cos() * theta.sin(), elev.sin()]
}

/// Anisotropy summary of one voxel for one MF component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisoRecord {
    pub fa: f64,
    pub theta: f64,
    pub phi: f64,
    pub eigenvalues: [f64; 3],
    pub degenerate: bool,
}

/// Per-white-voxel FA/theta/phi triples, one set per MF component.
#[derive(Debug, Clone)]
pub struct AnisotropyMap {
    pub voxels: Vec<VoxelIndex>,
    /// `records[voxel_idx * 4 + component.column()]`
    pub records: Vec<AnisoRecord>,
}

impl AnisotropyMap {
    pub fn record(&self, voxel_idx: usize, component: crate::minkowski::MfComponent) -> AnisoRecord {
        self.records[voxel_idx * 4 + component.column()]
    }

    /// All values of one channel for one component, voxel order.
    pub fn channel(&self, component: crate::minkowski::MfComponent, channel: AnisoChannel) -> Vec<f64> {
        let c = component.column();
        self.voxels
            .iter()
            .enumerate()
            .map(|(n, _)| {
                let r = self.records[n * 4 + c];
                match channel {
                    AnisoChannel::Fa => r.fa,
                    AnisoChannel::Theta => r.theta,
                    AnisoChannel::Phi => r.phi,
                }
            })
            .collect()
    }

    /// CSV with one row per (voxel, component).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "i,j,k,component,FA,theta,phi,lambda1,lambda2,lambda3,degenerate")?;
        for (n, v) in self.voxels.iter().enumerate() {
            for comp in crate::minkowski::MfComponent::ALL {
                let r = self.records[n * 4 + comp.column()];
                writeln!(
                    f,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    v.i,
                    v.j,
                    v.k,
                    comp.name(),
                    r.fa,
                    r.theta,
                    r.phi,
                    r.eigenvalues[0],
                    r.eigenvalues[1],
                    r.eigenvalues[2],
                    u8::from(r.degenerate)
                )?;
            }
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<AnisotropyMap> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut voxels: Vec<VoxelIndex> = Vec::new();
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 11 {
                return Err(Error::Io(format!("line {}: expected 11 fields", n + 1)));
            }
            let pu = |s: &str| -> Result<usize> {
                s.trim().parse().map_err(|_| Error::Io(format!("line {}: bad int {s:?}", n + 1)))
            };
            let pf = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| Error::Io(format!("line {}: bad num {s:?}", n + 1)))
            };
            let voxel = VoxelIndex { i: pu(fields[0])?, j: pu(fields[1])?, k: pu(fields[2])? };
            if voxels.last() != Some(&voxel) {
                voxels.push(voxel);
            }
            records.push(AnisoRecord {
                fa: pf(fields[4])?,
                theta: pf(fields[5])?,
                phi: pf(fields[6])?,
                eigenvalues: [pf(fields[7])?, pf(fields[8])?, pf(fields[9])?],
                degenerate: fields[10].trim() == "1",
            });
        }
        if records.len() != voxels.len() * 4 {
            return Err(Error::Io("anisotropy CSV rows are not voxel-grouped per component".into()));
        }
        Ok(AnisotropyMap { voxels, records })
    }
}

/// Channel of the anisotropy decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnisoChannel {
    Fa,
    Theta,
    Phi,
}

impl AnisoChannel {
    pub const ALL: [AnisoChannel; 3] = [AnisoChannel::Fa, AnisoChannel::Theta, AnisoChannel::Phi];

    pub fn name(self) -> &'static str {
        match self {
            AnisoChannel::Fa => "FA",
            AnisoChannel::Theta => "theta",
            AnisoChannel::Phi => "phi",
        }
    }

    pub fn parse(s: &str) -> Option<AnisoChannel> {
        match s {
            "FA" | "fa" => Some(AnisoChannel::Fa),
            "theta" => Some(AnisoChannel::Theta),
            "phi" => Some(AnisoChannel::Phi),
            _ => None,
        }
    }
}

/// Full anisotropy analysis: directional responses, orientation tensor and
/// FA/angles per white voxel and component.
pub fn compute_anisotropy(
    vol: &BinaryVolume,
    bank: &DirectionBank,
    size: usize,
    sigma_long: f64,
    ratio: f64,
) -> Result<AnisotropyMap> {
    let responses = directional_responses(vol, bank, size, sigma_long, ratio)?;
    anisotropy_from_responses(&responses, bank)
}

pub fn anisotropy_from_responses(
    responses: &DirectionalResponses,
    bank: &DirectionBank,
) -> Result<AnisotropyMap> {
    let n_vox = responses.voxels.len();
    let records: Vec<AnisoRecord> = (0..n_vox)
        .into_par_iter()
        .flat_map_iter(|vi| {
            let per_dir: Vec<[f64; 4]> = (0..responses.bank_len)
                .map(|di| responses.response(vi, di))
                .collect();
            crate::minkowski::MfComponent::ALL.into_iter().map(move |comp| {
                let col = comp.column();
                let rs: Vec<f64> = per_dir.iter().map(|v| v[col]).collect();
                let tensor = orientation_tensor(&rs, bank).expect("bank length fixed");
                let [l1, l2, l3] = tensor.eigenvalues;
                if tensor.degenerate {
                    AnisoRecord {
                        fa: 0.0,
                        theta: 0.0,
                        phi: 0.0,
                        eigenvalues: [0.0; 3],
                        degenerate: true,
                    }
                } else {
                    let fa = fractional_anisotropy(l1.max(0.0), l2.max(0.0), l3.max(0.0))
                        .unwrap_or(0.0);
                    let (theta, phi) =
                        principal_angles(tensor.principal).unwrap_or((0.0, 0.0));
                    AnisoRecord {
                        fa,
                        theta,
                        phi,
                        eigenvalues: tensor.eigenvalues,
                        degenerate: false,
                    }
                }
            })
        })
        .collect();
    Ok(AnisotropyMap { voxels: responses.voxels.clone(), records })
}
