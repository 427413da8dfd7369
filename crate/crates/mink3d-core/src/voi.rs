//! Spherical volume-of-interest construction: least-squares sphere fit to
//! surface points, down-scaling, and rasterization into a voxel mask.
//!
//! The fit starts from a linear algebraic estimate (least squares on the
//! expanded sphere equation) and refines it with Gauss-Newton on the exact
//! geometric residuals ||p - c|| - r, with step halving so the residual
//! never increases.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{eigh3, solve_sym_pinv, Mat};
use crate::volume::{BinaryVolume, ScalarVolume};

/// Fitted sphere in mm, plus the shrink factor applied for masking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereVoi {
    pub center: [f64; 3],
    pub radius: f64,
    /// Radius scale applied when masking (1.0 = fit as-is).
    pub scale: f64,
}

/// Diagnostics of a completed fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereFit {
    pub voi: SphereVoi,
    pub iterations: usize,
    /// Root-mean-square geometric residual, mm.
    pub rms_residual: f64,
    pub converged: bool,
}

const GN_MAX_ITERS: usize = 100;
const GN_STEP_TOL: f64 = 1e-9;

/// Fit a sphere to surface points by Gauss-Newton least squares.
///
/// Needs at least 4 points in general position; coplanar point sets are
/// rejected (they cannot pin down a sphere).
pub fn fit_sphere(points: &[[f64; 3]]) -> Result<SphereFit> {
    if points.len() < 4 {
        return Err(Error::Degenerate(format!(
            "sphere fit needs >= 4 points, got {}",
            points.len()
        )));
    }
    check_not_coplanar(points)?;

    let (mut center, mut radius) = algebraic_init(points);
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Degenerate("algebraic initialization collapsed".into()));
    }

    let mut residual = rms_residual(points, center, radius);
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..GN_MAX_ITERS {
        iterations += 1;
        // J^T J delta = -J^T f with rows J_i = [-(p-c)/||p-c||, -1].
        let mut jtj = Mat::zeros(4, 4);
        let mut jtf = [0.0f64; 4];
        for p in points {
            let d = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
            let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if dist < 1e-12 {
                continue; // point at the current center has no direction
            }
            let row = [-d[0] / dist, -d[1] / dist, -d[2] / dist, -1.0];
            let f = dist - radius;
            for a in 0..4 {
                jtf[a] += row[a] * f;
                for b in 0..4 {
                    jtj.data[a * 4 + b] += row[a] * row[b];
                }
            }
        }
        let neg_jtf: Vec<f64> = jtf.iter().map(|v| -v).collect();
        let delta = solve_sym_pinv(&jtj, &neg_jtf);
        let step_norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();

        // Step halving: accept the largest fraction of the step that does
        // not increase the residual.
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let cand_center = [
                center[0] + lam * delta[0],
                center[1] + lam * delta[1],
                center[2] + lam * delta[2],
            ];
            let cand_radius = radius + lam * delta[3];
            let cand_res = rms_residual(points, cand_center, cand_radius);
            if cand_res <= residual && cand_radius > 0.0 {
                center = cand_center;
                radius = cand_radius;
                residual = cand_res;
                accepted = true;
                break;
            }
            lam *= 0.5;
        }
        if step_norm < GN_STEP_TOL {
            converged = true;
            break;
        }
        if !accepted {
            // No fraction of the step improves: stationary point.
            converged = true;
            break;
        }
    }

    if !converged {
        return Err(Error::Degenerate(format!(
            "sphere fit did not converge in {GN_MAX_ITERS} iterations (rms residual {residual:.6})"
        )));
    }
    Ok(SphereFit {
        voi: SphereVoi { center, radius, scale: 1.0 },
        iterations,
        rms_residual: residual,
        converged,
    })
}

fn rms_residual(points: &[[f64; 3]], center: [f64; 3], radius: f64) -> f64 {
    let ss: f64 = points
        .iter()
        .map(|p| {
            let d = ((p[0] - center[0]).powi(2)
                + (p[1] - center[1]).powi(2)
                + (p[2] - center[2]).powi(2))
            .sqrt();
            (d - radius) * (d - radius)
        })
        .sum();
    (ss / points.len() as f64).sqrt()
}

/// Linear least-squares estimate from ||p||^2 = 2 p . c + (r^2 - ||c||^2).
fn algebraic_init(points: &[[f64; 3]]) -> ([f64; 3], f64) {
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|p| vec![2.0 * p[0], 2.0 * p[1], 2.0 * p[2], 1.0])
        .collect();
    let rhs: Vec<f64> = points
        .iter()
        .map(|p| p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
        .collect();
    let design = Mat::from_rows(&rows);
    let sol = solve_sym_pinv(&design.gram(), &design.t_mul_vec(&rhs));
    let center = [sol[0], sol[1], sol[2]];
    let r2 = sol[3] + center[0] * center[0] + center[1] * center[1] + center[2] * center[2];
    (center, r2.max(0.0).sqrt())
}

fn check_not_coplanar(points: &[[f64; 3]]) -> Result<()> {
    let n = points.len() as f64;
    let mut mean = [0.0f64; 3];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = [0.0f64; 6]; // [xx, xy, xz, yy, yz, zz]
    for p in points {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        cov[0] += d[0] * d[0];
        cov[1] += d[0] * d[1];
        cov[2] += d[0] * d[2];
        cov[3] += d[1] * d[1];
        cov[4] += d[1] * d[2];
        cov[5] += d[2] * d[2];
    }
    let (evals, _) = eigh3(&cov);
    if evals[0] <= 0.0 || evals[2] / evals[0] < 1e-10 {
        return Err(Error::Degenerate(
            "surface points are coplanar (or collinear); sphere is underdetermined".into(),
        ));
    }
    Ok(())
}

/// Result of rasterizing a (scaled) sphere into a volume grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereMask {
    pub mask: BinaryVolume,
    pub inside_voxels: usize,
    /// Set when no voxel center fell inside the scaled sphere.
    pub empty: bool,
}

/// Shrink the sphere radius by `scale` about its center and mark every voxel
/// whose center (in mm, via the volume spacing) lies inside.
pub fn scale_and_mask(voi: &SphereVoi, scale: f64, volume: &ScalarVolume) -> Result<SphereMask> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "scale must be in (0, 1], got {scale}"
        )));
    }
    let r = voi.radius * scale;
    let r2 = r * r;
    let (nx, ny, nz) = volume.dims();
    let mut mask = BinaryVolume::empty(volume.dims())?;
    let mut inside = 0usize;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let (x, y, z) = volume.voxel_center_mm(i, j, k);
                let d2 = (x - voi.center[0]).powi(2)
                    + (y - voi.center[1]).powi(2)
                    + (z - voi.center[2]).powi(2);
                if d2 <= r2 {
                    mask.set(i, j, k, true);
                    inside += 1;
                }
            }
        }
    }
    Ok(SphereMask { mask, inside_voxels: inside, empty: inside == 0 })
}

/// Read surface points from a CSV of `x_mm,y_mm,z_mm` rows (optional header).
pub fn read_points_csv(path: &Path) -> Result<Vec<[f64; 3]>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if n == 0 && line.chars().any(|c| c.is_alphabetic()) {
            continue; // header row
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Io(format!("line {}: expected x_mm,y_mm,z_mm", n + 1)));
        }
        let mut p = [0.0f64; 3];
        for (slot, field) in p.iter_mut().zip(&fields) {
            *slot = field
                .parse()
                .map_err(|_| Error::Io(format!("line {}: bad coordinate {field:?}", n + 1)))?;
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(Error::Io("points file holds no rows".into()));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::volume::ValueKind;

    fn axis_points(c: [f64; 3], r: f64) -> Vec<[f64; 3]> {
        vec![
            [c[0] + r, c[1], c[2]],
            [c[0] - r, c[1], c[2]],
            [c[0], c[1] + r, c[2]],
            [c[0], c[1] - r, c[2]],
            [c[0], c[1], c[2] + r],
            [c[0], c[1], c[2] - r],
        ]
    }

    #[test]
    fn recovers_exact_sphere() {
        let fit = fit_sphere(&axis_points([1.0, 2.0, 3.0], 5.0)).unwrap();
        assert!((fit.voi.center[0] - 1.0).abs() < 1e-8);
        assert!((fit.voi.center[1] - 2.0).abs() < 1e-8);
        assert!((fit.voi.center[2] - 3.0).abs() < 1e-8);
        assert!((fit.voi.radius - 5.0).abs() < 1e-8);
        assert!(fit.rms_residual < 1e-8);
    }

    #[test]
    fn rejects_coplanar_points() {
        let pts = vec![
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 1.0],
            [0.0, 1.0, 1.0],
            [1.0, 1.0, 1.0],
            [0.5, 0.25, 1.0],
        ];
        match fit_sphere(&pts) {
            Err(Error::Degenerate(_)) => {}
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn rejects_too_few_points() {
        assert!(fit_sphere(&[[0.0; 3], [1.0; 3], [2.0; 3]]).is_err());
    }

    #[test]
    fn noisy_sphere_radius_close() {
        let mut rng = Rng::new(77);
        let c = [10.0, -4.0, 2.5];
        let r = 24.0;
        let points: Vec<[f64; 3]> = (0..100)
            .map(|_| {
                // Uniform-ish directions via normalized gaussians.
                let v = [rng.normal(), rng.normal(), rng.normal()];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                let noise = 0.01 * rng.normal();
                [
                    c[0] + (r + noise) * v[0] / n,
                    c[1] + (r + noise) * v[1] / n,
                    c[2] + (r + noise) * v[2] / n,
                ]
            })
            .collect();
        let fit = fit_sphere(&points).unwrap();
        assert!((fit.voi.radius - r).abs() < 0.01, "radius {}", fit.voi.radius);
    }

    #[test]
    fn translation_invariance() {
        let base = axis_points([0.0, 0.0, 0.0], 7.5);
        let t = [13.25, -8.5, 100.0];
        let moved: Vec<[f64; 3]> = base
            .iter()
            .map(|p| [p[0] + t[0], p[1] + t[1], p[2] + t[2]])
            .collect();
        let fa = fit_sphere(&base).unwrap();
        let fb = fit_sphere(&moved).unwrap();
        assert!((fa.voi.radius - fb.voi.radius).abs() < 1e-9);
        for a in 0..3 {
            assert!((fa.voi.center[a] + t[a] - fb.voi.center[a]).abs() < 1e-9);
        }
    }

    fn unit_volume(n: usize) -> ScalarVolume {
        ScalarVolume::new((n, n, n), (1.0, 1.0, 1.0), vec![0.0; n * n * n], ValueKind::Bmd).unwrap()
    }

    #[test]
    fn mask_monotone_in_scale() {
        let vol = unit_volume(16);
        let voi = SphereVoi { center: [8.0, 8.0, 8.0], radius: 6.0, scale: 1.0 };
        let mut prev = 0usize;
        for scale in [0.25, 0.5, 0.75, 1.0] {
            let m = scale_and_mask(&voi, scale, &vol).unwrap();
            assert!(m.inside_voxels >= prev, "scale {scale}");
            prev = m.inside_voxels;
        }
    }

    #[test]
    fn mask_scale_identity_and_shrink() {
        let vol = unit_volume(16);
        let voi = SphereVoi { center: [8.0, 8.0, 8.0], radius: 5.0, scale: 1.0 };
        let full = scale_and_mask(&voi, 1.0, &vol).unwrap();
        let shrunk = scale_and_mask(&voi, 0.75, &vol).unwrap();
        assert!(!full.empty);
        // 0.75 radius scale leaves ~42% of the ball volume.
        let ratio = shrunk.inside_voxels as f64 / full.inside_voxels as f64;
        assert!(ratio > 0.25 && ratio < 0.6, "ratio {ratio}");
        // Shrunk mask is a subset of the full one.
        for (a, b) in shrunk.mask.voxels().iter().zip(full.mask.voxels()) {
            assert!(!a || *b);
        }
    }

    #[test]
    fn mask_outside_volume_is_empty_with_flag() {
        let vol = unit_volume(8);
        let voi = SphereVoi { center: [100.0, 100.0, 100.0], radius: 3.0, scale: 1.0 };
        let m = scale_and_mask(&voi, 1.0, &vol).unwrap();
        assert!(m.empty);
        assert_eq!(m.inside_voxels, 0);
    }

    #[test]
    fn points_csv_roundtrip() {
        let dir = std::env::temp_dir().join("mink3d_voi_points");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("pts.csv");
        std::fs::write(&path, "x_mm,y_mm,z_mm\n1.5,2.5,3.5\n-1,0,4\n").unwrap();
        let pts = read_points_csv(&path).unwrap();
        assert_eq!(pts, vec![[1.5, 2.5, 3.5], [-1.0, 0.0, 4.0]]);
    }
}
