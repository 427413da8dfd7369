//! Minimal dense linear algebra for the toolkit's small problems.
//!
//! Everything here operates on symmetric matrices of modest size (feature
//! counts in the tens to low hundreds, 4x4 fit systems, 3x3 orientation
//! tensors), so a cyclic Jacobi eigensolver and a closed-form 3x3 path cover
//! all needs without an external linear-algebra dependency.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// A^T * A (symmetric, cols x cols).
    pub fn gram(&self) -> Mat {
        let n = self.cols;
        let mut g = Mat::zeros(n, n);
        for i in 0..self.rows {
            let row = &self.data[i * n..(i + 1) * n];
            for a in 0..n {
                for b in a..n {
                    g.data[a * n + b] += row[a] * row[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                g.data[a * n + b] = g.data[b * n + a];
            }
        }
        g
    }

    /// A^T * v, where v has one entry per row of A.
    pub fn t_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, x) in out.iter_mut().zip(row) {
                *o += x * v[i];
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues (descending) and the matching eigenvectors as rows.
/// Deterministic: fixed sweep order, fixed convergence threshold.
pub fn eigh(a: &Mat) -> (Vec<f64>, Mat) {
    assert_eq!(a.rows, a.cols, "eigh needs a square matrix");
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Mat::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }

    let off = |m: &Mat| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += m.get(i, j) * m.get(i, j);
            }
        }
        s
    };
    let scale: f64 = (0..n).map(|i| m.get(i, i).abs()).fold(1e-300, f64::max);
    let tol = (scale * scale) * 1e-30 * (n as f64);

    for _sweep in 0..60 {
        if off(&m) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vpk = v.get(p, k);
                    let vqk = v.get(q, k);
                    v.set(p, k, c * vpk - s * vqk);
                    v.set(q, k, s * vpk + c * vqk);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).unwrap());
    let evals: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut evecs = Mat::zeros(n, n);
    for (r, &i) in order.iter().enumerate() {
        for k in 0..n {
            evecs.set(r, k, v.get(i, k));
        }
    }
    (evals, evecs)
}

/// Minimum-norm least-squares solve of the symmetric system `a * x = b`
/// through the Moore-Penrose pseudo-inverse (eigenvalues below a relative
/// cutoff are treated as zero).
pub fn solve_sym_pinv(a: &Mat, b: &[f64]) -> Vec<f64> {
    let (evals, evecs) = eigh(a);
    let n = a.rows;
    let lmax = evals.iter().cloned().fold(0.0f64, |m, x| m.max(x.abs()));
    let cutoff = lmax * (n as f64) * 1e-13;
    let mut x = vec![0.0; n];
    for (k, &lam) in evals.iter().enumerate() {
        if lam.abs() <= cutoff {
            continue;
        }
        let vk = &evecs.data[k * n..(k + 1) * n];
        let coef: f64 = vk.iter().zip(b).map(|(v, b)| v * b).sum::<f64>() / lam;
        for (xi, vi) in x.iter_mut().zip(vk) {
            *xi += coef * vi;
        }
    }
    x
}

/// Closed-form eigendecomposition of a symmetric 3x3 matrix given as
/// `[a11, a12, a13, a22, a23, a33]`. Returns eigenvalues sorted descending
/// and the principal eigenvector (unit norm) of the largest one.
pub fn eigh3(s: &[f64; 6]) -> ([f64; 3], [f64; 3]) {
    let (a11, a12, a13, a22, a23, a33) = (s[0], s[1], s[2], s[3], s[4], s[5]);
    let p1 = a12 * a12 + a13 * a13 + a23 * a23;
    let q = (a11 + a22 + a33) / 3.0;

    let evals = if p1 == 0.0 {
        let mut d = [a11, a22, a33];
        d.sort_by(|a, b| b.partial_cmp(a).unwrap());
        d
    } else {
        let p2 = (a11 - q).powi(2) + (a22 - q).powi(2) + (a33 - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        // det((A - qI)/p) / 2, clamped into acos domain
        let b11 = (a11 - q) / p;
        let b22 = (a22 - q) / p;
        let b33 = (a33 - q) / p;
        let b12 = a12 / p;
        let b13 = a13 / p;
        let b23 = a23 / p;
        let det_b = b11 * (b22 * b33 - b23 * b23) - b12 * (b12 * b33 - b23 * b13)
            + b13 * (b12 * b23 - b22 * b13);
        let r = (det_b / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        [e1, e2, e3]
    };

    (evals, principal_vector(s, evals[0], evals[1]))
}

/// Eigenvector of the (sorted-largest) eigenvalue: cross product of two rows
/// of A - lambda*I, picking the best-conditioned pair. When lambda1 ~ lambda2
/// the rows of A - lambda1*I span at most one dimension and every cross
/// product collapses; any vector orthogonal to the lambda3 eigenvector is
/// then principal, so the fallback recovers one from A - lambda3*I instead.
fn principal_vector(s: &[f64; 6], lambda1: f64, lambda3: f64) -> [f64; 3] {
    if let Some(v) = null_direction(s, lambda1) {
        return v;
    }
    // lambda1 is (numerically) repeated. The complement of the lambda3
    // eigenspace is all principal; pick a deterministic member of it.
    if let Some(w) = null_direction(s, lambda3) {
        let axis = if w[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let v = cross(w, axis);
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        return [v[0] / n, v[1] / n, v[2] / n];
    }
    // Fully isotropic tensor: every direction is principal.
    [1.0, 0.0, 0.0]
}

/// Unit vector spanning the (one-dimensional) null space of A - lambda*I,
/// or None when the null space is not one-dimensional.
fn null_direction(s: &[f64; 6], lambda: f64) -> Option<[f64; 3]> {
    let rows = [
        [s[0] - lambda, s[1], s[2]],
        [s[1], s[3] - lambda, s[4]],
        [s[2], s[4], s[5] - lambda],
    ];
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let mut best = [0.0f64; 3];
    let mut best_norm = 0.0f64;
    for &(i, j) in &pairs {
        let c = cross(rows[i], rows[j]);
        let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        if n > best_norm {
            best_norm = n;
            best = c;
        }
    }
    let scale = s.iter().fold(lambda.abs(), |m, x| m.max(x.abs())).max(1e-300);
    if best_norm <= scale * scale * 1e-9 {
        return None;
    }
    Some([best[0] / best_norm, best[1] / best_norm, best[2] / best_norm])
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn eigh_diagonal() {
        let m = Mat::from_rows(&[
            vec![3.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 2.0],
        ]);
        let (e, _) = eigh(&m);
        approx(e[0], 3.0, 1e-12);
        approx(e[1], 2.0, 1e-12);
        approx(e[2], 1.0, 1e-12);
    }

    #[test]
    fn eigh_reconstructs() {
        // A = V^T diag(e) V must reproduce the input.
        let m = Mat::from_rows(&[
            vec![4.0, 1.0, -2.0],
            vec![1.0, 3.0, 0.5],
            vec![-2.0, 0.5, 1.0],
        ]);
        let (e, v) = eigh(&m);
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += v.get(k, i) * e[k] * v.get(k, j);
                }
                approx(s, m.get(i, j), 1e-9);
            }
        }
    }

    #[test]
    fn pinv_solves_rank_deficient() {
        // Second row duplicates the first; system is consistent.
        let a = Mat::from_rows(&[vec![2.0, 2.0], vec![2.0, 2.0]]);
        let x = solve_sym_pinv(&a, &[4.0, 4.0]);
        // minimum norm solution: x = (1, 1)
        approx(x[0], 1.0, 1e-10);
        approx(x[1], 1.0, 1e-10);
    }

    #[test]
    fn eigh3_known() {
        // diag(2, 1, 1) rotated by nothing.
        let (e, v) = eigh3(&[2.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        approx(e[0], 2.0, 1e-12);
        approx(e[1], 1.0, 1e-12);
        approx(e[2], 1.0, 1e-12);
        assert!(v[0].abs() > 0.999);
    }

    #[test]
    fn eigh3_rank_one() {
        // d d^T for d = (1,0,0)
        let (e, v) = eigh3(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        approx(e[0], 1.0, 1e-12);
        approx(e[1], 0.0, 1e-12);
        approx(e[2], 0.0, 1e-12);
        assert!(v[0].abs() > 0.999);
    }

    #[test]
    fn eigh3_oblique() {
        // Symmetric matrix with known decomposition: eigenvector (1,1,0)/sqrt(2)
        // for eigenvalue 3, (1,-1,0)/sqrt(2) for 1, (0,0,1) for 2.
        let (e, v) = eigh3(&[2.0, 1.0, 0.0, 2.0, 0.0, 2.0]);
        approx(e[0], 3.0, 1e-12);
        approx(e[1], 2.0, 1e-12);
        approx(e[2], 1.0, 1e-12);
        let dot = (v[0] + v[1]) / std::f64::consts::SQRT_2;
        assert!(dot.abs() > 0.999_999, "principal vector off: {v:?}");
    }
}
