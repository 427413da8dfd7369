//! Global Minkowski functionals of binary images via open-cell counting,
//! plus an additive per-voxel decomposition used by the local variants.
//!
//! A white pixel/voxel stands for its closed unit square/cube on the lattice.
//! The union of those bodies decomposes into open cells (2D: pixels, edges,
//! vertices; 3D: voxels, faces, edges, vertices); each distinct cell is
//! counted once no matter how many bodies share it. The functionals are
//! integer linear combinations of the cell counts, so everything here is
//! exact integer arithmetic.
//!
//! Counting uses the doubled lattice: the closed cube of voxel (i,j,k) covers
//! the 27 lattice cells (2i+a, 2j+b, 2k+c), a,b,c in {0,1,2}, and the number
//! of odd coordinates of a cell identifies its type (3 odd = voxel interior,
//! 2 = face, 1 = edge, 0 = vertex). Marking cells in a doubled grid counts
//! each shared cell exactly once.

use crate::volume::{BinaryVolume, VoxelIndex};

/// 2D binary image (x-fastest layout), used by the 2D counting formulas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage2D {
    dims: (usize, usize),
    pixels: Vec<bool>,
}

impl BinaryImage2D {
    pub fn new(dims: (usize, usize), pixels: Vec<bool>) -> crate::error::Result<Self> {
        if dims.0 < 1 || dims.1 < 1 {
            return Err(crate::error::Error::InvalidParameter(format!(
                "image dims must be >= 1, got {dims:?}"
            )));
        }
        if pixels.len() != dims.0 * dims.1 {
            return Err(crate::error::Error::DimensionMismatch(format!(
                "pixel count {} does not match dims {dims:?}",
                pixels.len()
            )));
        }
        Ok(BinaryImage2D { dims, pixels })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.pixels[i + self.dims.0 * j]
    }
}

/// Distinct open cells of a 2D white set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellCounts2D {
    pub n_s: u64,
    pub n_e: u64,
    pub n_v: u64,
}

/// Distinct open cells of a 3D white set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellCounts3D {
    pub n_s: u64,
    pub n_f: u64,
    pub n_e: u64,
    pub n_v: u64,
}

/// 2D Minkowski functionals in lattice units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mf2D {
    pub area: i64,
    pub perimeter: i64,
    pub euler: i64,
}

/// 3D Minkowski functionals in lattice units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mf3D {
    pub volume: i64,
    pub surface: i64,
    pub mean_breadth: i64,
    pub euler: i64,
}

impl Mf3D {
    pub const ZERO: Mf3D = Mf3D { volume: 0, surface: 0, mean_breadth: 0, euler: 0 };

    pub fn as_array(&self) -> [i64; 4] {
        [self.volume, self.surface, self.mean_breadth, self.euler]
    }

    pub fn add(&self, other: &Mf3D) -> Mf3D {
        Mf3D {
            volume: self.volume + other.volume,
            surface: self.surface + other.surface,
            mean_breadth: self.mean_breadth + other.mean_breadth,
            euler: self.euler + other.euler,
        }
    }
}

/// One of the four 3D functionals, in their fixed column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MfComponent {
    Volume,
    Surface,
    MeanBreadth,
    Euler,
}

impl MfComponent {
    pub const ALL: [MfComponent; 4] = [
        MfComponent::Volume,
        MfComponent::Surface,
        MfComponent::MeanBreadth,
        MfComponent::Euler,
    ];

    pub fn column(self) -> usize {
        match self {
            MfComponent::Volume => 0,
            MfComponent::Surface => 1,
            MfComponent::MeanBreadth => 2,
            MfComponent::Euler => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MfComponent::Volume => "volume",
            MfComponent::Surface => "surface",
            MfComponent::MeanBreadth => "mean_breadth",
            MfComponent::Euler => "euler",
        }
    }

    pub fn parse(s: &str) -> Option<MfComponent> {
        match s {
            "volume" => Some(MfComponent::Volume),
            "surface" => Some(MfComponent::Surface),
            "mean_breadth" => Some(MfComponent::MeanBreadth),
            "euler" => Some(MfComponent::Euler),
            _ => None,
        }
    }
}

/// Count distinct cells (pixels, edges, vertices) of the union of closed
/// unit squares of white pixels.
pub fn count_cells_2d(image: &BinaryImage2D) -> CellCounts2D {
    let (nx, ny) = image.dims();
    let (dx, dy) = (2 * nx + 1, 2 * ny + 1);
    let mut marked = vec![false; dx * dy];
    for j in 0..ny {
        for i in 0..nx {
            if !image.get(i, j) {
                continue;
            }
            for b in 0..3 {
                for a in 0..3 {
                    marked[(2 * i + a) + dx * (2 * j + b)] = true;
                }
            }
        }
    }
    let mut counts = CellCounts2D { n_s: 0, n_e: 0, n_v: 0 };
    for y in 0..dy {
        for x in 0..dx {
            if !marked[x + dx * y] {
                continue;
            }
            match (x % 2) + (y % 2) {
                2 => counts.n_s += 1,
                1 => counts.n_e += 1,
                _ => counts.n_v += 1,
            }
        }
    }
    counts
}

/// Area = n_s, Perimeter = -4 n_s + 2 n_e, Euler = n_s - n_e + n_v.
pub fn mf_2d(counts: CellCounts2D) -> Mf2D {
    let (n_s, n_e, n_v) = (counts.n_s as i64, counts.n_e as i64, counts.n_v as i64);
    Mf2D {
        area: n_s,
        perimeter: -4 * n_s + 2 * n_e,
        euler: n_s - n_e + n_v,
    }
}

/// Count distinct cells (voxels, faces, edges, vertices) of the union of
/// closed unit cubes of white voxels.
pub fn count_cells_3d(vol: &BinaryVolume) -> CellCounts3D {
    let (nx, ny, nz) = vol.dims();
    let (dx, dy, dz) = (2 * nx + 1, 2 * ny + 1, 2 * nz + 1);
    let mut marked = vec![false; dx * dy * dz];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if !vol.get(i, j, k) {
                    continue;
                }
                for c in 0..3 {
                    for b in 0..3 {
                        let base = (2 * i) + dx * ((2 * j + b) + dy * (2 * k + c));
                        marked[base] = true;
                        marked[base + 1] = true;
                        marked[base + 2] = true;
                    }
                }
            }
        }
    }
    let mut counts = CellCounts3D { n_s: 0, n_f: 0, n_e: 0, n_v: 0 };
    for z in 0..dz {
        for y in 0..dy {
            for x in 0..dx {
                if !marked[x + dx * (y + dy * z)] {
                    continue;
                }
                match (x % 2) + (y % 2) + (z % 2) {
                    3 => counts.n_s += 1,
                    2 => counts.n_f += 1,
                    1 => counts.n_e += 1,
                    _ => counts.n_v += 1,
                }
            }
        }
    }
    counts
}

/// Volume = n_s, Surface = -6 n_s + 2 n_f,
/// Mean Breadth = 3 n_s - 2 n_f + n_e, Euler = -n_s + n_f - n_e + n_v.
pub fn mf_3d(counts: CellCounts3D) -> Mf3D {
    let (n_s, n_f, n_e, n_v) = (
        counts.n_s as i64,
        counts.n_f as i64,
        counts.n_e as i64,
        counts.n_v as i64,
    );
    Mf3D {
        volume: n_s,
        surface: -6 * n_s + 2 * n_f,
        mean_breadth: 3 * n_s - 2 * n_f + n_e,
        euler: -n_s + n_f - n_e + n_v,
    }
}

/// Global 3D functionals of a binary volume.
pub fn mf_global(vol: &BinaryVolume) -> Mf3D {
    mf_3d(count_cells_3d(vol))
}

/// Additive per-white-voxel MF contributions.
///
/// Every cell of the white union is owned by exactly one incident white
/// voxel: the lexicographically smallest (i, j, k). Mapping each voxel's
/// owned cell counts through the `mf_3d` formulas yields 4-vectors whose
/// componentwise sum reproduces the global functionals exactly.
#[derive(Debug, Clone)]
pub struct ContributionField {
    dims: (usize, usize, usize),
    /// Dense per-voxel contribution, [volume, surface, mean_breadth, euler];
    /// zero for black voxels.
    values: Vec<[i32; 4]>,
}

impl ContributionField {
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> [i32; 4] {
        self.values[i + self.dims.0 * (j + self.dims.1 * k)]
    }

    /// (voxel, contribution) pairs for white voxels, x-fastest order.
    pub fn per_white(&self, vol: &BinaryVolume) -> Vec<(VoxelIndex, [i32; 4])> {
        vol.white_indices()
            .into_iter()
            .map(|v| (v, self.get(v.i, v.j, v.k)))
            .collect()
    }

    /// Componentwise total over all voxels; equals the global `Mf3D`.
    pub fn total(&self) -> Mf3D {
        let mut acc = [0i64; 4];
        for v in &self.values {
            for (a, &x) in acc.iter_mut().zip(v) {
                *a += x as i64;
            }
        }
        Mf3D {
            volume: acc[0],
            surface: acc[1],
            mean_breadth: acc[2],
            euler: acc[3],
        }
    }
}

pub fn voxel_contributions(vol: &BinaryVolume) -> ContributionField {
    let (nx, ny, nz) = vol.dims();
    let mut values = vec![[0i32; 4]; nx * ny * nz];

    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if !vol.get(i, j, k) {
                    continue;
                }
                // Owned cell counts by type: [voxel, face, edge, vertex].
                let mut owned = [0i64; 4];
                for c in 0..3usize {
                    for b in 0..3usize {
                        for a in 0..3usize {
                            if owns_cell(vol, (i, j, k), (a, b, c)) {
                                let odd = (a & 1) + (b & 1) + (c & 1);
                                owned[3 - odd] += 1;
                            }
                        }
                    }
                }
                let counts = CellCounts3D {
                    n_s: owned[0] as u64,
                    n_f: owned[1] as u64,
                    n_e: owned[2] as u64,
                    n_v: owned[3] as u64,
                };
                let mf = mf_3d(counts);
                values[i + nx * (j + ny * k)] = [
                    mf.volume as i32,
                    mf.surface as i32,
                    mf.mean_breadth as i32,
                    mf.euler as i32,
                ];
            }
        }
    }
    ContributionField { dims: (nx, ny, nz), values }
}

/// Does white voxel v own the cell at doubled-lattice offset (a,b,c) inside
/// its own block? Owner = lexicographically smallest white voxel incident to
/// the cell, comparing (i, j, k) in that order.
#[inline]
fn owns_cell(vol: &BinaryVolume, v: (usize, usize, usize), off: (usize, usize, usize)) -> bool {
    // Candidate incident voxels along one axis, in increasing coordinate:
    // offset 0 -> {x-1, x}, 1 -> {x}, 2 -> {x, x+1}.
    #[inline]
    fn candidates(x: usize, off: usize, n: usize) -> [Option<usize>; 2] {
        match off {
            0 => [if x > 0 { Some(x - 1) } else { None }, Some(x)],
            1 => [Some(x), None],
            _ => [Some(x), if x + 1 < n { Some(x + 1) } else { None }],
        }
    }
    let (nx, ny, nz) = vol.dims();
    let ci = candidates(v.0, off.0, nx);
    let cj = candidates(v.1, off.1, ny);
    let ck = candidates(v.2, off.2, nz);
    // Scan candidates in lexicographic (i, j, k) order; the first white one
    // is the owner.
    for i in ci.into_iter().flatten() {
        for j in cj.into_iter().flatten() {
            for k in ck.into_iter().flatten() {
                if vol.get(i, j, k) {
                    return (i, j, k) == v;
                }
            }
        }
    }
    unreachable!("v itself is white and incident");
}
