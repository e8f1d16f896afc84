//! Training point generation and evaluation grids.
//!
//! Interior collocation points come from the Hammersley point set (first
//! coordinate `i/n`, remaining coordinates radical inverses in the first
//! primes). Initial and boundary points are drawn from a seeded splitmix64
//! generator so that every sample set is reproducible from its seed.

use serde::{Deserialize, Serialize};

use crate::problems::Geometry;

/// First primes used as radical-inverse bases, one per spatial coordinate.
const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Van der Corput radical inverse of `index` in base `base`: reverse the
/// base-`base` digits of `index` about the radix point.
pub fn radical_inverse(base: u64, mut index: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut result = 0.0;
    let mut scale = inv_base;
    while index > 0 {
        result += (index % base) as f64 * scale;
        index /= base;
        scale *= inv_base;
    }
    result
}

/// Hammersley point set: point `i` of `n` is
/// `(i/n, phi_2(i), phi_3(i), ..., phi_{p_{d-1}}(i))`.
///
/// Deterministic, no seed. Points are returned flat, `d` coordinates each.
pub fn hammersley(n: usize, d: usize) -> Vec<f64> {
    assert!(n >= 1 && d >= 1, "hammersley requires n >= 1 and d >= 1");
    assert!(d - 1 <= PRIMES.len(), "dimension {d} not supported");
    let mut out = Vec::with_capacity(n * d);
    for i in 0..n {
        out.push(i as f64 / n as f64);
        for &p in &PRIMES[..d - 1] {
            out.push(radical_inverse(p, i as u64));
        }
    }
    out
}

/// Splitmix64: tiny, seedable, and identical on every platform.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Derive an independent stream from a base seed and a purpose tag.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    SplitMix64::new(base ^ tag.wrapping_mul(0xd1b54a32d192ed03)).next_u64()
}

/// Requested point counts for a sample set.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct SampleCounts {
    pub collocation: usize,
    pub initial: usize,
    pub boundary: usize,
}

/// A flat list of points, `dim` coordinates each (time first).
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    pub dim: usize,
    pub coords: Vec<f64>,
}

impl PointSet {
    pub fn with_capacity(dim: usize, n: usize) -> Self {
        Self { dim, coords: Vec::with_capacity(dim * n) }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, p: &[f64]) {
        debug_assert_eq!(p.len(), self.dim);
        self.coords.extend_from_slice(p);
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }
}

/// Collocation, initial, and boundary training points with their provenance.
#[derive(Clone, Debug)]
pub struct SampleSet {
    /// Interior points in (0, T] x Omega.
    pub collocation: PointSet,
    /// Points in {0} x Omega.
    pub initial: PointSet,
    /// Points in (0, T] x Gamma, one spatial coordinate pinned to a face.
    pub boundary: PointSet,
    pub seed: u64,
    pub sampler: String,
}

/// Build the training set for a problem geometry.
///
/// Collocation uses Hammersley points: the time coordinate is the equispaced
/// axis shifted half a cell into (0, T]; the spatial coordinates take the
/// radical inverses at sequence index `i + 1`, which keeps them strictly
/// inside the open domain (the radical inverse vanishes only at index 0).
/// Initial and boundary points are uniform draws from a splitmix64 stream;
/// boundary points are split equally across faces with the remainder going
/// to the first faces in axis order.
pub fn build_samples(geom: &Geometry, counts: &SampleCounts, seed: u64) -> SampleSet {
    assert!(counts.collocation >= 1 && counts.initial >= 1 && counts.boundary >= 1);
    let s = geom.spatial_dim;
    let dim = 1 + s;
    let (lo, hi, t_final) = (&geom.lo, &geom.hi, geom.t_final);

    let mut collocation = PointSet::with_capacity(dim, counts.collocation);
    let n_f = counts.collocation;
    for i in 0..n_f {
        let raw_t = i as f64 / n_f as f64;
        let t = (t_final * (raw_t + 0.5 / n_f as f64)).min(t_final);
        collocation.coords.push(t);
        for (a, &p) in PRIMES[..s].iter().enumerate() {
            let u = radical_inverse(p, (i + 1) as u64);
            collocation.coords.push(lo[a] + (hi[a] - lo[a]) * u);
        }
    }

    let mut rng = SplitMix64::new(derive_seed(seed, 0x5a));
    let mut initial = PointSet::with_capacity(dim, counts.initial);
    for _ in 0..counts.initial {
        initial.coords.push(0.0);
        for a in 0..s {
            let mut u = rng.next_f64();
            while u == 0.0 {
                u = rng.next_f64();
            }
            initial.coords.push(lo[a] + (hi[a] - lo[a]) * u);
        }
    }

    let mut boundary = PointSet::with_capacity(dim, counts.boundary);
    let faces = 2 * s;
    let per_face = counts.boundary / faces;
    let remainder = counts.boundary % faces;
    for face in 0..faces {
        let n = per_face + usize::from(face < remainder);
        let axis = face / 2;
        let value = if face % 2 == 0 { lo[axis] } else { hi[axis] };
        for _ in 0..n {
            // t in (0, T]: 1 - u is in (0, 1] for u in [0, 1).
            boundary.coords.push(t_final * (1.0 - rng.next_f64()));
            for a in 0..s {
                if a == axis {
                    boundary.coords.push(value);
                } else {
                    boundary.coords.push(lo[a] + (hi[a] - lo[a]) * rng.next_f64());
                }
            }
        }
    }

    SampleSet {
        collocation,
        initial,
        boundary,
        seed,
        sampler: "hammersley+splitmix64".to_string(),
    }
}

/// Evenly spaced values over [a, b], endpoints included exactly.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1);
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                a
            } else if i == n - 1 {
                b
            } else {
                a + (b - a) * (i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// Tensor-product evaluation grid over [0, T] x closure(Omega).
///
/// `shape` lists the number of levels per axis, time first. Points are
/// emitted row-major with time as the slowest axis, so a fixed-time slice
/// is contiguous.
pub fn test_grid(geom: &Geometry, shape: &[usize]) -> PointSet {
    assert_eq!(shape.len(), 1 + geom.spatial_dim, "grid shape must cover t and space");
    let axes: Vec<Vec<f64>> = std::iter::once(linspace(0.0, geom.t_final, shape[0]))
        .chain(
            (0..geom.spatial_dim)
                .map(|a| linspace(geom.lo[a], geom.hi[a], shape[1 + a])),
        )
        .collect();
    let total: usize = shape.iter().product();
    let dim = axes.len();
    let mut grid = PointSet::with_capacity(dim, total);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        for (a, &i) in idx.iter().enumerate() {
            grid.coords.push(axes[a][i]);
        }
        // odometer increment, last axis fastest
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < shape[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    grid
}
