//! Periodic rectangular lattice: indexing, edges, entangling-layer
//! schedules, and the space group used for operator canonicalization.
//!
//! Sites are unfolded row-major, `i = ix + iy * nx`, with wraparound in both
//! directions. Edges are stored as unordered pairs with set semantics, so a
//! 2-wide axis contributes each wraparound bond once rather than twice; the
//! familiar `2N` edge count holds whenever both extents are at least 3.

use crate::error::Error;

/// Upper bound on site count, set by the 128-bit Pauli masks.
pub const MAX_SITES: usize = 128;

/// A torus of `nx * ny` spins with nearest-neighbor bonds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    nx: usize,
    ny: usize,
    edges: Vec<(usize, usize)>,
    degree: Vec<usize>,
}

impl Lattice {
    /// Build an `nx` by `ny` periodic lattice. Extents below 2 are rejected
    /// (a 1-wide axis would produce self-loops); `nx * ny` may not exceed
    /// [`MAX_SITES`].
    pub fn new(nx: usize, ny: usize) -> Result<Self, Error> {
        if nx < 2 || ny < 2 {
            return Err(Error::config(format!(
                "lattice extents must be at least 2, got {nx}x{ny}"
            )));
        }
        let n = nx * ny;
        if n > MAX_SITES {
            return Err(Error::resource(format!(
                "lattice has {n} sites, maximum is {MAX_SITES}"
            )));
        }
        let mut set = std::collections::BTreeSet::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let i = ix + iy * nx;
                for j in [((ix + 1) % nx) + iy * nx, ix + ((iy + 1) % ny) * nx] {
                    if j != i {
                        set.insert((i.min(j), i.max(j)));
                    }
                }
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut degree = vec![0usize; n];
        for &(a, b) in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        Ok(Lattice { nx, ny, edges, degree })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Number of sites.
    pub fn n(&self) -> usize {
        self.nx * self.ny
    }

    /// Unfolded index of the (wrapped) coordinate pair.
    pub fn site_index(&self, ix: usize, iy: usize) -> usize {
        (ix % self.nx) + (iy % self.ny) * self.nx
    }

    /// Coordinates of an unfolded site index.
    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.nx, i / self.nx)
    }

    /// Distinct nearest neighbors of `i`, in +x, -x, +y, -y order with
    /// duplicates (possible on 2-wide axes) removed.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let (ix, iy) = self.coords(i);
        let candidates = [
            self.site_index(ix + 1, iy),
            self.site_index(ix + self.nx - 1, iy),
            self.site_index(ix, iy + 1),
            self.site_index(ix, iy + self.ny - 1),
        ];
        let mut out = Vec::with_capacity(4);
        for c in candidates {
            if c != i && !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }

    /// Number of bonds incident on `i`.
    pub fn degree(&self, i: usize) -> usize {
        self.degree[i]
    }

    /// All bonds as ordered-pair `(low, high)` tuples, lexicographically
    /// sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Partition of the edge set into layers with pairwise-disjoint
    /// endpoints, i.e. each layer can be executed as one parallel moment of
    /// two-qubit gates.
    ///
    /// Along an even axis the bonds split into two perfect matchings by
    /// coordinate parity; those seed the schedule. Remaining bonds (odd
    /// axes) are placed greedily, which yields four layers exactly when both
    /// extents are even and a few more otherwise.
    pub fn edge_layers(&self) -> Vec<Vec<(usize, usize)>> {
        let seed_x = self.nx % 2 == 0 && self.nx > 2;
        let seed_y = self.ny % 2 == 0 && self.ny > 2;
        let mut seeds: [Vec<(usize, usize)>; 4] = Default::default();
        let mut pool: Vec<(usize, usize)> = Vec::new();

        for &(a, b) in &self.edges {
            let (ax, ay) = self.coords(a);
            let (bx, by) = self.coords(b);
            if ay == by {
                // horizontal bond; the lead endpoint points +x into the other
                let lead = if (ax + 1) % self.nx == bx { ax } else { bx };
                if seed_x {
                    seeds[lead % 2].push((a, b));
                } else {
                    pool.push((a, b));
                }
            } else {
                let lead = if (ay + 1) % self.ny == by { ay } else { by };
                if seed_y {
                    seeds[2 + lead % 2].push((a, b));
                } else {
                    pool.push((a, b));
                }
            }
        }

        let mut layers: Vec<Vec<(usize, usize)>> =
            seeds.into_iter().filter(|l| !l.is_empty()).collect();
        for &(a, b) in &pool {
            let slot = layers
                .iter()
                .position(|layer| layer.iter().all(|&(c, d)| c != a && c != b && d != a && d != b));
            match slot {
                Some(k) => layers[k].push((a, b)),
                None => layers.push(vec![(a, b)]),
            }
        }
        for l in &mut layers {
            l.sort_unstable();
        }
        layers
    }

    /// The 4N-element space group: all translations composed with identity,
    /// inversion, and the two axis reflections.
    pub fn symmetry_group(&self) -> Vec<SitePermutation> {
        let n = self.n();
        let mut out = Vec::with_capacity(4 * n);
        for base in 0..4u8 {
            for ty in 0..self.ny {
                for tx in 0..self.nx {
                    let mut map = vec![0u16; n];
                    for (i, m) in map.iter_mut().enumerate() {
                        let (ix, iy) = self.coords(i);
                        let (bx, by) = match base {
                            0 => (ix, iy),
                            1 => ((self.nx - ix) % self.nx, (self.ny - iy) % self.ny),
                            2 => (ix, (self.ny - iy) % self.ny),
                            _ => ((self.nx - ix) % self.nx, iy),
                        };
                        *m = self.site_index(bx + tx, by + ty) as u16;
                    }
                    out.push(SitePermutation { map });
                }
            }
        }
        out
    }
}

/// A permutation of lattice sites, stored as a forward map.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SitePermutation {
    map: Vec<u16>,
}

impl SitePermutation {
    pub fn identity(n: usize) -> Self {
        SitePermutation { map: (0..n as u16).collect() }
    }

    pub fn apply(&self, site: usize) -> usize {
        self.map[site] as usize
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SitePermutation) -> SitePermutation {
        let map = other.map.iter().map(|&m| self.map[m as usize]).collect();
        SitePermutation { map }
    }

    pub fn as_slice(&self) -> &[u16] {
        &self.map
    }
}
