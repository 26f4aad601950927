//! Bit-packed Pauli strings on up to 128 sites.
//!
//! A string is stored as two masks `(z, x)`; site `q` holds I, X, Y, or Z
//! according to the bit pair `(z_q, x_q)` = (0,0), (0,1), (1,1), (1,0).
//! The stored operator is the literal tensor product of those single-site
//! Paulis, so strings are Hermitian and phase-free; products return the
//! accompanying power of `i` separately and coefficients live elsewhere.

use crate::lattice::SitePermutation;

/// Single-site Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum SitePauli {
    I = 0,
    X = 1,
    Y = 2,
    Z = 3,
}

impl SitePauli {
    pub const ALL: [SitePauli; 4] = [SitePauli::I, SitePauli::X, SitePauli::Y, SitePauli::Z];

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(SitePauli::I),
            'X' => Some(SitePauli::X),
            'Y' => Some(SitePauli::Y),
            'Z' => Some(SitePauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            SitePauli::I => 'I',
            SitePauli::X => 'X',
            SitePauli::Y => 'Y',
            SitePauli::Z => 'Z',
        }
    }

    /// Position in I, X, Y, Z order.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Inverse of [`SitePauli::index`]; wraps modulo 4.
    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 4]
    }

    fn zx(self) -> (bool, bool) {
        match self {
            SitePauli::I => (false, false),
            SitePauli::X => (false, true),
            SitePauli::Y => (true, true),
            SitePauli::Z => (true, false),
        }
    }
}

/// A Pauli operator on the lattice, packed into two 128-bit masks.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PauliString {
    pub z: u128,
    pub x: u128,
}

impl PauliString {
    pub const IDENTITY: PauliString = PauliString { z: 0, x: 0 };

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    /// Single-site string `p` at `site`.
    pub fn single(site: usize, p: SitePauli) -> Self {
        PauliString::identity().with_site(site, p)
    }

    /// Build from per-site labels, site 0 first.
    pub fn from_sites(labels: &[SitePauli]) -> Self {
        let mut s = PauliString::identity();
        for (q, &p) in labels.iter().enumerate() {
            s = s.with_site(q, p);
        }
        s
    }

    /// Parse a label like "IXZ" (site 0 first). Length gives the support
    /// window only; trailing identities are implicit.
    pub fn parse(label: &str) -> Option<Self> {
        let mut s = PauliString::identity();
        for (q, c) in label.chars().enumerate() {
            if q >= 128 {
                return None;
            }
            s = s.with_site(q, SitePauli::from_char(c)?);
        }
        Some(s)
    }

    pub fn site(&self, q: usize) -> SitePauli {
        let z = (self.z >> q) & 1 == 1;
        let x = (self.x >> q) & 1 == 1;
        match (z, x) {
            (false, false) => SitePauli::I,
            (false, true) => SitePauli::X,
            (true, true) => SitePauli::Y,
            (true, false) => SitePauli::Z,
        }
    }

    #[must_use]
    pub fn with_site(&self, q: usize, p: SitePauli) -> Self {
        debug_assert!(q < 128);
        let (z, x) = p.zx();
        let mut s = *self;
        s.z = (s.z & !(1u128 << q)) | ((z as u128) << q);
        s.x = (s.x & !(1u128 << q)) | ((x as u128) << q);
        s
    }

    pub fn is_identity(&self) -> bool {
        self.z == 0 && self.x == 0
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> u32 {
        (self.z | self.x).count_ones()
    }

    /// Mask of non-identity sites.
    pub fn support(&self) -> u128 {
        self.z | self.x
    }

    /// True if the two strings commute as operators.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Operator product `self * other`, returned as the result string plus
    /// the phase exponent `k` with `self * other = i^k * result`.
    ///
    /// The exponent comes from rewriting each factor as `(-i)^{|z&x|} Z^z X^x`,
    /// commuting `X^x1` past `Z^z2`, and folding the result's own Y-count
    /// back in: `k = |z3&x3| - |z1&x1| - |z2&x2| + 2|x1&z2| (mod 4)`.
    pub fn mul(&self, other: &PauliString) -> (PauliString, u8) {
        let z3 = self.z ^ other.z;
        let x3 = self.x ^ other.x;
        let c1 = (self.z & self.x).count_ones();
        let c2 = (other.z & other.x).count_ones();
        let c3 = (z3 & x3).count_ones();
        let cross = (self.x & other.z).count_ones();
        // +512 keeps the subtraction non-negative without changing the residue
        let k = (c3 + 2 * cross + 512 - c1 - c2) % 4;
        (PauliString { z: z3, x: x3 }, k as u8)
    }

    /// Relabel sites through a lattice permutation.
    #[must_use]
    pub fn permute(&self, perm: &SitePermutation) -> PauliString {
        let mut out = PauliString::identity();
        let mut support = self.support();
        while support != 0 {
            let q = support.trailing_zeros() as usize;
            support &= support - 1;
            out = out.with_site(perm.apply(q), self.site(q));
        }
        out
    }

    /// Render the sites `0..n` as a label string.
    pub fn label(&self, n: usize) -> String {
        (0..n).map(|q| self.site(q).as_char()).collect()
    }
}

impl std::fmt::Debug for PauliString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let hi = 128 - self.support().leading_zeros() as usize;
        write!(f, "PauliString(\"{}\")", self.label(hi.max(1)))
    }
}
