//! Linear quadtree indices.
//!
//! A node at block coordinates `(i, j)` is keyed by dilating both coordinates
//! and interleaving them, with the row bit in the higher position of each
//! 2-bit pair:
//!
//! ```text
//! l = sum_m  i_m * 2^(2m+1) + j_m * 2^(2m)
//! ```
//!
//! Each tier appends two bits on the right, so `parent` and `child` are plain
//! shifts. The key of a leaf does not depend on the depth of its tree, which
//! lets operands of different depths share one index space.

use crate::error::{Result, SpammError};

/// Selects the column bit of every pair (`0b...010101`).
pub const ODD_MASK: u64 = 0x5555_5555_5555_5555;
/// Selects the row bit of every pair (`0b...101010`).
pub const EVEN_MASK: u64 = 0xAAAA_AAAA_AAAA_AAAA;

/// Morton-interleaved row/column key of a node within its tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LinearIndex(pub u64);

/// The pair of masks used to pull the contraction index out of operand keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperandMasks {
    pub odd: u64,
    pub even: u64,
}

impl OperandMasks {
    pub const fn new() -> Self {
        OperandMasks {
            odd: ODD_MASK,
            even: EVEN_MASK,
        }
    }
}

impl Default for OperandMasks {
    fn default() -> Self {
        Self::new()
    }
}

/// Spreads the 32 bits of `x` over the even bit positions of a `u64`.
#[inline]
pub const fn dilate(x: u32) -> u64 {
    let mut z = x as u64;
    z = (z | (z << 16)) & 0x0000_FFFF_0000_FFFF;
    z = (z | (z << 8)) & 0x00FF_00FF_00FF_00FF;
    z = (z | (z << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    z = (z | (z << 2)) & 0x3333_3333_3333_3333;
    z = (z | (z << 1)) & 0x5555_5555_5555_5555;
    z
}

/// Inverse of [`dilate`]: gathers the even bit positions back together.
#[inline]
pub const fn undilate(z: u64) -> u32 {
    let mut z = z & 0x5555_5555_5555_5555;
    z = (z | (z >> 1)) & 0x3333_3333_3333_3333;
    z = (z | (z >> 2)) & 0x0F0F_0F0F_0F0F_0F0F;
    z = (z | (z >> 4)) & 0x00FF_00FF_00FF_00FF;
    z = (z | (z >> 8)) & 0x0000_FFFF_0000_FFFF;
    z = (z | (z >> 16)) & 0x0000_0000_FFFF_FFFF;
    z as u32
}

impl LinearIndex {
    /// Encodes block coordinates; fails when either coordinate needs more
    /// than 32 bits.
    pub fn encode(i: u64, j: u64) -> Result<Self> {
        if i > u32::MAX as u64 || j > u32::MAX as u64 {
            return Err(SpammError::IndexOverflow { row: i, col: j });
        }
        Ok(Self::encode_u32(i as u32, j as u32))
    }

    #[inline]
    pub const fn encode_u32(i: u32, j: u32) -> Self {
        LinearIndex((dilate(i) << 1) | dilate(j))
    }

    #[inline]
    pub const fn decode(self) -> (u32, u32) {
        (undilate(self.0 >> 1), undilate(self.0))
    }

    #[inline]
    pub const fn child(self, quadrant: u8) -> Self {
        LinearIndex((self.0 << 2) | (quadrant as u64 & 3))
    }

    #[inline]
    pub const fn parent(self) -> Self {
        LinearIndex(self.0 >> 2)
    }

    /// Ancestor `levels` tiers up.
    #[inline]
    pub const fn ancestor(self, levels: u32) -> Self {
        if levels >= 32 {
            LinearIndex(0)
        } else {
            LinearIndex(self.0 >> (2 * levels))
        }
    }

    /// Quadrant of this node within its parent: `2 * row_bit + col_bit`.
    #[inline]
    pub const fn quadrant(self) -> u8 {
        (self.0 & 3) as u8
    }
}

/// Contraction index of an A key (`l_A = ...i_m k_m...`), kept in the column lane.
#[inline]
pub const fn k_of_a(l_a: LinearIndex) -> u64 {
    l_a.0 & ODD_MASK
}

/// Contraction index of a B key (`l_B = ...k_m j_m...`), kept in the row lane.
///
/// Compare `k_of_b(l_b) >> 1` against [`k_of_a`] to test for a match.
#[inline]
pub const fn k_of_b(l_b: LinearIndex) -> u64 {
    l_b.0 & EVEN_MASK
}

/// True when the A and B leaves share the same contraction index.
#[inline]
pub const fn k_matches(l_a: LinearIndex, l_b: LinearIndex) -> bool {
    k_of_a(l_a) == k_of_b(l_b) >> 1
}

/// Destination key of the product `A_ik * B_kj`: the row bits of A combined
/// with the column bits of B.
#[inline]
pub const fn c_index(l_a: LinearIndex, l_b: LinearIndex) -> LinearIndex {
    LinearIndex((l_a.0 & EVEN_MASK) | (l_b.0 & ODD_MASK))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc(i: u32, j: u32) -> LinearIndex {
        LinearIndex::encode_u32(i, j)
    }

    #[test]
    fn encode_examples() {
        assert_eq!(enc(0, 0).0, 0);
        // i = 10b, j = 11b interleave to 1101b
        assert_eq!(enc(2, 3).0, 13);
        assert_eq!(enc(1, 0).0, 2);
        assert_eq!(enc(0, 1).0, 1);
    }

    #[test]
    fn decode_examples() {
        assert_eq!(LinearIndex(13).decode(), (2, 3));
        assert_eq!(LinearIndex(0).decode(), (0, 0));
    }

    #[test]
    fn encode_rejects_wide_coordinates() {
        assert!(LinearIndex::encode(1 << 32, 0).is_err());
        assert!(LinearIndex::encode(0, 1 << 33).is_err());
        let max = u32::MAX as u64;
        assert_eq!(LinearIndex::encode(max, max).unwrap().0, u64::MAX);
    }

    #[test]
    fn k_extraction_examples() {
        // A (i=1, k=0) against B (k=0, j=1)
        let a = enc(1, 0);
        let b = enc(0, 1);
        assert_eq!(a.0, 2);
        assert_eq!(k_of_a(a), 0);
        assert_eq!(b.0, 1);
        assert_eq!(k_of_b(b), 0);
        assert!(k_matches(a, b));

        // A (i=0, k=1) against B (k=1, j=0)
        let a = enc(0, 1);
        let b = enc(1, 0);
        assert_eq!(k_of_a(a), 1);
        assert_eq!(k_of_b(b), 2);
        assert!(k_matches(a, b));

        assert_eq!(k_of_a(LinearIndex(0)), 0);
        assert!(!k_matches(enc(0, 1), enc(0, 0)));
    }

    #[test]
    fn c_index_examples() {
        assert_eq!(c_index(enc(1, 0), enc(0, 1)), enc(1, 1));
        assert_eq!(c_index(enc(1, 0), enc(0, 1)).0, 3);
        assert_eq!(c_index(LinearIndex(0), LinearIndex(0)).0, 0);
    }

    #[test]
    fn c_index_brute_force() {
        for i in 0..64 {
            for k in 0..64 {
                for j in 0..64 {
                    let (a, b) = (enc(i, k), enc(k, j));
                    assert!(k_matches(a, b));
                    assert_eq!(c_index(a, b), enc(i, j));
                }
            }
        }
    }

    #[test]
    fn child_parent() {
        assert_eq!(LinearIndex(0).child(3).0, 3);
        let kids: Vec<u64> = (0..4).map(|q| LinearIndex(0).child(q).0).collect();
        assert_eq!(kids, vec![0, 1, 2, 3]);
        for l in [0u64, 1, 7, 13, 1 << 40] {
            for q in 0..4 {
                let c = LinearIndex(l).child(q);
                assert_eq!(c.parent(), LinearIndex(l));
                assert_eq!(c.quadrant(), q);
            }
        }
        // child of the tier-1 node (1,0) at quadrant (1,1) is block (3,1)
        assert_eq!(enc(1, 0).child(3), enc(3, 1));
        assert_eq!(enc(3, 1).ancestor(1), enc(1, 0));
    }

    #[test]
    fn masks_partition() {
        let m = OperandMasks::default();
        assert_eq!(m.odd | m.even, u64::MAX);
        assert_eq!(m.odd & m.even, 0);
        for l in [0u64, 13, 0xDEAD_BEEF_1234_5678, u64::MAX] {
            assert_eq!((l & m.odd) | (l & m.even), l);
        }
    }

    #[test]
    fn quadrant_ranges_are_contiguous() {
        // 8x8 blocks: each tier-1 quadrant owns the key range [16q, 16q + 16)
        for i in 0..8u32 {
            for j in 0..8u32 {
                let q = (2 * (i / 4) + j / 4) as u64;
                let l = enc(i, j).0;
                assert!(l >= 16 * q && l < 16 * (q + 1));
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn roundtrip(i in any::<u32>(), j in any::<u32>()) {
                prop_assert_eq!(enc(i, j).decode(), (i, j));
            }

            #[test]
            fn z_order_monotone(i1 in 0u32..1 << 16, j1 in 0u32..1 << 16,
                                i2 in 0u32..1 << 16, j2 in 0u32..1 << 16) {
                // Z-order: compare the highest differing bit across both coordinates
                let hi_i = 32 - (i1 ^ i2).leading_zeros();
                let hi_j = 32 - (j1 ^ j2).leading_zeros();
                let expected = if hi_i >= hi_j && hi_i > 0 {
                    i1.cmp(&i2)
                } else {
                    j1.cmp(&j2)
                };
                prop_assert_eq!(enc(i1, j1).cmp(&enc(i2, j2)), expected);
            }
        }
    }
}
