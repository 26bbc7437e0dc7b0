/// Side of the sub-blocks the SpAMM condition is applied to inside a leaf.
pub const SUB_BLOCK: usize = 4;

/// Default leaf size.
pub const LEAF_SIZE: usize = 16;

/// Dense `size x size` row-major block stored at the bottom tier, together
/// with the Frobenius norms of its sub-blocks and of the whole block.
///
/// For the default 16x16 leaf the sub-blocks are 4x4, giving a 4x4 grid of
/// sub-norms. Leaves smaller than 4 use a single sub-block.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafBlock {
    size: usize,
    values: Vec<f32>,
    subnorms: Vec<f32>,
    norm: f32,
}

impl LeafBlock {
    pub fn zeros(size: usize) -> Self {
        let grid = size / sub_size(size);
        LeafBlock {
            size,
            values: vec![0.0; size * size],
            subnorms: vec![0.0; grid * grid],
            norm: 0.0,
        }
    }

    /// Wraps row-major values and computes all norms.
    pub fn from_values(size: usize, values: Vec<f32>) -> Self {
        assert_eq!(values.len(), size * size);
        let grid = size / sub_size(size);
        let mut leaf = LeafBlock {
            size,
            values,
            subnorms: vec![0.0; grid * grid],
            norm: 0.0,
        };
        leaf.compute_norms();
        leaf
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    /// Side of one sub-block (4, or the leaf size when smaller).
    #[inline]
    pub fn sub_size(&self) -> usize {
        sub_size(self.size)
    }

    /// Number of sub-blocks along one side.
    #[inline]
    pub fn grid(&self) -> usize {
        self.size / self.sub_size()
    }

    #[inline]
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Mutable access to the values. Norms are stale until
    /// [`compute_norms`](Self::compute_norms) is called.
    #[inline]
    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.values[r * self.size + c]
    }

    #[inline]
    pub fn subnorms(&self) -> &[f32] {
        &self.subnorms
    }

    #[inline]
    pub fn subnorm(&self, p: usize, q: usize) -> f32 {
        self.subnorms[p * self.grid() + q]
    }

    #[inline]
    pub fn norm(&self) -> f32 {
        self.norm
    }

    fn sub_sum_sq(&self, p: usize, q: usize) -> f64 {
        let s = self.sub_size();
        let mut acc = 0.0f64;
        for r in p * s..(p + 1) * s {
            for &v in &self.values[r * self.size + q * s..r * self.size + (q + 1) * s] {
                acc += (v as f64) * (v as f64);
            }
        }
        acc
    }

    /// Recomputes every sub-norm and the block norm from the values.
    pub fn compute_norms(&mut self) {
        let g = self.grid();
        let mut total = 0.0f64;
        for p in 0..g {
            for q in 0..g {
                let sq = self.sub_sum_sq(p, q);
                total += sq;
                self.subnorms[p * g + q] = sq.sqrt() as f32;
            }
        }
        self.norm = total.sqrt() as f32;
    }

    /// Updates one element and the norms it affects.
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.values[r * self.size + c] = v;
        let s = self.sub_size();
        let (p, q) = (r / s, c / s);
        let g = self.grid();
        self.subnorms[p * g + q] = self.sub_sum_sq(p, q).sqrt() as f32;
        // block norm from the exact sub sums keeps it within rounding of the values
        let mut total = 0.0f64;
        for pp in 0..g {
            for qq in 0..g {
                total += self.sub_sum_sq(pp, qq);
            }
        }
        self.norm = total.sqrt() as f32;
    }

    /// Zeroes every sub-block whose norm is strictly below `eps` and returns
    /// how many non-zero sub-blocks were dropped. Norms are refreshed.
    pub fn drop_below(&mut self, eps: f64) -> usize {
        let g = self.grid();
        let s = self.sub_size();
        let mut dropped = 0;
        for p in 0..g {
            for q in 0..g {
                let n = self.subnorms[p * g + q];
                if n > 0.0 && (n as f64) < eps {
                    for r in p * s..(p + 1) * s {
                        self.values[r * self.size + q * s..r * self.size + (q + 1) * s].fill(0.0);
                    }
                    dropped += 1;
                }
            }
        }
        if dropped > 0 {
            self.compute_norms();
        }
        dropped
    }

    pub fn scale(&mut self, s: f32) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

#[inline]
fn sub_size(size: usize) -> usize {
    size.min(SUB_BLOCK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> LeafBlock {
        LeafBlock::from_values(16, (0..256).map(|x| (x as f32 - 100.0) / 7.0).collect())
    }

    #[test]
    fn block_norm_matches_subnorms() {
        let leaf = ramp();
        let sum: f64 = leaf.subnorms().iter().map(|&s| (s as f64).powi(2)).sum();
        let n2 = (leaf.norm() as f64).powi(2);
        assert!((n2 - sum).abs() <= 1e-6 * n2);
        let direct: f64 = leaf.values().iter().map(|&v| (v as f64).powi(2)).sum();
        assert!(((leaf.norm() as f64) - direct.sqrt()).abs() <= 1e-6 * direct.sqrt());
    }

    #[test]
    fn zero_sub_block_has_zero_norm() {
        let mut leaf = ramp();
        for r in 4..8 {
            for c in 8..12 {
                leaf.values_mut()[r * 16 + c] = 0.0;
            }
        }
        let before = leaf.subnorms().to_vec();
        leaf.compute_norms();
        for p in 0..4 {
            for q in 0..4 {
                if (p, q) == (1, 2) {
                    assert_eq!(leaf.subnorm(p, q), 0.0);
                } else {
                    assert_eq!(leaf.subnorm(p, q), before[p * 4 + q]);
                    assert!(leaf.subnorm(p, q) > 0.0);
                }
            }
        }
    }

    #[test]
    fn tiny_value_keeps_nonzero_subnorm() {
        let mut leaf = LeafBlock::zeros(16);
        leaf.set(0, 0, f32::from_bits(1));
        assert!(leaf.subnorm(0, 0) > 0.0);
        assert!(leaf.norm() > 0.0);
    }

    #[test]
    fn small_leaves_use_one_sub_block() {
        let leaf = LeafBlock::from_values(2, vec![3.0, 0.0, 0.0, 4.0]);
        assert_eq!(leaf.grid(), 1);
        assert_eq!(leaf.norm(), 5.0);
        assert_eq!(leaf.subnorm(0, 0), 5.0);
    }

    #[test]
    fn drop_below_counts_nonzero_blocks_only() {
        let mut leaf = LeafBlock::zeros(16);
        leaf.set(0, 0, 1e-3);
        leaf.set(5, 5, 1.0);
        assert_eq!(leaf.drop_below(1e-2), 1);
        assert_eq!(leaf.get(0, 0), 0.0);
        assert_eq!(leaf.norm(), 1.0);
        assert_eq!(leaf.drop_below(0.0), 0);
    }
}
