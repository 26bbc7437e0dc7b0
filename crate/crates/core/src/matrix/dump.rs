//! Binary dump of a [`QuadtreeMatrix`] for benchmark reuse.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"SPAMMQT1"
//! u64 rows, u64 cols, u64 leaf_size, u64 depth, u64 leaf_count
//! leaf_count x (u64 linear index, leaf_size^2 x f32 row-major values)
//! ```
//!
//! Leaves are written in ascending key order. Norms are not stored; they are
//! recomputed on load.

use std::io::{Read, Write};

use crate::error::{Result, SpammError};
use crate::matrix::leaf::LeafBlock;
use crate::matrix::quadtree::QuadtreeMatrix;
use crate::morton::LinearIndex;

pub const MAGIC: &[u8; 8] = b"SPAMMQT1";

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

impl QuadtreeMatrix {
    pub fn write_dump(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in [
            self.rows() as u64,
            self.cols() as u64,
            self.leaf_size() as u64,
            self.depth() as u64,
            self.leaf_count() as u64,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut order: Vec<_> = self.leaves().map(|(id, key, _)| (key, id)).collect();
        order.sort_unstable();
        let mut buf = Vec::with_capacity(4 * self.leaf_size() * self.leaf_size());
        for (key, id) in order {
            w.write_all(&key.0.to_le_bytes())?;
            buf.clear();
            for v in self.leaf(id).values() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_dump(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(SpammError::Dump("bad magic bytes".into()));
        }
        let rows = read_u64(r)? as usize;
        let cols = read_u64(r)? as usize;
        let leaf_size = read_u64(r)? as usize;
        let depth = read_u64(r)?;
        let count = read_u64(r)? as usize;
        if leaf_size == 0 || leaf_size > 1 << 12 {
            return Err(SpammError::Dump(format!(
                "unreasonable leaf size {leaf_size}"
            )));
        }
        let mut q = QuadtreeMatrix::zeros(rows, cols, leaf_size)?;
        if q.depth() as u64 != depth {
            return Err(SpammError::Dump(format!(
                "stored depth {depth} does not match {rows}x{cols} with leaf size {leaf_size}"
            )));
        }
        let max_leaves = rows.div_ceil(leaf_size) * cols.div_ceil(leaf_size);
        if count > max_leaves {
            return Err(SpammError::Dump(format!(
                "{count} leaves exceed the {max_leaves} possible"
            )));
        }
        let mut leaves = Vec::with_capacity(count);
        let mut buf = vec![0u8; 4 * leaf_size * leaf_size];
        for _ in 0..count {
            let key = LinearIndex(read_u64(r)?);
            r.read_exact(&mut buf)?;
            let values: Vec<f32> = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(SpammError::Dump(format!(
                    "non-finite value in leaf {}",
                    key.0
                )));
            }
            leaves.push((key, LeafBlock::from_values(leaf_size, values)));
        }
        q = QuadtreeMatrix::from_leaves(rows, cols, leaf_size, leaves)?;
        Ok(q)
    }
}
