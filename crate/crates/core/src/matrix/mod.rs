//! Dense and quadtree matrix containers.

pub mod dense;
mod dump;
pub mod leaf;
pub mod market;
pub mod quadtree;

pub use dense::{DenseMatrix, Precision, Scalar};
pub use dump::MAGIC as DUMP_MAGIC;
pub use leaf::{LeafBlock, LEAF_SIZE, SUB_BLOCK};
pub use market::{load_matrix, read_market, save_matrix, write_market, MarketLayout};
pub use quadtree::{drop_tolerance, tree_depth, LeafId, QuadtreeMatrix, TreeNode};
