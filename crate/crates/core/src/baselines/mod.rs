//! Classical comparison models trained on the same supervised sets as the
//! network: ordinary least squares, a CART regression tree with vector
//! leaves, and a bootstrap-aggregated random forest.

mod forest;
mod linear;
mod tree;

pub use forest::{forest_fit, ForestConfig, ForestModel};
pub use linear::{linreg_fit, LinearModel};
pub use tree::{tree_fit, TreeConfig, TreeModel};
