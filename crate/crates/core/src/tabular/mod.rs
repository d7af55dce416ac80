//! Tree models: CART, random forests with Gini importance, gradient boosting.

mod forest;
mod gbt;
mod tree;

pub use forest::{fit_forest, select_mask, RandomForest};
pub use gbt::{fit_gbt, fit_gbt_traced, GbtModel, GbtParams};
pub use tree::{fit_tree, DecisionTree, TreeParams};
