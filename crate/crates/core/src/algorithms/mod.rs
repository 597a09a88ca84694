//! Message-passing detector implementations.

pub mod dhp;
pub mod homega;
pub mod hsigma_sync;
pub mod xi;

pub use dhp::Dhp;
pub use homega::HOmegaAdapter;
pub use hsigma_sync::HSigmaSync;
pub use xi::Xi;
