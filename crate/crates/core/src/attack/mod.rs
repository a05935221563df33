//! Saliency-guided crafting of adversarial feature vectors.

mod craft;
mod domain;
mod saliency;
mod sweep;

pub use craft::{craft, l0_distance, AttackParams, AttackResult, Constraints, Mode};
pub use domain::{LedgerEntry, SearchDomain, Source};
pub use saliency::{classic_select, opposition, saliency_map, saliency_select, scalar_mask_oracle};
pub use sweep::{craft_batch, encoded_features, fixed_feature_sweep, sample_subsets, SweepPoint};
