//! Ablation variants as named strategies.

use super::TrainError;
use crate::masking::{AdaptiveOrdering, DimensionOrdering, RandomOrdering};
use std::collections::BTreeMap;

/// How a variant departs from the full pipeline.
pub trait Variant: Send + Sync {
    fn name(&self) -> &'static str;

    fn ordering(&self) -> Box<dyn DimensionOrdering> {
        Box::new(AdaptiveOrdering)
    }

    /// Masking rounds actually built, given `floor((epochs - 1) / num)`.
    fn rounds(&self, implied: usize) -> usize {
        implied
    }

    /// Hierarchy level (1-based) used at `epoch`.
    fn level(&self, epoch: usize, num: usize, rounds: usize) -> usize {
        (epoch / num + 1).min(rounds + 1)
    }

    /// Whether the learned noise row is added and trained.
    fn corrupts(&self) -> bool {
        true
    }
}

pub struct Full;
/// Random dimension order instead of the importance order.
pub struct RandomMasking;
/// A single masking round, in force from the first epoch.
pub struct SingleMask;
/// No trainable corruption; the node mask still drives remasking and the loss.
pub struct NoCorruption;

impl Variant for Full {
    fn name(&self) -> &'static str {
        "full"
    }
}

impl Variant for RandomMasking {
    fn name(&self) -> &'static str {
        "am"
    }
    fn ordering(&self) -> Box<dyn DimensionOrdering> {
        Box::new(RandomOrdering)
    }
}

impl Variant for SingleMask {
    fn name(&self) -> &'static str {
        "hm"
    }
    fn rounds(&self, _: usize) -> usize {
        1
    }
    fn level(&self, _: usize, _: usize, _: usize) -> usize {
        2
    }
}

impl Variant for NoCorruption {
    fn name(&self) -> &'static str {
        "tc"
    }
    fn corrupts(&self) -> bool {
        false
    }
}

pub struct VariantRegistry {
    variants: BTreeMap<String, Box<dyn Variant>>,
}

impl VariantRegistry {
    pub fn empty() -> Self {
        VariantRegistry {
            variants: BTreeMap::new(),
        }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Full));
        r.register(Box::new(RandomMasking));
        r.register(Box::new(SingleMask));
        r.register(Box::new(NoCorruption));
        r
    }

    pub fn register(&mut self, v: Box<dyn Variant>) {
        self.variants.insert(v.name().to_string(), v);
    }

    /// Case-insensitive lookup.
    pub fn get(&self, name: &str) -> Result<&dyn Variant, TrainError> {
        self.variants
            .get(&name.to_ascii_lowercase())
            .map(|b| b.as_ref())
            .ok_or_else(|| TrainError::UnknownVariant(name.to_string()))
    }

    /// Names in the canonical reporting order: full first, then the rest sorted.
    pub fn names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.variants.keys().map(String::as_str).collect();
        names.sort_by_key(|n| (*n != "full", *n));
        names
    }
}
