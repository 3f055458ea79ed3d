use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::htm::{Coverage, TrixelId};

/// Object counts kept at a fixed trixel granularity. Counts for a coarser
/// trixel aggregate over its subtree range; asking below the stored
/// granularity is a domain error.
#[derive(Debug, Clone, Default)]
pub struct TrixelCounts {
    level: u8,
    counts: BTreeMap<u64, u64>,
}

impl TrixelCounts {
    pub fn new(level: u8, counts: BTreeMap<u64, u64>) -> TrixelCounts {
        debug_assert!(counts.keys().all(|raw| {
            TrixelId::new(*raw).map(|t| t.level() == level).unwrap_or(false)
        }));
        TrixelCounts { level, counts }
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (TrixelId, u64)> + '_ {
        self.counts
            .iter()
            .map(|(raw, n)| (TrixelId::from_raw_unchecked(*raw), *n))
    }

    pub fn count_under(&self, t: TrixelId) -> Result<u64> {
        if t.level() > self.level {
            return Err(Error::domain(format!(
                "no counts at level {} (stored at level {})",
                t.level(),
                self.level
            )));
        }
        Ok(self.counts.range(t.subtree_range(self.level)).map(|(_, n)| n).sum())
    }
}

/// Result-count bracket for a coverage: FULL trixels are certain, PARTIAL
/// trixels may contribute anywhere from none to all of their objects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectivityEstimate {
    pub min: u64,
    pub expected: f64,
    pub max: u64,
}

/// The expected value prices each partial trixel at half its count — the
/// unbiased choice when the overlap fraction is unknown; min/max stay exact.
pub fn estimate_selectivity(cov: &Coverage, counts: &TrixelCounts) -> Result<SelectivityEstimate> {
    let mut min = 0u64;
    for t in cov.full() {
        min += counts.count_under(*t)?;
    }
    let mut partial_sum = 0u64;
    for t in cov.partial() {
        partial_sum += counts.count_under(*t)?;
    }
    Ok(SelectivityEstimate {
        min,
        expected: min as f64 + 0.5 * partial_sum as f64,
        max: min + partial_sum,
    })
}
