//! Shared cache pool with an exact budget.
//!
//! Sizes are held as integer micro-GB so that sums of decimal allocations
//! compare exactly against the total.

use std::collections::BTreeMap;

use super::{DecisionKind, ResizeDecision};
use crate::error::{Error, Result};

const UNITS_PER_GB: f64 = 1e6;

fn to_units(gb: f64) -> i64 {
    (gb * UNITS_PER_GB).round() as i64
}

fn to_gb(units: i64) -> f64 {
    units as f64 / UNITS_PER_GB
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApplyOutcome {
    Committed,
    /// The decision could not be honoured; nothing changed.
    AdminAlert {
        shortfall_gb: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolState {
    total: i64,
    allocations: BTreeMap<String, i64>,
}

impl PoolState {
    pub fn new(total_gb: f64) -> Result<Self> {
        if !(total_gb > 0.0 && total_gb.is_finite()) {
            return Err(Error::invalid(format!("pool size must be positive, got {total_gb} GB")));
        }
        Ok(Self {
            total: to_units(total_gb),
            allocations: BTreeMap::new(),
        })
    }

    /// Registers a tenant with an initial allocation taken from the pool.
    pub fn add_tenant(&mut self, tenant_id: &str, alloc_gb: f64) -> Result<()> {
        if self.allocations.contains_key(tenant_id) {
            return Err(Error::invalid(format!("tenant `{tenant_id}` is already registered")));
        }
        if !(alloc_gb >= 0.0) {
            return Err(Error::invalid("allocation must be non-negative"));
        }
        let units = to_units(alloc_gb);
        if units > self.free_units() {
            return Err(Error::invalid(format!(
                "initial allocation of {alloc_gb} GB exceeds the {} GB free",
                self.free_gb()
            )));
        }
        self.allocations.insert(tenant_id.to_string(), units);
        Ok(())
    }

    pub fn total_gb(&self) -> f64 {
        to_gb(self.total)
    }

    fn used_units(&self) -> i64 {
        self.allocations.values().sum()
    }

    fn free_units(&self) -> i64 {
        self.total - self.used_units()
    }

    pub fn used_gb(&self) -> f64 {
        to_gb(self.used_units())
    }

    pub fn free_gb(&self) -> f64 {
        to_gb(self.free_units())
    }

    pub fn allocation_gb(&self, tenant_id: &str) -> Result<f64> {
        self.allocations
            .get(tenant_id)
            .map(|&u| to_gb(u))
            .ok_or_else(|| Error::invalid(format!("unknown tenant `{tenant_id}`")))
    }

    pub fn allocations(&self) -> impl Iterator<Item = (&str, f64)> {
        self.allocations.iter().map(|(k, &v)| (k.as_str(), to_gb(v)))
    }

    /// Grows succeed only when the free space covers the increase; shrinks
    /// always succeed; holds change nothing; decision-level alerts pass
    /// through with zero shortfall.
    pub fn apply(&mut self, tenant_id: &str, decision: &ResizeDecision) -> Result<ApplyOutcome> {
        let free = self.free_units();
        let current = *self
            .allocations
            .get(tenant_id)
            .ok_or_else(|| Error::invalid(format!("unknown tenant `{tenant_id}`")))?;
        let target = to_units(decision.target_alloc_gb);
        match decision.kind {
            DecisionKind::Hold => Ok(ApplyOutcome::Committed),
            DecisionKind::AdminAlert => Ok(ApplyOutcome::AdminAlert { shortfall_gb: 0.0 }),
            DecisionKind::Shrink | DecisionKind::Grow if target < 0 => {
                Err(Error::invalid("target allocation is negative"))
            }
            DecisionKind::Shrink => {
                if target > current {
                    return Err(Error::invalid("shrink target exceeds the current allocation"));
                }
                self.allocations.insert(tenant_id.to_string(), target);
                Ok(ApplyOutcome::Committed)
            }
            DecisionKind::Grow => {
                let increase = target - current;
                if increase < 0 {
                    return Err(Error::invalid("grow target is below the current allocation"));
                }
                if increase > free {
                    return Ok(ApplyOutcome::AdminAlert {
                        shortfall_gb: to_gb(increase - free),
                    });
                }
                self.allocations.insert(tenant_id.to_string(), target);
                Ok(ApplyOutcome::Committed)
            }
        }
    }
}
