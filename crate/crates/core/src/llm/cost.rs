use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CompletionRecord, LlmError};

/// USD per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub input_per_1m: f64,
    pub output_per_1m: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PricingTable(pub BTreeMap<String, Rates>);

impl PricingTable {
    pub fn from_json(raw: &str) -> Result<Self, LlmError> {
        let table: PricingTable =
            serde_json::from_str(raw).map_err(|e| LlmError::InvalidConfig(format!("pricing: {e}")))?;
        for (model, r) in &table.0 {
            let ok = |v: f64| v.is_finite() && v >= 0.0;
            if !ok(r.input_per_1m) || !ok(r.output_per_1m) {
                return Err(LlmError::InvalidConfig(format!(
                    "pricing for {model} must be finite and non-negative"
                )));
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| LlmError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_json(&raw)
    }

    pub fn rates(&self, model_id: &str) -> Option<Rates> {
        self.0.get(model_id).copied()
    }
}

/// Total USD for a batch. Token counts are summed first, so the result does
/// not depend on record order.
pub fn estimate_cost(
    records: &[CompletionRecord],
    pricing: &PricingTable,
    model_id: &str,
) -> Result<f64, LlmError> {
    let rates = pricing
        .rates(model_id)
        .ok_or_else(|| LlmError::UnknownModelPricing(model_id.to_string()))?;
    let input: u64 = records.iter().map(|r| r.input_tokens).sum();
    let output: u64 = records.iter().map(|r| r.output_tokens).sum();
    Ok(input as f64 * rates.input_per_1m / 1e6 + output as f64 * rates.output_per_1m / 1e6)
}
