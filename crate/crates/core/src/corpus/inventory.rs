use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub feature_id: String,
    pub name: String,
    #[serde(rename = "variety")]
    pub language_variety: String,
    pub example: String,
}

/// Indian English inventory shipped with the crate.
pub const INDE_INVENTORY: &str = include_str!("../../data/inventories/inde.jsonl");
/// African American English inventory shipped with the crate.
pub const AAE_INVENTORY: &str = include_str!("../../data/inventories/aae.jsonl");

pub fn load_feature_inventory(path: &Path) -> Result<Vec<FeatureSpec>> {
    let features: Vec<FeatureSpec> = jsonl::read(path)?;
    check_unique(&features)?;
    Ok(features)
}

/// Resolves `inde` / `aae` to a bundled inventory, anything else to a file.
/// A bundled name is looked up under `data_dir/inventories/` first when given.
pub fn resolve_inventory(name_or_path: &str, data_dir: Option<&Path>) -> Result<Vec<FeatureSpec>> {
    let bundled = match name_or_path.to_ascii_lowercase().as_str() {
        "inde" => Some(("inde.jsonl", INDE_INVENTORY)),
        "aae" => Some(("aae.jsonl", AAE_INVENTORY)),
        _ => None,
    };
    match bundled {
        Some((file, text)) => {
            if let Some(dir) = data_dir {
                let p = dir.join("inventories").join(file);
                if p.exists() {
                    return load_feature_inventory(&p);
                }
            }
            parse_inventory(text)
        }
        None => load_feature_inventory(Path::new(name_or_path)),
    }
}

pub fn parse_inventory(text: &str) -> Result<Vec<FeatureSpec>> {
    let mut features = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f = serde_json::from_str(line).map_err(|e| Error::parse("<inventory>", i + 1, e.to_string()))?;
        features.push(f);
    }
    check_unique(&features)?;
    Ok(features)
}

fn check_unique(features: &[FeatureSpec]) -> Result<()> {
    let mut seen = HashSet::new();
    for f in features {
        if !seen.insert(f.feature_id.as_str()) {
            return Err(Error::DuplicateFeature(f.feature_id.clone()));
        }
    }
    Ok(())
}
