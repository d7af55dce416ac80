//! Versioned on-disk container for extracted feature tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ExtractConfig, FeatureTable};

pub const CACHE_FORMAT: &str = "voxdx-features";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureCache {
    pub format: String,
    pub version: u32,
    pub d: usize,
    pub config: ExtractConfig,
    pub table: FeatureTable,
}

impl FeatureCache {
    pub fn new(config: ExtractConfig, table: FeatureTable) -> Self {
        FeatureCache {
            format: CACHE_FORMAT.to_string(),
            version: CACHE_VERSION,
            d: table.d(),
            config,
            table,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("feature cache serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cache: FeatureCache =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("feature cache: {e}")))?;
        if cache.format != CACHE_FORMAT {
            return Err(Error::Format(format!(
                "not a feature cache (format `{}`)",
                cache.format
            )));
        }
        if cache.version != CACHE_VERSION {
            return Err(Error::Format(format!(
                "feature cache version {} is not supported (expected {CACHE_VERSION})",
                cache.version
            )));
        }
        // re-validate rows through the checked constructor
        let table = FeatureTable::from_rows(cache.d, cache.table.rows().to_vec())?;
        Ok(FeatureCache { table, ..cache })
    }
}

pub fn save_cache(path: &Path, cache: &FeatureCache) -> Result<()> {
    std::fs::write(path, cache.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_cache(path: &Path) -> Result<FeatureCache> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FeatureCache::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{ClassLabel, FeatureVector};

    #[test]
    fn json_roundtrip_and_version_check() {
        let mut t = FeatureTable::new(1);
        t.push(
            "x.wav",
            FeatureVector::new(1, vec![0.1, -2.5e-7, 3.0]).unwrap(),
            ClassLabel::Neoplasm,
        )
        .unwrap();
        let cache = FeatureCache::new(ExtractConfig::default(), t);
        let json = cache.to_json();
        assert_eq!(FeatureCache::from_json(&json).unwrap(), cache);

        let bumped = json.replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(
            FeatureCache::from_json(&bumped),
            Err(Error::Format(_))
        ));
    }
}
