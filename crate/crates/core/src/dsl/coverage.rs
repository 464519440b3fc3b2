use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::DslError;
use crate::topology::{expand_range, NodeId};

/// Region name to base stations, e.g. `{"Seoul": ["bs1:bs10", "bs40"]}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoverageMap {
    regions: BTreeMap<String, Vec<NodeId>>,
}

impl CoverageMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, region: impl Into<String>, members: Vec<NodeId>) {
        self.regions.insert(region.into(), members);
    }

    pub fn from_json(text: &str) -> Result<Self, DslError> {
        let raw: BTreeMap<String, Vec<String>> =
            serde_json::from_str(text).map_err(|e| DslError::Coverage(e.to_string()))?;
        let mut map = Self::new();
        for (region, entries) in raw {
            let mut members = Vec::new();
            for entry in entries {
                let ids = match entry.split_once(':') {
                    Some((a, b)) => expand_range(a, b),
                    None => NodeId::new(entry).map(|n| vec![n]),
                }
                .map_err(|e| DslError::Coverage(format!("{region}: {e}")))?;
                members.extend(ids);
            }
            map.insert(region, members);
        }
        Ok(map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DslError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| DslError::Coverage(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    /// Members in file order. Lookup is case-sensitive.
    pub fn members(&self, region: &str) -> Result<&[NodeId], DslError> {
        self.regions
            .get(region)
            .map(Vec::as_slice)
            .ok_or_else(|| DslError::UnknownRegion(region.to_owned()))
    }

    pub fn regions(&self) -> impl Iterator<Item = &str> {
        self.regions.keys().map(String::as_str)
    }
}

pub fn translate_coverage(region: &str, cov: &CoverageMap) -> Result<BTreeSet<NodeId>, DslError> {
    Ok(cov.members(region)?.iter().cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::id;

    #[test]
    fn ranges_and_case() {
        let cov = CoverageMap::from_json(r#"{"Seoul": ["bs1:bs10"], "Chicago": [], "Mixed": ["bs3", "bs1:2"]}"#)
            .unwrap();
        assert_eq!(translate_coverage("Seoul", &cov).unwrap().len(), 10);
        assert!(translate_coverage("Chicago", &cov).unwrap().is_empty());
        assert_eq!(
            translate_coverage("chicago", &cov),
            Err(DslError::UnknownRegion("chicago".into()))
        );
        assert_eq!(cov.members("Mixed").unwrap(), &[id("bs3"), id("bs1"), id("bs2")]);
    }

    #[test]
    fn bad_entries() {
        assert!(CoverageMap::from_json(r#"{"X": ["bs5:bs1"]}"#).is_err());
        assert!(CoverageMap::from_json(r#"{"X": ["9bad"]}"#).is_err());
        assert!(CoverageMap::from_json("[1]").is_err());
    }
}
