//! Cross-tool policy equivalence classes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{Finding, Tool};

pub const BUNDLED_POLICY_MAP: &str = include_str!("../../data/policy_map.yaml");

#[derive(Debug, Serialize, Deserialize)]
struct MapFile {
    version: u32,
    classes: BTreeMap<String, Vec<String>>,
}

/// Canonical key to `(tool, policy_id)` members. Unlisted policies form a
/// singleton class named `tool:policy_id`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EquivalenceMap {
    classes: BTreeMap<String, BTreeSet<(Tool, String)>>,
    index: HashMap<(Tool, String), String>,
}

fn parse_member(member: &str) -> Result<(Tool, String), String> {
    let (tool, id) = member
        .split_once(':')
        .ok_or_else(|| format!("{member:?} is not tool:policy_id"))?;
    if id.is_empty() {
        return Err(format!("{member:?} has an empty policy id"));
    }
    Ok((tool.parse()?, id.to_string()))
}

impl EquivalenceMap {
    pub fn bundled() -> Self {
        Self::from_yaml(BUNDLED_POLICY_MAP).expect("bundled policy map is valid")
    }

    pub fn from_yaml(text: &str) -> Result<Self, String> {
        let file: MapFile = serde_yaml::from_str(text).map_err(|e| e.to_string())?;
        if file.version != 1 {
            return Err(format!("unsupported policy map version {}", file.version));
        }
        let mut map = Self::default();
        for (key, members) in file.classes {
            for member in members {
                let (tool, id) = parse_member(&member)?;
                map.insert(&key, tool, &id)?;
            }
        }
        Ok(map)
    }

    /// Adds a member; a pair may belong to one class only.
    pub fn insert(&mut self, key: &str, tool: Tool, policy_id: &str) -> Result<(), String> {
        let pair = (tool, policy_id.to_string());
        match self.index.get(&pair) {
            Some(existing) if existing != key => {
                return Err(format!("{tool}:{policy_id} is mapped to both {existing} and {key}"))
            }
            Some(_) => return Ok(()),
            None => {}
        }
        self.index.insert(pair.clone(), key.to_string());
        self.classes.entry(key.to_string()).or_default().insert(pair);
        Ok(())
    }

    pub fn canonical_key(&self, tool: Tool, policy_id: &str) -> String {
        self.index
            .get(&(tool, policy_id.to_string()))
            .cloned()
            .unwrap_or_else(|| format!("{tool}:{policy_id}"))
    }

    pub fn members(&self, key: &str) -> impl Iterator<Item = &(Tool, String)> {
        self.classes.get(key).into_iter().flatten()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }

    /// Fills in `equivalence_class` on every finding.
    pub fn annotate(&self, findings: &mut [Finding]) {
        for f in findings {
            f.policy.equivalence_class = Some(self.canonical_key(f.policy.tool, &f.policy.policy_id));
        }
    }

    /// `canonical_key: [tool:policy_id, ...]`, as written to a run directory.
    pub fn to_yaml(&self) -> String {
        let classes = self
            .classes
            .iter()
            .map(|(k, members)| {
                let list = members.iter().map(|(t, id)| format!("{t}:{id}")).collect();
                (k.clone(), list)
            })
            .collect();
        serde_yaml::to_string(&MapFile { version: 1, classes }).expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::builtin::POLICIES;

    #[test]
    fn bundled_map_covers_builtin_catalog() {
        let map = EquivalenceMap::bundled();
        for p in POLICIES {
            assert_eq!(map.canonical_key(Tool::Builtin, p.id), p.canonical_key);
        }
        assert_eq!(map.keys().count(), POLICIES.len());
        assert_eq!(map.canonical_key(Tool::Checkov, "CKV_K8S_20"), "privilege-escalation");
    }

    #[test]
    fn unmapped_policies_are_singletons() {
        let map = EquivalenceMap::bundled();
        assert_eq!(map.canonical_key(Tool::Kics, "nope"), "kics:nope");
    }

    #[test]
    fn pairs_belong_to_one_class() {
        let text = "version: 1\nclasses:\n  a: [checkov:X]\n  b: [checkov:X]\n";
        assert!(EquivalenceMap::from_yaml(text).unwrap_err().contains("both"));
        assert!(EquivalenceMap::from_yaml("version: 2\nclasses: {}\n").is_err());
        assert!(EquivalenceMap::from_yaml("version: 1\nclasses:\n  a: [nosuchtool:X]\n").is_err());
    }

    #[test]
    fn yaml_round_trip() {
        let map = EquivalenceMap::bundled();
        assert_eq!(EquivalenceMap::from_yaml(&map.to_yaml()).unwrap(), map);
    }
}
