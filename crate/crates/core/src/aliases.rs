//! Versioned synonym table shared by plan canonicalization and object lookup.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

const BUILTIN: &str = include_str!("../data/aliases.toml");

#[derive(Debug, Clone, Default, Deserialize)]
pub struct AliasTable {
    pub version: u32,
    #[serde(default)]
    pub skills: BTreeMap<String, String>,
    #[serde(default)]
    pub hands: BTreeMap<String, String>,
    #[serde(default)]
    pub directions: BTreeMap<String, String>,
    #[serde(default)]
    pub objects: BTreeMap<String, String>,
}

impl AliasTable {
    /// The table shipped with the crate.
    pub fn builtin() -> &'static AliasTable {
        static TABLE: OnceLock<AliasTable> = OnceLock::new();
        TABLE.get_or_init(|| toml::from_str(BUILTIN).expect("bundled alias table is valid TOML"))
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn skill<'a>(&'a self, name: &'a str) -> &'a str {
        lookup(&self.skills, name)
    }

    pub fn hand<'a>(&'a self, name: &'a str) -> &'a str {
        lookup(&self.hands, name)
    }

    pub fn direction<'a>(&'a self, name: &'a str) -> &'a str {
        lookup(&self.directions, name)
    }

    /// Unknown object names pass through unchanged.
    pub fn object<'a>(&'a self, name: &'a str) -> &'a str {
        lookup(&self.objects, name)
    }
}

fn lookup<'a>(map: &'a BTreeMap<String, String>, key: &'a str) -> &'a str {
    map.get(key).map(String::as_str).unwrap_or(key)
}

/// Lowercase snake_case form of a free-form name: `"Power Strip"` → `"power_strip"`.
pub fn snake_case(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut pending_sep = false;
    for ch in name.trim().chars() {
        if ch.is_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.extend(ch.to_lowercase());
        } else {
            pending_sep = true;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_loads() {
        let table = AliasTable::builtin();
        assert_eq!(table.version, 1);
        assert_eq!(table.direction("ccw"), "counterclockwise");
        assert_eq!(table.object("unicorn"), "unicorn");
    }

    #[test]
    fn snake_case_normalizes_separators() {
        assert_eq!(snake_case("Power Strip"), "power_strip");
        assert_eq!(snake_case("  bottle-cap "), "bottle_cap");
        assert_eq!(snake_case("Move_to"), "move_to");
        assert_eq!(snake_case("a  b"), "a_b");
    }
}
