//! Flat-text vehicle signal catalog: parsing, validation and lookup.
//!
//! A catalog is built from one or more documents in a line format:
//!
//! ```text
//! path kind datatype [unit] [# description]
//! ```
//!
//! `kind` is one of `branch`, `sensor`, `actuator`, `attribute`; branches
//! carry no datatype. Branch nodes for every ancestor prefix of a leaf are
//! synthesized automatically, so documents normally list only leaves.
//! Later documents (overlays) may add new paths but never redefine existing
//! ones.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Node classification within the signal tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Branch,
    Sensor,
    Actuator,
    Attribute,
}

impl NodeKind {
    fn parse(word: &str) -> Option<NodeKind> {
        match word {
            "branch" => Some(NodeKind::Branch),
            "sensor" => Some(NodeKind::Sensor),
            "actuator" => Some(NodeKind::Actuator),
            "attribute" => Some(NodeKind::Attribute),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            NodeKind::Branch => "branch",
            NodeKind::Sensor => "sensor",
            NodeKind::Actuator => "actuator",
            NodeKind::Attribute => "attribute",
        }
    }
}

/// Leaf datatype.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    Boolean,
    Int32,
    Float,
    String,
}

impl Datatype {
    fn parse(word: &str) -> Option<Datatype> {
        match word {
            "boolean" => Some(Datatype::Boolean),
            "int32" => Some(Datatype::Int32),
            "float" => Some(Datatype::Float),
            "string" => Some(Datatype::String),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Datatype::Boolean => "boolean",
            Datatype::Int32 => "int32",
            Datatype::Float => "float",
            Datatype::String => "string",
        }
    }
}

impl fmt::Display for Datatype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One catalog entry, branch or leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalNode {
    pub path: String,
    pub kind: NodeKind,
    pub datatype: Option<Datatype>,
    pub unit: Option<String>,
    pub description: Option<String>,
}

impl SignalNode {
    pub fn is_leaf(&self) -> bool {
        self.kind != NodeKind::Branch
    }

    /// The final path segment, e.g. `IsChildDetected`.
    pub fn last_segment(&self) -> &str {
        self.path.rsplit('.').next().unwrap_or(&self.path)
    }
}

/// A named source document for [`load_catalog`].
#[derive(Debug, Clone)]
pub struct CatalogSource {
    pub name: String,
    pub text: String,
}

impl CatalogSource {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        CatalogSource { name: name.into(), text: text.into() }
    }
}

/// Immutable signal catalog. Safe to share across threads once loaded.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    nodes: BTreeMap<String, SignalNode>,
    overlays: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum CatalogError {
    #[error("{source_name}:{line}: malformed line: {reason}")]
    MalformedLine { source_name: String, line: usize, reason: String },
    #[error("duplicate path `{path}` declared with differing fields")]
    DuplicatePath { path: String },
    #[error("path `{path}` declared as both branch and leaf")]
    BranchLeafConflict { path: String },
}

/// Lookup failure, carrying the nearest existing ancestor for diagnostics.
#[derive(Debug, Error, PartialEq)]
#[error("path `{path}` not found (nearest ancestor: {})", .nearest_ancestor.as_deref().unwrap_or("<none>"))]
pub struct NotFound {
    pub path: String,
    pub nearest_ancestor: Option<String>,
}

fn valid_path(path: &str) -> bool {
    !path.is_empty()
        && path.split('.').all(|seg| {
            let mut chars = seg.chars();
            match chars.next() {
                Some(c) if c.is_ascii_alphabetic() => chars.all(|c| c.is_ascii_alphanumeric()),
                _ => false,
            }
        })
}

/// Build a catalog as the union of the given documents.
///
/// Leaves may be repeated only with identical fields; any difference is a
/// [`CatalogError::DuplicatePath`]. Branches for all ancestor prefixes are
/// synthesized after all documents are read.
pub fn load_catalog(sources: &[CatalogSource]) -> Result<Catalog, CatalogError> {
    let mut nodes: BTreeMap<String, SignalNode> = BTreeMap::new();

    for source in sources {
        for (idx, raw_line) in source.text.lines().enumerate() {
            let line_no = idx + 1;
            let malformed = |reason: &str| CatalogError::MalformedLine {
                source_name: source.name.clone(),
                line: line_no,
                reason: reason.to_string(),
            };

            // A trailing `# ...` is the node description; a line that is
            // nothing but a comment is skipped.
            let (body, description) = match raw_line.find('#') {
                Some(pos) => {
                    let desc = raw_line[pos + 1..].trim();
                    (
                        &raw_line[..pos],
                        if desc.is_empty() { None } else { Some(desc.to_string()) },
                    )
                }
                None => (raw_line, None),
            };
            let mut words = body.split_whitespace();
            let Some(path) = words.next() else { continue };
            if !valid_path(path) {
                return Err(malformed(&format!("invalid path `{path}`")));
            }
            let kind = words
                .next()
                .and_then(NodeKind::parse)
                .ok_or_else(|| malformed("expected kind: branch, sensor, actuator or attribute"))?;

            let node = if kind == NodeKind::Branch {
                if words.next().is_some() {
                    return Err(malformed("branch lines carry no datatype"));
                }
                SignalNode {
                    path: path.to_string(),
                    kind,
                    datatype: None,
                    unit: None,
                    description,
                }
            } else {
                let datatype = words
                    .next()
                    .and_then(Datatype::parse)
                    .ok_or_else(|| malformed("expected datatype: boolean, int32, float or string"))?;
                let unit = words.next().map(str::to_string);
                if words.next().is_some() {
                    return Err(malformed("unexpected trailing tokens"));
                }
                SignalNode {
                    path: path.to_string(),
                    kind,
                    datatype: Some(datatype),
                    unit,
                    description,
                }
            };

            insert_node(&mut nodes, node)?;
        }
    }

    // Synthesize ancestor branches for every declared node.
    let declared: Vec<String> = nodes.keys().cloned().collect();
    for path in declared {
        let mut prefix = String::new();
        for seg in path.split('.') {
            if !prefix.is_empty() {
                prefix.push('.');
            }
            prefix.push_str(seg);
            if prefix == path {
                break;
            }
            match nodes.get(&prefix) {
                Some(existing) if existing.is_leaf() => {
                    return Err(CatalogError::BranchLeafConflict { path: prefix });
                }
                Some(_) => {}
                None => {
                    nodes.insert(
                        prefix.clone(),
                        SignalNode {
                            path: prefix.clone(),
                            kind: NodeKind::Branch,
                            datatype: None,
                            unit: None,
                            description: None,
                        },
                    );
                }
            }
        }
    }

    Ok(Catalog {
        nodes,
        overlays: sources.iter().map(|s| s.name.clone()).collect(),
    })
}

fn insert_node(
    nodes: &mut BTreeMap<String, SignalNode>,
    node: SignalNode,
) -> Result<(), CatalogError> {
    match nodes.get(&node.path) {
        None => {
            nodes.insert(node.path.clone(), node);
            Ok(())
        }
        Some(existing) if existing.is_leaf() != node.is_leaf() => {
            Err(CatalogError::BranchLeafConflict { path: node.path })
        }
        Some(existing) if *existing == node => Ok(()),
        Some(_) => Err(CatalogError::DuplicatePath { path: node.path }),
    }
}

impl Catalog {
    /// Exact, case-sensitive lookup.
    pub fn resolve(&self, path: &str) -> Result<&SignalNode, NotFound> {
        if let Some(node) = self.nodes.get(path) {
            return Ok(node);
        }
        // Walk prefixes from the longest down for the diagnostic ancestor.
        let mut ancestor = None;
        let segments: Vec<&str> = path.split('.').collect();
        for take in (1..segments.len()).rev() {
            let prefix = segments[..take].join(".");
            if self.nodes.contains_key(&prefix) {
                ancestor = Some(prefix);
                break;
            }
        }
        Err(NotFound { path: path.to_string(), nearest_ancestor: ancestor })
    }

    /// All non-branch nodes in lexicographic path order.
    pub fn leaves(&self) -> Vec<&SignalNode> {
        self.nodes.values().filter(|n| n.is_leaf()).collect()
    }

    /// All nodes, branches included, in lexicographic path order.
    pub fn nodes(&self) -> impl Iterator<Item = &SignalNode> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Source-document names in load order.
    pub fn overlays(&self) -> &[String] {
        &self.overlays
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support as testdata;

    fn load_one(text: &str) -> Catalog {
        load_catalog(&[CatalogSource::new("test", text)]).unwrap()
    }

    #[test]
    fn single_leaf_synthesizes_ancestors() {
        let cat = load_one("Vehicle.Cabin.ChildPresenceDetection.IsChildDetected actuator boolean");
        assert_eq!(cat.leaves().len(), 1);
        assert_eq!(cat.len(), 4);
        for branch in ["Vehicle", "Vehicle.Cabin", "Vehicle.Cabin.ChildPresenceDetection"] {
            assert_eq!(cat.resolve(branch).unwrap().kind, NodeKind::Branch);
        }
    }

    #[test]
    fn empty_source_list_yields_empty_catalog() {
        let cat = load_catalog(&[]).unwrap();
        assert!(cat.is_empty());
        assert!(cat.leaves().is_empty());
    }

    #[test]
    fn overlay_redeclaring_with_differing_fields_is_rejected() {
        let base = CatalogSource::new("base", "Vehicle.X.P sensor boolean");
        let overlay = CatalogSource::new("overlay", "Vehicle.X.P actuator boolean");
        let err = load_catalog(&[base, overlay]).unwrap_err();
        assert_eq!(err, CatalogError::DuplicatePath { path: "Vehicle.X.P".into() });
    }

    #[test]
    fn identical_redeclaration_is_idempotent() {
        let line = "Vehicle.X.P sensor boolean";
        let cat = load_catalog(&[
            CatalogSource::new("a", line),
            CatalogSource::new("b", line),
        ])
        .unwrap();
        assert_eq!(cat.leaves().len(), 1);
    }

    #[test]
    fn branch_leaf_conflict_detected() {
        let err = load_one_err("Vehicle.X sensor boolean\nVehicle.X.Y sensor boolean");
        assert_eq!(err, CatalogError::BranchLeafConflict { path: "Vehicle.X".into() });
    }

    fn load_one_err(text: &str) -> CatalogError {
        load_catalog(&[CatalogSource::new("test", text)]).unwrap_err()
    }

    #[test]
    fn malformed_lines_report_position() {
        match load_one_err("Vehicle.X spaceship boolean") {
            CatalogError::MalformedLine { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected: {other:?}"),
        }
        match load_one_err("Vehicle.X sensor boolean\n3Bad.Path sensor boolean") {
            CatalogError::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn descriptions_and_units_are_captured() {
        let cat = load_one("Vehicle.Speed sensor float km/h # Current vehicle speed");
        let node = cat.resolve("Vehicle.Speed").unwrap();
        assert_eq!(node.unit.as_deref(), Some("km/h"));
        assert_eq!(node.description.as_deref(), Some("Current vehicle speed"));
    }

    #[test]
    fn resolve_shipped_hvac_override() {
        let cat = testdata::shipped_catalog();
        let node = cat.resolve("Vehicle.Cabin.Infotainment.HVAC.AutoOverrideActive").unwrap();
        assert_eq!(node.kind, NodeKind::Actuator);
        assert_eq!(node.datatype, Some(Datatype::Boolean));
    }

    #[test]
    fn resolve_branch_and_missing() {
        let cat = testdata::shipped_catalog();
        assert_eq!(cat.resolve("Vehicle").unwrap().kind, NodeKind::Branch);
        let err = cat.resolve("Vehicle.Cabin.Nonexistent").unwrap_err();
        assert_eq!(err.nearest_ancestor.as_deref(), Some("Vehicle.Cabin"));
    }

    #[test]
    fn overlay_leaves_in_lexicographic_order() {
        let cat = load_catalog(&[testdata::overlay_source()]).unwrap();
        let paths: Vec<&str> = cat.leaves().iter().map(|n| n.path.as_str()).collect();
        assert_eq!(
            paths,
            vec![
                "Vehicle.Cabin.ChildPresenceDetection.HasDriverAcknowledged",
                "Vehicle.Cabin.ChildPresenceDetection.IsChildDetected",
                "Vehicle.Cabin.ChildPresenceDetection.IsDriverNotified",
                "Vehicle.Cabin.Infotainment.HVAC.AutoOverrideActive",
            ]
        );
    }

    #[test]
    fn branches_only_catalog_has_no_leaves() {
        let cat = load_one("Vehicle branch\nVehicle.Cabin branch");
        assert!(cat.leaves().is_empty());
        assert_eq!(cat.len(), 2);
    }

    #[test]
    fn every_leaf_prefix_resolves() {
        let cat = testdata::shipped_catalog();
        for leaf in cat.leaves() {
            let segments: Vec<&str> = leaf.path.split('.').collect();
            for take in 1..=segments.len() {
                let prefix = segments[..take].join(".");
                assert!(cat.resolve(&prefix).is_ok(), "prefix {prefix} must resolve");
            }
        }
    }

    #[test]
    fn leaf_count_matches_leaf_lines() {
        let text = testdata::read("vss_core.catalog");
        let leaf_lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .count();
        let cat = load_catalog(&[CatalogSource::new("core", text.clone())]).unwrap();
        assert_eq!(cat.leaves().len(), leaf_lines);
    }

    #[test]
    fn load_is_order_insensitive_for_non_conflicting_sources() {
        let a = testdata::core_source();
        let b = testdata::overlay_source();
        let ab = load_catalog(&[a.clone(), b.clone()]).unwrap();
        let ba = load_catalog(&[b, a]).unwrap();
        let paths = |c: &Catalog| -> Vec<(String, NodeKind)> {
            c.nodes().map(|n| (n.path.clone(), n.kind)).collect()
        };
        assert_eq!(paths(&ab), paths(&ba));
    }
}
