use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tasks::{NodeSide, ValueKind};

pub const MANIFEST_VERSION: u32 = 1;

/// Declarative description of a dataset directory.
///
/// ```toml
/// version = 1
/// interactions = "interactions.tsv"
///
/// [ids]
/// mode = "dense"
///
/// [[task]]
/// id = "category"
/// kind = "attribute"
/// side = "items"
/// file = "item_category.tsv"
/// value_kind = "categorical"
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskManifest {
    pub version: u32,
    pub interactions: PathBuf,
    #[serde(default)]
    pub ids: IdConfig,
    #[serde(default, rename = "task", skip_serializing_if = "Vec::is_empty")]
    pub tasks: Vec<TaskDecl>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdMode {
    /// Ids are integers `0..n`.
    #[default]
    Dense,
    /// Arbitrary string ids, densified through persisted id-map files.
    Map,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdConfig {
    pub mode: IdMode,
    /// Dense mode: entity counts, if larger than the largest id seen + 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_users: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_items: Option<usize>,
    /// Map mode: `index<TAB>id` files, created on first load.
    pub user_map: PathBuf,
    pub item_map: PathBuf,
}

impl Default for IdConfig {
    fn default() -> Self {
        Self {
            mode: IdMode::Dense,
            num_users: None,
            num_items: None,
            user_map: "user_ids.tsv".into(),
            item_map: "item_ids.tsv".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclKind {
    Attribute,
    Relation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDecl {
    pub id: String,
    pub kind: DeclKind,
    pub side: NodeSide,
    pub file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_kind: Option<ValueKind>,
    /// Quantization bins for continuous attributes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
}

impl TaskManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let manifest: TaskManifest = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Manifest(msg) => Error::Manifest(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported manifest version {} (expected {MANIFEST_VERSION})",
                self.version
            )));
        }
        let mut seen = HashSet::new();
        for task in &self.tasks {
            if task.id.is_empty() || task.id == "rec" {
                return Err(Error::Manifest(format!("invalid task id `{}`", task.id)));
            }
            if !seen.insert(task.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate task id `{}`", task.id)));
            }
            match task.kind {
                DeclKind::Relation if task.value_kind.is_some() || task.bins.is_some() => {
                    return Err(Error::Manifest(format!(
                        "task `{}`: value_kind and bins apply to attribute tasks only",
                        task.id
                    )));
                }
                DeclKind::Attribute if task.bins.is_some() && task.value_kind != Some(ValueKind::Continuous) => {
                    return Err(Error::Manifest(format!(
                        "task `{}`: bins require value_kind = \"continuous\"",
                        task.id
                    )));
                }
                _ => {}
            }
            if matches!(task.bins, Some(b) if b < 2) {
                return Err(Error::Manifest(format!("task `{}`: bins must be >= 2", task.id)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
version = 1
interactions = "interactions.tsv"

[[task]]
id = "category"
kind = "attribute"
side = "items"
file = "cat.tsv"

[[task]]
id = "price"
kind = "attribute"
side = "items"
file = "price.tsv"
value_kind = "continuous"
bins = 4

[[task]]
id = "bundle"
kind = "relation"
side = "items"
file = "bundle.tsv"
"#;

    #[test]
    fn parses_sample() {
        let m = TaskManifest::parse(SAMPLE).unwrap();
        assert_eq!(m.tasks.len(), 3);
        assert_eq!(m.ids.mode, IdMode::Dense);
        assert_eq!(m.tasks[1].bins, Some(4));
        assert_eq!(TaskManifest::parse(&m.to_toml()).unwrap(), m);
    }

    #[test]
    fn version_is_required_and_checked() {
        assert!(matches!(
            TaskManifest::parse("interactions = \"a.tsv\""),
            Err(Error::Manifest(_))
        ));
        assert!(matches!(
            TaskManifest::parse("version = 2\ninteractions = \"a.tsv\""),
            Err(Error::Manifest(_))
        ));
    }

    #[test]
    fn rejects_duplicate_ids_and_misplaced_fields() {
        let dup = SAMPLE.replace("id = \"price\"", "id = \"category\"");
        assert!(TaskManifest::parse(&dup).is_err());
        let bad = SAMPLE.replace("file = \"bundle.tsv\"", "file = \"bundle.tsv\"\nbins = 3");
        assert!(TaskManifest::parse(&bad).is_err());
        let unknown = SAMPLE.replace("side = \"items\"\nfile = \"cat.tsv\"", "side = \"shops\"\nfile = \"cat.tsv\"");
        assert!(TaskManifest::parse(&unknown).is_err());
    }
}
