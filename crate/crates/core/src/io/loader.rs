//! Tab-separated dataset files to task hypergraphs.
//!
//! * interactions: `user<TAB>item`
//! * attributes:   `node<TAB>value`
//! * relations:    `anchor<TAB>id,id,...`
//!
//! Blank lines and lines starting with `#` are ignored.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::pipeline::dataset::RawDataset;
use crate::pipeline::synth::SyntheticData;
use crate::tasks::{
    build_attribute_hypergraph, build_relation_hypergraph, AttributeTable, AttributeValue, NodeSide, TaskHypergraph,
    ValueKind,
};

use super::manifest::{DeclKind, IdConfig, IdMode, TaskDecl, TaskManifest, MANIFEST_VERSION};

/// A parsed dataset together with the external ids of its entities.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedDataset {
    pub raw: RawDataset,
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
}

struct Line<'a> {
    number: usize,
    text: &'a str,
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn data_lines(text: &str) -> impl Iterator<Item = Line<'_>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| Line {
            number: i + 1,
            text: l.trim_end_matches('\r'),
        })
        .filter(|l| !l.text.trim().is_empty() && !l.text.starts_with('#'))
}

fn malformed(path: &Path, line: &Line<'_>, reason: impl Into<String>) -> Error {
    Error::MalformedLine {
        path: path.to_path_buf(),
        line: line.number,
        content: line.text.to_string(),
        reason: reason.into(),
    }
}

fn two_fields<'a>(path: &Path, line: &Line<'a>) -> Result<(&'a str, &'a str)> {
    let mut parts = line.text.split('\t');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), None) if !a.trim().is_empty() => Ok((a.trim(), b.trim())),
        _ => Err(malformed(path, line, "expected exactly two tab-separated fields")),
    }
}

/// Maps external ids of one entity set to dense indices.
struct IdMap {
    side: &'static str,
    mode: IdMode,
    /// Dense mode: number of entities, once fixed.
    count: Option<usize>,
    index: HashMap<String, usize>,
    names: Vec<String>,
    frozen: bool,
}

impl IdMap {
    fn dense(side: &'static str, count: Option<usize>) -> Self {
        Self {
            side,
            mode: IdMode::Dense,
            count,
            index: HashMap::new(),
            names: Vec::new(),
            frozen: false,
        }
    }

    fn from_file(side: &'static str, path: &Path) -> Result<Self> {
        let text = read_file(path)?;
        let mut map = Self {
            side,
            mode: IdMode::Map,
            count: None,
            index: HashMap::new(),
            names: Vec::new(),
            frozen: true,
        };
        for line in data_lines(&text) {
            let (idx, id) = two_fields(path, &line)?;
            let idx: usize = idx.parse().map_err(|_| malformed(path, &line, "index is not an integer"))?;
            if idx != map.names.len() {
                return Err(malformed(path, &line, format!("expected index {}", map.names.len())));
            }
            if map.index.insert(id.to_string(), idx).is_some() {
                return Err(malformed(path, &line, "duplicate id"));
            }
            map.names.push(id.to_string());
        }
        Ok(map)
    }

    fn open_map(side: &'static str) -> Self {
        Self {
            side,
            mode: IdMode::Map,
            count: None,
            index: HashMap::new(),
            names: Vec::new(),
            frozen: false,
        }
    }

    /// Resolves an id; new ids are admitted only while the map is open.
    fn resolve(&mut self, id: &str, path: &Path, line: &Line<'_>) -> Result<usize> {
        let unknown = || Error::UnknownId {
            path: path.to_path_buf(),
            line: line.number,
            side: self.side,
            id: id.to_string(),
        };
        match self.mode {
            IdMode::Dense => {
                let v: usize = id
                    .parse()
                    .map_err(|_| malformed(path, line, format!("{} id `{id}` is not a dense integer", self.side)))?;
                match self.count {
                    Some(n) if v >= n => Err(unknown()),
                    _ => Ok(v),
                }
            }
            IdMode::Map => {
                if let Some(&v) = self.index.get(id) {
                    return Ok(v);
                }
                if self.frozen {
                    return Err(unknown());
                }
                let v = self.names.len();
                self.index.insert(id.to_string(), v);
                self.names.push(id.to_string());
                Ok(v)
            }
        }
    }

    /// Fixes the entity count after the interactions file has been read.
    fn freeze(&mut self, max_seen: Option<usize>) {
        if self.mode == IdMode::Dense && self.count.is_none() {
            self.count = Some(max_seen.map_or(0, |m| m + 1));
        }
        self.frozen = true;
    }

    fn len(&self) -> usize {
        match self.mode {
            IdMode::Dense => self.count.unwrap_or(0),
            IdMode::Map => self.names.len(),
        }
    }

    fn names(&self) -> Vec<String> {
        match self.mode {
            IdMode::Dense => (0..self.len()).map(|i| i.to_string()).collect(),
            IdMode::Map => self.names.clone(),
        }
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (i, name) in self.names.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{name}");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn id_maps(root: &Path, ids: &IdConfig) -> Result<(IdMap, IdMap, Vec<(PathBuf, bool)>)> {
    match ids.mode {
        IdMode::Dense => Ok((
            IdMap::dense("user", ids.num_users),
            IdMap::dense("item", ids.num_items),
            Vec::new(),
        )),
        IdMode::Map => {
            let up = root.join(&ids.user_map);
            let ip = root.join(&ids.item_map);
            let load = |side, p: &Path| -> Result<(IdMap, bool)> {
                if p.exists() {
                    Ok((IdMap::from_file(side, p)?, false))
                } else {
                    Ok((IdMap::open_map(side), true))
                }
            };
            let (u, u_new) = load("user", &up)?;
            let (i, i_new) = load("item", &ip)?;
            Ok((u, i, vec![(up, u_new), (ip, i_new)]))
        }
    }
}

/// Reads the manifest at `manifest_path` and every file it names (relative
/// to the manifest's directory). Continuous attributes without explicit
/// `bins` use `default_bins`. In map mode, missing id-map files are written.
pub fn load_dataset(manifest_path: &Path, default_bins: usize) -> Result<LoadedDataset> {
    let manifest = TaskManifest::read(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    load_with_manifest(root, &manifest, default_bins)
}

pub fn load_with_manifest(root: &Path, manifest: &TaskManifest, default_bins: usize) -> Result<LoadedDataset> {
    manifest.validate()?;
    let (mut users, mut items, map_files) = id_maps(root, &manifest.ids)?;

    let path = root.join(&manifest.interactions);
    let text = read_file(&path)?;
    let mut edges = Vec::new();
    for line in data_lines(&text) {
        let (u, i) = two_fields(&path, &line)?;
        if i.is_empty() {
            return Err(malformed(&path, &line, "missing item id"));
        }
        edges.push((users.resolve(u, &path, &line)?, items.resolve(i, &path, &line)?));
    }
    if edges.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no interactions", path.display())));
    }
    users.freeze(edges.iter().map(|e| e.0).max());
    items.freeze(edges.iter().map(|e| e.1).max());
    let (num_users, num_items) = (users.len(), items.len());

    let mut tasks = Vec::with_capacity(manifest.tasks.len());
    let mut attribute_records = 0;
    let mut skipped = 0;
    for decl in &manifest.tasks {
        let path = root.join(&decl.file);
        let (map, num_nodes) = match decl.side {
            NodeSide::Users => (&mut users, num_users),
            NodeSide::Items => (&mut items, num_items),
        };
        match decl.kind {
            DeclKind::Attribute => {
                let (task, records) = load_attribute(&path, decl, map, num_nodes, default_bins)?;
                attribute_records += records;
                tasks.push(task);
            }
            DeclKind::Relation => {
                let (task, skip) = load_relation(&path, decl, map, num_nodes)?;
                skipped += skip;
                tasks.push(task);
            }
        }
    }
    for (p, is_new) in &map_files {
        if *is_new {
            let map = if p == &root.join(&manifest.ids.user_map) { &users } else { &items };
            map.write(p)?;
        }
    }

    let mut raw = RawDataset::new(num_users, num_items, edges, tasks)?;
    raw.stats.node_attributes = attribute_records;
    raw.stats.skipped_relations = skipped;
    Ok(LoadedDataset {
        raw,
        user_ids: users.names(),
        item_ids: items.names(),
    })
}

fn load_attribute(
    path: &Path,
    decl: &TaskDecl,
    ids: &mut IdMap,
    num_nodes: usize,
    default_bins: usize,
) -> Result<(TaskHypergraph, usize)> {
    let text = read_file(path)?;
    let kind = decl.value_kind.unwrap_or(ValueKind::Categorical);
    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    for line in data_lines(&text) {
        let (node, value) = two_fields(path, &line)?;
        if value.is_empty() {
            return Err(malformed(path, &line, "missing attribute value"));
        }
        let node = ids.resolve(node, path, &line)?;
        if !seen.insert((node, value.to_string())) {
            continue;
        }
        let value = match kind {
            ValueKind::Categorical => AttributeValue::Categorical(value.to_string()),
            ValueKind::Continuous => {
                let x: f64 = value
                    .parse()
                    .map_err(|_| malformed(path, &line, "value is not a number"))?;
                if !x.is_finite() {
                    return Err(malformed(path, &line, "value is not finite"));
                }
                AttributeValue::Continuous(x)
            }
        };
        records.push((node, value));
    }
    if records.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: attribute task `{}` has no records",
            path.display(),
            decl.id
        )));
    }
    let count = records.len();
    let table = AttributeTable {
        value_kind: kind,
        records,
    };
    let task = build_attribute_hypergraph(&decl.id, decl.side, num_nodes, &table, decl.bins.unwrap_or(default_bins))?;
    Ok((task, count))
}

fn load_relation(path: &Path, decl: &TaskDecl, ids: &mut IdMap, num_nodes: usize) -> Result<(TaskHypergraph, usize)> {
    let text = read_file(path)?;
    let mut relations = Vec::new();
    for line in data_lines(&text) {
        let (anchor, related) = two_fields(path, &line)?;
        let anchor = ids.resolve(anchor, path, &line)?;
        let mut members = Vec::new();
        for id in related.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            members.push(ids.resolve(id, path, &line)?);
        }
        relations.push((anchor, members));
    }
    if relations.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: relation task `{}` has no records",
            path.display(),
            decl.id
        )));
    }
    let build = build_relation_hypergraph(&decl.id, decl.side, num_nodes, &relations)?;
    Ok((build.task, build.skipped))
}

/// Writes a generated fixture as a dataset directory with dense ids and
/// returns the manifest path.
pub fn write_synthetic(data: &SyntheticData, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    let mut interactions = String::new();
    for &(u, i) in &data.raw.edges {
        let _ = writeln!(interactions, "{u}\t{i}");
    }
    write("interactions.tsv", interactions)?;
    let attr = |records: &[(usize, String)]| {
        records.iter().fold(String::new(), |mut s, (n, v)| {
            let _ = writeln!(s, "{n}\t{v}");
            s
        })
    };
    write("item_block.tsv", attr(&data.item_blocks))?;
    let mut relations = String::new();
    for (anchor, related) in &data.item_relations {
        let joined: Vec<String> = related.iter().map(usize::to_string).collect();
        let _ = writeln!(relations, "{anchor}\t{}", joined.join(","));
    }
    write("item_pair.tsv", relations)?;

    let decl = |id: &str, kind, side, file: &str| TaskDecl {
        id: id.into(),
        kind,
        side,
        file: file.into(),
        value_kind: None,
        bins: None,
    };
    let mut tasks = vec![
        decl("item_block", DeclKind::Attribute, NodeSide::Items, "item_block.tsv"),
        decl("item_pair", DeclKind::Relation, NodeSide::Items, "item_pair.tsv"),
    ];
    if let Some(groups) = &data.user_blocks {
        write("user_group.tsv", attr(groups))?;
        tasks.push(decl("user_group", DeclKind::Attribute, NodeSide::Users, "user_group.tsv"));
    }
    let manifest = TaskManifest {
        version: MANIFEST_VERSION,
        interactions: "interactions.tsv".into(),
        ids: IdConfig {
            num_users: Some(data.raw.num_users),
            num_items: Some(data.raw.num_items),
            ..IdConfig::default()
        },
        tasks,
    };
    let path = dir.join("manifest.toml");
    std::fs::write(&path, manifest.to_toml()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
