//! Node atlases and the JSON document read by the network viewer.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{AdjacencyMatrix, AdjacencyMode};

/// Version of the [`NetworkExport`] layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Colors handed out to communities in order when none are supplied.
pub const DEFAULT_PALETTE: &[&str] = &[
    "#e6194b", "#3cb44b", "#ffe119", "#4363d8", "#f58231", "#911eb4", "#46f0f0", "#f032e6", "#bcf60c",
    "#fabebe", "#008080", "#e6beff", "#9a6324", "#fffac8", "#800000", "#aaffc3", "#808000", "#ffd8b1",
    "#000075", "#808080",
];

/// One atlas row: an optional community label and MNI coordinates in mm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasRow {
    pub community: Option<String>,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Row `k` describes node `k + 1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AtlasTable {
    pub rows: Vec<AtlasRow>,
}

#[derive(Deserialize)]
struct RawAtlasRow {
    community: Option<String>,
    x: f64,
    y: f64,
    z: f64,
}

impl AtlasTable {
    /// Read a CSV with header `community,x,y,z`. An empty community cell is
    /// stored as `None`.
    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut rows = Vec::new();
        for (k, record) in reader.deserialize::<RawAtlasRow>().enumerate() {
            let raw = record.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: k + 2,
                col: 0,
                msg: e.to_string(),
            })?;
            for (col, v) in [(2, raw.x), (3, raw.y), (4, raw.z)] {
                if !v.is_finite() {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: k + 2,
                        col,
                        msg: format!("coordinate {v} is not finite"),
                    });
                }
            }
            rows.push(AtlasRow {
                community: raw.community.filter(|c| !c.is_empty()),
                x: raw.x,
                y: raw.y,
                z: raw.z,
            });
        }
        Ok(Self { rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["community", "x", "y", "z"])?;
        for r in &self.rows {
            writer.write_record([
                r.community.clone().unwrap_or_default(),
                r.x.to_string(),
                r.y.to_string(),
                r.z.to_string(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct community labels in order of first appearance; unlabeled
    /// nodes are listed as `""`.
    pub fn communities(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.rows
            .iter()
            .map(|r| r.community.clone().unwrap_or_default())
            .filter(|c| seen.insert(c.clone()))
            .collect()
    }
}

/// Which nodes to keep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeFilter {
    /// Nodes whose community is listed; `""` selects unlabeled nodes.
    Communities(Vec<String>),
    /// 1-based node ids.
    Nodes(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportNode {
    /// 1-based atlas row.
    pub id: usize,
    pub community: Option<String>,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub color: String,
}

/// Undirected edge between node ids, `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportEdge {
    pub i: usize,
    pub j: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExportMetadata {
    /// 0-based segment index the network was estimated on.
    pub segment: Option<usize>,
    /// Threshold λ for thresholded networks.
    pub lambda: Option<f64>,
    /// Cluster count for clustering-based networks.
    pub k: Option<usize>,
    /// Name of the source dataset.
    pub source: Option<String>,
    /// Community order that determined the colors.
    pub communities: Vec<String>,
    pub colors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkExport {
    pub schema_version: u32,
    pub nodes: Vec<ExportNode>,
    pub edges: Vec<ExportEdge>,
    pub metadata: ExportMetadata,
}

fn check_color(c: &str) -> Result<()> {
    let hex = c.strip_prefix('#').unwrap_or("");
    if (hex.len() == 6 || hex.len() == 3) && hex.chars().all(|ch| ch.is_ascii_hexdigit()) {
        Ok(())
    } else {
        Err(Error::parameter("colors", format!("`{c}` is not a #rgb or #rrggbb color")))
    }
}

/// Join `a` with `atlas`, keep the nodes selected by `filter` and the edges
/// among them, and color communities: the n-th community gets the n-th
/// color, cycling when there are more communities than colors. Communities
/// are ordered as listed in a community filter, otherwise by first
/// appearance in the atlas.
pub fn export_network(
    a: &AdjacencyMatrix,
    atlas: &AtlasTable,
    filter: Option<&NodeFilter>,
    colors: Option<&[String]>,
    source: Option<&str>,
    segment: Option<usize>,
) -> Result<NetworkExport> {
    let p = a.n_nodes();
    if atlas.len() != p {
        return Err(Error::AtlasMismatch {
            atlas_rows: atlas.len(),
            nodes: p,
        });
    }
    let palette: Vec<String> = match colors {
        Some(c) if !c.is_empty() => {
            c.iter().try_for_each(|c| check_color(c))?;
            c.to_vec()
        }
        _ => DEFAULT_PALETTE.iter().map(|s| s.to_string()).collect(),
    };

    let label = |k: usize| atlas.rows[k].community.clone().unwrap_or_default();
    let keep: Vec<bool> = match filter {
        None => vec![true; p],
        Some(NodeFilter::Communities(list)) => {
            let wanted: HashSet<&str> = list.iter().map(String::as_str).collect();
            (0..p).map(|k| wanted.contains(label(k).as_str())).collect()
        }
        Some(NodeFilter::Nodes(ids)) => {
            let mut keep = vec![false; p];
            for &id in ids {
                if id == 0 || id > p {
                    return Err(Error::parameter("nodes", format!("node id {id} outside 1..={p}")));
                }
                keep[id - 1] = true;
            }
            keep
        }
    };
    let communities = match filter {
        Some(NodeFilter::Communities(list)) => {
            let mut seen = HashSet::new();
            list.iter().filter(|c| seen.insert(c.as_str())).cloned().collect()
        }
        _ => atlas.communities(),
    };
    let color_of = |c: &str| {
        let n = communities.iter().position(|x| x == c).unwrap_or(0);
        palette[n % palette.len()].clone()
    };

    let nodes = (0..p)
        .filter(|&k| keep[k])
        .map(|k| {
            let row = &atlas.rows[k];
            ExportNode {
                id: k + 1,
                community: row.community.clone(),
                x: row.x,
                y: row.y,
                z: row.z,
                color: color_of(&label(k)),
            }
        })
        .collect();
    let edges = a
        .edges()
        .into_iter()
        .filter(|&(i, j)| keep[i] && keep[j])
        .map(|(i, j)| ExportEdge { i: i + 1, j: j + 1 })
        .collect();
    let (lambda, k) = match a.mode {
        AdjacencyMode::Threshold(l) => (Some(l), None),
        AdjacencyMode::Clusters(k) => (None, Some(k)),
        AdjacencyMode::Imported => (None, None),
    };
    let used_colors = communities.iter().map(|c| color_of(c)).collect();
    Ok(NetworkExport {
        schema_version: SCHEMA_VERSION,
        nodes,
        edges,
        metadata: ExportMetadata {
            segment,
            lambda,
            k,
            source: source.map(str::to_owned),
            communities,
            colors: used_colors,
        },
    })
}

impl NetworkExport {
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let export: Self = serde_json::from_reader(file)?;
        if export.schema_version != SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                export.schema_version
            )));
        }
        Ok(export)
    }
}

/// [`export_network`] followed by writing the JSON document to `path`.
pub fn export_network_json(
    path: &Path,
    a: &AdjacencyMatrix,
    atlas: &AtlasTable,
    filter: Option<&NodeFilter>,
    colors: Option<&[String]>,
    source: Option<&str>,
    segment: Option<usize>,
) -> Result<NetworkExport> {
    let export = export_network(a, atlas, filter, colors, source, segment)?;
    export.write(path)?;
    Ok(export)
}
