use std::path::PathBuf;

use fabisearch::export::{export_network, export_network_json, AtlasTable, NetworkExport, NodeFilter, SCHEMA_VERSION};
use fabisearch::network::{AdjacencyMatrix, AdjacencyMode};
use fabisearch::Error;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn sample_atlas() -> AtlasTable {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/sample_atlas.csv");
    AtlasTable::load(&path).unwrap()
}

fn random_adjacency(p: usize, density: f64, seed: u64) -> AdjacencyMatrix {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut v = Array2::<u8>::zeros((p, p));
    for i in 0..p {
        for j in i + 1..p {
            if rng.random_bool(density) {
                v[[i, j]] = 1;
                v[[j, i]] = 1;
            }
        }
    }
    AdjacencyMatrix::from_values(v, AdjacencyMode::Threshold(0.5)).unwrap()
}

#[test]
fn full_sample_export_has_every_node() {
    let atlas = sample_atlas();
    assert_eq!(atlas.len(), 333);
    let a = random_adjacency(333, 0.02, 1);
    let e = export_network(&a, &atlas, None, None, Some("sample"), Some(1)).unwrap();
    assert_eq!(e.nodes.len(), 333);
    assert_eq!(e.edges.len(), a.edge_count());
    assert_eq!(e.schema_version, SCHEMA_VERSION);
    assert_eq!(e.metadata.lambda, Some(0.5));
    assert_eq!(e.metadata.communities.len(), 13);
    assert!(e.edges.iter().all(|x| 1 <= x.i && x.i < x.j && x.j <= 333));
}

#[test]
fn community_filter_keeps_only_those_nodes_and_edges() {
    let atlas = sample_atlas();
    let a = random_adjacency(333, 0.05, 2);
    let filter = NodeFilter::Communities(vec!["None".into(), "Visual".into()]);
    let e = export_network(&a, &atlas, Some(&filter), None, None, None).unwrap();
    let expected = atlas
        .rows
        .iter()
        .filter(|r| matches!(r.community.as_deref(), Some("None" | "Visual")))
        .count();
    assert_eq!(e.nodes.len(), expected);
    assert_eq!(expected, 47 + 39);
    let kept: std::collections::HashSet<usize> = e.nodes.iter().map(|n| n.id).collect();
    let want_edges = a.edges().iter().filter(|(i, j)| kept.contains(&(i + 1)) && kept.contains(&(j + 1))).count();
    assert_eq!(e.edges.len(), want_edges);
    assert_eq!(e.metadata.communities, vec!["None".to_string(), "Visual".to_string()]);
    let color_none = &e.nodes.iter().find(|n| n.community.as_deref() == Some("None")).unwrap().color;
    let color_visual = &e.nodes.iter().find(|n| n.community.as_deref() == Some("Visual")).unwrap().color;
    assert_ne!(color_none, color_visual);
}

#[test]
fn node_filter_keeps_first_thirty() {
    let atlas = sample_atlas();
    let a = random_adjacency(333, 0.1, 3);
    let filter = NodeFilter::Nodes((1..=30).collect());
    let e = export_network(&a, &atlas, Some(&filter), None, None, None).unwrap();
    assert_eq!(e.nodes.iter().map(|n| n.id).collect::<Vec<_>>(), (1..=30).collect::<Vec<_>>());
    assert!(e.edges.iter().all(|x| x.j <= 30));
    let bad = NodeFilter::Nodes(vec![0, 5]);
    assert!(export_network(&a, &atlas, Some(&bad), None, None, None).is_err());
}

#[test]
fn atlas_size_must_match() {
    let atlas = sample_atlas();
    let a = random_adjacency(10, 0.5, 4);
    assert!(matches!(
        export_network(&a, &atlas, None, None, None, None),
        Err(Error::AtlasMismatch { atlas_rows: 333, nodes: 10 })
    ));
}

#[test]
fn custom_colors_cycle_and_are_checked() {
    let atlas = sample_atlas();
    let a = random_adjacency(333, 0.0, 5);
    let colors = vec!["#f00".to_string(), "#00ff00".to_string()];
    let e = export_network(&a, &atlas, None, Some(&colors), None, None).unwrap();
    assert_eq!(e.metadata.colors.len(), e.metadata.communities.len());
    for (k, c) in e.metadata.colors.iter().enumerate() {
        assert_eq!(c, &colors[k % 2]);
    }
    assert!(e.edges.is_empty());
    let bad = vec!["red".to_string()];
    assert!(export_network(&a, &atlas, None, Some(&bad), None, None).is_err());
}

#[test]
fn json_round_trip_and_version_check() {
    let dir = tempfile::tempdir().unwrap();
    let atlas = sample_atlas();
    let a = random_adjacency(333, 0.01, 6);
    let path = dir.path().join("net.json");
    let e = export_network_json(&path, &a, &atlas, None, None, Some("demo"), Some(2)).unwrap();
    assert_eq!(NetworkExport::read(&path).unwrap(), e);

    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let node = &doc["nodes"][0];
    for key in ["id", "community", "x", "y", "z", "color"] {
        assert!(node.get(key).is_some(), "missing {key}");
    }
    assert!(doc["metadata"].get("communities").is_some());
    doc["schema_version"] = serde_json::json!(SCHEMA_VERSION + 1);
    std::fs::write(&path, doc.to_string()).unwrap();
    assert!(NetworkExport::read(&path).is_err());
}

#[test]
fn atlas_round_trip_keeps_unlabeled_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("atlas.csv");
    std::fs::write(&path, "community,x,y,z\nVisual,1,2,3\n,4,5,6\n").unwrap();
    let atlas = AtlasTable::load(&path).unwrap();
    assert_eq!(atlas.rows[1].community, None);
    assert_eq!(atlas.communities(), vec!["Visual".to_string(), String::new()]);
    let copy = dir.path().join("copy.csv");
    atlas.save(&copy).unwrap();
    assert_eq!(AtlasTable::load(&copy).unwrap(), atlas);
}

#[test]
fn shipped_sample_export_is_valid() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/sample_export.json");
    let e = NetworkExport::read(&path).unwrap();
    assert_eq!(e.nodes.len(), 333);
    assert!(!e.edges.is_empty());
    assert!(e.edges.iter().all(|x| 1 <= x.i && x.i < x.j && x.j <= 333));
    let atlas = sample_atlas();
    for n in &e.nodes {
        let row = &atlas.rows[n.id - 1];
        assert_eq!((&n.community, n.x, n.y, n.z), (&row.community, row.x, row.y, row.z));
        let k = e.metadata.communities.iter().position(|c| Some(c) == n.community.as_ref()).unwrap();
        assert_eq!(n.color, e.metadata.colors[k]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn node_filter_invariants(seed in any::<u64>(), ids in prop::collection::btree_set(1usize..=333, 0..60)) {
        let atlas = sample_atlas();
        let a = random_adjacency(333, 0.05, seed);
        let ids: Vec<usize> = ids.into_iter().collect();
        let e = export_network(&a, &atlas, Some(&NodeFilter::Nodes(ids.clone())), None, None, None).unwrap();
        prop_assert_eq!(e.nodes.iter().map(|n| n.id).collect::<Vec<_>>(), ids.clone());
        for edge in &e.edges {
            prop_assert!(edge.i < edge.j);
            prop_assert!(ids.binary_search(&edge.i).is_ok() && ids.binary_search(&edge.j).is_ok());
            prop_assert_eq!(a.values[[edge.i - 1, edge.j - 1]], 1);
        }
        let induced = a.edges().iter().filter(|(i, j)| ids.binary_search(&(i + 1)).is_ok() && ids.binary_search(&(j + 1)).is_ok()).count();
        prop_assert_eq!(e.edges.len(), induced);
    }
}
