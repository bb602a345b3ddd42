//! Pipeline-level association tests on generated scenes: the manifest
//! formats must agree with each other, the filtered graph must obey the
//! degree contract however noisy the scene, and an independently coded
//! chain walk must reproduce the library's count.

use std::collections::BTreeMap;

use vitis_core::npy::write_npz;
use vitis_core::synth::{generate_scene, SceneConfig};
use vitis_core::track::{
    build_graph, export_detections, extract_tracks, filter_edges, frame_observations,
    load_detections, GraphOptions, NodeId, TrackGraph,
};

/// Count chains of the filtered graph with nothing but a successor map.
fn naive_chain_count(graph: &TrackGraph, min_edges: usize) -> usize {
    let mut successor: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut has_predecessor: std::collections::BTreeSet<NodeId> = Default::default();
    for &(u, v) in graph.edges.keys() {
        assert!(successor.insert(u, v).is_none(), "filtered graphs have out-degree <= 1");
        assert!(has_predecessor.insert(v), "filtered graphs have in-degree <= 1");
    }
    let mut count = 0;
    for node in &graph.nodes {
        if has_predecessor.contains(node) {
            continue;
        }
        let mut edges = 0;
        let mut cursor = *node;
        while let Some(&next) = successor.get(&cursor) {
            edges += 1;
            cursor = next;
        }
        if edges >= min_edges {
            count += 1;
        }
    }
    count
}

#[test]
fn chain_count_matches_an_independent_walk_on_noisy_scenes() {
    for seed in 0..20u64 {
        let config = SceneConfig {
            dropout: 0.25,
            occlusion: 0.15,
            ..SceneConfig::new(3 + (seed % 5) as u32, 30 + (seed % 40) as u32, seed)
        };
        let scene = generate_scene(&config).unwrap();
        let observations = frame_observations(&scene.model, &scene.frames).unwrap();
        let graph = build_graph(&scene.frames, &observations, &GraphOptions::default()).unwrap();
        let filtered = filter_edges(&graph);
        let tracks = extract_tracks(&filtered, 5).unwrap();
        assert_eq!(tracks.count(), naive_chain_count(&filtered, 5), "seed {seed}");
    }
}

#[test]
fn window_only_removes_long_range_edges() {
    let scene = generate_scene(&SceneConfig::new(3, 40, 9)).unwrap();
    let observations = frame_observations(&scene.model, &scene.frames).unwrap();
    let unbounded =
        build_graph(&scene.frames, &observations, &GraphOptions::default()).unwrap();
    let windowed = build_graph(
        &scene.frames,
        &observations,
        &GraphOptions { window: Some(3), ..GraphOptions::default() },
    )
    .unwrap();
    assert_eq!(unbounded.nodes, windowed.nodes);
    assert!(windowed.edges.len() < unbounded.edges.len());
    for (&(u, v), &w) in &windowed.edges {
        assert!(v.frame - u.frame <= 3, "window must cap the frame gap");
        assert_eq!(unbounded.edges.get(&(u, v)), Some(&w), "weights must be unchanged");
    }
    for &(u, v) in unbounded.edges.keys() {
        if v.frame - u.frame <= 3 {
            assert!(windowed.edges.contains_key(&(u, v)), "short edges must survive");
        }
    }
}

#[test]
fn manifest_array_files_and_inline_rle_agree() {
    let scene = generate_scene(&SceneConfig::new(2, 25, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();

    // Inline RLE manifest straight from the library.
    let inline = export_detections(&scene.frames);
    let from_inline = load_detections::<f64>(&inline, dir.path()).unwrap();

    // The same detections as per-frame NPZ stacks referenced by path.
    let mut manifest = String::new();
    for frame in &scene.frames {
        let file = format!("{}.npz", frame.frame_index);
        let stack = vitis_core::mask::MaskStack::from_masks(
            640,
            480,
            frame.masks.clone(),
        )
        .unwrap();
        let (shape, data) = stack.to_dense();
        std::fs::write(dir.path().join(&file), write_npz(&shape, &data)).unwrap();
        let confidences: Vec<f64> = frame.masks.iter().map(|m| m.confidence()).collect();
        manifest.push_str(&format!(
            "{{\"frame_name\":{:?},\"masks\":{:?},\"confidences\":{:?}}}\n",
            frame.frame_name, file, confidences
        ));
    }
    let from_files = load_detections::<f64>(&manifest, dir.path()).unwrap();

    assert_eq!(from_inline.len(), from_files.len());
    for (a, b) in from_inline.iter().zip(&from_files) {
        assert_eq!(a.frame_name, b.frame_name);
        assert_eq!(a.masks.len(), b.masks.len());
        for (ma, mb) in a.masks.iter().zip(&b.masks) {
            assert_eq!(ma.bitmap(), mb.bitmap());
            assert_eq!(ma.confidence(), mb.confidence());
        }
    }
    assert_eq!(from_inline, scene.frames, "manifest round-trip must be lossless");
}
