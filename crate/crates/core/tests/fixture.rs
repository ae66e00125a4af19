//! Volume-stage outputs on the bundled fixture, checked against counts
//! recomputed here from the ingested records.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use tweetscope::corpus::{ingest, IngestOptions, InputFormat, LocationCode, RejectReason};
use tweetscope::pipeline::{self, PipelineConfig, Stage};
use tweetscope::textprep::{drop_non_english, Preprocessor};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn volume_bundle(dir: &Path) {
    let cfg = PipelineConfig { input: data("fixture_200.jsonl"), output_dir: dir.to_path_buf(), ..PipelineConfig::default() };
    pipeline::run(&cfg, &[Stage::Volume]).unwrap();
}

#[test]
fn ingest_counts() {
    let (corpus, stats) = ingest(&data("fixture_200.jsonl"), InputFormat::Jsonl, &IngestOptions::default()).unwrap();
    assert_eq!((stats.total, stats.accepted, stats.rejected_total()), (200, 198, 2));
    assert_eq!(stats.rejected.get(&RejectReason::BadTimestamp), Some(&1));
    assert_eq!(stats.rejected.get(&RejectReason::MissingText), Some(&1));
    assert_eq!(corpus.len(), 198);
    assert_eq!(corpus.records().iter().filter(|r| drop_non_english(r)).count(), 195);
}

#[test]
fn grid_matches_record_tally() {
    let dir = tempfile::tempdir().unwrap();
    volume_bundle(dir.path());

    let mut tally: BTreeMap<(String, usize), u64> = BTreeMap::new();
    let records = std::fs::read_to_string(dir.path().join("ingest/records.jsonl")).unwrap();
    for line in records.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let loc = v["location"].as_str().unwrap().to_string();
        let week = v["bucket"]["index"].as_u64().unwrap() as usize;
        *tally.entry((loc, week)).or_default() += 1;
    }

    let mut reader = csv::Reader::from_path(dir.path().join("volume/grid.csv")).unwrap();
    let mut seen = BTreeSet::new();
    let mut grand = 0;
    for row in reader.records() {
        let row = row.unwrap();
        let loc = row[0].to_string();
        if loc == "total" {
            continue;
        }
        let cells: Vec<u64> = row.iter().skip(1).map(|c| c.parse().unwrap()).collect();
        let (weeks, total) = cells.split_at(cells.len() - 1);
        for (w, &c) in weeks.iter().enumerate() {
            assert_eq!(c, tally.get(&(loc.clone(), w)).copied().unwrap_or(0), "{loc} week {w}");
        }
        assert_eq!(weeks.iter().sum::<u64>(), total[0]);
        grand += total[0];
        seen.insert(loc);
    }
    assert_eq!(seen.len(), LocationCode::ALL.len());
    assert_eq!(grand, 195);
}

#[test]
fn term_cloud_matches_recount() {
    let dir = tempfile::tempdir().unwrap();
    volume_bundle(dir.path());

    let (corpus, _) = ingest(&data("fixture_200.jsonl"), InputFormat::Jsonl, &IngestOptions::default()).unwrap();
    let pre = Preprocessor::default();
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for r in corpus.records().iter().filter(|r| drop_non_english(r)) {
        for t in pre.strip_query_terms(&pre.tokens(&r.text)).iter() {
            if t != "xurl" {
                *counts.entry(t.to_string()).or_default() += 1;
            }
        }
    }
    let mut expected: Vec<(String, u64)> = counts.into_iter().collect();
    expected.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    expected.truncate(50);

    let mut reader = csv::Reader::from_path(dir.path().join("volume/term_cloud.csv")).unwrap();
    let got: Vec<(String, u64)> = reader.deserialize().map(Result::unwrap).collect();
    assert_eq!(got, expected);
}

/// Pulls `(fill, title)` for every heatmap cell out of the SVG.
fn heatmap_cells(svg: &str) -> Vec<(String, String)> {
    let mut cells = Vec::new();
    for chunk in svg.split(r#"<rect x="#).skip(1) {
        let Some(fill) = chunk.split(r#"fill=""#).nth(1).and_then(|s| s.split('"').next()) else { continue };
        let Some(title) = chunk.split("<title>").nth(1).and_then(|s| s.split("</title>").next()) else { continue };
        cells.push((fill.to_string(), title.to_string()));
    }
    cells
}

#[test]
fn heatmap_shading_tracks_counts() {
    let dir = tempfile::tempdir().unwrap();
    volume_bundle(dir.path());
    let svg = std::fs::read_to_string(dir.path().join("volume/heatmap.svg")).unwrap();
    let cells = heatmap_cells(&svg);

    let mut reader = csv::Reader::from_path(dir.path().join("volume/grid.csv")).unwrap();
    let counts: Vec<f64> = reader
        .records()
        .map(Result::unwrap)
        .filter(|row| &row[0] != "total")
        .flat_map(|row| {
            let n = row.len();
            row.iter().skip(1).take(n - 2).map(|c| c.parse::<f64>().unwrap()).collect::<Vec<_>>()
        })
        .collect();
    assert_eq!(cells.len(), counts.len());
    let max = counts.iter().cloned().fold(0.0, f64::max);
    assert!(max > 0.0);

    for ((fill, title), &count) in cells.iter().zip(&counts) {
        assert_eq!(title.parse::<f64>().unwrap(), count);
        let red = u8::from_str_radix(&fill[1..3], 16).unwrap() as f64;
        let shade = (247.0 - red) / 239.0;
        // channel rounding bounds the error at half a step
        assert!((shade - count / max).abs() <= 0.5 / 239.0 + 1e-12, "{fill} for count {count}");
    }
}
