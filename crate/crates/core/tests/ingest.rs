use std::fmt::Write as _;

use trajattack::ingest::{
    extract_scenarios, load_tracks, read_corpus, write_corpus, AnchorMode, ExtractionConfig, SkipReason, Tracks,
};
use trajattack::scenario::{CorpusEntry, Direction, EgoLane, Intention, VehicleKind};

const HEADER: &str = "frame,id,x,y,width,height,xVelocity,yVelocity,xAcceleration,yAcceleration,laneId\n";

/// One vehicle row per frame; `pos(frame)` gives `(x, y, lane)`.
fn track(
    csv: &mut String,
    id: u32,
    frames: std::ops::RangeInclusive<u32>,
    length: f64,
    vx: f64,
    pos: impl Fn(u32) -> (f64, f64, u32),
) {
    for f in frames {
        let (x, y, lane) = pos(f);
        writeln!(csv, "{f},{id},{x},{y},{length},1.8,{vx},0,0,0,{lane}").unwrap();
    }
}

fn load(csv: &str) -> Tracks {
    load_tracks(csv.as_bytes()).unwrap()
}

fn config() -> ExtractionConfig {
    ExtractionConfig { carriageways: vec![vec![2, 3], vec![5, 6]], ..Default::default() }
}

/// Vehicle 1 drives at 25 m/s (1 m per frame) in lane 3 for 8 s.
fn cruising() -> String {
    let mut csv = HEADER.to_string();
    track(&mut csv, 1, 0..=200, 4.5, 25.0, |f| (f as f64, 10.0, 3));
    csv
}

fn sample_for<'a>(
    out: &'a trajattack::ingest::Extraction,
    id: &str,
) -> &'a (trajattack::scenario::DrivingScenario, trajattack::scenario::GroundTruth) {
    out.samples.iter().find(|(s, _)| s.id == id).unwrap_or_else(|| panic!("no sample {id}: {:?}", out.skipped))
}

#[test]
fn constant_velocity_keeps_lane_with_straight_waypoints() {
    let out = extract_scenarios(&load(&cruising()), &config());
    let (s, t) = sample_for(&out, "v1-f100");
    assert_eq!(t.intention, Intention::KeepLane);
    assert_eq!(t.trajectory, [(25.0, 0.0), (50.0, 0.0), (75.0, 0.0), (100.0, 0.0)]);
    assert_eq!(s.ego.history, vec![(-50.0, 0.0), (-40.0, 0.0), (-30.0, 0.0), (-20.0, 0.0), (-10.0, 0.0), (0.0, 0.0)]);
    assert_eq!(s.ego.vx, 90.0);
    assert_eq!((s.ego.length, s.ego.width), (4.5, 1.8));
    assert_eq!(s.map.lane_count, 2);
    assert_eq!(s.map.ego_lane, EgoLane::Rightmost);
    assert!(s.neighbors.is_empty());
}

#[test]
fn lane_decrement_within_the_horizon_is_a_left_change() {
    let mut csv = HEADER.to_string();
    track(&mut csv, 1, 0..=200, 4.5, 25.0, |f| {
        let y = 10.0 - 3.75 * ((f as f64 - 125.0) / 50.0).clamp(0.0, 1.0);
        (f as f64, y, if f < 150 { 3 } else { 2 })
    });
    let out = extract_scenarios(&load(&csv), &config());
    assert_eq!(out.samples.len(), 1);
    let (s, t) = &out.samples[0];
    // anchor 2 s before the lane-change frame
    assert_eq!(s.id, "v1-f100");
    assert_eq!(t.intention, Intention::LeftChange);
    assert!(t.trajectory[3].1 > 3.0, "left is positive lateral: {:?}", t.trajectory);
}

#[test]
fn westbound_traffic_mirrors_the_frame_and_lane_numbering() {
    let mut csv = HEADER.to_string();
    track(&mut csv, 9, 0..=200, 4.5, -25.0, |f| {
        let y = 20.0 + 3.75 * ((f as f64 - 125.0) / 50.0).clamp(0.0, 1.0);
        (400.0 - f as f64, y, if f < 150 { 5 } else { 6 })
    });
    let out = extract_scenarios(&load(&csv), &config());
    let (s, t) = sample_for(&out, "v9-f100");
    assert_eq!(t.intention, Intention::LeftChange);
    assert_eq!(t.trajectory[0].0, 25.0);
    assert!(t.trajectory[3].1 > 3.0);
    assert_eq!(s.ego.vx, 90.0);
    assert_eq!(s.map.ego_lane, EgoLane::Rightmost);
}

#[test]
fn neighbours_are_binned_and_range_limited() {
    let mut csv = cruising();
    // same lane, 30 m ahead
    track(&mut csv, 2, 0..=200, 4.5, 20.0, |f| (f as f64 + 30.0, 10.0, 3));
    // left lane, 210 m ahead: beyond sensing range
    track(&mut csv, 3, 0..=200, 4.5, 25.0, |f| (f as f64 + 210.0, 6.25, 2));
    // left lane, 20 m behind, a truck
    track(&mut csv, 4, 0..=200, 12.0, 25.0, |f| (f as f64 - 20.0, 6.25, 2));
    // opposite carriageway, ignored
    track(&mut csv, 5, 0..=200, 4.5, -25.0, |f| (300.0 - f as f64, 20.0, 5));
    let out = extract_scenarios(&load(&csv), &config());
    let (s, _) = sample_for(&out, "v1-f100");
    let dirs: Vec<Direction> = s.neighbors.keys().copied().collect();
    assert_eq!(dirs, vec![Direction::Front, Direction::LeftBehind]);
    let front = &s.neighbors[&Direction::Front];
    assert_eq!((front.distance, front.speed_x, front.kind), (30.0, 72.0, VehicleKind::Car));
    let lb = &s.neighbors[&Direction::LeftBehind];
    assert_eq!(lb.kind, VehicleKind::Truck);
    // centres are 3.75 m apart laterally and 16.25 m longitudinally
    assert_eq!(lb.distance, (16.25f64.hypot(3.75) * 100.0).round() / 100.0);
}

#[test]
fn alongside_vehicle_is_left_not_left_front() {
    let mut csv = cruising();
    track(&mut csv, 2, 0..=200, 4.5, 25.0, |f| (f as f64 + 1.0, 6.25, 2));
    let out = extract_scenarios(&load(&csv), &config());
    let (s, _) = sample_for(&out, "v1-f100");
    assert!(s.neighbors.contains_key(&Direction::Left), "{:?}", s.neighbors.keys());
}

#[test]
fn sliding_anchors_cover_every_full_window() {
    let config = ExtractionConfig { anchors: AnchorMode::Sliding { stride_s: 1.0 }, ..config() };
    let out = extract_scenarios(&load(&cruising()), &config);
    let ids: Vec<&str> = out.samples.iter().map(|(s, _)| s.id.as_str()).collect();
    assert_eq!(ids, ["v1-f50", "v1-f75", "v1-f100"]);
}

#[test]
fn short_tracks_are_skipped_with_a_reason() {
    let mut csv = HEADER.to_string();
    track(&mut csv, 1, 0..=120, 4.5, 25.0, |f| (f as f64, 10.0, 3));
    // changes lane at frame 30: anchor clamps to frame 0
    track(&mut csv, 2, 0..=120, 4.5, 25.0, |f| (f as f64, 6.25, if f < 30 { 3 } else { 2 }));
    let out = extract_scenarios(&load(&csv), &config());
    assert!(out.samples.is_empty());
    assert_eq!(out.skipped.get(&SkipReason::InsufficientFuture), Some(&1));
    assert_eq!(out.skipped.get(&SkipReason::InsufficientHistory), Some(&1));
}

#[test]
fn single_lane_carriageway_is_skipped() {
    let config = ExtractionConfig { carriageways: vec![vec![3]], ..Default::default() };
    let out = extract_scenarios(&load(&cruising()), &config);
    assert_eq!(out.skipped.get(&SkipReason::SingleLane), Some(&1));
}

#[test]
fn extracted_corpus_round_trips() {
    let mut csv = cruising();
    track(&mut csv, 2, 0..=200, 4.5, 20.0, |f| (f as f64 + 30.0, 10.0, 3));
    let out = extract_scenarios(&load(&csv), &config());
    let entries: Vec<CorpusEntry> =
        out.samples.into_iter().map(|(scenario, truth)| CorpusEntry { scenario, truth: Some(truth) }).collect();
    let mut buf = Vec::new();
    write_corpus(&entries, &mut buf).unwrap();
    assert_eq!(read_corpus(buf.as_slice()).unwrap(), entries);
}
