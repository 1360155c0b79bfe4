//! Anchor selection and ego-centred scenario extraction from tracks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::tracks::{TrackRecord, Tracks};
use crate::scenario::{
    round2, Direction, DrivingScenario, EgoLane, EgoState, GroundTruth, Intention, MapInfo, Neighbor, VehicleKind,
    HISTORY_LEN, HORIZON_LEN, SENSING_RANGE_M,
};

/// Vehicles longer than this are labelled trucks, m.
pub const TRUCK_LENGTH_M: f64 = 6.0;
const MS_TO_KMH: f64 = 3.6;

/// Which lane-id change counts as a move to the left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneConvention {
    LeftDecreasing,
    LeftIncreasing,
    /// Left is decreasing for traffic moving towards `+x` and increasing for
    /// traffic moving towards `-x` (highD numbering, lanes counted top-down).
    #[default]
    ByTravelDirection,
}

impl LaneConvention {
    /// `+1` when a higher lane id lies to the driver's left, `-1` otherwise.
    fn left_sign(self, heading: f64) -> i64 {
        match self {
            LaneConvention::LeftDecreasing => -1,
            LaneConvention::LeftIncreasing => 1,
            LaneConvention::ByTravelDirection => {
                if heading >= 0.0 {
                    -1
                } else {
                    1
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AnchorMode {
    /// One anchor per lane-change event, or the track midpoint when the
    /// vehicle never changes lane.
    PerEvent,
    /// Every `stride_s` seconds along each track.
    Sliding { stride_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub frame_rate: f64,
    pub history_s: f64,
    pub history_stride_s: f64,
    pub horizon_s: f64,
    pub horizon_stride_s: f64,
    pub sensing_range_m: f64,
    /// Anchor placed this long before a lane-change frame.
    pub lane_change_lead_s: f64,
    pub lane_convention: LaneConvention,
    pub anchors: AnchorMode,
    /// Lane ids of each carriageway. Empty means infer from the tracks by
    /// grouping the observed ids by travel direction.
    pub carriageways: Vec<Vec<u32>>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            frame_rate: 25.0,
            history_s: 2.0,
            history_stride_s: 0.4,
            horizon_s: 4.0,
            horizon_stride_s: 1.0,
            sensing_range_m: SENSING_RANGE_M,
            lane_change_lead_s: 2.0,
            lane_convention: LaneConvention::default(),
            anchors: AnchorMode::PerEvent,
            carriageways: Vec::new(),
        }
    }
}

impl ExtractionConfig {
    fn frames(&self, seconds: f64) -> u32 {
        (seconds * self.frame_rate).round() as u32
    }

    pub fn validate(&self) -> Result<(), String> {
        let steps = |span: f64, stride: f64| span / stride;
        if (steps(self.history_s, self.history_stride_s) - (HISTORY_LEN - 1) as f64).abs() > 1e-9 {
            return Err(format!("history window must give {HISTORY_LEN} points"));
        }
        if (steps(self.horizon_s, self.horizon_stride_s) - HORIZON_LEN as f64).abs() > 1e-9 {
            return Err(format!("prediction horizon must give {HORIZON_LEN} points"));
        }
        if !(self.frame_rate > 0.0) || !(self.sensing_range_m > 0.0 && self.sensing_range_m <= SENSING_RANGE_M) {
            return Err("frame rate must be positive and sensing range within (0, 200] m".into());
        }
        if let AnchorMode::Sliding { stride_s } = self.anchors {
            if self.frames(stride_s) == 0 {
                return Err("sliding-window stride must cover at least one frame".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    InsufficientHistory,
    InsufficientFuture,
    MissingFrames,
    UnknownCarriageway,
    SingleLane,
    InvalidScenario,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    pub samples: Vec<(DrivingScenario, GroundTruth)>,
    pub skipped: BTreeMap<SkipReason, usize>,
}

struct Frame {
    to_local: f64,
    origin: (f64, f64),
}

impl Frame {
    /// Road frame to ego frame: `x` along travel, `y` positive to the left.
    fn local(&self, p: (f64, f64)) -> (f64, f64) {
        (self.to_local * (p.0 - self.origin.0), -self.to_local * (p.1 - self.origin.1))
    }
}

fn kind_of(r: &TrackRecord) -> VehicleKind {
    if r.width > TRUCK_LENGTH_M {
        VehicleKind::Truck
    } else {
        VehicleKind::Car
    }
}

fn at_frame(track: &[TrackRecord], frame: u32) -> Option<&TrackRecord> {
    track.binary_search_by_key(&frame, |r| r.frame).ok().map(|i| &track[i])
}

struct Carriageway {
    /// Lane ids ordered from the drivers' left.
    left_to_right: Vec<u32>,
}

fn carriageways(tracks: &Tracks, config: &ExtractionConfig) -> Vec<(Carriageway, f64)> {
    let groups: Vec<(BTreeSet<u32>, f64)> = if config.carriageways.is_empty() {
        let mut fwd = BTreeSet::new();
        let mut back = BTreeSet::new();
        for r in tracks.values().flatten() {
            if r.x_velocity >= 0.0 { &mut fwd } else { &mut back }.insert(r.lane_id);
        }
        vec![(fwd, 1.0), (back, -1.0)]
    } else {
        config
            .carriageways
            .iter()
            .map(|ids| {
                let ids: BTreeSet<u32> = ids.iter().copied().collect();
                let heading =
                    tracks.values().flatten().find(|r| ids.contains(&r.lane_id)).map_or(1.0, |r| r.x_velocity.signum());
                (ids, heading)
            })
            .collect()
    };
    groups
        .into_iter()
        .filter(|(ids, _)| !ids.is_empty())
        .map(|(ids, heading)| {
            let mut left_to_right: Vec<u32> = ids.into_iter().collect();
            if config.lane_convention.left_sign(heading) > 0 {
                left_to_right.reverse();
            }
            (Carriageway { left_to_right }, heading)
        })
        .collect()
}

fn anchors(track: &[TrackRecord], config: &ExtractionConfig) -> Vec<u32> {
    let (first, last) = (track[0].frame, track[track.len() - 1].frame);
    match config.anchors {
        AnchorMode::PerEvent => {
            let lead = config.frames(config.lane_change_lead_s);
            let changes: Vec<u32> =
                track.windows(2).filter(|w| w[0].lane_id != w[1].lane_id).map(|w| w[1].frame).collect();
            if changes.is_empty() {
                vec![first + (last - first) / 2]
            } else {
                changes.into_iter().map(|f| f.saturating_sub(lead).max(first)).collect()
            }
        }
        AnchorMode::Sliding { stride_s } => {
            let stride = config.frames(stride_s) as usize;
            let start = first + config.frames(config.history_s);
            let end = last.saturating_sub(config.frames(config.horizon_s));
            (start..=end).step_by(stride).collect()
        }
    }
}

/// Builds one scenario per anchor. Anchors lacking the 2 s history or 4 s
/// future (or with gaps in between) are skipped and counted by reason.
pub fn extract_scenarios(tracks: &Tracks, config: &ExtractionConfig) -> Extraction {
    let mut out = Extraction::default();
    let lanes = carriageways(tracks, config);
    let mut by_frame: HashMap<u32, Vec<&TrackRecord>> = HashMap::new();
    for r in tracks.values().flatten() {
        by_frame.entry(r.frame).or_default().push(r);
    }

    for (id, track) in tracks {
        if track.is_empty() {
            continue;
        }
        for anchor in anchors(track, config) {
            match extract_one(*id, track, anchor, &lanes, &by_frame, config) {
                Ok(sample) => out.samples.push(sample),
                Err(reason) => *out.skipped.entry(reason).or_default() += 1,
            }
        }
    }
    out
}

fn extract_one(
    id: u32,
    track: &[TrackRecord],
    anchor: u32,
    lanes: &[(Carriageway, f64)],
    by_frame: &HashMap<u32, Vec<&TrackRecord>>,
    config: &ExtractionConfig,
) -> Result<(DrivingScenario, GroundTruth), SkipReason> {
    let hist = config.frames(config.history_s);
    let hist_step = config.frames(config.history_stride_s);
    let fut_step = config.frames(config.horizon_stride_s);
    if anchor < track[0].frame + hist {
        return Err(SkipReason::InsufficientHistory);
    }
    if anchor + config.frames(config.horizon_s) > track[track.len() - 1].frame {
        return Err(SkipReason::InsufficientFuture);
    }
    let ego = at_frame(track, anchor).ok_or(SkipReason::MissingFrames)?;
    let heading = if ego.x_velocity >= 0.0 { 1.0 } else { -1.0 };
    let frame = Frame { to_local: heading, origin: ego.center() };
    let left_sign = config.lane_convention.left_sign(heading);

    let (carriageway, _) = lanes
        .iter()
        .find(|(c, h)| *h == heading && c.left_to_right.contains(&ego.lane_id))
        .or_else(|| lanes.iter().find(|(c, _)| c.left_to_right.contains(&ego.lane_id)))
        .ok_or(SkipReason::UnknownCarriageway)?;
    let lane_count = carriageway.left_to_right.len() as u32;
    if lane_count < 2 {
        return Err(SkipReason::SingleLane);
    }
    let pos = carriageway.left_to_right.iter().position(|l| *l == ego.lane_id).expect("lane in carriageway") as u32 + 1;
    let ego_lane = match pos {
        1 => EgoLane::Leftmost,
        p if p == lane_count => EgoLane::Rightmost,
        p => EgoLane::Middle(p),
    };

    let mut history = Vec::with_capacity(HISTORY_LEN);
    for k in (0..HISTORY_LEN as u32).rev() {
        let r = at_frame(track, anchor - k * hist_step).ok_or(SkipReason::MissingFrames)?;
        let (x, y) = frame.local(r.center());
        history.push((round2(x), round2(y)));
    }

    let mut trajectory = [(0.0, 0.0); HORIZON_LEN];
    for (j, slot) in trajectory.iter_mut().enumerate() {
        let r = at_frame(track, anchor + (j as u32 + 1) * fut_step).ok_or(SkipReason::MissingFrames)?;
        let (x, y) = frame.local(r.center());
        *slot = (round2(x), round2(y));
    }

    let horizon_end = anchor + config.frames(config.horizon_s);
    let change = track.iter().filter(|r| r.frame > anchor && r.frame <= horizon_end).find(|r| r.lane_id != ego.lane_id);
    let intention = match change {
        None => Intention::KeepLane,
        Some(r) => {
            let step = (r.lane_id as i64 - ego.lane_id as i64).signum();
            if step == left_sign {
                Intention::LeftChange
            } else {
                Intention::RightChange
            }
        }
    };

    let mut neighbors: BTreeMap<Direction, (f64, Neighbor)> = BTreeMap::new();
    for other in by_frame.get(&anchor).into_iter().flatten() {
        if other.id == id || (other.x_velocity >= 0.0) != (heading > 0.0) {
            continue;
        }
        let offset = (other.lane_id as i64 - ego.lane_id as i64) * left_sign;
        let (dx, dy) = frame.local(other.center());
        let distance = dx.hypot(dy);
        if distance > config.sensing_range_m || distance <= 0.0 {
            continue;
        }
        let alongside = dx.abs() < (ego.width + other.width) / 2.0;
        let direction = match (offset, alongside, dx >= 0.0) {
            (0, _, true) => Direction::Front,
            (0, _, false) => Direction::Behind,
            (1, true, _) => Direction::Left,
            (1, false, true) => Direction::LeftFront,
            (1, false, false) => Direction::LeftBehind,
            (-1, true, _) => Direction::Right,
            (-1, false, true) => Direction::RightFront,
            (-1, false, false) => Direction::RightBehind,
            _ => continue,
        };
        let candidate = Neighbor {
            kind: kind_of(other),
            speed_x: round2(heading * other.x_velocity * MS_TO_KMH),
            distance: round2(distance),
        };
        if candidate.distance <= 0.0 {
            continue;
        }
        let keep = neighbors.get(&direction).is_none_or(|(d, _)| distance < *d);
        if keep {
            neighbors.insert(direction, (distance, candidate));
        }
    }

    let scenario = DrivingScenario {
        id: format!("v{id}-f{anchor}"),
        map: MapInfo { lane_count, ego_lane },
        ego: EgoState {
            vx: round2(heading * ego.x_velocity * MS_TO_KMH),
            vy: round2(-heading * ego.y_velocity * MS_TO_KMH),
            ax: round2(heading * ego.x_acceleration),
            ay: round2(-heading * ego.y_acceleration),
            kind: kind_of(ego),
            width: round2(ego.height),
            length: round2(ego.width),
            history,
        },
        neighbors: neighbors.into_iter().map(|(d, (_, n))| (d, n)).collect(),
    };
    if !scenario.is_valid() {
        return Err(SkipReason::InvalidScenario);
    }
    Ok((scenario, GroundTruth { intention, trajectory }))
}
