//! highD-style track CSV loading.

use std::collections::BTreeMap;
use std::io::Read;

use thiserror::Error;

/// One row of a tracks file. Positions are the bounding-box top-left corner
/// in the road frame; `width` is the extent along `x` (vehicle length) and
/// `height` the extent along `y` (vehicle width).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRecord {
    pub frame: u32,
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
    pub x_velocity: f64,
    pub y_velocity: f64,
    pub x_acceleration: f64,
    pub y_acceleration: f64,
    pub lane_id: u32,
}

impl TrackRecord {
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.width / 2.0, self.y + self.height / 2.0)
    }
}

/// Frame-sorted records keyed by vehicle id.
pub type Tracks = BTreeMap<u32, Vec<TrackRecord>>;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("row {row}: malformed number {value:?} in column {column:?}")]
    MalformedNumber { row: usize, column: String, value: String },
    #[error("row {row}: frames of vehicle {id} are not strictly increasing")]
    NonMonotoneFrames { row: usize, id: u32 },
    #[error("row {row}: laneId must be positive")]
    InvalidLane { row: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

const COLUMNS: [&str; 11] =
    ["frame", "id", "x", "y", "width", "height", "xVelocity", "yVelocity", "xAcceleration", "yAcceleration", "laneId"];

/// Parses a tracks CSV. Row numbers in errors are 1-based data rows (the
/// header is row 0). Extra columns are ignored.
pub fn load_tracks<R: Read>(source: R) -> Result<Tracks, TrackError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    let mut index = [0usize; COLUMNS.len()];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = headers.iter().position(|h| h == name).ok_or_else(|| TrackError::MissingColumn(name.to_string()))?;
    }

    let mut tracks = Tracks::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |c: usize| record.get(index[c]).unwrap_or("");
        let real = |c: usize| -> Result<f64, TrackError> {
            let s = field(c);
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| TrackError::MalformedNumber {
                row,
                column: COLUMNS[c].to_string(),
                value: s.to_string(),
            })
        };
        let int = |c: usize| -> Result<u32, TrackError> {
            let s = field(c);
            s.parse::<u32>().map_err(|_| TrackError::MalformedNumber {
                row,
                column: COLUMNS[c].to_string(),
                value: s.to_string(),
            })
        };
        let rec = TrackRecord {
            frame: int(0)?,
            id: int(1)?,
            x: real(2)?,
            y: real(3)?,
            width: real(4)?,
            height: real(5)?,
            x_velocity: real(6)?,
            y_velocity: real(7)?,
            x_acceleration: real(8)?,
            y_acceleration: real(9)?,
            lane_id: int(10)?,
        };
        if rec.lane_id == 0 {
            return Err(TrackError::InvalidLane { row });
        }
        let track = tracks.entry(rec.id).or_default();
        if track.last().is_some_and(|prev| prev.frame >= rec.frame) {
            return Err(TrackError::NonMonotoneFrames { row, id: rec.id });
        }
        track.push(rec);
    }
    Ok(tracks)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "frame,id,x,y,width,height,xVelocity,yVelocity,xAcceleration,yAcceleration,laneId\n";

    #[test]
    fn parses_one_vehicle() {
        let mut csv = HEADER.to_string();
        for f in 1..=10 {
            csv.push_str(&format!("{f},7,{}.0,10.0,4.5,1.8,25.0,0.0,0.0,0.0,2\n", f));
        }
        let tracks = load_tracks(csv.as_bytes()).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[&7].len(), 10);
        assert_eq!(tracks[&7][0].center(), (3.25, 10.9));
    }

    #[test]
    fn missing_column() {
        let csv = "frame,id,x,y,width,height,xVelocity,yVelocity,xAcceleration,yAcceleration\n1,1,0,0,4,2,1,0,0,0\n";
        assert!(matches!(load_tracks(csv.as_bytes()), Err(TrackError::MissingColumn(c)) if c == "laneId"));
    }

    #[test]
    fn shuffled_frames() {
        let csv = format!("{HEADER}2,1,0,0,4,2,1,0,0,0,1\n1,1,0,0,4,2,1,0,0,0,1\n");
        assert!(matches!(load_tracks(csv.as_bytes()), Err(TrackError::NonMonotoneFrames { row: 2, id: 1 })));
    }

    #[test]
    fn malformed_number_names_row_and_column() {
        let csv = format!("{HEADER}1,1,0,0,4,2,1,0,0,0,1\n2,1,abc,0,4,2,1,0,0,0,1\n");
        match load_tracks(csv.as_bytes()) {
            Err(TrackError::MalformedNumber { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "x", "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
