//! Prompt rendering and response parsing.
//!
//! The system message is one of two fixed templates; the user message is a
//! pure function of the scenario. Kinematic values are printed with two
//! decimals, distances with the fewest digits needed (at most two decimals).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{DrivingScenario, EgoLane, Intention, Point, PredictionResult, HORIZON_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    #[default]
    Plain,
    Cot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPair {
    pub system: String,
    pub user: String,
}

const SYSTEM_PLAIN: &str = "Role: You are an expert driving prediction model of an autonomous driving system, \
that can predict the future driving intention and future 4-second driving trajectory for a given ego vehicle, \
avoiding collision with other vehicles and obstacles on the road. Context:

- Coordinates:
Y-axis is perpendicular, and X-axis is parallel to the direction ego vehicle is facing. \
Ego vehicle’s current position is (0,0). Positive values on the y-axis represent the left side of the ego vehicle, \
and negative values on the y-axis represent the right side of the vehicle.
- Output:
 - Final Answer:
Intention: 0 (Keep lane), 1 (Left lane change), 2 (Right lane change). The final answer should be one of the three modes.
";

const SYSTEM_COT_CLAUSE: &str = " - Thought:
Before the final answer, give the reasoning that leads to it: list the notable features, one per line, \
each starting with \"Notable features:\", then describe the potential behavior of the ego vehicle \
on a line starting with \"Potential behavior:\".
";

pub fn render_system(mode: PromptMode) -> String {
    match mode {
        PromptMode::Plain => SYSTEM_PLAIN.to_string(),
        PromptMode::Cot => format!("{SYSTEM_PLAIN}{SYSTEM_COT_CLAUSE}"),
    }
}

pub fn render(scenario: &DrivingScenario, mode: PromptMode) -> PromptPair {
    PromptPair { system: render_system(mode), user: render_user(scenario) }
}

/// Two-decimal rendering without a signed zero.
pub fn fmt2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

/// At most two decimals, trailing zeros dropped: `103`, `92.7`, `92.73`.
pub fn fmt_distance(v: f64) -> String {
    let s = fmt2(v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn count_word(n: u32) -> String {
    const WORDS: [&str; 11] = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];
    WORDS.get(n as usize).map_or_else(|| n.to_string(), |w| (*w).to_string())
}

fn ordinal_word(n: u32) -> String {
    const WORDS: [&str; 11] =
        ["zeroth", "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth"];
    WORDS.get(n as usize).map_or_else(|| format!("{n}th"), |w| (*w).to_string())
}

pub fn render_user(scenario: &DrivingScenario) -> String {
    let ego = &scenario.ego;
    let lane = match scenario.map.ego_lane {
        EgoLane::Leftmost => "the leftmost lane".to_string(),
        EgoLane::Rightmost => "the rightmost lane".to_string(),
        EgoLane::Middle(i) => format!("the {} lane from the left", ordinal_word(i)),
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "The ego vehicle is driving on a {}-lane highway, located at {lane}.",
        count_word(scenario.map.lane_count)
    );
    out.push('\n');
    out.push_str("- The information of ego vehicle is as follow:\n");
    let _ = writeln!(out, " - Velocity(km/h): v_x={}, v_y={};", fmt2(ego.vx), fmt2(ego.vy));
    let _ = writeln!(out, " - Acceleration(m/s^2): a_x={}, a_y={};", fmt2(ego.ax), fmt2(ego.ay));
    let _ = writeln!(
        out,
        " - Type: {}, with width of {} m and length of {} m;",
        ego.kind,
        fmt2(ego.width),
        fmt2(ego.length)
    );
    let last = ego.history.len().saturating_sub(1);
    let points: Vec<String> = ego
        .history
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            if i == last && x == 0.0 && y == 0.0 {
                "(0.0,0.0)".to_string()
            } else {
                format!("({},{})", fmt2(x), fmt2(y))
            }
        })
        .collect();
    let _ =
        writeln!(out, " - Historical position of the last 2 seconds (One point every 0.4s): [{}].", points.join(", "));
    out.push_str("- The information of its surrounding vehicles (with a range of 200m) are listed as follow:\n");
    let n = scenario.neighbors.len();
    for (i, (dir, nb)) in scenario.neighbors.iter().enumerate() {
        let end = if i + 1 == n { '.' } else { ';' };
        let _ = writeln!(
            out,
            " - {}: a {} traveling at {} km/h of X-axis, with a distance of {} m{end}",
            dir.prompt_label(),
            nb.kind,
            fmt2(nb.speed_x),
            fmt_distance(nb.distance)
        );
    }
    out
}

/// Why a response could not be turned into a [`PredictionResult`].
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail")]
pub enum ParseError {
    #[error("response has no \"Intention:\" line")]
    MissingIntention,
    #[error("invalid intention code: {0:?}")]
    InvalidIntentionCode(String),
    #[error("expected 4 waypoints, found {0}")]
    WaypointCountMismatch(usize),
    #[error("malformed number in trajectory: {0:?}")]
    MalformedNumber(String),
    #[error("chain-of-thought response has no \"Notable features\"/\"Potential behavior\" lines")]
    MissingThought,
}

impl ParseError {
    /// Stable category name used in logs and reports.
    pub fn category(&self) -> &'static str {
        match self {
            ParseError::MissingIntention => "MissingIntention",
            ParseError::InvalidIntentionCode(_) => "InvalidIntentionCode",
            ParseError::WaypointCountMismatch(_) => "WaypointCountMismatch",
            ParseError::MalformedNumber(_) => "MalformedNumber",
            ParseError::MissingThought => "MissingThought",
        }
    }
}

fn strip_bullet(line: &str) -> &str {
    line.trim().trim_start_matches(['-', '*']).trim()
}

fn parse_intention(text: &str) -> Result<Intention, ParseError> {
    let line = text.lines().find(|l| l.contains("Intention:")).ok_or(ParseError::MissingIntention)?;
    let rest = line[line.find("Intention:").unwrap() + "Intention:".len()..].trim_start();
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    let snippet = || rest.chars().take(16).collect::<String>();
    if digits.is_empty() {
        return Err(ParseError::InvalidIntentionCode(snippet()));
    }
    digits.parse::<u8>().ok().and_then(Intention::from_code).ok_or(ParseError::InvalidIntentionCode(digits))
}

fn parse_number(s: &str) -> Result<f64, ParseError> {
    let t = s.trim();
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ParseError::MalformedNumber(t.to_string())),
    }
}

fn parse_trajectory(text: &str) -> Result<[Point; HORIZON_LEN], ParseError> {
    let Some(start) = text.find("Trajectory:") else {
        return Err(ParseError::WaypointCountMismatch(0));
    };
    let rest = &text[start + "Trajectory:".len()..];
    let body = match rest.find('[') {
        Some(open) => {
            let after = &rest[open + 1..];
            &after[..after.find(']').unwrap_or(after.len())]
        }
        None => rest.lines().next().unwrap_or(""),
    };

    let mut points = Vec::new();
    let mut cursor = body;
    while let Some(open) = cursor.find('(') {
        let inner = &cursor[open + 1..];
        let close = inner.find(')').ok_or_else(|| ParseError::MalformedNumber(inner.trim().to_string()))?;
        let tuple = &inner[..close];
        let parts: Vec<&str> = tuple.split(',').collect();
        if parts.len() != 2 {
            return Err(ParseError::MalformedNumber(tuple.trim().to_string()));
        }
        points.push((parse_number(parts[0])?, parse_number(parts[1])?));
        cursor = &inner[close + 1..];
    }
    points.try_into().map_err(|p: Vec<Point>| ParseError::WaypointCountMismatch(p.len()))
}

fn parse_thought(text: &str) -> Result<Vec<String>, ParseError> {
    let lines: Vec<String> = text
        .lines()
        .map(strip_bullet)
        .filter(|l| l.starts_with("Notable feature") || l.starts_with("Potential behavior"))
        .map(str::to_string)
        .collect();
    let has_feature = lines.iter().any(|l| l.starts_with("Notable feature"));
    let has_behavior = lines.iter().any(|l| l.starts_with("Potential behavior"));
    if has_feature && has_behavior {
        Ok(lines)
    } else {
        Err(ParseError::MissingThought)
    }
}

/// Parses a predictor response. Surrounding prose is ignored; the intention
/// and trajectory payloads must be well formed. In CoT mode the thought lines
/// may appear before or after the final answer.
pub fn parse_response(text: &str, mode: PromptMode) -> Result<PredictionResult, ParseError> {
    let intention = parse_intention(text)?;
    let trajectory = parse_trajectory(text)?;
    let thought = match mode {
        PromptMode::Plain => None,
        PromptMode::Cot => Some(parse_thought(text)?),
    };
    Ok(PredictionResult { intention, trajectory, thought })
}

/// Renders a prediction in the response grammar; inverse of [`parse_response`]
/// for two-decimal waypoints.
pub fn format_response(prediction: &PredictionResult, mode: PromptMode) -> String {
    let mut out = String::new();
    if mode == PromptMode::Cot {
        out.push_str("- Thought:\n");
        for line in prediction.thought.iter().flatten() {
            out.push_str(line);
            out.push('\n');
        }
        out.push('\n');
    }
    out.push_str("Final Answer:\n");
    let _ = writeln!(out, "Intention: {}: {};", prediction.intention.code(), prediction.intention.label());
    let pts: Vec<String> = prediction.trajectory.iter().map(|&(x, y)| format!("({},{})", fmt2(x), fmt2(y))).collect();
    let _ = writeln!(out, "Trajectory: [{}].", pts.join(", "));
    out
}
