//! The friendliness model: per-gait calibration from Likert ratings,
//! nearest-match gait selection, and the threshold rules that gate hand
//! gestures, head gestures and eye contact.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Friendliness level in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Friendliness(f64);

#[derive(Debug, Error, PartialEq)]
#[error("friendliness must lie in [0, 1], got {0}")]
pub struct OutOfRange(pub f64);

impl Friendliness {
    pub fn new(f: f64) -> Result<Self, OutOfRange> {
        if (0.0..=1.0).contains(&f) {
            Ok(Friendliness(f))
        } else {
            Err(OutOfRange(f))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Friendliness {
    type Error = OutOfRange;

    fn try_from(f: f64) -> Result<Self, Self::Error> {
        Friendliness::new(f)
    }
}

impl From<Friendliness> for f64 {
    fn from(f: Friendliness) -> f64 {
        f.0
    }
}

/// The seven items of the friendliness questionnaire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Item {
    Pleasant,
    Sensitive,
    Friendly,
    Helpful,
    Likable,
    Approachable,
    Sociable,
}

impl Item {
    pub const ALL: [Item; 7] = [
        Item::Pleasant,
        Item::Sensitive,
        Item::Friendly,
        Item::Helpful,
        Item::Likable,
        Item::Approachable,
        Item::Sociable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Item::Pleasant => "pleasant",
            Item::Sensitive => "sensitive",
            Item::Friendly => "friendly",
            Item::Helpful => "helpful",
            Item::Likable => "likable",
            Item::Approachable => "approachable",
            Item::Sociable => "sociable",
        }
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Item {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Item::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| format!("unknown questionnaire item `{s}`"))
    }
}

/// Maps a 1..=7 Likert mean onto [0, 1].
pub fn normalize_likert(x: f64) -> f64 {
    (x - 1.0) / 6.0
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub gait_id: String,
    pub participant_id: String,
    pub item: Item,
    pub score: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaitEntry {
    pub gait_id: String,
    pub f: f64,
}

/// Calibrated lookup table from gait clip ids to friendliness.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GaitMap {
    pub entries: Vec<GaitEntry>,
}

#[derive(Debug, Error, PartialEq)]
pub enum FriendlinessError {
    #[error("no rating records")]
    EmptyRatings,
    #[error("gait {gait_id} has no ratings for: {}", missing.iter().map(|i| i.name()).collect::<Vec<_>>().join(", "))]
    MissingItems { gait_id: String, missing: Vec<Item> },
    #[error("score {score} for gait {gait_id} is outside 1..=7")]
    ScoreOutOfRange { gait_id: String, score: u8 },
    #[error("gait map is empty")]
    EmptyMap,
    #[error("gait map entry {gait_id} has friendliness {f} outside [0, 1]")]
    EntryOutOfRange { gait_id: String, f: f64 },
    #[error("gait map lists {0} more than once")]
    DuplicateGait(String),
    #[error("ratings csv: {0}")]
    Csv(String),
}

impl GaitMap {
    pub fn new(entries: Vec<GaitEntry>) -> Result<Self, FriendlinessError> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &entries {
            if !(0.0..=1.0).contains(&e.f) {
                return Err(FriendlinessError::EntryOutOfRange {
                    gait_id: e.gait_id.clone(),
                    f: e.f,
                });
            }
            if !seen.insert(e.gait_id.as_str()) {
                return Err(FriendlinessError::DuplicateGait(e.gait_id.clone()));
            }
        }
        Ok(GaitMap { entries })
    }

    /// Gaits from the web validation study plus the default-condition gait.
    pub fn bundled() -> Self {
        GaitMap::new(vec![
            GaitEntry { gait_id: "Gait1".into(), f: 0.39 },
            GaitEntry { gait_id: "Gait2".into(), f: 0.48 },
            GaitEntry { gait_id: "Gait3".into(), f: 0.80 },
            GaitEntry { gait_id: "default".into(), f: 0.52 },
        ])
        .expect("bundled gait map is valid")
    }

    pub fn get(&self, gait_id: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.gait_id == gait_id).map(|e| e.f)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads `gait_id,participant_id,item,score` rows.
pub fn read_ratings_csv<R: Read>(reader: R) -> Result<Vec<RatingRecord>, FriendlinessError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(|e| FriendlinessError::Csv(e.to_string())))
        .collect()
}

/// Averages ratings per (gait, item) over participants, then over the seven
/// items, and normalizes the result to [0, 1]. Output is ordered by gait id.
pub fn aggregate_ratings(records: &[RatingRecord]) -> Result<GaitMap, FriendlinessError> {
    if records.is_empty() {
        return Err(FriendlinessError::EmptyRatings);
    }
    // Integer sums keep the result independent of record order.
    let mut sums: BTreeMap<&str, BTreeMap<Item, (u64, u64)>> = BTreeMap::new();
    for r in records {
        if !(1..=7).contains(&r.score) {
            return Err(FriendlinessError::ScoreOutOfRange {
                gait_id: r.gait_id.clone(),
                score: r.score,
            });
        }
        let cell = sums
            .entry(&r.gait_id)
            .or_default()
            .entry(r.item)
            .or_insert((0, 0));
        cell.0 += u64::from(r.score);
        cell.1 += 1;
    }
    let mut entries = Vec::with_capacity(sums.len());
    for (gait_id, items) in sums {
        let missing: Vec<Item> = Item::ALL
            .into_iter()
            .filter(|i| !items.contains_key(i))
            .collect();
        if !missing.is_empty() {
            return Err(FriendlinessError::MissingItems {
                gait_id: gait_id.to_string(),
                missing,
            });
        }
        let item_means = Item::ALL.map(|i| {
            let (sum, n) = items[&i];
            sum as f64 / n as f64
        });
        let raw = item_means.iter().sum::<f64>() / Item::ALL.len() as f64;
        entries.push(GaitEntry {
            gait_id: gait_id.to_string(),
            f: normalize_likert(raw).clamp(0.0, 1.0),
        });
    }
    GaitMap::new(entries)
}

/// Distances closer than this are treated as ties.
const TIE_EPSILON: f64 = 1e-12;

/// The gait whose calibrated friendliness is nearest to `desired`; ties go to
/// the lexicographically smallest id.
pub fn select_gait(map: &GaitMap, desired: Friendliness) -> Result<&str, FriendlinessError> {
    let target = desired.value();
    let mut best: Option<(&GaitEntry, f64)> = None;
    for e in &map.entries {
        let d = (e.f - target).abs();
        best = match best {
            None => Some((e, d)),
            Some((b, bd)) => {
                if d < bd - TIE_EPSILON || ((d - bd).abs() <= TIE_EPSILON && e.gait_id < b.gait_id) {
                    Some((e, d))
                } else {
                    Some((b, bd))
                }
            }
        };
    }
    best.map(|(e, _)| e.gait_id.as_str())
        .ok_or(FriendlinessError::EmptyMap)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandGesture {
    Absent,
    Closed,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadGesture {
    Absent,
    Present,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestureMode {
    pub hand: HandGesture,
    pub head: HeadGesture,
}

impl GestureMode {
    pub fn for_friendliness(f: Friendliness) -> Self {
        GestureMode {
            hand: hand_gesture_mode(f),
            head: head_gesture_mode(f),
        }
    }
}

/// Absent up to and including 0.33, closed below 0.67, open from 0.67.
pub fn hand_gesture_mode(f: Friendliness) -> HandGesture {
    let f = f.value();
    if f <= 0.33 {
        HandGesture::Absent
    } else if f < 0.67 {
        HandGesture::Closed
    } else {
        HandGesture::Open
    }
}

pub fn head_gesture_mode(f: Friendliness) -> HeadGesture {
    if f.value() < 0.5 {
        HeadGesture::Absent
    } else {
        HeadGesture::Present
    }
}

/// Whether the friendliness level calls for eye contact.
pub fn gaze_flag(f: Friendliness) -> bool {
    f.value() >= 0.5
}
