use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Spring,
    Summer,
    Fall,
    Winter,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Spring, Season::Summer, Season::Fall, Season::Winter];

    pub fn name(self) -> &'static str {
        match self {
            Season::Spring => "spring",
            Season::Summer => "summer",
            Season::Fall => "fall",
            Season::Winter => "winter",
        }
    }
}

impl std::fmt::Display for Season {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Season {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Season::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown season {s:?}")))
    }
}

/// Month (1-12) to season map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonCalendar(pub [Season; 12]);

impl Default for SeasonCalendar {
    fn default() -> Self {
        use Season::*;
        SeasonCalendar([
            Winter, Winter, Spring, Spring, Spring, Summer, Summer, Summer, Fall, Fall, Fall,
            Winter,
        ])
    }
}

impl SeasonCalendar {
    pub fn season_of(&self, month: u32) -> Season {
        self.0[(month - 1) as usize]
    }
}

/// Average daily curve of one season, system-total MW per hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonProfile {
    pub season: Season,
    pub hourly_mw: Vec<f64>,
    pub source_years: Vec<i32>,
}

#[derive(Debug, Deserialize)]
struct HourlyRow {
    date: String,
    hour: i64,
    load_mw: f64,
}

fn parse_date(s: &str) -> Option<(i32, u32, u32)> {
    let mut parts = s.trim().splitn(3, '-');
    let y = parts.next()?.parse().ok()?;
    let m: u32 = parts.next()?.parse().ok()?;
    let d: u32 = parts.next()?.get(..2)?.parse().ok()?;
    ((1..=12).contains(&m) && (1..=31).contains(&d)).then_some((y, m, d))
}

/// Averages an hourly load archive into one 24-hour curve per season.
///
/// `hourly_mw[h]` is the mean of every row of the season with that hour,
/// pooled across all years. Each season needs at least one full day.
pub fn ingest_hourly_load(
    path: impl AsRef<Path>,
    calendar: &SeasonCalendar,
) -> Result<Vec<SeasonProfile>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_hourly_load(file, &path.display().to_string(), calendar)
}

pub fn read_hourly_load(
    reader: impl std::io::Read,
    location: &str,
    calendar: &SeasonCalendar,
) -> Result<Vec<SeasonProfile>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::parse(location, e))?.clone();
    for col in ["date", "hour", "load_mw"] {
        if !headers.iter().any(|h| h.trim() == col) {
            return Err(Error::parse(location, format!("missing column {col:?}")));
        }
    }
    let mut sum = [[0.0f64; 24]; 4];
    let mut count = [[0usize; 24]; 4];
    let mut days: [BTreeSet<(i32, u32, u32)>; 4] = Default::default();
    let mut day_hours: std::collections::HashMap<(i32, u32, u32), u32> = Default::default();
    let mut years: [BTreeSet<i32>; 4] = Default::default();
    for (k, rec) in rdr.deserialize::<HourlyRow>().enumerate() {
        let line = k + 2;
        let row = rec.map_err(|e| Error::parse(format!("{location}:{line}"), e))?;
        let date = parse_date(&row.date).ok_or_else(|| {
            Error::parse(format!("{location}:{line}"), format!("bad date {:?}", row.date))
        })?;
        if !(0..24).contains(&row.hour) {
            return Err(Error::parse(
                format!("{location}:{line}"),
                format!("hour {} outside 0-23", row.hour),
            ));
        }
        let s = calendar.season_of(date.1) as usize;
        let h = row.hour as usize;
        sum[s][h] += row.load_mw;
        count[s][h] += 1;
        years[s].insert(date.0);
        days[s].insert(date);
        *day_hours.entry(date).or_default() |= 1 << h;
    }
    Season::ALL
        .into_iter()
        .map(|season| {
            let s = season as usize;
            let full_day = days[s].iter().any(|d| day_hours[d] == (1 << 24) - 1);
            if !full_day {
                return Err(Error::InvalidInput(format!(
                    "season {season} has no complete day of hourly load data"
                )));
            }
            Ok(SeasonProfile {
                season,
                hourly_mw: (0..24).map(|h| sum[s][h] / count[s][h] as f64).collect(),
                source_years: years[s].iter().copied().collect(),
            })
        })
        .collect()
}
