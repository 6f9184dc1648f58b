//! Seasonal load profiles, operating conditions, contingency sets and solar
//! replacement.

mod conditions;
mod contingency;
mod load_profile;
mod solar;

pub use conditions::{generate_operating_conditions, ConditionOptions, ConditionSet, OperatingCondition};
pub use contingency::{
    generate_contingencies, non_islanding_lines, Contingency, ContingencyOptions, MAX_ORDER,
};
pub use load_profile::{ingest_hourly_load, read_hourly_load, Season, SeasonCalendar, SeasonProfile};
pub use solar::{apply_solar, solar_penetration, SolarConfig, PENETRATION_TOLERANCE};
