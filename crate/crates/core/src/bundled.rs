//! Scenario files shipped with the crate.

use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;

pub const PAPER_VA: &str = include_str!("../scenarios/paper_va.json");
pub const PAPER_VB: &str = include_str!("../scenarios/paper_vb.json");
pub const TWO_USER_LINE: &str = include_str!("../scenarios/two_user_line.json");

/// `(file name, contents)` of every bundled scenario.
pub const ALL: [(&str, &str); 3] =
    [("paper_va.json", PAPER_VA), ("paper_vb.json", PAPER_VB), ("two_user_line.json", TWO_USER_LINE)];

/// Parses a bundled scenario by file name (with or without `.json`).
pub fn load(name: &str) -> Result<ScenarioConfig> {
    let key = if name.ends_with(".json") { name.to_string() } else { format!("{name}.json") };
    let (_, text) =
        ALL.iter().find(|(n, _)| *n == key).ok_or_else(|| Error::Validation(format!("no bundled scenario '{name}'")))?;
    ScenarioConfig::from_json(text)
}
