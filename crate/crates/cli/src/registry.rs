//! Built-in scenario registry.
//!
//! Each entry couples a generated scenario configuration with the fairness
//! mode it is normally studied under; `--mode` can still override.  Entries
//! are registered by name and the listing order is stable.

use cellrate::layouts::{self, SevenCellCooperation, TwoCellCooperation};
use cellrate::scenario::ScenarioConfig;

pub struct BuiltinScenario {
    pub name: &'static str,
    pub description: &'static str,
    pub default_mode: &'static str,
    build: fn() -> ScenarioConfig,
}

impl BuiltinScenario {
    pub fn config(&self) -> ScenarioConfig {
        (self.build)()
    }
}

pub struct ScenarioRegistry {
    entries: Vec<BuiltinScenario>,
}

impl ScenarioRegistry {
    pub fn standard() -> Self {
        let entries = vec![
            BuiltinScenario {
                name: "2cell-fullcoop-pfs",
                description: "linear 2-cell, both BSs cooperating, proportional fairness",
                default_mode: "pfs",
                build: || layouts::two_cell(TwoCellCooperation::Full),
            },
            BuiltinScenario {
                name: "2cell-fullcoop-hfs",
                description: "linear 2-cell, both BSs cooperating, max-min fairness",
                default_mode: "hfs",
                build: || layouts::two_cell(TwoCellCooperation::Full),
            },
            BuiltinScenario {
                name: "2cell-nocoop-pfs",
                description: "linear 2-cell, no cooperation, proportional fairness",
                default_mode: "pfs",
                build: || layouts::two_cell(TwoCellCooperation::None),
            },
            BuiltinScenario {
                name: "2cell-nocoop-hfs",
                description: "linear 2-cell, no cooperation, max-min fairness",
                default_mode: "hfs",
                build: || layouts::two_cell(TwoCellCooperation::None),
            },
            BuiltinScenario {
                name: "7cell-nocoop-pfs",
                description: "7-cell torus, each sector BS on its own (21 clusters)",
                default_mode: "pfs",
                build: || layouts::seven_cell(SevenCellCooperation::None).config,
            },
            BuiltinScenario {
                name: "7cell-sectorcoop-pfs",
                description: "7-cell torus, co-located sectors cooperate (7 clusters)",
                default_mode: "pfs",
                build: || layouts::seven_cell(SevenCellCooperation::Sector).config,
            },
            BuiltinScenario {
                name: "7cell-fullcoop-pfs",
                description: "7-cell torus, all 21 BSs cooperate (1 cluster)",
                default_mode: "pfs",
                build: || layouts::seven_cell(SevenCellCooperation::Full).config,
            },
        ];
        ScenarioRegistry { entries }
    }

    pub fn get(&self, name: &str) -> Option<&BuiltinScenario> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn entries(&self) -> &[BuiltinScenario] {
        &self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cellrate::scenario::Scenario;

    #[test]
    fn names_are_unique_and_complete() {
        let reg = ScenarioRegistry::standard();
        let mut names: Vec<&str> = reg.entries().iter().map(|e| e.name).collect();
        assert!(names.contains(&"7cell-sectorcoop-pfs"));
        assert_eq!(names.len(), 7);
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 7, "duplicate registry names");
    }

    #[test]
    fn configs_round_trip_through_json() {
        let reg = ScenarioRegistry::standard();
        for entry in reg.entries() {
            let config = entry.config();
            let json = serde_json::to_string_pretty(&config).unwrap();
            let back: cellrate::scenario::ScenarioConfig = serde_json::from_str(&json).unwrap();
            assert_eq!(config, back, "{} does not round-trip", entry.name);
            Scenario::new(back).unwrap();
        }
    }
}
