use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::TelemetryError;

/// Functional working group a channel belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fwg {
    Engine,
    Transmission,
    Fuel,
    Brake,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub unit: String,
    pub fwg: Fwg,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSchema {
    pub channels: Vec<Channel>,
    pub time_column: String,
}

const DEFAULT_CHANNELS: [(&str, &str, Fwg); 15] = [
    ("EngCoolantTemp", "degF", Fwg::Engine),
    ("PctEngLoad", "%", Fwg::Engine),
    ("EngPctTorq", "%", Fwg::Engine),
    ("BoostPres", "psi", Fwg::Engine),
    ("AccelPedalPos", "%", Fwg::Engine),
    ("IntManfTemp", "degF", Fwg::Engine),
    ("VehSpeedEng", "mph", Fwg::Transmission),
    ("TransOilTemp", "degF", Fwg::Transmission),
    ("TrSelGr", "gear", Fwg::Transmission),
    ("TransTorqConvLockupEngaged", "flag", Fwg::Transmission),
    ("TrOutShaftSp", "rpm", Fwg::Transmission),
    ("FuelRate", "gph", Fwg::Fuel),
    ("InstFuelEco", "mpg", Fwg::Fuel),
    ("InjCtlPres", "psi", Fwg::Fuel),
    ("BrakeSwitch", "flag", Fwg::Brake),
];

impl Default for ChannelSchema {
    /// The fifteen engine, transmission, fuel and brake channels sampled at 1 Hz.
    fn default() -> Self {
        Self {
            channels: DEFAULT_CHANNELS
                .iter()
                .map(|&(name, unit, fwg)| Channel { name: name.into(), unit: unit.into(), fwg })
                .collect(),
            time_column: "UTC_1HZ".into(),
        }
    }
}

impl ChannelSchema {
    pub fn new(channels: Vec<Channel>, time_column: impl Into<String>) -> Result<Self, TelemetryError> {
        let schema = Self { channels, time_column: time_column.into() };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), TelemetryError> {
        if self.channels.is_empty() {
            return Err(TelemetryError::InvalidSchema("no channels".into()));
        }
        if self.time_column.is_empty() {
            return Err(TelemetryError::InvalidSchema("empty time column name".into()));
        }
        let mut seen = HashSet::new();
        for c in &self.channels {
            if c.name.is_empty() {
                return Err(TelemetryError::InvalidSchema("empty channel name".into()));
            }
            if c.name == self.time_column || !seen.insert(c.name.as_str()) {
                return Err(TelemetryError::InvalidSchema(format!("duplicate column {:?}", c.name)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_has_fifteen_channels() {
        let s = ChannelSchema::default();
        assert_eq!(s.len(), 15);
        assert_eq!(s.time_column, "UTC_1HZ");
        assert!(s.validate().is_ok());
        assert_eq!(s.index_of("FuelRate"), Some(11));
        assert_eq!(s.channels.iter().filter(|c| c.fwg == Fwg::Brake).count(), 1);
    }

    #[test]
    fn rejects_duplicates_and_empty_names() {
        let c = |n: &str| Channel { name: n.into(), unit: "".into(), fwg: Fwg::Fuel };
        assert!(ChannelSchema::new(vec![c("a"), c("a")], "t").is_err());
        assert!(ChannelSchema::new(vec![c("")], "t").is_err());
        assert!(ChannelSchema::new(vec![c("t")], "t").is_err());
        assert!(ChannelSchema::new(vec![c("a"), c("b")], "t").is_ok());
    }
}
