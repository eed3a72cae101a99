//! Device power/capacity profiles for processing nodes, access points and
//! networking equipment.
//!
//! Every profile follows the linear power model `P = idle + unit_power * load`
//! with `unit_power = (max_power - idle_power) / capacity`. The catalog ships
//! embedded defaults and can be overridden from a JSON document.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("invalid profile for {class}: {reason}")]
    InvalidProfile { class: String, reason: String },
    #[error("unknown device class `{0}`")]
    UnknownClass(String),
    #[error("malformed catalog document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("override for {0} is missing fields and has no default to fall back on")]
    Incomplete(String),
    #[error("i/o error reading catalog: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wavelength {
    Red,
    Yellow,
    Green,
    Blue,
}

impl Wavelength {
    pub fn is_green_blue(self) -> bool {
        matches!(self, Wavelength::Green | Wavelength::Blue)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceKind {
    Processing,
    Networking,
    AccessPoint,
}

/// Device classes known to the catalog. `Olt` is accepted as an override but
/// has no embedded default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeviceClass {
    Ccs,
    Mfs,
    Cfs,
    Bfs,
    Rfs,
    Ud,
    ApRed,
    ApYellow,
    ApGreen,
    ApBlue,
    Onu,
    EthernetSwitch,
    AggregationSwitch,
    EdgeRouter,
    OpticalSwitch,
    CoreRouter,
    Olt,
}

impl DeviceClass {
    pub const DEFAULTS: [DeviceClass; 16] = [
        DeviceClass::Ccs,
        DeviceClass::Mfs,
        DeviceClass::Cfs,
        DeviceClass::Bfs,
        DeviceClass::Rfs,
        DeviceClass::Ud,
        DeviceClass::ApRed,
        DeviceClass::ApYellow,
        DeviceClass::ApGreen,
        DeviceClass::ApBlue,
        DeviceClass::Onu,
        DeviceClass::EthernetSwitch,
        DeviceClass::AggregationSwitch,
        DeviceClass::EdgeRouter,
        DeviceClass::OpticalSwitch,
        DeviceClass::CoreRouter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceClass::Ccs => "CCS",
            DeviceClass::Mfs => "MFS",
            DeviceClass::Cfs => "CFS",
            DeviceClass::Bfs => "BFS",
            DeviceClass::Rfs => "RFS",
            DeviceClass::Ud => "UD",
            DeviceClass::ApRed => "AP-red",
            DeviceClass::ApYellow => "AP-yellow",
            DeviceClass::ApGreen => "AP-green",
            DeviceClass::ApBlue => "AP-blue",
            DeviceClass::Onu => "ONU",
            DeviceClass::EthernetSwitch => "ethernet-switch",
            DeviceClass::AggregationSwitch => "aggregation-switch",
            DeviceClass::EdgeRouter => "edge-router",
            DeviceClass::OpticalSwitch => "optical-switch",
            DeviceClass::CoreRouter => "core-router",
            DeviceClass::Olt => "OLT",
        }
    }

    pub fn kind(self) -> DeviceKind {
        match self {
            DeviceClass::Ccs
            | DeviceClass::Mfs
            | DeviceClass::Cfs
            | DeviceClass::Bfs
            | DeviceClass::Rfs
            | DeviceClass::Ud => DeviceKind::Processing,
            DeviceClass::ApRed | DeviceClass::ApYellow | DeviceClass::ApGreen | DeviceClass::ApBlue => {
                DeviceKind::AccessPoint
            }
            _ => DeviceKind::Networking,
        }
    }

    pub fn wavelength(self) -> Option<Wavelength> {
        match self {
            DeviceClass::ApRed => Some(Wavelength::Red),
            DeviceClass::ApYellow => Some(Wavelength::Yellow),
            DeviceClass::ApGreen => Some(Wavelength::Green),
            DeviceClass::ApBlue => Some(Wavelength::Blue),
            _ => None,
        }
    }

    pub fn access_point(wavelength: Wavelength) -> DeviceClass {
        match wavelength {
            Wavelength::Red => DeviceClass::ApRed,
            Wavelength::Yellow => DeviceClass::ApYellow,
            Wavelength::Green => DeviceClass::ApGreen,
            Wavelength::Blue => DeviceClass::ApBlue,
        }
    }
}

impl fmt::Display for DeviceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeviceClass {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DeviceClass::DEFAULTS
            .iter()
            .chain(std::iter::once(&DeviceClass::Olt))
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CatalogError::UnknownClass(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacityUnit {
    Gflops,
    Gbps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub class: DeviceClass,
    pub max_power: f64,
    pub idle_power: f64,
    /// GFLOPs for processing nodes, Gbit/s for everything else.
    pub capacity: f64,
    /// Efficiency value as printed in the published parameter tables, kept
    /// for auditing only; never used in computations.
    pub listed_efficiency: Option<f64>,
}

impl DeviceProfile {
    pub fn new(class: DeviceClass, max_power: f64, idle_power: f64, capacity: f64) -> Self {
        DeviceProfile { class, max_power, idle_power, capacity, listed_efficiency: None }
    }

    pub fn kind(&self) -> DeviceKind {
        self.class.kind()
    }

    pub fn wavelength(&self) -> Option<Wavelength> {
        self.class.wavelength()
    }

    pub fn capacity_unit(&self) -> CapacityUnit {
        match self.kind() {
            DeviceKind::Processing => CapacityUnit::Gflops,
            _ => CapacityUnit::Gbps,
        }
    }

    pub fn unit_power(&self) -> Result<f64, CatalogError> {
        unit_power(self)
    }

    /// Checks `max_power > idle_power >= 0` and `capacity > 0`.
    pub fn validate(&self) -> Result<(), CatalogError> {
        let invalid = |reason: String| CatalogError::InvalidProfile { class: self.class.to_string(), reason };
        if !(self.capacity.is_finite() && self.capacity > 0.0) {
            return Err(invalid(format!("capacity must be positive, got {}", self.capacity)));
        }
        if !(self.idle_power.is_finite() && self.idle_power >= 0.0) {
            return Err(invalid(format!("idle power must be non-negative, got {}", self.idle_power)));
        }
        if !(self.max_power.is_finite() && self.max_power > self.idle_power) {
            return Err(invalid(format!(
                "max power {} must exceed idle power {}",
                self.max_power, self.idle_power
            )));
        }
        Ok(())
    }
}

/// Power drawn per unit of load: `(max_power - idle_power) / capacity`.
pub fn unit_power(profile: &DeviceProfile) -> Result<f64, CatalogError> {
    if !(profile.capacity > 0.0) {
        return Err(CatalogError::InvalidProfile {
            class: profile.class.to_string(),
            reason: format!("capacity must be positive, got {}", profile.capacity),
        });
    }
    Ok((profile.max_power - profile.idle_power) / profile.capacity)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    profiles: BTreeMap<DeviceClass, DeviceProfile>,
}

// (class, max W, idle W, capacity, listed efficiency)
const DEFAULT_TABLE: [(DeviceClass, f64, f64, f64, f64); 16] = [
    (DeviceClass::Ccs, 1100.0, 660.0, 1612.8, 0.27),
    (DeviceClass::Mfs, 750.0, 450.0, 403.2, 0.74),
    (DeviceClass::Cfs, 350.0, 210.0, 121.6, 1.15),
    (DeviceClass::Bfs, 305.0, 183.0, 99.0, 1.23),
    (DeviceClass::Rfs, 65.0, 39.0, 64.0, 0.41),
    (DeviceClass::Ud, 18.0, 10.8, 12.288, 0.55),
    (DeviceClass::ApRed, 7.2, 4.32, 2.5, 1.52),
    (DeviceClass::ApYellow, 4.5, 2.7, 2.5, 0.72),
    (DeviceClass::ApGreen, 2.7, 1.62, 2.5, 0.432),
    (DeviceClass::ApBlue, 2.7, 1.62, 2.25, 0.485),
    (DeviceClass::Onu, 10.0, 6.0, 10.0, 0.9),
    (DeviceClass::EthernetSwitch, 300.0, 180.0, 160.0, 1.125),
    (DeviceClass::AggregationSwitch, 435.0, 261.0, 240.0, 0.725),
    (DeviceClass::EdgeRouter, 435.0, 261.0, 240.0, 0.725),
    (DeviceClass::OpticalSwitch, 750.0, 450.0, 480.0, 0.625),
    (DeviceClass::CoreRouter, 344.0, 206.4, 3200.0, 0.043),
];

/// Embedded defaults for all sixteen device classes.
pub fn default_catalog() -> Catalog {
    let profiles = DEFAULT_TABLE
        .iter()
        .map(|&(class, max, idle, cap, eff)| {
            let mut p = DeviceProfile::new(class, max, idle, cap);
            p.listed_efficiency = Some(eff);
            (class, p)
        })
        .collect();
    Catalog { profiles }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogDocument {
    #[serde(default)]
    devices: BTreeMap<String, ProfileRecord>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    max_power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    idle_power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    capacity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    capacity_unit: Option<CapacityUnit>,
}

/// Defaults with per-field overrides from a JSON document applied.
pub fn load_catalog(document: &str) -> Result<Catalog, CatalogError> {
    let doc: CatalogDocument = serde_json::from_str(document)?;
    let mut catalog = default_catalog();
    for (key, record) in doc.devices {
        let class: DeviceClass = key.parse()?;
        let base = catalog.profiles.get(&class).cloned();
        let profile = match base {
            Some(mut p) => {
                let changed = record.max_power_w.is_some_and(|v| v != p.max_power)
                    || record.idle_power_w.is_some_and(|v| v != p.idle_power)
                    || record.capacity.is_some_and(|v| v != p.capacity);
                p.max_power = record.max_power_w.unwrap_or(p.max_power);
                p.idle_power = record.idle_power_w.unwrap_or(p.idle_power);
                p.capacity = record.capacity.unwrap_or(p.capacity);
                if changed {
                    p.listed_efficiency = None;
                }
                p
            }
            None => match (record.max_power_w, record.idle_power_w, record.capacity) {
                (Some(max), Some(idle), Some(cap)) => DeviceProfile::new(class, max, idle, cap),
                _ => return Err(CatalogError::Incomplete(class.to_string())),
            },
        };
        if let Some(unit) = record.capacity_unit {
            if unit != profile.capacity_unit() {
                return Err(CatalogError::InvalidProfile {
                    class: class.to_string(),
                    reason: format!("capacity unit must be {:?}", profile.capacity_unit()),
                });
            }
        }
        profile.validate()?;
        catalog.profiles.insert(class, profile);
    }
    Ok(catalog)
}

pub fn load_catalog_file(path: &Path) -> Result<Catalog, CatalogError> {
    load_catalog(&std::fs::read_to_string(path)?)
}

impl Default for Catalog {
    fn default() -> Self {
        default_catalog()
    }
}

impl Catalog {
    pub fn get(&self, class: DeviceClass) -> Option<&DeviceProfile> {
        self.profiles.get(&class)
    }

    pub fn profile(&self, class: DeviceClass) -> Result<&DeviceProfile, CatalogError> {
        self.get(class).ok_or_else(|| CatalogError::UnknownClass(class.to_string()))
    }

    pub fn profiles(&self) -> impl Iterator<Item = &DeviceProfile> {
        self.profiles.values()
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn insert(&mut self, profile: DeviceProfile) -> Result<(), CatalogError> {
        profile.validate()?;
        self.profiles.insert(profile.class, profile);
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        self.profiles.values().try_for_each(DeviceProfile::validate)
    }

    /// Canonical JSON: sorted keys, every field present, shortest round-trip numbers.
    pub fn to_json(&self) -> String {
        let devices = self
            .profiles
            .values()
            .map(|p| {
                let record = ProfileRecord {
                    max_power_w: Some(p.max_power),
                    idle_power_w: Some(p.idle_power),
                    capacity: Some(p.capacity),
                    capacity_unit: Some(p.capacity_unit()),
                };
                (p.class.to_string(), record)
            })
            .collect();
        serde_json::to_string_pretty(&CatalogDocument { devices }).expect("catalog serializes")
    }

    /// Compares derived unit power against the listed efficiency column.
    pub fn efficiency_audit(&self, tolerance: f64) -> Vec<EfficiencyAudit> {
        self.profiles
            .values()
            .filter_map(|p| {
                let listed = p.listed_efficiency?;
                let computed = unit_power(p).ok()?;
                Some(EfficiencyAudit {
                    class: p.class,
                    computed,
                    listed,
                    discrepancy: (computed - listed).abs() > tolerance,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyAudit {
    #[serde(serialize_with = "ser_class")]
    pub class: DeviceClass,
    pub computed: f64,
    pub listed: f64,
    pub discrepancy: bool,
}

fn ser_class<S: serde::Serializer>(c: &DeviceClass, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(c.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_tables() {
        let c = default_catalog();
        assert_eq!(c.len(), 16);
        assert_eq!(c.get(DeviceClass::Rfs).unwrap().max_power, 65.0);
        assert_eq!(c.get(DeviceClass::Onu).unwrap().idle_power, 6.0);
        assert_eq!(c.get(DeviceClass::ApRed).unwrap().capacity, 2.5);
        let cloud = c.get(DeviceClass::Ccs).unwrap();
        assert_eq!((cloud.max_power, cloud.idle_power, cloud.capacity), (1100.0, 660.0, 1612.8));
        c.validate().unwrap();
    }

    #[test]
    fn unit_power_examples() {
        let c = default_catalog();
        assert_eq!(c.get(DeviceClass::Rfs).unwrap().unit_power().unwrap(), 0.40625);
        let cloud = c.get(DeviceClass::Ccs).unwrap().unit_power().unwrap();
        assert!((cloud - 0.272_817_460_317_460_3).abs() < 1e-15);
        let flat = DeviceProfile::new(DeviceClass::Ud, 10.0, 10.0, 5.0);
        assert_eq!(unit_power(&flat).unwrap(), 0.0);
        let broken = DeviceProfile::new(DeviceClass::Ud, 10.0, 1.0, 0.0);
        assert!(matches!(unit_power(&broken), Err(CatalogError::InvalidProfile { .. })));
    }

    #[test]
    fn processing_efficiencies_within_rounding() {
        let audit = default_catalog().efficiency_audit(0.005);
        for class in [DeviceClass::Ccs, DeviceClass::Mfs, DeviceClass::Cfs, DeviceClass::Bfs, DeviceClass::Rfs] {
            let row = audit.iter().find(|a| a.class == class).unwrap();
            assert!(!row.discrepancy, "{class}: {} vs {}", row.computed, row.listed);
        }
        let ud = audit.iter().find(|a| a.class == DeviceClass::Ud).unwrap();
        assert!(ud.discrepancy);
        assert!((ud.computed - 0.5859375).abs() < 1e-12);
    }

    #[test]
    fn load_overrides() {
        assert_eq!(load_catalog("{}").unwrap(), default_catalog());
        assert_eq!(load_catalog(r#"{"devices":{}}"#).unwrap(), default_catalog());
        let c = load_catalog(r#"{"devices":{"RFS":{"max_power_w":129}}}"#).unwrap();
        assert_eq!(c.get(DeviceClass::Rfs).unwrap().unit_power().unwrap(), 1.40625);
        assert!(load_catalog(r#"{"devices":{"ONU":{"capacity":0}}}"#).is_err());
        assert!(load_catalog(r#"{"devices":{"ONU":{"capacity":1,"watts":3}}}"#).is_err());
        assert!(load_catalog(r#"{"devices":{"toaster":{"capacity":1}}}"#).is_err());
        assert!(load_catalog(r#"{"gadgets":{}}"#).is_err());
        assert!(load_catalog(r#"{"devices":{"RFS":{"capacity_unit":"gbps"}}}"#).is_err());
        assert!(load_catalog(r#"{"devices":{"OLT":{"capacity":40}}}"#).is_err());
        let olt = load_catalog(r#"{"devices":{"OLT":{"max_power_w":100,"idle_power_w":60,"capacity":40}}}"#).unwrap();
        assert_eq!(olt.get(DeviceClass::Olt).unwrap().unit_power().unwrap(), 1.0);
    }

    #[test]
    fn emission_is_idempotent() {
        let once = default_catalog().to_json();
        let reloaded = load_catalog(&once).unwrap();
        assert_eq!(reloaded.to_json(), once);
        for p in reloaded.profiles() {
            let d = default_catalog();
            let orig = d.get(p.class).unwrap();
            assert_eq!((p.max_power, p.idle_power, p.capacity), (orig.max_power, orig.idle_power, orig.capacity));
        }
    }

    proptest::proptest! {
        #[test]
        fn unit_power_scale_invariant(max in 1.0f64..1e4, frac in 0.0f64..0.99, cap in 0.1f64..1e4, k in 0.01f64..100.0) {
            let idle = max * frac;
            let a = unit_power(&DeviceProfile::new(DeviceClass::Bfs, max, idle, cap)).unwrap();
            let b = unit_power(&DeviceProfile::new(DeviceClass::Bfs, idle + (max - idle) * k, idle, cap * k)).unwrap();
            proptest::prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12));
        }
    }
}
