//! M/M/1 link delay and its tangent-line under-approximation.
//!
//! Loads and capacities are in Gbit/s, packets in bits, delays in seconds.
//! With `mu = capacity / packet` and `lambda = load / packet` (packets per
//! second) the sojourn time is `1 / (mu - lambda)`. The piecewise form keeps
//! one tangent per construction point; because the curve is convex the
//! maximum of the tangents never exceeds it.

use std::io::Write;

use thiserror::Error;

const GIGA: f64 = 1e9;

pub const DEFAULT_PACKET_BITS: f64 = 10_000.0;
pub const DEFAULT_RHO_MAX: f64 = 0.98;

/// Tangent points, geometric in `1 - rho` with ratio 0.64.
pub const DEFAULT_RHO_POINTS: [f64; 6] = [0.0, 0.36, 0.5904, 0.737856, 0.83222784, 0.8926258176];

#[derive(Debug, Error, PartialEq)]
pub enum DelayError {
    #[error("load {load} Gbit/s saturates a {capacity} Gbit/s link")]
    Saturated { load: f64, capacity: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    /// Seconds per Gbit/s.
    pub slope: f64,
    /// Seconds.
    pub intercept: f64,
    pub rho: f64,
}

impl Segment {
    pub fn value(&self, load: f64) -> f64 {
        self.slope * load + self.intercept
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseDelay {
    pub capacity: f64,
    pub segments: Vec<Segment>,
    /// Exact delay at `rho_max * capacity`.
    pub ub: f64,
    pub rho_max: f64,
    pub packet_bits: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayEval {
    pub seconds: f64,
    /// Load exceeded `rho_max * capacity`.
    pub beyond_cap: bool,
}

pub fn mm1_delay(load: f64, capacity: f64, packet_bits: f64) -> Result<f64, DelayError> {
    if !(capacity > 0.0 && packet_bits > 0.0 && load >= 0.0) {
        return Err(DelayError::Invalid(format!(
            "load {load}, capacity {capacity}, packet {packet_bits} bits"
        )));
    }
    if load >= capacity {
        return Err(DelayError::Saturated { load, capacity });
    }
    Ok(packet_bits / ((capacity - load) * GIGA))
}

fn mm1_slope(load: f64, capacity: f64, packet_bits: f64) -> f64 {
    let headroom = capacity - load;
    packet_bits / (GIGA * headroom * headroom)
}

/// Tangents to the exact curve at `rho_points[p] * capacity`.
pub fn linearize(
    capacity: f64,
    segment_count: usize,
    rho_points: &[f64],
    packet_bits: f64,
    rho_max: f64,
) -> Result<PiecewiseDelay, DelayError> {
    if segment_count == 0 || segment_count != rho_points.len() {
        return Err(DelayError::Invalid(format!(
            "{segment_count} segments requested for {} tangent points",
            rho_points.len()
        )));
    }
    if !(rho_max > 0.0 && rho_max < 1.0) {
        return Err(DelayError::Invalid(format!("rho_max {rho_max} outside (0, 1)")));
    }
    if rho_points.iter().any(|&r| !(0.0..rho_max).contains(&r)) {
        return Err(DelayError::Invalid(format!("tangent points must lie in [0, {rho_max})")));
    }
    if rho_points.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DelayError::Invalid("tangent points must be strictly increasing".into()));
    }
    let segments = rho_points
        .iter()
        .map(|&rho| {
            let load = rho * capacity;
            let slope = mm1_slope(load, capacity, packet_bits);
            let value = mm1_delay(load, capacity, packet_bits)?;
            Ok(Segment { slope, intercept: value - slope * load, rho })
        })
        .collect::<Result<Vec<_>, DelayError>>()?;
    let ub = mm1_delay(rho_max * capacity, capacity, packet_bits)?;
    Ok(PiecewiseDelay { capacity, segments, ub, rho_max, packet_bits })
}

pub fn eval_piecewise(pw: &PiecewiseDelay, load: f64) -> DelayEval {
    let seconds = pw.segments.iter().map(|s| s.value(load)).fold(f64::NEG_INFINITY, f64::max);
    DelayEval { seconds, beyond_cap: load > pw.rho_max * pw.capacity }
}

impl PiecewiseDelay {
    pub fn eval(&self, load: f64) -> f64 {
        eval_piecewise(self, load).seconds
    }

    /// `segment,slope_s_per_gbps,intercept_s`
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "segment,slope_s_per_gbps,intercept_s")?;
        for (p, s) in self.segments.iter().enumerate() {
            writeln!(out, "{},{:e},{:e}", p + 1, s.slope, s.intercept)?;
        }
        Ok(())
    }
}

/// Parameters shared by every link's linearization.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayConfig {
    pub packet_bits: f64,
    pub rho_points: Vec<f64>,
    pub rho_max: f64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        DelayConfig {
            packet_bits: DEFAULT_PACKET_BITS,
            rho_points: DEFAULT_RHO_POINTS.to_vec(),
            rho_max: DEFAULT_RHO_MAX,
        }
    }
}

impl DelayConfig {
    /// Default parameters with `n` tangent points, geometric in `1 - rho`
    /// like the defaults (the six-point case reproduces them).
    pub fn with_segments(n: usize) -> Self {
        let rho_points = (0..n as i32).map(|k| 1.0 - 0.64f64.powi(k)).collect();
        DelayConfig { rho_points, ..DelayConfig::default() }
    }

    pub fn linearize(&self, capacity: f64) -> Result<PiecewiseDelay, DelayError> {
        linearize(capacity, self.rho_points.len(), &self.rho_points, self.packet_bits, self.rho_max)
    }

    /// One approximation per link of `topology`, in link order.
    pub fn for_topology(&self, topology: &crate::topology::Topology) -> Result<Vec<PiecewiseDelay>, DelayError> {
        topology.links().iter().map(|l| self.linearize(l.capacity)).collect()
    }
}
