//! Decoding solution vectors into placement reports.

use serde::{Deserialize, Serialize};

use super::{DeviceGroup, MilpModel, ModelError, US_PER_S};
use crate::catalog::Wavelength;
use crate::solver::{check_solution, ResidualReport};

/// Values below this are treated as zero when decoding flows.
const FLOW_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub pc: f64,
    pub pn: f64,
    pub pap: f64,
    pub pcp: f64,
    pub ar: f64,
    pub ay: f64,
    pub agb: f64,
    pub pr: f64,
    pub py: f64,
    pub pgb: f64,
    pub ponu: f64,
    pub pq: f64,
    pub tpc: f64,
}

impl PowerBreakdown {
    /// `(name, watts)` in report column order.
    pub fn entries(&self) -> [(&'static str, f64); 13] {
        [
            ("tpc", self.tpc),
            ("pc", self.pc),
            ("pn", self.pn),
            ("pap", self.pap),
            ("pcp", self.pcp),
            ("ar", self.ar),
            ("ay", self.ay),
            ("agb", self.agb),
            ("pr", self.pr),
            ("py", self.py),
            ("pgb", self.pgb),
            ("ponu", self.ponu),
            ("pq", self.pq),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    pub user: String,
    /// `None` when the vector does not select exactly one node.
    pub node: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkFlow {
    pub from: String,
    pub to: String,
    /// Gbit/s.
    pub load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementReport {
    /// Residuals within tolerance and a unique destination per user.
    pub feasible: bool,
    pub assignments: Vec<Assignment>,
    pub active_nodes: Vec<String>,
    pub power: PowerBreakdown,
    /// Links carrying traffic, in link order.
    pub link_flows: Vec<LinkFlow>,
    /// Per-user delay in seconds, in user order; read from the delay
    /// variables when the model has them, otherwise evaluated from flows.
    pub user_delay: Vec<f64>,
    pub td: Option<f64>,
    pub objective: f64,
    pub residuals: ResidualReport,
    pub model_hash: String,
}

impl PlacementReport {
    /// Assignments rendered as `u:d;u:d`.
    pub fn assignment_string(&self) -> String {
        self.assignments
            .iter()
            .map(|a| format!("{}:{}", a.user, a.node.as_deref().unwrap_or("?")))
            .collect::<Vec<_>>()
            .join(";")
    }
}

fn check_len(model: &MilpModel, x: &[f64]) -> Result<(), ModelError> {
    if x.len() != model.problem.columns.len() {
        return Err(ModelError::LengthMismatch { got: x.len(), expected: model.problem.columns.len() });
    }
    Ok(())
}

/// Evaluates every power term from the primary variables (demand shares,
/// activations, aggregated traffic), independent of the auxiliary columns.
pub fn power_components(model: &MilpModel, x: &[f64]) -> Result<PowerBreakdown, ModelError> {
    check_len(model, x)?;
    let ix = &model.index;
    let np = ix.procs.len();
    let mut b = PowerBreakdown::default();
    for u in 0..ix.users.len() {
        for d in 0..np {
            b.pc += x[ix.psi[u * np + d]] * model.processing[d].unit_power;
        }
    }
    for d in 0..np {
        b.pc += x[ix.beta[d]] * model.processing[d].idle;
    }
    let (red_idle, red_per) = model.red_ap;
    for dev in &ix.devices {
        let t = x[dev.traffic];
        let on = x[dev.theta];
        let own = t * dev.per_gbps + on * dev.idle;
        let red = t * red_per + on * red_idle;
        match dev.group {
            DeviceGroup::SourceAp(w) => {
                b.pap += red;
                match w {
                    Wavelength::Red => b.ar += own,
                    Wavelength::Yellow => b.ay += own,
                    Wavelength::Green | Wavelength::Blue => b.agb += own,
                }
            }
            DeviceGroup::ProcessingAp(w) => {
                b.pcp += red;
                match w {
                    Wavelength::Red => b.pr += own,
                    Wavelength::Yellow => b.py += own,
                    Wavelength::Green | Wavelength::Blue => b.pgb += own,
                }
            }
            DeviceGroup::Onu => b.ponu += own,
            DeviceGroup::Network => b.pq += own,
            DeviceGroup::SourceUser | DeviceGroup::ProcessingUser => {}
        }
    }
    b.pn = b.pap + b.pcp + b.ar + b.ay + b.agb + b.pr + b.py + b.pgb + b.ponu + b.pq;
    b.tpc = b.pc + b.pn;
    Ok(b)
}

/// Per-link load: sum of every commodity's flow.
pub fn link_loads(model: &MilpModel, x: &[f64]) -> Vec<f64> {
    let ix = &model.index;
    let ne = ix.num_links;
    let mut loads = vec![0.0; ne];
    for (k, &col) in ix.flow.iter().enumerate() {
        loads[k % ne] += x[col];
    }
    loads
}

/// Per-user delay evaluated from the flows: each user pays the
/// piecewise link delay of every link its traffic uses, at that link's
/// total load. `None` when the model carries no delay approximations.
pub fn posthoc_delay(model: &MilpModel, x: &[f64]) -> Option<Vec<f64>> {
    let pw = model.pw_set.as_ref()?;
    let ix = &model.index;
    let (np, ne) = (ix.procs.len(), ix.num_links);
    let loads = link_loads(model, x);
    let delays = (0..ix.users.len())
        .map(|u| {
            (0..ne)
                .filter(|&l| (0..np).any(|d| x[ix.flow[(u * np + d) * ne + l]] > FLOW_EPS))
                .map(|l| pw[l].eval(loads[l]))
                .sum()
        })
        .collect();
    Some(delays)
}

/// Decodes `x`; infeasibility beyond `tol` is reported, not hidden.
pub fn extract_report(model: &MilpModel, x: &[f64], tol: f64) -> Result<PlacementReport, ModelError> {
    check_len(model, x)?;
    let ix = &model.index;
    let np = ix.procs.len();
    let residuals = check_solution(&model.problem, x, tol);
    let mut unique = true;
    let assignments = ix
        .users
        .iter()
        .enumerate()
        .map(|(u, &node)| {
            let chosen: Vec<usize> = (0..np).filter(|&d| x[ix.xi[u * np + d]] > 0.5).collect();
            let node_id = match chosen.as_slice() {
                [d] => Some(model.node_id(ix.procs[*d]).to_string()),
                _ => {
                    unique = false;
                    None
                }
            };
            Assignment { user: model.node_id(node).to_string(), node: node_id }
        })
        .collect();
    let active_nodes =
        (0..np).filter(|&d| x[ix.beta[d]] > 0.5).map(|d| model.node_id(ix.procs[d]).to_string()).collect();
    let loads = link_loads(model, x);
    let link_flows = loads
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > FLOW_EPS)
        .map(|(l, &load)| {
            let link = &model.topology.links()[l];
            LinkFlow { from: model.node_id(link.from).to_string(), to: model.node_id(link.to).to_string(), load }
        })
        .collect();
    let (user_delay, td) = match &ix.delay {
        Some(dc) => (dc.ed.iter().map(|&c| x[c] / US_PER_S).collect(), Some(x[dc.td] / US_PER_S)),
        None => match posthoc_delay(model, x) {
            Some(v) => {
                let td = v.iter().sum();
                (v, Some(td))
            }
            None => (Vec::new(), None),
        },
    };
    Ok(PlacementReport {
        feasible: unique && residuals.is_feasible(),
        assignments,
        active_nodes,
        power: power_components(model, x)?,
        link_flows,
        user_delay,
        td,
        objective: model.problem.objective_value(x),
        residuals,
        model_hash: model.hash.clone(),
    })
}
