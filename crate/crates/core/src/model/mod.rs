//! Joint power/delay placement MILP over a P2P-PON topology.

pub mod mps;
mod report;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::{Catalog, CatalogError, DeviceClass, DeviceProfile, Wavelength};
use crate::delay_approx::PiecewiseDelay;
use crate::solver::{Problem, Relation, VarKind};
use crate::topology::{Role, Topology};

pub use report::{extract_report, link_loads, posthoc_delay, power_components, Assignment, LinkFlow, PlacementReport, PowerBreakdown};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no device profile for {class} (node {node})")]
    MissingProfile { node: String, class: String },
    #[error("node {0} has no device class (access point without wavelength?)")]
    Unclassified(String),
    #[error("delay weight is positive but no delay approximation was given for link {0}")]
    MissingDelay(String),
    #[error("delay approximations cover {got} links, topology has {expected}")]
    DelayCount { got: usize, expected: usize },
    #[error("invalid demand for {user}: {reason}")]
    InvalidDemand { user: String, reason: String },
    #[error("{0} is not a source user device in the topology")]
    UnknownUser(String),
    #[error("model has no {0}")]
    Empty(&'static str),
    #[error("solution vector has {got} entries, model has {expected} columns")]
    LengthMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

/// Processing demand of one source user device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDemand {
    pub user: String,
    /// GFLOPs.
    pub demand_gflops: f64,
    /// Gbit/s per GFLOP.
    pub drr: f64,
}

impl UserDemand {
    /// Gbit/s.
    pub fn traffic_gbps(&self) -> f64 {
        self.drr * self.demand_gflops
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DemandSet {
    users: Vec<UserDemand>,
}

impl DemandSet {
    pub fn new(users: Vec<UserDemand>) -> Self {
        DemandSet { users }
    }

    /// Same demand and ratio for every source user device, in node order.
    pub fn uniform(topology: &Topology, demand_gflops: f64, drr: f64) -> Self {
        let users = topology
            .sources()
            .into_iter()
            .map(|i| UserDemand { user: topology.node(i).id.clone(), demand_gflops, drr })
            .collect();
        DemandSet { users }
    }

    pub fn users(&self) -> &[UserDemand] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn total_demand(&self) -> f64 {
        self.users.iter().map(|u| u.demand_gflops).sum()
    }

    pub fn total_traffic(&self) -> f64 {
        self.users.iter().map(|u| u.traffic_gbps()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
}

impl Weights {
    pub const POWER_AWARE: Weights = Weights { alpha: 1.0, beta: 0.0 };
    pub const DELAY_AWARE: Weights = Weights { alpha: 1e-6, beta: 1.0 };
}

impl Default for Weights {
    fn default() -> Self {
        Weights::POWER_AWARE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOptions {
    /// Smallest assignable demand, GFLOPs.
    pub psi_min: f64,
    /// Bound each user's delay by the activation of its own destination
    /// instead of any activated processing node.
    pub per_user_delay: bool,
    /// Omit delay variables and rows. `None`: omit exactly when beta is 0.
    pub skip_delay: Option<bool>,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions { psi_min: 1e-3, per_user_delay: false, skip_delay: None }
    }
}

/// Constraint families, in emission order. Row names are `tag[key]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    SrcTraffic,
    DstTraffic,
    DevTraffic,
    DefTpc,
    DefPc,
    DefPn,
    DefPap,
    DefPcp,
    DefPq,
    DefAr,
    DefAy,
    DefAgb,
    DefPr,
    DefPy,
    DefPgb,
    DefPonu,
    Demand,
    Capacity,
    SingleAssign,
    TrafficDemand,
    FlowCons,
    LinkCap,
    AssignAct,
    AssignIdle,
    NodeAct,
    NodeIdle,
    DevAct,
    DevIdle,
    DstAct,
    DstIdle,
    SrcAct,
    SrcIdle,
    PathDelay,
    TotalDelay,
    LinkLoad,
    ArcIdle,
    ArcAct,
    XCap,
    XH,
    XEnv,
    LinkIdle,
    LinkAct,
    DelaySeg,
    EdCap,
    EdUb,
    EdLb,
}

impl Family {
    pub const ALL: [Family; 46] = [
        Family::SrcTraffic,
        Family::DstTraffic,
        Family::DevTraffic,
        Family::DefTpc,
        Family::DefPc,
        Family::DefPn,
        Family::DefPap,
        Family::DefPcp,
        Family::DefPq,
        Family::DefAr,
        Family::DefAy,
        Family::DefAgb,
        Family::DefPr,
        Family::DefPy,
        Family::DefPgb,
        Family::DefPonu,
        Family::Demand,
        Family::Capacity,
        Family::SingleAssign,
        Family::TrafficDemand,
        Family::FlowCons,
        Family::LinkCap,
        Family::AssignAct,
        Family::AssignIdle,
        Family::NodeAct,
        Family::NodeIdle,
        Family::DevAct,
        Family::DevIdle,
        Family::DstAct,
        Family::DstIdle,
        Family::SrcAct,
        Family::SrcIdle,
        Family::PathDelay,
        Family::TotalDelay,
        Family::LinkLoad,
        Family::ArcIdle,
        Family::ArcAct,
        Family::XCap,
        Family::XH,
        Family::XEnv,
        Family::LinkIdle,
        Family::LinkAct,
        Family::DelaySeg,
        Family::EdCap,
        Family::EdUb,
        Family::EdLb,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Family::SrcTraffic => "src_traffic",
            Family::DstTraffic => "dst_traffic",
            Family::DevTraffic => "dev_traffic",
            Family::DefTpc => "def_tpc",
            Family::DefPc => "def_pc",
            Family::DefPn => "def_pn",
            Family::DefPap => "def_pap",
            Family::DefPcp => "def_pcp",
            Family::DefPq => "def_pq",
            Family::DefAr => "def_ar",
            Family::DefAy => "def_ay",
            Family::DefAgb => "def_agb",
            Family::DefPr => "def_pr",
            Family::DefPy => "def_py",
            Family::DefPgb => "def_pgb",
            Family::DefPonu => "def_ponu",
            Family::Demand => "demand",
            Family::Capacity => "capacity",
            Family::SingleAssign => "single_assign",
            Family::TrafficDemand => "traffic_demand",
            Family::FlowCons => "flow_cons",
            Family::LinkCap => "link_cap",
            Family::AssignAct => "assign_act",
            Family::AssignIdle => "assign_idle",
            Family::NodeAct => "node_act",
            Family::NodeIdle => "node_idle",
            Family::DevAct => "dev_act",
            Family::DevIdle => "dev_idle",
            Family::DstAct => "dst_act",
            Family::DstIdle => "dst_idle",
            Family::SrcAct => "src_act",
            Family::SrcIdle => "src_idle",
            Family::PathDelay => "path_delay",
            Family::TotalDelay => "total_delay",
            Family::LinkLoad => "link_load",
            Family::ArcIdle => "arc_idle",
            Family::ArcAct => "arc_act",
            Family::XCap => "x_cap",
            Family::XH => "x_h",
            Family::XEnv => "x_env",
            Family::LinkIdle => "link_idle",
            Family::LinkAct => "link_act",
            Family::DelaySeg => "delay_seg",
            Family::EdCap => "ed_cap",
            Family::EdUb => "ed_ub",
            Family::EdLb => "ed_lb",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Family> {
        Family::ALL.iter().copied().find(|f| f.tag() == tag)
    }

    pub fn describe(self) -> &'static str {
        match self {
            Family::SrcTraffic => "traffic through source access points and user devices",
            Family::DstTraffic => "traffic through processing access points, processing devices and ONUs",
            Family::DevTraffic => "traffic through switches, routers and the OLT",
            Family::DefTpc => "total power",
            Family::DefPc => "processing power",
            Family::DefPn => "networking power",
            Family::DefPap => "source access point power",
            Family::DefPcp => "processing access point power",
            Family::DefPq => "switch and router power",
            Family::DefAr => "red source access points",
            Family::DefAy => "yellow source access points",
            Family::DefAgb => "green/blue source access points",
            Family::DefPr => "red processing access points",
            Family::DefPy => "yellow processing access points",
            Family::DefPgb => "green/blue processing access points",
            Family::DefPonu => "ONU power",
            Family::Demand => "demand fully assigned",
            Family::Capacity => "processing capacity",
            Family::SingleAssign => "single destination per user",
            Family::TrafficDemand => "traffic follows assigned demand",
            Family::FlowCons => "flow conservation",
            Family::LinkCap => "link capacity",
            Family::AssignAct => "assignment implies selection",
            Family::AssignIdle => "selection implies assignment",
            Family::NodeAct => "selection activates node",
            Family::NodeIdle => "active node has a user",
            Family::DevAct => "traffic activates device",
            Family::DevIdle => "active device carries traffic",
            Family::DstAct => "traffic activates destination-side device",
            Family::DstIdle => "active destination-side device carries traffic",
            Family::SrcAct => "traffic activates source-side device",
            Family::SrcIdle => "active source-side device carries traffic",
            Family::PathDelay => "delay along a user-destination route",
            Family::TotalDelay => "total delay",
            Family::LinkLoad => "link load",
            Family::ArcIdle => "arc usage requires flow",
            Family::ArcAct => "flow requires arc usage",
            Family::XCap => "per-arc delay capped when unused",
            Family::XH => "per-arc delay at most link delay",
            Family::XEnv => "per-arc delay at least link delay when used",
            Family::LinkIdle => "busy link requires load",
            Family::LinkAct => "load marks link busy",
            Family::DelaySeg => "queuing delay tangent segments",
            Family::EdCap => "user delays vanish without active nodes",
            Family::EdUb => "user delay at most its route delays",
            Family::EdLb => "user delay at least route delay to an active node",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One registered decision variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableRef {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub column: usize,
}

/// Power-component columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerColumns {
    pub tpc: usize,
    pub pc: usize,
    pub pn: usize,
    pub pap: usize,
    pub pcp: usize,
    pub pq: usize,
    pub ar: usize,
    pub ay: usize,
    pub agb: usize,
    pub pr: usize,
    pub py: usize,
    pub pgb: usize,
    pub ponu: usize,
}

/// Delay columns (`h`, `x`, `ld`, `ed`, `td`) hold microseconds, which keeps
/// their coefficients near unity; the objective weight converts back to
/// seconds, so objective values are unaffected.
pub const US_PER_S: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct DelayColumns {
    /// Per link.
    pub tr: Vec<usize>,
    pub hb: Vec<usize>,
    pub h: Vec<usize>,
    /// Per (pair, link), see [`ModelIndex::pair_link`].
    pub tb: Vec<usize>,
    pub x: Vec<usize>,
    /// Per pair.
    pub ld: Vec<usize>,
    /// Per user.
    pub ed: Vec<usize>,
    pub td: usize,
}

/// Which power term a traffic-carrying device contributes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceGroup {
    /// Source user device: no power term.
    SourceUser,
    /// Processing user device: no networking power term.
    ProcessingUser,
    SourceAp(Wavelength),
    ProcessingAp(Wavelength),
    Onu,
    Network,
}

/// A node whose aggregate traffic and activation are modeled.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedDevice {
    pub node: usize,
    pub group: DeviceGroup,
    /// Aggregate-traffic column (mu, sigma or lambda).
    pub traffic: usize,
    pub theta: usize,
    /// Idle power and per-Gbit/s power of the device's own class; zero for
    /// user devices.
    pub idle: f64,
    pub per_gbps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelIndex {
    /// Topology node indices of the users, in demand order.
    pub users: Vec<usize>,
    /// Topology node indices of the processing nodes.
    pub procs: Vec<usize>,
    pub num_links: usize,
    /// Per pair `u * |P| + d`.
    pub psi: Vec<usize>,
    pub xi: Vec<usize>,
    pub lambda_ud: Vec<usize>,
    /// Per processing node.
    pub beta: Vec<usize>,
    /// Per (pair, link).
    pub flow: Vec<usize>,
    pub devices: Vec<TrackedDevice>,
    pub power: PowerColumns,
    pub delay: Option<DelayColumns>,
}

impl ModelIndex {
    pub fn pair(&self, u: usize, d: usize) -> usize {
        u * self.procs.len() + d
    }

    pub fn pair_link(&self, u: usize, d: usize, link: usize) -> usize {
        self.pair(u, d) * self.num_links + link
    }
}

/// Per-processing-node parameters used by the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessingParams {
    pub capacity: f64,
    pub idle: f64,
    pub unit_power: f64,
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub problem: Problem,
    pub index: ModelIndex,
    pub weights: Weights,
    pub options: ModelOptions,
    pub topology: Topology,
    pub demands: DemandSet,
    pub processing: Vec<ProcessingParams>,
    /// (idle W, W per Gbit/s) of a red access point, used by the all-AP terms.
    pub red_ap: (f64, f64),
    /// Per-link delay approximations, when provided.
    pub pw_set: Option<Vec<PiecewiseDelay>>,
    /// sha256 of the canonical MPS text.
    pub hash: String,
}

impl MilpModel {
    pub fn registry(&self) -> Vec<VariableRef> {
        self.problem
            .columns
            .iter()
            .enumerate()
            .map(|(column, c)| VariableRef { name: c.name.clone(), kind: c.kind, lower: c.lower, upper: c.upper, column })
            .collect()
    }

    pub fn delay_enabled(&self) -> bool {
        self.index.delay.is_some()
    }

    /// Row count per family tag, in emission order.
    pub fn family_counts(&self) -> BTreeMap<Family, usize> {
        let mut out = BTreeMap::new();
        for row in &self.problem.rows {
            if let Some(f) = Family::from_tag(row.family()) {
                *out.entry(f).or_insert(0) += 1;
            }
        }
        out
    }

    pub fn rows_in(&self, family: Family) -> usize {
        self.problem.rows.iter().filter(|r| r.family() == family.tag()).count()
    }

    pub fn node_id(&self, idx: usize) -> &str {
        &self.topology.node(idx).id
    }

    pub fn link_key(&self, link: usize) -> String {
        let l = &self.topology.links()[link];
        format!("{},{}", self.node_id(l.from), self.node_id(l.to))
    }
}

pub fn model_hash(problem: &Problem) -> String {
    hex::encode(Sha256::digest(mps::to_mps_string(problem).as_bytes()))
}

fn profile<'c>(catalog: &'c Catalog, topology: &Topology, node: usize) -> Result<&'c DeviceProfile, ModelError> {
    let n = topology.node(node);
    let class = n.device_class().ok_or_else(|| ModelError::Unclassified(n.id.clone()))?;
    catalog
        .get(class)
        .ok_or_else(|| ModelError::MissingProfile { node: n.id.clone(), class: class.to_string() })
}

pub fn build_model(
    topology: &Topology,
    demands: &DemandSet,
    catalog: &Catalog,
    pw_set: Option<&[PiecewiseDelay]>,
    weights: Weights,
    options: &ModelOptions,
) -> Result<MilpModel, ModelError> {
    let links = topology.links();
    let ne = links.len();
    let with_delay = !options.skip_delay.unwrap_or(weights.beta == 0.0);
    if let Some(pw) = pw_set {
        if pw.len() != ne {
            return Err(ModelError::DelayCount { got: pw.len(), expected: ne });
        }
    } else if with_delay {
        let l = links.first().ok_or(ModelError::Empty("links"))?;
        return Err(ModelError::MissingDelay(format!("{},{}", topology.node(l.from).id, topology.node(l.to).id)));
    }

    // Users.
    if demands.is_empty() {
        return Err(ModelError::Empty("users"));
    }
    let mut users = Vec::with_capacity(demands.len());
    for ud in demands.users() {
        let idx = topology.index_of(&ud.user).map_err(|_| ModelError::UnknownUser(ud.user.clone()))?;
        if topology.node(idx).role != Role::UdSource {
            return Err(ModelError::UnknownUser(ud.user.clone()));
        }
        if !(ud.drr > 0.0 && ud.drr.is_finite()) {
            return Err(ModelError::InvalidDemand { user: ud.user.clone(), reason: format!("drr {} must be positive", ud.drr) });
        }
        if !(ud.demand_gflops >= options.psi_min && ud.demand_gflops.is_finite()) {
            return Err(ModelError::InvalidDemand {
                user: ud.user.clone(),
                reason: format!("demand {} below the {} GFLOPs granularity", ud.demand_gflops, options.psi_min),
            });
        }
        if users.contains(&idx) {
            return Err(ModelError::InvalidDemand { user: ud.user.clone(), reason: "listed twice".into() });
        }
        users.push(idx);
    }
    let procs = topology.processing_nodes();
    if procs.is_empty() {
        return Err(ModelError::Empty("processing nodes"));
    }
    let processing = procs
        .iter()
        .map(|&d| {
            let p = profile(catalog, topology, d)?;
            Ok(ProcessingParams { capacity: p.capacity, idle: p.idle_power, unit_power: p.unit_power()? })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;

    let nu = users.len();
    let np = procs.len();
    let demand: Vec<f64> = demands.users().iter().map(|u| u.demand_gflops).collect();
    let traffic: Vec<f64> = demands.users().iter().map(|u| u.traffic_gbps()).collect();
    let drr: Vec<f64> = demands.users().iter().map(|u| u.drr).collect();
    let total_traffic: f64 = traffic.iter().sum();
    let lambda_min = drr.iter().fold(f64::INFINITY, |m, &r| m.min(r)) * options.psi_min;
    // A device sees every commodity on its way in and out.
    let z_traffic = 2.0 * total_traffic;
    let z_idle = 1.0 / lambda_min;

    let id = |i: usize| topology.node(i).id.as_str();
    let link_key = |l: usize| format!("{},{}", id(links[l].from), id(links[l].to));
    let pair_key = |u: usize, d: usize| format!("{},{}", id(users[u]), id(procs[d]));

    let mut p = Problem::new("fogpon");
    let inf = f64::INFINITY;

    let mut psi = Vec::with_capacity(nu * np);
    let mut xi = Vec::with_capacity(nu * np);
    let mut lambda_ud = Vec::with_capacity(nu * np);
    for u in 0..nu {
        for d in 0..np {
            psi.push(p.add_column(format!("psi[{}]", pair_key(u, d)), VarKind::Continuous, 0.0, demand[u]));
        }
    }
    for u in 0..nu {
        for d in 0..np {
            xi.push(p.add_column(format!("xi[{}]", pair_key(u, d)), VarKind::Binary, 0.0, 1.0));
        }
    }
    let beta: Vec<usize> =
        (0..np).map(|d| p.add_column(format!("beta[{}]", id(procs[d])), VarKind::Binary, 0.0, 1.0)).collect();
    for u in 0..nu {
        for d in 0..np {
            lambda_ud.push(p.add_column(format!("lambda_ud[{}]", pair_key(u, d)), VarKind::Continuous, 0.0, traffic[u]));
        }
    }
    let mut flow = Vec::with_capacity(nu * np * ne);
    for u in 0..nu {
        for d in 0..np {
            for l in 0..ne {
                let name = format!("flow[{},{}]", pair_key(u, d), link_key(l));
                flow.push(p.add_column(name, VarKind::Continuous, 0.0, links[l].capacity));
            }
        }
    }

    // Devices whose traffic is aggregated, grouped as the power terms need.
    let red = catalog.profile(DeviceClass::ApRed)?;
    let mut tracked: Vec<(usize, DeviceGroup, f64, f64)> = Vec::new();
    for (i, n) in topology.nodes().iter().enumerate() {
        let group = match n.role {
            Role::UdSource if users.contains(&i) => DeviceGroup::SourceUser,
            Role::ApSource => DeviceGroup::SourceAp(n.wavelength.ok_or_else(|| ModelError::Unclassified(n.id.clone()))?),
            _ => continue,
        };
        let (idle, per) = match group {
            DeviceGroup::SourceAp(_) => {
                let pr = profile(catalog, topology, i)?;
                (pr.idle_power, pr.unit_power()?)
            }
            _ => (0.0, 0.0),
        };
        tracked.push((i, group, idle, per));
    }
    for (i, n) in topology.nodes().iter().enumerate() {
        let group = match n.role {
            Role::UdProcessing => DeviceGroup::ProcessingUser,
            Role::ApProcessing => {
                DeviceGroup::ProcessingAp(n.wavelength.ok_or_else(|| ModelError::Unclassified(n.id.clone()))?)
            }
            Role::Onu => DeviceGroup::Onu,
            _ => continue,
        };
        let (idle, per) = match group {
            DeviceGroup::ProcessingUser => (0.0, 0.0),
            _ => {
                let pr = profile(catalog, topology, i)?;
                (pr.idle_power, pr.unit_power()?)
            }
        };
        tracked.push((i, group, idle, per));
    }
    for (i, n) in topology.nodes().iter().enumerate() {
        if !n.role.is_network_device() {
            continue;
        }
        let class = n.device_class().ok_or_else(|| ModelError::Unclassified(n.id.clone()))?;
        // The OLT has no default profile; it draws power only if configured.
        let Some(pr) = catalog.get(class) else {
            if class == DeviceClass::Olt {
                continue;
            }
            return Err(ModelError::MissingProfile { node: n.id.clone(), class: class.to_string() });
        };
        tracked.push((i, DeviceGroup::Network, pr.idle_power, pr.unit_power()?));
    }
    let mut devices = Vec::with_capacity(tracked.len());
    for &(i, group, idle, per) in &tracked {
        let prefix = match group {
            DeviceGroup::SourceUser | DeviceGroup::SourceAp(_) => "mu_src",
            DeviceGroup::ProcessingUser | DeviceGroup::ProcessingAp(_) | DeviceGroup::Onu => "sigma_dst",
            DeviceGroup::Network => "lambda_agg",
        };
        let col = p.add_column(format!("{prefix}[{}]", id(i)), VarKind::Continuous, 0.0, inf);
        devices.push(TrackedDevice { node: i, group, traffic: col, theta: 0, idle, per_gbps: per });
    }
    for dev in &mut devices {
        dev.theta = p.add_column(format!("theta[{}]", id(dev.node)), VarKind::Binary, 0.0, 1.0);
    }

    let mut aux = |name: &str| p.add_column(name, VarKind::Continuous, 0.0, inf);
    let power = PowerColumns {
        tpc: aux("tpc"),
        pc: aux("pc"),
        pn: aux("pn"),
        pap: aux("pap"),
        pcp: aux("pcp"),
        pq: aux("pq"),
        ar: aux("ar"),
        ay: aux("ay"),
        agb: aux("agb"),
        pr: aux("pr"),
        py: aux("py"),
        pgb: aux("pgb"),
        ponu: aux("ponu"),
    };

    let delay = if with_delay {
        let tr = (0..ne).map(|l| p.add_column(format!("tr[{}]", link_key(l)), VarKind::Continuous, 0.0, inf)).collect();
        let hb = (0..ne).map(|l| p.add_column(format!("hb[{}]", link_key(l)), VarKind::Binary, 0.0, 1.0)).collect();
        let h = (0..ne).map(|l| p.add_column(format!("h[{}]", link_key(l)), VarKind::Continuous, 0.0, inf)).collect();
        let mut tb = Vec::with_capacity(nu * np * ne);
        for u in 0..nu {
            for d in 0..np {
                for l in 0..ne {
                    let name = format!("tb[{},{}]", pair_key(u, d), link_key(l));
                    tb.push(p.add_column(name, VarKind::Binary, 0.0, 1.0));
                }
            }
        }
        let mut x = Vec::with_capacity(nu * np * ne);
        for u in 0..nu {
            for d in 0..np {
                for l in 0..ne {
                    let name = format!("x[{},{}]", pair_key(u, d), link_key(l));
                    x.push(p.add_column(name, VarKind::Continuous, 0.0, inf));
                }
            }
        }
        let mut ld = Vec::with_capacity(nu * np);
        for u in 0..nu {
            for d in 0..np {
                ld.push(p.add_column(format!("ld[{}]", pair_key(u, d)), VarKind::Continuous, 0.0, inf));
            }
        }
        let ed = (0..nu).map(|u| p.add_column(format!("ed[{}]", id(users[u])), VarKind::Continuous, 0.0, inf)).collect();
        let td = p.add_column("td", VarKind::Continuous, 0.0, inf);
        Some(DelayColumns { tr, hb, h, tb, x, ld, ed, td })
    } else {
        None
    };

    let index = ModelIndex { users: users.clone(), procs: procs.clone(), num_links: ne, psi, xi, lambda_ud, beta, flow, devices, power, delay };
    let ix = &index;
    let pair = |u: usize, d: usize| u * np + d;
    let fl = |u: usize, d: usize, l: usize| ix.flow[pair(u, d) * ne + l];
    let row = |f: Family, key: &str| format!("{}[{}]", f.tag(), key);

    // Aggregate traffic: every commodity's flow on links touching the device.
    for (fam, pick) in [
        (Family::SrcTraffic, 0u8),
        (Family::DstTraffic, 1u8),
        (Family::DevTraffic, 2u8),
    ] {
        for dev in &ix.devices {
            let kind = match dev.group {
                DeviceGroup::SourceUser | DeviceGroup::SourceAp(_) => 0u8,
                DeviceGroup::ProcessingUser | DeviceGroup::ProcessingAp(_) | DeviceGroup::Onu => 1,
                DeviceGroup::Network => 2,
            };
            if kind != pick {
                continue;
            }
            let mut coeffs = vec![(dev.traffic, 1.0)];
            for u in 0..nu {
                for d in 0..np {
                    for &l in topology.out_links(dev.node).iter().chain(topology.in_links(dev.node)) {
                        coeffs.push((fl(u, d, l), -1.0));
                    }
                }
            }
            p.add_row(row(fam, id(dev.node)), coeffs, Relation::Eq, 0.0);
        }
    }

    // Power definitions.
    let pw_cols = &ix.power;
    p.add_row(
        row(Family::DefTpc, "tpc"),
        vec![(pw_cols.tpc, 1.0), (pw_cols.pc, -1.0), (pw_cols.pn, -1.0)],
        Relation::Eq,
        0.0,
    );
    let mut coeffs = vec![(pw_cols.pc, 1.0)];
    for u in 0..nu {
        for d in 0..np {
            coeffs.push((ix.psi[pair(u, d)], -processing[d].unit_power));
        }
    }
    for d in 0..np {
        coeffs.push((ix.beta[d], -processing[d].idle));
    }
    p.add_row(row(Family::DefPc, "pc"), coeffs, Relation::Eq, 0.0);
    let parts = [
        pw_cols.pap,
        pw_cols.pcp,
        pw_cols.ar,
        pw_cols.ay,
        pw_cols.agb,
        pw_cols.pr,
        pw_cols.py,
        pw_cols.pgb,
        pw_cols.ponu,
        pw_cols.pq,
    ];
    let mut coeffs = vec![(pw_cols.pn, 1.0)];
    coeffs.extend(parts.iter().map(|&c| (c, -1.0)));
    p.add_row(row(Family::DefPn, "pn"), coeffs, Relation::Eq, 0.0);

    let red_ap = (red.idle_power, red.unit_power()?);
    let wl_match = |w: Wavelength, want: u8| match want {
        0 => w == Wavelength::Red,
        1 => w == Wavelength::Yellow,
        _ => w.is_green_blue(),
    };
    type Sel = fn(DeviceGroup) -> Option<Wavelength>;
    let src_ap: Sel = |g| if let DeviceGroup::SourceAp(w) = g { Some(w) } else { None };
    let dst_ap: Sel = |g| if let DeviceGroup::ProcessingAp(w) = g { Some(w) } else { None };
    // The all-AP terms price every access point with red parameters; the
    // per-wavelength terms use each access point's own class.
    let ap_terms: [(Family, usize, Sel, Option<u8>); 8] = [
        (Family::DefPap, pw_cols.pap, src_ap, None),
        (Family::DefPcp, pw_cols.pcp, dst_ap, None),
        (Family::DefAr, pw_cols.ar, src_ap, Some(0)),
        (Family::DefAy, pw_cols.ay, src_ap, Some(1)),
        (Family::DefAgb, pw_cols.agb, src_ap, Some(2)),
        (Family::DefPr, pw_cols.pr, dst_ap, Some(0)),
        (Family::DefPy, pw_cols.py, dst_ap, Some(1)),
        (Family::DefPgb, pw_cols.pgb, dst_ap, Some(2)),
    ];
    let mut ap_rows: Vec<(Family, Vec<(usize, f64)>)> = Vec::new();
    for (fam, col, sel, filter) in ap_terms {
        let mut coeffs = vec![(col, 1.0)];
        for dev in &ix.devices {
            let Some(w) = sel(dev.group) else { continue };
            let (idle, per) = match filter {
                None => red_ap,
                Some(want) if wl_match(w, want) => (dev.idle, dev.per_gbps),
                Some(_) => continue,
            };
            coeffs.push((dev.traffic, -per));
            coeffs.push((dev.theta, -idle));
        }
        ap_rows.push((fam, coeffs));
    }
    let mut q_coeffs = vec![(pw_cols.pq, 1.0)];
    let mut onu_coeffs = vec![(pw_cols.ponu, 1.0)];
    for dev in &ix.devices {
        let target = match dev.group {
            DeviceGroup::Network => &mut q_coeffs,
            DeviceGroup::Onu => &mut onu_coeffs,
            _ => continue,
        };
        target.push((dev.traffic, -dev.per_gbps));
        target.push((dev.theta, -dev.idle));
    }
    let mut ap_iter = ap_rows.into_iter();
    let (f, c) = ap_iter.next().expect("pap row");
    p.add_row(row(f, "pap"), c, Relation::Eq, 0.0);
    let (f, c) = ap_iter.next().expect("pcp row");
    p.add_row(row(f, "pcp"), c, Relation::Eq, 0.0);
    p.add_row(row(Family::DefPq, "pq"), q_coeffs, Relation::Eq, 0.0);
    for (f, c) in ap_iter {
        let key = &f.tag()[4..];
        p.add_row(row(f, key), c, Relation::Eq, 0.0);
    }
    p.add_row(row(Family::DefPonu, "ponu"), onu_coeffs, Relation::Eq, 0.0);

    // Assignment and capacity.
    for u in 0..nu {
        let coeffs = (0..np).map(|d| (ix.psi[pair(u, d)], 1.0)).collect();
        p.add_row(row(Family::Demand, id(users[u])), coeffs, Relation::Eq, demand[u]);
    }
    for d in 0..np {
        let coeffs = (0..nu).map(|u| (ix.psi[pair(u, d)], 1.0)).collect();
        p.add_row(row(Family::Capacity, id(procs[d])), coeffs, Relation::Le, processing[d].capacity);
    }
    for u in 0..nu {
        let coeffs = (0..np).map(|d| (ix.xi[pair(u, d)], 1.0)).collect();
        p.add_row(row(Family::SingleAssign, id(users[u])), coeffs, Relation::Eq, 1.0);
    }
    for u in 0..nu {
        for d in 0..np {
            let k = pair(u, d);
            p.add_row(
                row(Family::TrafficDemand, &pair_key(u, d)),
                vec![(ix.lambda_ud[k], 1.0), (ix.psi[k], -drr[u])],
                Relation::Eq,
                0.0,
            );
        }
    }
    for u in 0..nu {
        for d in 0..np {
            let k = pair(u, d);
            for m in 0..topology.nodes().len() {
                let mut coeffs: Vec<(usize, f64)> = Vec::new();
                coeffs.extend(topology.out_links(m).iter().map(|&l| (fl(u, d, l), 1.0)));
                coeffs.extend(topology.in_links(m).iter().map(|&l| (fl(u, d, l), -1.0)));
                if m == users[u] {
                    coeffs.push((ix.lambda_ud[k], -1.0));
                }
                if m == procs[d] {
                    coeffs.push((ix.lambda_ud[k], 1.0));
                }
                p.add_row(row(Family::FlowCons, &format!("{},{}", pair_key(u, d), id(m))), coeffs, Relation::Eq, 0.0);
            }
        }
    }
    for l in 0..ne {
        let mut coeffs = Vec::with_capacity(nu * np);
        for u in 0..nu {
            for d in 0..np {
                coeffs.push((fl(u, d, l), 1.0));
            }
        }
        p.add_row(row(Family::LinkCap, &link_key(l)), coeffs, Relation::Le, links[l].capacity);
    }

    // Activation linking.
    for u in 0..nu {
        for d in 0..np {
            let k = pair(u, d);
            p.add_row(row(Family::AssignAct, &pair_key(u, d)), vec![(ix.xi[k], demand[u]), (ix.psi[k], -1.0)], Relation::Ge, 0.0);
        }
    }
    for u in 0..nu {
        for d in 0..np {
            let k = pair(u, d);
            let z = 1.0 / options.psi_min;
            p.add_row(row(Family::AssignIdle, &pair_key(u, d)), vec![(ix.xi[k], 1.0), (ix.psi[k], -z)], Relation::Le, 0.0);
        }
    }
    for d in 0..np {
        let mut coeffs = vec![(ix.beta[d], nu as f64)];
        coeffs.extend((0..nu).map(|u| (ix.xi[pair(u, d)], -1.0)));
        p.add_row(row(Family::NodeAct, id(procs[d])), coeffs, Relation::Ge, 0.0);
    }
    for d in 0..np {
        let mut coeffs = vec![(ix.beta[d], 1.0)];
        coeffs.extend((0..nu).map(|u| (ix.xi[pair(u, d)], -1.0)));
        p.add_row(row(Family::NodeIdle, id(procs[d])), coeffs, Relation::Le, 0.0);
    }
    let groups: [(Family, Family, u8); 3] =
        [(Family::DevAct, Family::DevIdle, 2), (Family::DstAct, Family::DstIdle, 1), (Family::SrcAct, Family::SrcIdle, 0)];
    for (act, idle, kind) in groups {
        let members: Vec<&TrackedDevice> = ix
            .devices
            .iter()
            .filter(|dev| {
                let k = match dev.group {
                    DeviceGroup::SourceUser | DeviceGroup::SourceAp(_) => 0u8,
                    DeviceGroup::ProcessingUser | DeviceGroup::ProcessingAp(_) | DeviceGroup::Onu => 1,
                    DeviceGroup::Network => 2,
                };
                k == kind
            })
            .collect();
        for dev in &members {
            p.add_row(row(act, id(dev.node)), vec![(dev.theta, z_traffic), (dev.traffic, -1.0)], Relation::Ge, 0.0);
        }
        for dev in &members {
            p.add_row(row(idle, id(dev.node)), vec![(dev.theta, 1.0), (dev.traffic, -z_idle)], Relation::Le, 0.0);
        }
    }

    if let Some(dc) = &ix.delay {
        let pw = pw_set.expect("checked above");
        let z_ed: f64 = pw.iter().map(|w| w.ub * US_PER_S).sum();
        for u in 0..nu {
            for d in 0..np {
                let k = pair(u, d);
                let mut coeffs = vec![(dc.ld[k], 1.0)];
                coeffs.extend((0..ne).map(|l| (dc.x[k * ne + l], -1.0)));
                p.add_row(row(Family::PathDelay, &pair_key(u, d)), coeffs, Relation::Eq, 0.0);
            }
        }
        let mut coeffs = vec![(dc.td, 1.0)];
        coeffs.extend(dc.ed.iter().map(|&c| (c, -1.0)));
        p.add_row(row(Family::TotalDelay, "td"), coeffs, Relation::Eq, 0.0);
        for l in 0..ne {
            let mut coeffs = vec![(dc.tr[l], 1.0)];
            for u in 0..nu {
                for d in 0..np {
                    coeffs.push((fl(u, d, l), -1.0));
                }
            }
            p.add_row(row(Family::LinkLoad, &link_key(l)), coeffs, Relation::Eq, 0.0);
        }
        let arc_key = |u: usize, d: usize, l: usize| format!("{},{}", pair_key(u, d), link_key(l));
        for u in 0..nu {
            for d in 0..np {
                for l in 0..ne {
                    let j = pair(u, d) * ne + l;
                    p.add_row(row(Family::ArcIdle, &arc_key(u, d, l)), vec![(fl(u, d, l), z_idle), (dc.tb[j], -1.0)], Relation::Ge, 0.0);
                }
            }
        }
        for u in 0..nu {
            for d in 0..np {
                for l in 0..ne {
                    let j = pair(u, d) * ne + l;
                    let z = traffic[u].min(links[l].capacity);
                    p.add_row(row(Family::ArcAct, &arc_key(u, d, l)), vec![(fl(u, d, l), 1.0), (dc.tb[j], -z)], Relation::Le, 0.0);
                }
            }
        }
        for u in 0..nu {
            for d in 0..np {
                for l in 0..ne {
                    let j = pair(u, d) * ne + l;
                    p.add_row(row(Family::XCap, &arc_key(u, d, l)), vec![(dc.x[j], 1.0), (dc.tb[j], -pw[l].ub * US_PER_S)], Relation::Le, 0.0);
                }
            }
        }
        for u in 0..nu {
            for d in 0..np {
                for l in 0..ne {
                    let j = pair(u, d) * ne + l;
                    p.add_row(row(Family::XH, &arc_key(u, d, l)), vec![(dc.x[j], 1.0), (dc.h[l], -1.0)], Relation::Le, 0.0);
                }
            }
        }
        for u in 0..nu {
            for d in 0..np {
                for l in 0..ne {
                    let j = pair(u, d) * ne + l;
                    p.add_row(
                        row(Family::XEnv, &arc_key(u, d, l)),
                        vec![(dc.x[j], 1.0), (dc.h[l], -1.0), (dc.tb[j], -pw[l].ub * US_PER_S)],
                        Relation::Ge,
                        -pw[l].ub * US_PER_S,
                    );
                }
            }
        }
        for l in 0..ne {
            p.add_row(row(Family::LinkIdle, &link_key(l)), vec![(dc.tr[l], z_idle), (dc.hb[l], -1.0)], Relation::Ge, 0.0);
        }
        for l in 0..ne {
            p.add_row(row(Family::LinkAct, &link_key(l)), vec![(dc.tr[l], 1.0), (dc.hb[l], -links[l].capacity)], Relation::Le, 0.0);
        }
        for l in 0..ne {
            for (s, seg) in pw[l].segments.iter().enumerate() {
                p.add_row(
                    row(Family::DelaySeg, &format!("{},{}", link_key(l), s + 1)),
                    vec![(dc.h[l], 1.0), (dc.tr[l], -seg.slope * US_PER_S)],
                    Relation::Ge,
                    seg.intercept * US_PER_S,
                );
            }
        }
        let mut coeffs: Vec<(usize, f64)> = dc.ed.iter().map(|&c| (c, 1.0)).collect();
        coeffs.extend(ix.beta.iter().map(|&c| (c, -z_ed)));
        p.add_row(row(Family::EdCap, "td"), coeffs, Relation::Le, 0.0);
        for u in 0..nu {
            let mut coeffs = vec![(dc.ed[u], 1.0)];
            coeffs.extend((0..np).map(|d| (dc.ld[pair(u, d)], -1.0)));
            p.add_row(row(Family::EdUb, id(users[u])), coeffs, Relation::Le, 0.0);
        }
        for u in 0..nu {
            for d in 0..np {
                let k = pair(u, d);
                let gate = if options.per_user_delay { ix.xi[k] } else { ix.beta[d] };
                p.add_row(
                    row(Family::EdLb, &pair_key(u, d)),
                    vec![(dc.ed[u], 1.0), (dc.ld[k], -1.0), (gate, -z_ed)],
                    Relation::Ge,
                    -z_ed,
                );
            }
        }
    }

    let mut objective = Vec::new();
    if weights.alpha != 0.0 {
        objective.push((ix.power.tpc, weights.alpha));
    }
    if let (Some(dc), true) = (&ix.delay, weights.beta != 0.0) {
        objective.push((dc.td, weights.beta / US_PER_S));
    }
    p.set_objective(objective, 0.0);

    let hash = model_hash(&p);
    Ok(MilpModel {
        problem: p,
        index,
        weights,
        options: options.clone(),
        topology: topology.clone(),
        demands: demands.clone(),
        processing,
        red_ap,
        pw_set: pw_set.map(|s| s.to_vec()),
        hash,
    })
}
