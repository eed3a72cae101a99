//! Brute-force reference for tiny instances: every single-node placement
//! combined with every simple-path routing, evaluated directly from the
//! topology, catalog and delay curves without building a MILP.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::catalog::{Catalog, CatalogError, DeviceClass, Wavelength};
use crate::delay_approx::PiecewiseDelay;
use crate::model::{DemandSet, PowerBreakdown, Weights};
use crate::topology::{simple_paths, Role, Topology};

/// Slack allowed on capacity and delay-cap comparisons.
const FEAS_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{got} users exceed the oracle limit of {limit}")]
    TooManyUsers { got: usize, limit: usize },
    #[error("{got} processing nodes exceed the oracle limit of {limit}")]
    TooManyProcessing { got: usize, limit: usize },
    #[error("more than {limit} simple paths from {from} to {to}")]
    TooManyPaths { from: String, to: String, limit: usize },
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("delay weight is positive but no delay approximations were given")]
    MissingDelay,
    #[error("delay approximations cover {got} links, topology has {expected}")]
    DelayCount { got: usize, expected: usize },
    #[error("no profile for {class} (node {node})")]
    MissingProfile { node: String, class: String },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleLimits {
    pub max_users: usize,
    pub max_processing: usize,
    pub max_paths: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits { max_users: 3, max_processing: 8, max_paths: 50 }
    }
}

/// One user's traffic and the links it traverses.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRoute {
    /// Gbit/s.
    pub traffic: f64,
    pub links: Vec<usize>,
}

/// A feasible placement with one path per user.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    /// Destination node id per user, in demand order.
    pub assignment: Vec<String>,
    /// Node ids along each user's path.
    pub paths: Vec<Vec<String>>,
    pub power: PowerBreakdown,
    /// Per-user delay in seconds; empty without delay curves.
    pub user_delay: Vec<f64>,
    pub td: Option<f64>,
    pub objective: f64,
    #[serde(skip)]
    key: Vec<usize>,
}

impl Candidate {
    pub fn assignment_string(&self, users: &[String]) -> String {
        users.iter().zip(&self.assignment).map(|(u, d)| format!("{u}:{d}")).collect::<Vec<_>>().join(";")
    }

    pub fn active_nodes(&self) -> Vec<String> {
        let mut out = self.assignment.clone();
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub users: Vec<String>,
    /// Feasible candidates, best first; ties broken by the lexicographic
    /// (assignment, path) index tuple.
    pub ranking: Vec<Candidate>,
    /// Combinations examined, feasible or not.
    pub evaluated: usize,
}

impl OracleReport {
    pub fn best(&self) -> Option<&Candidate> {
        self.ranking.first()
    }

    /// `rank,objective,tpc_w,pc_w,pn_w,td_s,assignments,paths`
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "objective", "tpc_w", "pc_w", "pn_w", "td_s", "assignments", "paths"])?;
        for (i, c) in self.ranking.iter().enumerate() {
            let paths = c.paths.iter().map(|p| p.join(">")).collect::<Vec<_>>().join(";");
            w.write_record([
                (i + 1).to_string(),
                format!("{:.12e}", c.objective),
                format!("{:.9}", c.power.tpc),
                format!("{:.9}", c.power.pc),
                format!("{:.9}", c.power.pn),
                c.td.map_or(String::new(), |t| format!("{t:.9e}")),
                c.assignment_string(&self.users),
                paths,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-user delay of a routing: every link's delay is evaluated at the total
/// load of all users crossing it, and each user pays the sum over its path.
pub fn exact_delay_of_routing(routing: &[UserRoute], pw_set: &[PiecewiseDelay]) -> Vec<f64> {
    let loads = route_loads(routing, pw_set.len());
    routing.iter().map(|r| r.links.iter().map(|&l| pw_set[l].eval(loads[l])).sum()).collect()
}

fn route_loads(routing: &[UserRoute], num_links: usize) -> Vec<f64> {
    let mut loads = vec![0.0; num_links];
    for r in routing {
        for &l in &r.links {
            loads[l] += r.traffic;
        }
    }
    loads
}

/// Power draw of a networking device: idle plus per-Gbit/s cost, with the
/// term it belongs to.
#[derive(Debug, Clone, Copy)]
enum Term {
    SourceAp(Wavelength),
    ProcessingAp(Wavelength),
    Onu,
    Network,
}

struct Priced {
    term: Term,
    idle: f64,
    per: f64,
}

fn price_devices(topology: &Topology, catalog: &Catalog) -> Result<Vec<Option<Priced>>, OracleError> {
    let per_gbps = |class: DeviceClass, node: &str| -> Result<(f64, f64), OracleError> {
        let p = catalog
            .get(class)
            .ok_or_else(|| OracleError::MissingProfile { node: node.to_string(), class: class.to_string() })?;
        Ok((p.idle_power, (p.max_power - p.idle_power) / p.capacity))
    };
    topology
        .nodes()
        .iter()
        .map(|n| {
            let term = match n.role {
                Role::ApSource => Term::SourceAp(n.wavelength.ok_or_else(|| missing(&n.id, "access point class"))?),
                Role::ApProcessing => {
                    Term::ProcessingAp(n.wavelength.ok_or_else(|| missing(&n.id, "access point class"))?)
                }
                Role::Onu => Term::Onu,
                r if r.is_network_device() => Term::Network,
                _ => return Ok(None),
            };
            let class = n.device_class().expect("priced roles have a class");
            if class == DeviceClass::Olt && catalog.get(class).is_none() {
                return Ok(None);
            }
            let (idle, per) = per_gbps(class, &n.id)?;
            Ok(Some(Priced { term, idle, per }))
        })
        .collect()
}

fn missing(node: &str, class: &str) -> OracleError {
    OracleError::MissingProfile { node: node.to_string(), class: class.to_string() }
}

/// Enumerates every assignment of users to processing nodes and every
/// combination of simple paths, and ranks the feasible ones by
/// `alpha * TPC + beta * TD`.
pub fn enumerate_placements(
    topology: &Topology,
    demands: &DemandSet,
    catalog: &Catalog,
    pw_set: Option<&[PiecewiseDelay]>,
    weights: Weights,
    limits: &OracleLimits,
) -> Result<OracleReport, OracleError> {
    let nu = demands.len();
    if nu > limits.max_users {
        return Err(OracleError::TooManyUsers { got: nu, limit: limits.max_users });
    }
    let procs = topology.processing_nodes();
    if procs.len() > limits.max_processing {
        return Err(OracleError::TooManyProcessing { got: procs.len(), limit: limits.max_processing });
    }
    if let Some(pw) = pw_set {
        if pw.len() != topology.links().len() {
            return Err(OracleError::DelayCount { got: pw.len(), expected: topology.links().len() });
        }
    } else if weights.beta != 0.0 {
        return Err(OracleError::MissingDelay);
    }
    let users: Vec<usize> = demands
        .users()
        .iter()
        .map(|u| topology.index_of(&u.user).map_err(|_| OracleError::UnknownUser(u.user.clone())))
        .collect::<Result<_, _>>()?;
    let mut proc_params = Vec::with_capacity(procs.len());
    for &d in &procs {
        let n = topology.node(d);
        let class = n.device_class().ok_or_else(|| missing(&n.id, "processing class"))?;
        let p = catalog.get(class).ok_or_else(|| missing(&n.id, class.as_str()))?;
        proc_params.push((p.capacity, p.idle_power, (p.max_power - p.idle_power) / p.capacity));
    }
    let priced = price_devices(topology, catalog)?;
    let red = catalog.get(DeviceClass::ApRed).ok_or_else(|| missing("access points", "ap-red"))?;
    let red = (red.idle_power, (red.max_power - red.idle_power) / red.capacity);

    // paths[u][d]: simple paths from user u to processing node d.
    let mut paths = Vec::with_capacity(nu);
    for &u in &users {
        let mut per_dest = Vec::with_capacity(procs.len());
        for &d in &procs {
            let ps = simple_paths(topology, u, d, limits.max_paths);
            if ps.len() > limits.max_paths {
                return Err(OracleError::TooManyPaths {
                    from: topology.node(u).id.clone(),
                    to: topology.node(d).id.clone(),
                    limit: limits.max_paths,
                });
            }
            per_dest.push(ps);
        }
        paths.push(per_dest);
    }

    let demand: Vec<f64> = demands.users().iter().map(|u| u.demand_gflops).collect();
    let traffic: Vec<f64> = demands.users().iter().map(|u| u.traffic_gbps()).collect();
    let with_delay = weights.beta != 0.0;
    let mut ranking = Vec::new();
    let mut evaluated = 0usize;

    let mut assign = vec![0usize; nu];
    'assign: loop {
        // Processing capacity depends only on the assignment.
        let mut load = vec![0.0; procs.len()];
        for u in 0..nu {
            load[assign[u]] += demand[u];
        }
        let fits = load.iter().zip(&proc_params).all(|(&l, &(cap, _, _))| l <= cap + FEAS_EPS);
        let counts: Vec<usize> = (0..nu).map(|u| paths[u][assign[u]].len()).collect();
        if counts.contains(&0) {
            // Unreachable destination: nothing to enumerate.
        } else {
            let mut choice = vec![0usize; nu];
            loop {
                evaluated += 1;
                if fits {
                    let routing: Vec<UserRoute> = (0..nu)
                        .map(|u| UserRoute { traffic: traffic[u], links: paths[u][assign[u]][choice[u]].clone() })
                        .collect();
                    if let Some(c) = evaluate(
                        topology, &routing, &assign, &choice, &load, &proc_params, &procs, &priced, red, pw_set,
                        with_delay, weights,
                    ) {
                        ranking.push(c);
                    }
                }
                if !advance(&mut choice, &counts) {
                    break;
                }
            }
        }
        let bases = vec![procs.len(); nu];
        if !advance(&mut assign, &bases) {
            break 'assign;
        }
    }
    ranking.sort_by(|a, b| a.objective.total_cmp(&b.objective).then_with(|| a.key.cmp(&b.key)));
    let users = demands.users().iter().map(|u| u.user.clone()).collect();
    Ok(OracleReport { users, ranking, evaluated })
}

/// Odometer increment over `digits` with per-position `bases`, last
/// position fastest. Returns false after the final combination.
fn advance(digits: &mut [usize], bases: &[usize]) -> bool {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if digits[i] < bases[i] {
            return true;
        }
        digits[i] = 0;
    }
    false
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    topology: &Topology,
    routing: &[UserRoute],
    assign: &[usize],
    choice: &[usize],
    load: &[f64],
    proc_params: &[(f64, f64, f64)],
    procs: &[usize],
    priced: &[Option<Priced>],
    red: (f64, f64),
    pw_set: Option<&[PiecewiseDelay]>,
    with_delay: bool,
    weights: Weights,
) -> Option<Candidate> {
    let links = topology.links();
    let loads = route_loads(routing, links.len());
    if loads.iter().zip(links).any(|(&t, l)| t > l.capacity + FEAS_EPS) {
        return None;
    }
    if with_delay {
        let pw = pw_set.expect("checked by caller");
        if loads.iter().zip(pw).any(|(&t, w)| w.eval(t) > w.ub * (1.0 + FEAS_EPS)) {
            return None;
        }
    }

    let mut b = PowerBreakdown::default();
    for (d, &l) in load.iter().enumerate() {
        if l > 0.0 {
            let (_, idle, unit) = proc_params[d];
            b.pc += idle + unit * l;
        }
    }
    // A device sees a user's traffic once per incident path link.
    let mut dev_traffic = vec![0.0; topology.nodes().len()];
    for r in routing {
        for &l in &r.links {
            dev_traffic[links[l].from] += r.traffic;
            dev_traffic[links[l].to] += r.traffic;
        }
    }
    for (i, p) in priced.iter().enumerate() {
        let Some(p) = p else { continue };
        let t = dev_traffic[i];
        if t <= 0.0 {
            continue;
        }
        let own = p.idle + p.per * t;
        let all_ap = red.0 + red.1 * t;
        match p.term {
            Term::SourceAp(w) => {
                b.pap += all_ap;
                match w {
                    Wavelength::Red => b.ar += own,
                    Wavelength::Yellow => b.ay += own,
                    Wavelength::Green | Wavelength::Blue => b.agb += own,
                }
            }
            Term::ProcessingAp(w) => {
                b.pcp += all_ap;
                match w {
                    Wavelength::Red => b.pr += own,
                    Wavelength::Yellow => b.py += own,
                    Wavelength::Green | Wavelength::Blue => b.pgb += own,
                }
            }
            Term::Onu => b.ponu += own,
            Term::Network => b.pq += own,
        }
    }
    b.pn = b.pap + b.pcp + b.ar + b.ay + b.agb + b.pr + b.py + b.pgb + b.ponu + b.pq;
    b.tpc = b.pc + b.pn;

    let user_delay = pw_set.map(|pw| exact_delay_of_routing(routing, pw)).unwrap_or_default();
    let td = pw_set.map(|_| user_delay.iter().sum::<f64>());
    let objective = weights.alpha * b.tpc + weights.beta * td.unwrap_or(0.0);
    let id = |i: usize| topology.node(i).id.clone();
    let paths = routing
        .iter()
        .map(|r| {
            let mut nodes = vec![id(links[r.links[0]].from)];
            nodes.extend(r.links.iter().map(|&l| id(links[l].to)));
            nodes
        })
        .collect();
    Some(Candidate {
        assignment: assign.iter().map(|&d| id(procs[d])).collect(),
        paths,
        power: b,
        user_delay,
        td,
        objective,
        key: assign.iter().chain(choice).copied().collect(),
    })
}
