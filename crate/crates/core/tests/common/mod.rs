//! Shared fixtures for integration tests.
#![allow(dead_code)]

use fogpon::catalog::Wavelength;
use fogpon::delay_approx::{DelayConfig, PiecewiseDelay};
use fogpon::model::{DemandSet, MilpModel, UserDemand};
use fogpon::topology::{Medium, Node, Role, Topology, TopologyBuilder};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DRR: f64 = 0.05;

pub struct Fixture {
    pub topology: Topology,
    pub demands: DemandSet,
    pub pw: Vec<PiecewiseDelay>,
}

const WAVELENGTHS: [Wavelength; 4] = [Wavelength::Red, Wavelength::Yellow, Wavelength::Green, Wavelength::Blue];
const CAPACITIES: [f64; 3] = [2.5, 10.0, 40.0];

/// Random tree with two source users behind one access point, 2 to 4
/// processing leaves and transit devices filling the rest: 7 nodes, 6
/// bidirectional edges, 12 links. Trees give every pair a unique path, so
/// the single-path oracle and the flow model agree.
pub fn tiny_instance(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = TopologyBuilder::new();
    let u1 = b.add_node(Node::new("u1", Role::UdSource));
    let u2 = b.add_node(Node::new("u2", Role::UdSource));
    let ap = b.add_node(Node::new("ap", Role::ApSource).with_wavelength(*WAVELENGTHS.choose(&mut rng).unwrap()));
    b.connect(u1, ap, 2.5, Medium::VlcUplink);
    b.connect(u2, ap, 2.5, Medium::VlcUplink);

    let k = rng.random_range(2..=4);
    let mut proc_roles = [Role::UdProcessing, Role::Rfs, Role::Bfs, Role::Cfs, Role::Ccs];
    proc_roles.shuffle(&mut rng);
    let transit_roles = [Role::Onu, Role::ApProcessing, Role::EthernetSwitch, Role::Olt];
    let mut attach = vec![ap];
    for t in 0..(4 - k) {
        let role = transit_roles[rng.random_range(0..transit_roles.len())];
        let mut node = Node::new(format!("t{t}"), role);
        if role == Role::ApProcessing {
            node = node.with_wavelength(*WAVELENGTHS.choose(&mut rng).unwrap());
        }
        let idx = b.add_node(node);
        let parent = attach[rng.random_range(0..attach.len())];
        b.connect(parent, idx, *CAPACITIES.choose(&mut rng).unwrap(), Medium::FiberP2p);
        attach.push(idx);
    }
    for (i, &role) in proc_roles.iter().take(k).enumerate() {
        let idx = b.add_node(Node::new(format!("p{i}"), role));
        let parent = attach[rng.random_range(0..attach.len())];
        b.connect(parent, idx, *CAPACITIES.choose(&mut rng).unwrap(), Medium::FiberP2p);
    }
    let topology = b.build().expect("fixture topology");
    let demands = DemandSet::new(
        ["u1", "u2"]
            .iter()
            .map(|u| UserDemand { user: u.to_string(), demand_gflops: rng.random_range(12..=40) as f64 / 2.0, drr: DRR })
            .collect(),
    );
    let pw = DelayConfig::default().for_topology(&topology).expect("fixture delays");
    Fixture { topology, demands, pw }
}

/// True when every user's flow support is a single simple path from the
/// user to exactly one processing node.
pub fn flows_are_paths(model: &MilpModel, x: &[f64]) -> bool {
    let ix = &model.index;
    let links = model.topology.links();
    let np = ix.procs.len();
    for (u, &user) in ix.users.iter().enumerate() {
        let used: Vec<(usize, usize)> = (0..np)
            .flat_map(|d| (0..ix.num_links).map(move |l| (d, l)))
            .filter(|&(d, l)| x[ix.flow[ix.pair_link(u, d, l)]] > 1e-7)
            .collect();
        let dests: Vec<usize> = {
            let mut v: Vec<usize> = used.iter().map(|&(d, _)| d).collect();
            v.dedup();
            v
        };
        if dests.len() != 1 {
            return false;
        }
        let target = ix.procs[dests[0]];
        let mut at = user;
        let mut steps = 0;
        while at != target {
            let next: Vec<usize> = used.iter().filter(|&&(_, l)| links[l].from == at).map(|&(_, l)| links[l].to).collect();
            if next.len() != 1 || steps > used.len() {
                return false;
            }
            at = next[0];
            steps += 1;
        }
        if steps != used.len() {
            return false;
        }
    }
    true
}
