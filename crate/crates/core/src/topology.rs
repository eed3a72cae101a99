//! Node/link graph of the in-building P2P-PON backhaul and the fog hierarchy
//! above it.
//!
//! Each room holds eight access points in four groups of two plus a room fog
//! server behind its ONU, all hanging off a passive backplane. The first AP of
//! every group is the group relay and owns the group's external fiber: either
//! a point-to-point link to a relay in another room or a port on the AWG that
//! feeds the OLT. Above the OLT sit the BFS, the CFS behind an Ethernet
//! switch, the MFS behind the metro aggregation switch and edge router, and
//! the cloud behind the optical switch and core router.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, DeviceClass, Wavelength};

pub const GROUPS_PER_ROOM: usize = 4;
pub const APS_PER_GROUP: usize = 2;
pub const APS_PER_ROOM: usize = GROUPS_PER_ROOM * APS_PER_GROUP;

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("at least one room is required")]
    NoRooms,
    #[error("placement references room {room}, but only {rooms} rooms exist")]
    NoSuchRoom { room: usize, rooms: usize },
    #[error("placement references access point {ap} in room {room}; valid range is 1..={APS_PER_ROOM}")]
    NoSuchAp { room: usize, ap: usize },
    #[error("access point {0} would serve both source and processing devices")]
    MixedAccessPoint(String),
    #[error("no connectivity row defined for room {0}")]
    MissingConnectivity(usize),
    #[error("connectivity map is not symmetric at room {room} group {group}")]
    AsymmetricConnectivity { room: usize, group: usize },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("malformed topology document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    UdSource,
    UdProcessing,
    ApSource,
    ApProcessing,
    Onu,
    Rfs,
    Bfs,
    Cfs,
    Mfs,
    Ccs,
    Olt,
    EthernetSwitch,
    AggregationSwitch,
    EdgeRouter,
    OpticalSwitch,
    CoreRouter,
    AwgPassive,
    BackplanePassive,
}

impl Role {
    pub fn is_processing(self) -> bool {
        matches!(self, Role::UdProcessing | Role::Rfs | Role::Bfs | Role::Cfs | Role::Mfs | Role::Ccs)
    }

    pub fn is_access_point(self) -> bool {
        matches!(self, Role::ApSource | Role::ApProcessing)
    }

    pub fn is_passive(self) -> bool {
        matches!(self, Role::AwgPassive | Role::BackplanePassive)
    }

    /// OLT, switches and routers.
    pub fn is_network_device(self) -> bool {
        matches!(
            self,
            Role::Olt
                | Role::EthernetSwitch
                | Role::AggregationSwitch
                | Role::EdgeRouter
                | Role::OpticalSwitch
                | Role::CoreRouter
        )
    }

    /// Catalog class backing this role, if the role draws power at all.
    pub fn device_class(self, wavelength: Option<Wavelength>) -> Option<DeviceClass> {
        Some(match self {
            Role::UdSource | Role::AwgPassive | Role::BackplanePassive => return None,
            Role::UdProcessing => DeviceClass::Ud,
            Role::ApSource | Role::ApProcessing => DeviceClass::access_point(wavelength?),
            Role::Onu => DeviceClass::Onu,
            Role::Rfs => DeviceClass::Rfs,
            Role::Bfs => DeviceClass::Bfs,
            Role::Cfs => DeviceClass::Cfs,
            Role::Mfs => DeviceClass::Mfs,
            Role::Ccs => DeviceClass::Ccs,
            Role::Olt => DeviceClass::Olt,
            Role::EthernetSwitch => DeviceClass::EthernetSwitch,
            Role::AggregationSwitch => DeviceClass::AggregationSwitch,
            Role::EdgeRouter => DeviceClass::EdgeRouter,
            Role::OpticalSwitch => DeviceClass::OpticalSwitch,
            Role::CoreRouter => DeviceClass::CoreRouter,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength: Option<Wavelength>,
    #[serde(default)]
    pub is_relay: bool,
}

impl Node {
    pub fn new(id: impl Into<String>, role: Role) -> Self {
        Node { id: id.into(), role, room: None, group: None, wavelength: None, is_relay: false }
    }

    pub fn with_wavelength(mut self, wavelength: Wavelength) -> Self {
        self.wavelength = Some(wavelength);
        self
    }

    pub fn device_class(&self) -> Option<DeviceClass> {
        self.role.device_class(self.wavelength)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Medium {
    VlcDownlink,
    VlcUplink,
    Backplane,
    FiberP2p,
    FiberAwg,
    Copper,
}

/// Directed link `from -> to`, indices into [`Topology::nodes`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    /// Gbit/s.
    pub capacity: f64,
    pub medium: Medium,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    adjacency: Vec<BTreeSet<usize>>,
    out_links: Vec<Vec<usize>>,
    in_links: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TopologyDocument {
    nodes: Vec<Node>,
    links: Vec<LinkRecord>,
}

#[derive(Serialize, Deserialize)]
struct LinkRecord {
    from: String,
    to: String,
    capacity: f64,
    medium: Medium,
}

impl Topology {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn index_of(&self, id: &str) -> Result<usize, TopologyError> {
        self.index.get(id).copied().ok_or_else(|| TopologyError::UnknownNode(id.to_string()))
    }

    /// Link-adjacent nodes of `id` in either direction.
    pub fn neighbors(&self, id: &str) -> Result<Vec<&str>, TopologyError> {
        let idx = self.index_of(id)?;
        Ok(self.adjacency[idx].iter().map(|&n| self.nodes[n].id.as_str()).collect())
    }

    pub fn neighbor_indices(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[idx].iter().copied()
    }

    pub fn out_links(&self, idx: usize) -> &[usize] {
        &self.out_links[idx]
    }

    pub fn in_links(&self, idx: usize) -> &[usize] {
        &self.in_links[idx]
    }

    pub fn link_between(&self, from: usize, to: usize) -> Option<usize> {
        self.out_links[from].iter().copied().find(|&l| self.links[l].to == to)
    }

    pub fn nodes_with_role(&self, role: Role) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().enumerate().filter(move |(_, n)| n.role == role).map(|(i, _)| i)
    }

    pub fn sources(&self) -> Vec<usize> {
        self.nodes_with_role(Role::UdSource).collect()
    }

    /// Processing nodes in node order.
    pub fn processing_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].role.is_processing()).collect()
    }

    /// Builds a topology from raw parts; links need not be symmetric here,
    /// [`validate`] reports that.
    pub fn from_parts(nodes: Vec<Node>, links: Vec<Link>) -> Result<Self, TopologyError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(TopologyError::DuplicateNode(n.id.clone()));
            }
        }
        let mut adjacency = vec![BTreeSet::new(); nodes.len()];
        let mut out_links = vec![Vec::new(); nodes.len()];
        let mut in_links = vec![Vec::new(); nodes.len()];
        for (l, link) in links.iter().enumerate() {
            for end in [link.from, link.to] {
                if end >= nodes.len() {
                    return Err(TopologyError::UnknownNode(format!("#{end}")));
                }
            }
            adjacency[link.from].insert(link.to);
            adjacency[link.to].insert(link.from);
            out_links[link.from].push(l);
            in_links[link.to].push(l);
        }
        Ok(Topology { nodes, links, adjacency, out_links, in_links, index })
    }

    pub fn to_json(&self) -> String {
        let doc = TopologyDocument {
            nodes: self.nodes.clone(),
            links: self
                .links
                .iter()
                .map(|l| LinkRecord {
                    from: self.nodes[l.from].id.clone(),
                    to: self.nodes[l.to].id.clone(),
                    capacity: l.capacity,
                    medium: l.medium,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("topology serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        let doc: TopologyDocument =
            serde_json::from_str(text).map_err(|e| TopologyError::Malformed(e.to_string()))?;
        let ids: HashMap<&str, usize> = doc.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
        let lookup = |id: &str| ids.get(id).copied().ok_or_else(|| TopologyError::UnknownNode(id.to_string()));
        let links = doc
            .links
            .iter()
            .map(|r| Ok(Link { from: lookup(&r.from)?, to: lookup(&r.to)?, capacity: r.capacity, medium: r.medium }))
            .collect::<Result<Vec<_>, TopologyError>>()?;
        Topology::from_parts(doc.nodes, links)
    }
}

/// Incremental construction with symmetric link pairs.
#[derive(Debug, Default)]
pub struct TopologyBuilder {
    nodes: Vec<Node>,
    links: Vec<Link>,
}

impl TopologyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// Adds `a -> b` and `b -> a` with the same capacity.
    pub fn connect(&mut self, a: usize, b: usize, capacity: f64, medium: Medium) {
        let back = match medium {
            Medium::VlcDownlink => Medium::VlcUplink,
            Medium::VlcUplink => Medium::VlcDownlink,
            m => m,
        };
        self.links.push(Link { from: a, to: b, capacity, medium });
        self.links.push(Link { from: b, to: a, capacity, medium: back });
    }

    pub fn build(self) -> Result<Topology, TopologyError> {
        Topology::from_parts(self.nodes, self.links)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UserKind {
    Source,
    Processing,
}

/// Attachment of one user device to an access point (`room` 1-based, `ap`
/// 1..=8 counted group by group, relay first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAttachment {
    pub room: usize,
    pub ap: usize,
    pub kind: UserKind,
}

impl UserAttachment {
    pub fn source(room: usize, ap: usize) -> Self {
        UserAttachment { room, ap, kind: UserKind::Source }
    }

    pub fn processing(room: usize, ap: usize) -> Self {
        UserAttachment { room, ap, kind: UserKind::Processing }
    }
}

pub fn ap_position(group: usize, slot: usize) -> usize {
    (group - 1) * APS_PER_GROUP + slot
}

/// Round-robin source placement: user `k` of a room goes to group `k mod 4`,
/// relay AP first, then the second AP of each group.
pub fn round_robin_sources(room: usize, count: usize) -> Vec<UserAttachment> {
    (0..count)
        .map(|k| {
            let group = k % GROUPS_PER_ROOM + 1;
            let slot = (k / GROUPS_PER_ROOM) % APS_PER_GROUP + 1;
            UserAttachment::source(room, ap_position(group, slot))
        })
        .collect()
}

/// Processing devices sit behind the non-relay AP of the even groups.
pub fn round_robin_processing(room: usize, count: usize) -> Vec<UserAttachment> {
    (0..count)
        .map(|k| {
            let group = if k % 2 == 0 { 2 } else { 4 };
            UserAttachment::processing(room, ap_position(group, 2))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupUplink {
    Olt,
    Room { room: usize, group: usize },
}

/// External link of each group relay, one row of four entries per room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityMap {
    pub rows: Vec<[GroupUplink; GROUPS_PER_ROOM]>,
}

impl ConnectivityMap {
    /// Group 1 of every room goes to the OLT. Groups 2..4 take rounds of a
    /// round-robin tournament between rooms; a group whose round gives its
    /// room a bye (or that has no round) also goes to the OLT. For four rooms
    /// room 1 reaches rooms 3, 2 and 4 through groups 2, 3 and 4.
    pub fn round_robin(rooms: usize) -> Self {
        let mut rows = vec![[GroupUplink::Olt; GROUPS_PER_ROOM]; rooms];
        if rooms >= 2 {
            let teams = rooms + rooms % 2;
            let rounds = teams - 1;
            for group in 2..=GROUPS_PER_ROOM {
                let round = (group - 1) % (GROUPS_PER_ROOM - 1);
                if round >= rounds {
                    continue;
                }
                for (a, b) in tournament_round(teams, round) {
                    if a < rooms && b < rooms {
                        rows[a][group - 1] = GroupUplink::Room { room: b + 1, group };
                        rows[b][group - 1] = GroupUplink::Room { room: a + 1, group };
                    }
                }
            }
        }
        ConnectivityMap { rows }
    }

    fn check(&self, rooms: usize) -> Result<(), TopologyError> {
        if self.rows.len() < rooms {
            return Err(TopologyError::MissingConnectivity(self.rows.len() + 1));
        }
        for (r, row) in self.rows.iter().take(rooms).enumerate() {
            for (g, up) in row.iter().enumerate() {
                if let GroupUplink::Room { room, group } = *up {
                    let back = ((1..=rooms).contains(&room) && (1..=GROUPS_PER_ROOM).contains(&group))
                        .then(|| self.rows[room - 1][group - 1]);
                    if room == r + 1 || back != Some(GroupUplink::Room { room: r + 1, group: g + 1 }) {
                        return Err(TopologyError::AsymmetricConnectivity { room: r + 1, group: g + 1 });
                    }
                }
            }
        }
        Ok(())
    }
}

// circle method; team `teams - 1` stays fixed
fn tournament_round(teams: usize, round: usize) -> Vec<(usize, usize)> {
    let n = teams - 1;
    let mut pairs = vec![(round, teams - 1)];
    for i in 1..teams / 2 {
        pairs.push(((round + i) % n, (round + n - i) % n));
    }
    pairs
}

/// Link capacities in Gbit/s. `None` means "take it from the catalog".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkCapacities {
    pub vlc: Option<f64>,
    pub backplane: f64,
    pub p2p_fiber: f64,
    pub onu: Option<f64>,
    pub upstream: f64,
}

impl Default for LinkCapacities {
    fn default() -> Self {
        LinkCapacities { vlc: None, backplane: 40.0, p2p_fiber: 10.0, onu: None, upstream: 40.0 }
    }
}

/// Builds the P2P-PON for `rooms` rooms with the given user placement.
pub fn build_p2p_pon(
    rooms: usize,
    placement: &[UserAttachment],
    catalog: &Catalog,
    caps: &LinkCapacities,
    connectivity: Option<&ConnectivityMap>,
) -> Result<Topology, TopologyError> {
    if rooms == 0 {
        return Err(TopologyError::NoRooms);
    }
    for p in placement {
        if p.room == 0 || p.room > rooms {
            return Err(TopologyError::NoSuchRoom { room: p.room, rooms });
        }
        if p.ap == 0 || p.ap > APS_PER_ROOM {
            return Err(TopologyError::NoSuchAp { room: p.room, ap: p.ap });
        }
    }
    let default_map;
    let map = match connectivity {
        Some(m) => m,
        None => {
            default_map = ConnectivityMap::round_robin(rooms);
            &default_map
        }
    };
    map.check(rooms)?;

    let ap_cap = |w: Wavelength| -> f64 {
        caps.vlc.unwrap_or_else(|| catalog.get(DeviceClass::access_point(w)).map_or(2.5, |p| p.capacity))
    };
    let onu_cap = caps.onu.unwrap_or_else(|| catalog.get(DeviceClass::Onu).map_or(10.0, |p| p.capacity));

    let mut b = TopologyBuilder::new();
    let olt = b.add_node(Node::new("olt", Role::Olt));
    let awg = b.add_node(Node::new("awg", Role::AwgPassive));
    let bfs = b.add_node(Node::new("bfs", Role::Bfs));
    let eth = b.add_node(Node::new("eth-sw", Role::EthernetSwitch));
    let cfs = b.add_node(Node::new("cfs", Role::Cfs));
    let agg = b.add_node(Node::new("agg-sw", Role::AggregationSwitch));
    let edge = b.add_node(Node::new("edge-rt", Role::EdgeRouter));
    let mfs = b.add_node(Node::new("mfs", Role::Mfs));
    let opt = b.add_node(Node::new("opt-sw", Role::OpticalSwitch));
    let core = b.add_node(Node::new("core-rt", Role::CoreRouter));
    let ccs = b.add_node(Node::new("ccs", Role::Ccs));
    let up = caps.upstream;
    b.connect(awg, olt, up, Medium::FiberAwg);
    b.connect(olt, bfs, up, Medium::Copper);
    b.connect(olt, eth, up, Medium::Copper);
    b.connect(eth, cfs, up, Medium::Copper);
    b.connect(olt, agg, up, Medium::FiberP2p);
    b.connect(agg, edge, up, Medium::Copper);
    b.connect(edge, mfs, up, Medium::Copper);
    b.connect(edge, opt, up, Medium::FiberP2p);
    b.connect(opt, core, up, Medium::FiberP2p);
    b.connect(core, ccs, up, Medium::Copper);

    // aps[room][ap-1]
    let mut aps = Vec::with_capacity(rooms);
    for room in 1..=rooms {
        let bp = b.add_node(Node { room: Some(room), ..Node::new(format!("r{room}.bp"), Role::BackplanePassive) });
        let mut room_aps = Vec::with_capacity(APS_PER_ROOM);
        for group in 1..=GROUPS_PER_ROOM {
            for slot in 1..=APS_PER_GROUP {
                let pos = ap_position(group, slot);
                let attached: Vec<UserKind> =
                    placement.iter().filter(|p| p.room == room && p.ap == pos).map(|p| p.kind).collect();
                let role = match (
                    attached.contains(&UserKind::Source),
                    attached.contains(&UserKind::Processing),
                ) {
                    (true, true) => return Err(TopologyError::MixedAccessPoint(format!("r{room}.ap{pos}"))),
                    (true, false) => Role::ApSource,
                    (false, true) => Role::ApProcessing,
                    (false, false) if group % 2 == 1 => Role::ApSource,
                    (false, false) => Role::ApProcessing,
                };
                let wavelength = match (group <= 2, slot) {
                    (true, 1) => Wavelength::Red,
                    (true, _) => Wavelength::Yellow,
                    (false, 1) => Wavelength::Green,
                    (false, _) => Wavelength::Blue,
                };
                let ap = b.add_node(Node {
                    room: Some(room),
                    group: Some(group),
                    wavelength: Some(wavelength),
                    is_relay: slot == 1,
                    ..Node::new(format!("r{room}.ap{pos}"), role)
                });
                b.connect(ap, bp, caps.backplane, Medium::Backplane);
                room_aps.push(ap);
            }
        }
        let onu = b.add_node(Node {
            room: Some(room),
            group: Some(GROUPS_PER_ROOM),
            ..Node::new(format!("r{room}.onu"), Role::Onu)
        });
        let rfs = b.add_node(Node {
            room: Some(room),
            group: Some(GROUPS_PER_ROOM),
            ..Node::new(format!("r{room}.rfs"), Role::Rfs)
        });
        b.connect(onu, bp, onu_cap, Medium::Backplane);
        b.connect(rfs, onu, onu_cap, Medium::Copper);
        aps.push(room_aps);
    }

    for (r, row) in map.rows.iter().take(rooms).enumerate() {
        for (g, uplink) in row.iter().enumerate() {
            let relay = aps[r][ap_position(g + 1, 1) - 1];
            match *uplink {
                GroupUplink::Olt => b.connect(relay, awg, caps.p2p_fiber, Medium::FiberAwg),
                GroupUplink::Room { room, group } if (room - 1, group - 1) > (r, g) => {
                    let peer = aps[room - 1][ap_position(group, 1) - 1];
                    b.connect(relay, peer, caps.p2p_fiber, Medium::FiberP2p);
                }
                GroupUplink::Room { .. } => {}
            }
        }
    }

    let (mut n_src, mut n_proc) = (0, 0);
    for p in placement {
        let ap = aps[p.room - 1][p.ap - 1];
        let w = b.nodes[ap].wavelength.expect("aps carry a wavelength");
        let (id, role) = match p.kind {
            UserKind::Source => {
                n_src += 1;
                (format!("ud{n_src}"), Role::UdSource)
            }
            UserKind::Processing => {
                n_proc += 1;
                (format!("pud{n_proc}"), Role::UdProcessing)
            }
        };
        let group = b.nodes[ap].group;
        let ud = b.add_node(Node { room: Some(p.room), group, ..Node::new(id, role) });
        b.connect(ud, ap, ap_cap(w), Medium::VlcUplink);
    }
    b.build()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub subject: String,
    pub rule: &'static str,
    pub detail: String,
}

/// All invariant violations; empty when the topology is well formed.
pub fn validate(topology: &Topology) -> Vec<Violation> {
    let mut out = Vec::new();
    let nodes = topology.nodes();
    let link_name = |l: &Link| format!("{}->{}", nodes[l.from].id, nodes[l.to].id);

    for l in topology.links() {
        if !(l.capacity.is_finite() && l.capacity > 0.0) {
            out.push(Violation {
                subject: link_name(l),
                rule: "positive-capacity",
                detail: format!("capacity {}", l.capacity),
            });
        }
        if l.from == l.to {
            out.push(Violation { subject: link_name(l), rule: "no-self-loop", detail: String::new() });
        }
        let mirrored = topology
            .out_links(l.to)
            .iter()
            .any(|&r| topology.links()[r].to == l.from && topology.links()[r].capacity == l.capacity);
        if !mirrored {
            out.push(Violation {
                subject: link_name(l),
                rule: "symmetric-links",
                detail: "no reverse link with equal capacity".into(),
            });
        }
    }

    // relay uniqueness and the room layout, for nodes that carry room/group data
    let mut groups: std::collections::BTreeMap<(usize, usize), (usize, usize)> = Default::default();
    for n in nodes.iter().filter(|n| n.role.is_access_point()) {
        match (n.room, n.group) {
            (Some(r), Some(g)) => {
                let e = groups.entry((r, g)).or_default();
                e.0 += 1;
                e.1 += n.is_relay as usize;
            }
            _ => out.push(Violation {
                subject: n.id.clone(),
                rule: "ap-membership",
                detail: "access point without room/group".into(),
            }),
        }
    }
    for (&(r, g), &(count, relays)) in &groups {
        if relays != 1 {
            out.push(Violation {
                subject: format!("room {r} group {g}"),
                rule: "relay-uniqueness",
                detail: format!("{relays} relays"),
            });
        }
        if count != APS_PER_GROUP {
            out.push(Violation {
                subject: format!("room {r} group {g}"),
                rule: "room-layout",
                detail: format!("{count} access points"),
            });
        }
    }
    let rooms: BTreeSet<usize> = groups.keys().map(|&(r, _)| r).collect();
    for r in rooms {
        let n_groups = groups.keys().filter(|&&(room, _)| room == r).count();
        let n_rfs = nodes.iter().filter(|n| n.role == Role::Rfs && n.room == Some(r)).count();
        if n_groups != GROUPS_PER_ROOM || n_rfs != 1 {
            out.push(Violation {
                subject: format!("room {r}"),
                rule: "room-layout",
                detail: format!("{n_groups} groups, {n_rfs} room fog servers"),
            });
        }
    }

    let processing = topology.processing_nodes();
    for s in topology.sources() {
        let reach = reachable_from(topology, s);
        for &d in &processing {
            if !reach[d] {
                out.push(Violation {
                    subject: format!("{}->{}", nodes[s].id, nodes[d].id),
                    rule: "path-existence",
                    detail: "no directed path".into(),
                });
            }
        }
    }
    out
}

pub fn reachable_from(topology: &Topology, start: usize) -> Vec<bool> {
    let mut seen = vec![false; topology.nodes().len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(v) = queue.pop_front() {
        for &l in topology.out_links(v) {
            let w = topology.links()[l].to;
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

/// All simple directed paths from `from` to `to` as link-index lists, in DFS
/// order; stops after `limit + 1` paths so callers can detect overflow.
pub fn simple_paths(topology: &Topology, from: usize, to: usize, limit: usize) -> Vec<Vec<usize>> {
    fn dfs(
        t: &Topology,
        v: usize,
        to: usize,
        limit: usize,
        on_path: &mut Vec<bool>,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if out.len() > limit {
            return;
        }
        if v == to {
            out.push(path.clone());
            return;
        }
        for &l in t.out_links(v) {
            let w = t.links()[l].to;
            if on_path[w] {
                continue;
            }
            on_path[w] = true;
            path.push(l);
            dfs(t, w, to, limit, on_path, path, out);
            path.pop();
            on_path[w] = false;
        }
    }
    let mut out = Vec::new();
    let mut on_path = vec![false; topology.nodes().len()];
    on_path[from] = true;
    dfs(topology, from, to, limit, &mut on_path, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::default_catalog;

    fn four_rooms() -> Topology {
        let placement: Vec<_> = (1..=4).flat_map(|r| round_robin_sources(r, 2)).collect();
        build_p2p_pon(4, &placement, &default_catalog(), &LinkCapacities::default(), None).unwrap()
    }

    #[test]
    fn four_room_node_count() {
        let t = four_rooms();
        // 11 shared nodes, 4 x (backplane + 8 APs + ONU + RFS), 8 users
        assert_eq!(t.nodes().len(), 11 + 4 * 11 + 8);
        assert_eq!(t.nodes_with_role(Role::Rfs).count(), 4);
        assert!(validate(&t).is_empty(), "{:?}", validate(&t));
    }

    #[test]
    fn default_four_room_connectivity() {
        let map = ConnectivityMap::round_robin(4);
        assert_eq!(
            map.rows[0],
            [
                GroupUplink::Olt,
                GroupUplink::Room { room: 3, group: 2 },
                GroupUplink::Room { room: 2, group: 3 },
                GroupUplink::Room { room: 4, group: 4 },
            ]
        );
        map.check(4).unwrap();
        for rooms in 1..=9 {
            ConnectivityMap::round_robin(rooms).check(rooms).unwrap();
        }
    }

    #[test]
    fn single_room_relays_all_reach_olt() {
        let t = build_p2p_pon(1, &[], &default_catalog(), &LinkCapacities::default(), None).unwrap();
        let awg = t.neighbors("awg").unwrap();
        for g in 1..=4 {
            assert!(awg.contains(&format!("r1.ap{}", ap_position(g, 1)).as_str()));
        }
        assert_eq!(awg.len(), 5);
    }

    #[test]
    fn neighbor_sets() {
        let t = four_rooms();
        let mut bp = t.neighbors("r1.bp").unwrap();
        bp.sort();
        let mut expected: Vec<String> = (1..=8).map(|a| format!("r1.ap{a}")).collect();
        expected.push("r1.onu".into());
        expected.sort();
        assert_eq!(bp, expected);
        assert_eq!(t.neighbors("ccs").unwrap(), vec!["core-rt"]);
        assert!(matches!(t.neighbors("nope"), Err(TopologyError::UnknownNode(_))));
    }

    #[test]
    fn placement_errors() {
        let c = default_catalog();
        let caps = LinkCapacities::default();
        let err = build_p2p_pon(4, &[UserAttachment::source(5, 1)], &c, &caps, None).unwrap_err();
        assert_eq!(err, TopologyError::NoSuchRoom { room: 5, rooms: 4 });
        assert!(build_p2p_pon(1, &[UserAttachment::source(1, 9)], &c, &caps, None).is_err());
        let mixed = [UserAttachment::source(1, 2), UserAttachment::processing(1, 2)];
        assert!(build_p2p_pon(1, &mixed, &c, &caps, None).is_err());
        let short = ConnectivityMap { rows: vec![[GroupUplink::Olt; 4]] };
        assert_eq!(build_p2p_pon(2, &[], &c, &caps, Some(&short)).unwrap_err(), TopologyError::MissingConnectivity(2));
    }

    #[test]
    fn validate_flags_injected_faults() {
        let t = four_rooms();
        let mut links = t.links().to_vec();
        links[0].capacity = 0.0;
        links[1].capacity = 0.0;
        let broken = Topology::from_parts(t.nodes().to_vec(), links).unwrap();
        let v = validate(&broken);
        assert_eq!(v.iter().filter(|v| v.rule == "positive-capacity").count(), 2);

        let rfs = t.index_of("r2.rfs").unwrap();
        let links: Vec<_> = t.links().iter().filter(|l| l.from != rfs && l.to != rfs).cloned().collect();
        let isolated = Topology::from_parts(t.nodes().to_vec(), links).unwrap();
        let v = validate(&isolated);
        assert!(v.iter().any(|v| v.rule == "path-existence" && v.subject.ends_with("r2.rfs")));
    }

    #[test]
    fn json_round_trip_and_determinism() {
        let t = four_rooms();
        let again = Topology::from_json(&t.to_json()).unwrap();
        assert_eq!(again, t);
        assert_eq!(four_rooms().to_json(), t.to_json());
    }

    #[test]
    fn relay_per_group_and_wavelength_split() {
        let t = four_rooms();
        let room1: Vec<&Node> = t.nodes().iter().filter(|n| n.room == Some(1) && n.role.is_access_point()).collect();
        assert_eq!(room1.len(), 8);
        let count = |w| room1.iter().filter(|n| n.wavelength == Some(w)).count();
        assert_eq!((count(Wavelength::Red), count(Wavelength::Yellow)), (2, 2));
        assert_eq!(count(Wavelength::Green) + count(Wavelength::Blue), 4);
        for g in 1..=4 {
            assert_eq!(room1.iter().filter(|n| n.group == Some(g) && n.is_relay).count(), 1);
        }
    }
}
