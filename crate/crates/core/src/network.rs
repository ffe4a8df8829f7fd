//! Radial feeder model: buses, branches, base quantities and the slack.
//!
//! A [`NetworkModel`] is validated on construction (tree rooted at the slack,
//! non-negative impedances, positive bases) and caches its breadth-first
//! orientation so the sweep solver never has to rediscover the topology.
//! DG injections are applied by producing a modified copy with [`NetworkModel::apply_dg`].

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-based bus identifier, matching the usual feeder numbering (bus 1 = substation).
pub type BusId = u32;

pub const BUSES_HEADER: [&str; 3] = ["bus", "p_kw", "q_kvar"];
pub const BRANCHES_HEADER: [&str; 4] = ["from", "to", "r_ohm", "x_ohm"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    #[serde(rename = "bus")]
    pub id: BusId,
    /// Net active load in kW. Negative once a DG injection exceeds the local load.
    #[serde(rename = "p_kw")]
    pub p_load: f64,
    #[serde(rename = "q_kvar")]
    pub q_load: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    #[serde(rename = "from")]
    pub from_bus: BusId,
    #[serde(rename = "to")]
    pub to_bus: BusId,
    #[serde(rename = "r_ohm")]
    pub r: f64,
    #[serde(rename = "x_ohm")]
    pub x: f64,
}

/// Line-to-line base voltage and three-phase power base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseQuantities {
    pub base_kv: f64,
    pub base_mva: f64,
}

impl BaseQuantities {
    pub fn z_base(&self) -> f64 {
        self.base_kv * self.base_kv / self.base_mva
    }

    pub fn kw_base(&self) -> f64 {
        self.base_mva * 1000.0
    }
}

/// A branch oriented away from the slack, expressed in bus indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBranch {
    /// Index into [`NetworkModel::branches`].
    pub branch: usize,
    pub parent: usize,
    pub child: usize,
}

/// Breadth-first traversal of a radial feeder.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialOrder {
    pub root: usize,
    /// Oriented branches in breadth-first order: every parent is reached before its children.
    pub branches: Vec<OrientedBranch>,
    /// For each bus index, the oriented-branch position feeding it (`None` for the root).
    pub upstream: Vec<Option<usize>>,
}

impl RadialOrder {
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct NetworkModel {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    base: BaseQuantities,
    slack_bus: BusId,
    index: HashMap<BusId, usize>,
    order: RadialOrder,
}

impl PartialEq for NetworkModel {
    fn eq(&self, other: &Self) -> bool {
        self.buses == other.buses
            && self.branches == other.branches
            && self.base == other.base
            && self.slack_bus == other.slack_bus
    }
}

impl NetworkModel {
    /// Builds and validates a feeder. Loads may be negative here (net injections);
    /// the file loader is stricter.
    pub fn new(
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        base: BaseQuantities,
        slack_bus: BusId,
    ) -> Result<Self> {
        if !(base.base_kv.is_finite() && base.base_kv > 0.0) {
            return Err(Error::Validation(format!(
                "base_kV must be > 0, got {}",
                base.base_kv
            )));
        }
        if !(base.base_mva.is_finite() && base.base_mva > 0.0) {
            return Err(Error::Validation(format!(
                "base_MVA must be > 0, got {}",
                base.base_mva
            )));
        }
        for bus in &buses {
            if !bus.p_load.is_finite() || !bus.q_load.is_finite() {
                return Err(Error::Validation(format!("bus {} has a non-finite load", bus.id)));
            }
        }
        for br in &branches {
            if !(br.r.is_finite() && br.x.is_finite()) || br.r < 0.0 || br.x < 0.0 {
                return Err(Error::Validation(format!(
                    "branch {}-{} has negative or non-finite impedance (r={}, x={})",
                    br.from_bus, br.to_bus, br.r, br.x
                )));
            }
            if br.r == 0.0 && br.x == 0.0 {
                return Err(Error::Validation(format!(
                    "branch {}-{} has zero impedance",
                    br.from_bus, br.to_bus
                )));
            }
        }
        let order = orient_radial(&buses, &branches, slack_bus)?;
        let slack = &buses[order.root];
        if slack.p_load != 0.0 || slack.q_load != 0.0 {
            return Err(Error::Validation(format!(
                "slack bus {slack_bus} must carry no load"
            )));
        }
        let index = buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        Ok(Self {
            buses,
            branches,
            base,
            slack_bus,
            index,
            order,
        })
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn base(&self) -> BaseQuantities {
        self.base
    }

    pub fn base_kv(&self) -> f64 {
        self.base.base_kv
    }

    pub fn base_mva(&self) -> f64 {
        self.base.base_mva
    }

    pub fn slack_bus(&self) -> BusId {
        self.slack_bus
    }

    pub fn radial_order(&self) -> &RadialOrder {
        &self.order
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.bus_index(id).map(|i| &self.buses[i])
    }

    /// Every bus except the slack, in ascending id order.
    pub fn candidate_buses(&self) -> Vec<BusId> {
        let mut ids: Vec<BusId> = self
            .buses
            .iter()
            .map(|b| b.id)
            .filter(|&id| id != self.slack_bus)
            .collect();
        ids.sort_unstable();
        ids
    }

    pub fn total_load(&self) -> (f64, f64) {
        self.buses
            .iter()
            .fold((0.0, 0.0), |(p, q), b| (p + b.p_load, q + b.q_load))
    }

    /// Copy of the network with `p_dg` kW of unity-power-factor injection at `bus`.
    pub fn apply_dg(&self, bus: BusId, p_dg: f64) -> Result<Self> {
        if bus == self.slack_bus {
            return Err(Error::SlackBus(bus));
        }
        let idx = self.bus_index(bus).ok_or(Error::UnknownBus(bus))?;
        if !(p_dg.is_finite() && p_dg >= 0.0) {
            return Err(Error::OutOfBounds(format!("DG size must be >= 0 kW, got {p_dg}")));
        }
        let mut out = self.clone();
        out.buses[idx].p_load -= p_dg;
        Ok(out)
    }

    /// Reads `buses.csv` and `branches.csv`. Loads must be non-negative.
    pub fn load_csv(
        buses_path: &Path,
        branches_path: &Path,
        base: BaseQuantities,
        slack_bus: BusId,
    ) -> Result<Self> {
        let buses: Vec<Bus> = read_records(buses_path, &BUSES_HEADER)?;
        let branches: Vec<Branch> = read_records(branches_path, &BRANCHES_HEADER)?;
        for bus in &buses {
            if bus.id != slack_bus && (bus.p_load < 0.0 || bus.q_load < 0.0) {
                return Err(Error::Validation(format!(
                    "bus {} has a negative load ({} kW, {} kVAr)",
                    bus.id, bus.p_load, bus.q_load
                )));
            }
        }
        Self::new(buses, branches, base, slack_bus)
    }

    /// Writes `buses.csv` and `branches.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        write_records(&dir.join("buses.csv"), &self.buses)?;
        write_records(&dir.join("branches.csv"), &self.branches)
    }
}

/// Orients a feeder away from `slack` and returns a breadth-first ordering.
///
/// Fails unless the branch set forms a spanning tree over `buses`.
pub fn orient_radial(buses: &[Bus], branches: &[Branch], slack: BusId) -> Result<RadialOrder> {
    let mut index = HashMap::with_capacity(buses.len());
    for (i, bus) in buses.iter().enumerate() {
        if index.insert(bus.id, i).is_some() {
            return Err(Error::Validation(format!("duplicate bus id {}", bus.id)));
        }
    }
    let root = *index
        .get(&slack)
        .ok_or_else(|| Error::Validation(format!("slack bus {slack} is not defined")))?;

    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); buses.len()];
    let mut seen_pairs = HashSet::with_capacity(branches.len());
    for (k, br) in branches.iter().enumerate() {
        let lookup = |id: BusId| {
            index.get(&id).copied().ok_or_else(|| {
                Error::Validation(format!(
                    "branch {}-{} references undefined bus {id}",
                    br.from_bus, br.to_bus
                ))
            })
        };
        let a = lookup(br.from_bus)?;
        let b = lookup(br.to_bus)?;
        if a == b {
            return Err(Error::Validation(format!(
                "branch {0}-{0} is a self-loop",
                br.from_bus
            )));
        }
        if !seen_pairs.insert((a.min(b), a.max(b))) {
            return Err(Error::Validation(format!(
                "duplicate branch between buses {} and {}",
                br.from_bus, br.to_bus
            )));
        }
        adjacency[a].push((b, k));
        adjacency[b].push((a, k));
    }

    if branches.len() + 1 != buses.len() {
        return Err(Error::Validation(format!(
            "a radial feeder with {} buses needs {} branches, found {}",
            buses.len(),
            buses.len().saturating_sub(1),
            branches.len()
        )));
    }

    let mut upstream = vec![None; buses.len()];
    let mut visited = vec![false; buses.len()];
    let mut oriented = Vec::with_capacity(branches.len());
    let mut queue = VecDeque::from([root]);
    visited[root] = true;
    while let Some(parent) = queue.pop_front() {
        for &(child, k) in &adjacency[parent] {
            if visited[child] {
                continue;
            }
            visited[child] = true;
            upstream[child] = Some(oriented.len());
            oriented.push(OrientedBranch {
                branch: k,
                parent,
                child,
            });
            queue.push_back(child);
        }
    }

    if let Some(i) = visited.iter().position(|v| !v) {
        return Err(Error::Validation(format!(
            "bus {} is not connected to slack bus {slack}",
            buses[i].id
        )));
    }
    Ok(RadialOrder {
        root,
        branches: oriented,
        upstream,
    })
}

pub(crate) fn read_records<T: serde::de::DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if found != header {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            msg: format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.join(",")
            ),
        });
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

pub(crate) fn write_records<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    if err.is_io_error() {
        if let csv::ErrorKind::Io(source) = err.into_kind() {
            return Error::io(path, source);
        }
        unreachable!("is_io_error implies an Io kind");
    }
    Error::Parse {
        path: path.to_owned(),
        line,
        msg: err.to_string(),
    }
}
