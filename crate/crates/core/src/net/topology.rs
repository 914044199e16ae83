use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::channel::{ChannelParams, GainModel};
use crate::seeding::{self, streams};
use crate::{Error, Result};

/// Station id of the macro cell. Small cells are `1..=M`.
pub const MBS: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StationKind {
    Mbs,
    Sbs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: usize,
    pub kind: StationKind,
    pub position: [f64; 2],
    /// Metres; infinite for the macro cell.
    pub coverage_radius: f64,
    /// Cycles per second.
    pub capacity: f64,
    /// Joules per cycle.
    pub energy_per_cycle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: usize,
    pub position: [f64; 2],
    /// Watts.
    pub transmit_power: f64,
    /// Local CPU speed, cycles per second.
    pub local_capacity: f64,
    /// Effective switched capacitance of the local chip.
    pub switched_capacitance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub num_sbs: usize,
    pub num_devices: usize,
    pub mbs_radius_m: f64,
    /// Coverage radius shared by every small cell unless `sbs_radii_m` is set.
    pub sbs_radius_m: f64,
    pub sbs_radii_m: Option<Vec<f64>>,
    pub mbs_capacity_hz: f64,
    pub sbs_capacity_hz: f64,
    pub mbs_energy_per_cycle_j: f64,
    pub sbs_energy_per_cycle_j: f64,
    pub device_capacity_hz: f64,
    pub transmit_power_w: f64,
    pub switched_capacitance: f64,
    pub placement_attempts: usize,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            num_sbs: 10,
            num_devices: 100,
            mbs_radius_m: 250.0,
            sbs_radius_m: 50.0,
            sbs_radii_m: None,
            mbs_capacity_hz: 50e9,
            sbs_capacity_hz: 10e9,
            mbs_energy_per_cycle_j: 1e-9,
            sbs_energy_per_cycle_j: 1e-9,
            device_capacity_hz: 0.5e9,
            transmit_power_w: 0.1,
            switched_capacitance: 1e-27,
            placement_attempts: 10_000,
        }
    }
}

impl TopologyConfig {
    fn sbs_radius(&self, j: usize) -> f64 {
        match &self.sbs_radii_m {
            Some(r) => r[j],
            None => self.sbs_radius_m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.num_devices == 0 {
            return Err(Error::NoDevices);
        }
        if let Some(r) = &self.sbs_radii_m {
            if r.len() != self.num_sbs {
                return Err(Error::Dimension {
                    what: "topology.sbs_radii_m",
                    expected: self.num_sbs,
                    got: r.len(),
                });
            }
        }
        if !(self.mbs_radius_m > 0.0) {
            return bad("topology.mbs_radius_m must be > 0");
        }
        for j in 0..self.num_sbs {
            let r = self.sbs_radius(j);
            if !(r > 0.0) || r >= self.mbs_radius_m {
                return bad("topology small-cell radii must lie in (0, mbs_radius_m)");
            }
        }
        if !(self.mbs_capacity_hz > 0.0 && self.sbs_capacity_hz > 0.0) {
            return bad("topology station capacities must be > 0");
        }
        if !(self.mbs_energy_per_cycle_j >= 0.0 && self.sbs_energy_per_cycle_j >= 0.0) {
            return bad("topology energy per cycle must be >= 0");
        }
        if !(self.device_capacity_hz > 0.0
            && self.transmit_power_w > 0.0
            && self.switched_capacitance > 0.0)
        {
            return bad("topology device capacity, power and capacitance must be > 0");
        }
        Ok(())
    }
}

/// Immutable network snapshot: stations (macro cell first), devices, and the
/// device-by-station distance and gain matrices (`N x (M+1)`, row-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub stations: Vec<Station>,
    pub devices: Vec<Device>,
    distance: Vec<f64>,
    gain: Vec<f64>,
}

impl Topology {
    /// Assembles a topology from explicit parts, computing distances.
    /// Gains default to one unless supplied.
    pub fn from_parts(
        stations: Vec<Station>,
        devices: Vec<Device>,
        gain: Option<Vec<f64>>,
    ) -> Result<Self> {
        if devices.is_empty() {
            return Err(Error::NoDevices);
        }
        if stations.first().map(|s| s.kind) != Some(StationKind::Mbs)
            || stations[1..].iter().any(|s| s.kind != StationKind::Sbs)
        {
            return Err(Error::InvalidConfig(
                "topology needs exactly one macro cell, listed first".into(),
            ));
        }
        let k = stations.len();
        let mut distance = Vec::with_capacity(devices.len() * k);
        for d in &devices {
            for s in &stations {
                distance.push(dist(d.position, s.position));
            }
        }
        let gain = match gain {
            Some(g) => {
                if g.len() != distance.len() {
                    return Err(Error::Dimension {
                        what: "gain matrix",
                        expected: distance.len(),
                        got: g.len(),
                    });
                }
                g
            }
            None => vec![1.0; distance.len()],
        };
        Ok(Self {
            stations,
            devices,
            distance,
            gain,
        })
    }

    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn num_sbs(&self) -> usize {
        self.stations.len() - 1
    }

    pub fn num_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn distance(&self, device: usize, station: usize) -> f64 {
        self.distance[device * self.stations.len() + station]
    }

    pub fn gain(&self, device: usize, station: usize) -> f64 {
        self.gain[device * self.stations.len() + station]
    }

    /// Station capacities, macro cell first.
    pub fn capacities(&self) -> Vec<f64> {
        self.stations.iter().map(|s| s.capacity).collect()
    }

    /// Coverage test: the macro cell covers everyone, a small cell only
    /// devices strictly inside its radius.
    pub fn covers(&self, device: usize, station: usize) -> bool {
        station == MBS || self.distance(device, station) < self.stations[station].coverage_radius
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn uniform_in_disc(rng: &mut seeding::Rng, radius: f64) -> [f64; 2] {
    // inverse-CDF radius for a uniform area density
    let r = radius * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    [r * theta.cos(), r * theta.sin()]
}

/// Places the macro cell at the origin, small cells uniformly with no
/// coverage overlap (rejection sampling), and devices uniformly inside the
/// macro coverage disc.
pub fn build_topology(cfg: &TopologyConfig, chan: &ChannelParams, seed: u64) -> Result<Topology> {
    cfg.validate()?;
    let mut rng = seeding::stream(seed, streams::TOPOLOGY);

    let mut stations = vec![Station {
        id: MBS,
        kind: StationKind::Mbs,
        position: [0.0, 0.0],
        coverage_radius: f64::INFINITY,
        capacity: cfg.mbs_capacity_hz,
        energy_per_cycle: cfg.mbs_energy_per_cycle_j,
    }];
    let mut attempts = 0;
    for j in 0..cfg.num_sbs {
        let radius = cfg.sbs_radius(j);
        loop {
            if attempts >= cfg.placement_attempts {
                return Err(Error::Placement {
                    placed: j,
                    wanted: cfg.num_sbs,
                    attempts,
                });
            }
            attempts += 1;
            let pos = uniform_in_disc(&mut rng, cfg.mbs_radius_m - radius);
            let clear = stations[1..]
                .iter()
                .all(|s| dist(s.position, pos) >= s.coverage_radius + radius);
            if clear {
                stations.push(Station {
                    id: j + 1,
                    kind: StationKind::Sbs,
                    position: pos,
                    coverage_radius: radius,
                    capacity: cfg.sbs_capacity_hz,
                    energy_per_cycle: cfg.sbs_energy_per_cycle_j,
                });
                break;
            }
        }
    }

    let mut devices = Vec::with_capacity(cfg.num_devices);
    while devices.len() < cfg.num_devices {
        let pos = uniform_in_disc(&mut rng, cfg.mbs_radius_m);
        // a device exactly on top of a station has an undefined path loss
        if stations.iter().any(|s| s.position == pos) {
            continue;
        }
        devices.push(Device {
            id: devices.len(),
            position: pos,
            transmit_power: cfg.transmit_power_w,
            local_capacity: cfg.device_capacity_hz,
            switched_capacitance: cfg.switched_capacitance,
        });
    }

    let links = devices.len() * stations.len();
    let gain = match chan.gain_model {
        GainModel::Unit => None,
        GainModel::Rayleigh => Some((0..links).map(|_| Exp1.sample(&mut rng)).collect()),
    };
    Topology::from_parts(stations, devices, gain)
}

/// Stations device `device` may upload to: the macro cell plus every small
/// cell whose radius strictly contains it.
pub fn candidate_stations(device: usize, topology: &Topology) -> Result<Vec<usize>> {
    if device >= topology.num_devices() {
        return Err(Error::UnknownDevice(device));
    }
    Ok((0..topology.num_stations())
        .filter(|&s| topology.covers(device, s))
        .collect())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn station(id: usize, pos: [f64; 2], radius: f64, capacity: f64) -> Station {
        Station {
            id,
            kind: if id == MBS { StationKind::Mbs } else { StationKind::Sbs },
            position: pos,
            coverage_radius: if id == MBS { f64::INFINITY } else { radius },
            capacity,
            energy_per_cycle: 1e-9,
        }
    }

    pub fn device(id: usize, pos: [f64; 2]) -> Device {
        Device {
            id,
            position: pos,
            transmit_power: 0.1,
            local_capacity: 0.5e9,
            switched_capacitance: 1e-27,
        }
    }

    fn full_cfg() -> TopologyConfig {
        TopologyConfig {
            mbs_radius_m: 500.0,
            ..TopologyConfig::default()
        }
    }

    #[test]
    fn full_scale_counts() {
        let cfg = full_cfg();
        let t = build_topology(&cfg, &ChannelParams::default(), 7).unwrap();
        assert_eq!(t.num_stations(), 11);
        assert_eq!(t.num_devices(), 100);
        for d in &t.devices {
            assert!(dist(d.position, [0.0, 0.0]) <= cfg.mbs_radius_m);
        }
        for a in &t.stations[1..] {
            for b in &t.stations[1..] {
                if a.id != b.id {
                    assert!(dist(a.position, b.position) >= a.coverage_radius + b.coverage_radius);
                }
            }
        }
    }

    #[test]
    fn no_small_cells_leaves_only_macro() {
        let cfg = TopologyConfig {
            num_sbs: 0,
            num_devices: 1,
            ..TopologyConfig::default()
        };
        let t = build_topology(&cfg, &ChannelParams::default(), 1).unwrap();
        assert_eq!(candidate_stations(0, &t).unwrap(), vec![MBS]);
    }

    #[test]
    fn seeded_builds_are_identical() {
        let chan = ChannelParams {
            gain_model: GainModel::Rayleigh,
            ..ChannelParams::default()
        };
        let a = build_topology(&full_cfg(), &chan, 42).unwrap();
        let b = build_topology(&full_cfg(), &chan, 42).unwrap();
        assert_eq!(a, b);
        let c = build_topology(&full_cfg(), &chan, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_empty_and_unplaceable() {
        let cfg = TopologyConfig {
            num_devices: 0,
            ..TopologyConfig::default()
        };
        assert!(matches!(
            build_topology(&cfg, &ChannelParams::default(), 1),
            Err(Error::NoDevices)
        ));
        let cfg = TopologyConfig {
            num_sbs: 20,
            sbs_radius_m: 90.0,
            mbs_radius_m: 100.0,
            placement_attempts: 500,
            ..TopologyConfig::default()
        };
        assert!(matches!(
            build_topology(&cfg, &ChannelParams::default(), 1),
            Err(Error::Placement { .. })
        ));
    }

    #[test]
    fn coverage_is_strict() {
        let stations = vec![
            station(0, [0.0, 0.0], 0.0, 50e9),
            station(1, [100.0, 0.0], 50.0, 10e9),
        ];
        let devices = vec![
            device(0, [130.0, 0.0]), // r = 30
            device(1, [150.0, 0.0]), // r = 50, on the boundary
            device(2, [-200.0, 0.0]),
        ];
        let t = Topology::from_parts(stations, devices, None).unwrap();
        assert_eq!(candidate_stations(0, &t).unwrap(), vec![0, 1]);
        assert_eq!(candidate_stations(1, &t).unwrap(), vec![0]);
        assert_eq!(candidate_stations(2, &t).unwrap(), vec![0]);
        assert!(matches!(candidate_stations(3, &t), Err(Error::UnknownDevice(3))));
    }
}
