use serde::{Deserialize, Serialize};

use super::topology::{StationKind, Topology, MBS};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainModel {
    /// `h = 1` on every link.
    Unit,
    /// Seeded exponential (Rayleigh power) fading, frozen per topology.
    Rayleigh,
}

/// Which concurrent uploads count as interference at a small cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceScope {
    /// Devices uploading to a different small cell (macro uplinks are
    /// orthogonal).
    OtherSbs,
    /// Devices uploading to any other station, macro cell included.
    AllOtherStations,
}

/// How the macro-cell band is divided among simultaneous uploaders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MbsSharing {
    /// Each of `n` concurrent uploaders gets `b^m / n`.
    EqualSplit,
    /// Every uploader sees the full band.
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub path_loss_exponent: f64,
    /// Watts, same unit as the device transmit power.
    pub noise_power_w: f64,
    pub gain_model: GainModel,
    pub sbs_bandwidth_hz: f64,
    pub mbs_bandwidth_hz: f64,
    pub interference: InterferenceScope,
    pub mbs_sharing: MbsSharing,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            path_loss_exponent: 4.0,
            noise_power_w: 1e-11,
            gain_model: GainModel::Unit,
            sbs_bandwidth_hz: 5e6,
            mbs_bandwidth_hz: 10e6,
            interference: InterferenceScope::OtherSbs,
            mbs_sharing: MbsSharing::EqualSplit,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.path_loss_exponent > 0.0) {
            return Err(Error::InvalidConfig("channel.path_loss_exponent must be > 0".into()));
        }
        if !(self.noise_power_w > 0.0) {
            return Err(Error::InvalidConfig("channel.noise_power_w must be > 0".into()));
        }
        if !(self.sbs_bandwidth_hz > 0.0 && self.mbs_bandwidth_hz > 0.0) {
            return Err(Error::InvalidConfig("channel bandwidths must be > 0".into()));
        }
        Ok(())
    }

    /// Same channel with both bandwidths multiplied by `factor`.
    pub fn scaled_bandwidth(&self, factor: f64) -> Self {
        Self {
            sbs_bandwidth_hz: self.sbs_bandwidth_hz * factor,
            mbs_bandwidth_hz: self.mbs_bandwidth_hz * factor,
            ..self.clone()
        }
    }
}

/// Shannon rate `b log2(1 + signal / noise)`.
pub fn link_rate(bandwidth_hz: f64, signal_w: f64, noise_w: f64) -> f64 {
    bandwidth_hz * (signal_w / noise_w).ln_1p() / std::f64::consts::LN_2
}

fn received_power(topo: &Topology, chan: &ChannelParams, device: usize, station: usize) -> Result<f64> {
    let r = topo.distance(device, station);
    if r == 0.0 {
        return Err(Error::ZeroDistance { device, station });
    }
    let p = topo.devices[device].transmit_power;
    Ok(p * topo.gain(device, station) * r.powf(-chan.path_loss_exponent))
}

fn check_device(topo: &Topology, device: usize) -> Result<()> {
    if device >= topo.num_devices() {
        Err(Error::UnknownDevice(device))
    } else {
        Ok(())
    }
}

/// Uplink rate from `device` to small cell `sbs` while the devices in
/// `interferers` (device, serving station) transmit concurrently.
pub fn uplink_rate_sbs(
    topo: &Topology,
    chan: &ChannelParams,
    device: usize,
    sbs: usize,
    interferers: &[(usize, usize)],
) -> Result<f64> {
    check_device(topo, device)?;
    match topo.stations.get(sbs) {
        None => return Err(Error::UnknownStation(sbs)),
        Some(s) if s.kind != StationKind::Sbs => return Err(Error::NotSmallCell { station: sbs }),
        _ => {}
    }
    if !topo.covers(device, sbs) {
        return Err(Error::OutOfCoverage { device, station: sbs });
    }
    let signal = received_power(topo, chan, device, sbs)?;
    let mut interference = 0.0;
    for &(other, serving) in interferers {
        check_device(topo, other)?;
        if other == device || serving == sbs || !interferes(chan, serving) {
            continue;
        }
        interference += received_power(topo, chan, other, sbs)?;
    }
    Ok(link_rate(chan.sbs_bandwidth_hz, signal, chan.noise_power_w + interference))
}

/// Uplink rate from `device` to the macro cell over the full band.
pub fn uplink_rate_mbs(topo: &Topology, chan: &ChannelParams, device: usize) -> Result<f64> {
    check_device(topo, device)?;
    let signal = received_power(topo, chan, device, MBS)?;
    Ok(link_rate(chan.mbs_bandwidth_hz, signal, chan.noise_power_w))
}

fn interferes(chan: &ChannelParams, serving: usize) -> bool {
    match chan.interference {
        InterferenceScope::OtherSbs => serving != MBS,
        InterferenceScope::AllOtherStations => true,
    }
}

/// Rates seen on every device-station link, `N x (M+1)` row-major with the
/// macro cell in column 0. Non-covered links hold zero.
#[derive(Clone, Debug, PartialEq)]
pub struct RateTable {
    stations: usize,
    rates: Vec<f64>,
}

impl RateTable {
    pub fn get(&self, device: usize, station: usize) -> f64 {
        self.rates[device * self.stations + station]
    }

    pub fn num_devices(&self) -> usize {
        self.rates.len() / self.stations
    }

    pub fn num_stations(&self) -> usize {
        self.stations
    }
}

/// Per-topology link budget: received power and coverage for every
/// device-station pair, cached so per-slot rate evaluation is cheap.
#[derive(Clone, Debug)]
pub struct Links {
    devices: usize,
    stations: usize,
    rx: Vec<f64>,
    covered: Vec<bool>,
    pub channel: ChannelParams,
}

impl Links {
    pub fn new(topo: &Topology, chan: &ChannelParams) -> Result<Self> {
        chan.validate()?;
        let (n, k) = (topo.num_devices(), topo.num_stations());
        let mut rx = Vec::with_capacity(n * k);
        let mut covered = Vec::with_capacity(n * k);
        for i in 0..n {
            for s in 0..k {
                rx.push(received_power(topo, chan, i, s)?);
                covered.push(topo.covers(i, s));
            }
        }
        Ok(Self {
            devices: n,
            stations: k,
            rx,
            covered,
            channel: chan.clone(),
        })
    }

    pub fn covered(&self, device: usize, station: usize) -> bool {
        self.covered[device * self.stations + station]
    }

    /// Rates every device would get on every covered link, given that the
    /// other devices keep transmitting as in `transmitting` (`Some(station)`
    /// for an active uploader, `None` for silent ones).
    pub fn rates(&self, transmitting: &[Option<usize>]) -> RateTable {
        let (n, k) = (self.devices, self.stations);
        debug_assert_eq!(transmitting.len(), n);
        let chan = &self.channel;
        // interference at each small cell if every active uploader counted
        let mut total_at = vec![0.0; k];
        let mut mbs_uploaders = 0usize;
        for (i, t) in transmitting.iter().enumerate() {
            if let Some(serving) = *t {
                if serving == MBS {
                    mbs_uploaders += 1;
                }
                if interferes(chan, serving) {
                    for (s, acc) in total_at.iter_mut().enumerate().skip(1) {
                        if s != serving {
                            *acc += self.rx[i * k + s];
                        }
                    }
                }
            }
        }
        let mut rates = vec![0.0; n * k];
        for i in 0..n {
            let own = transmitting[i];
            let mut others_on_mbs = mbs_uploaders;
            if own == Some(MBS) {
                others_on_mbs -= 1;
            }
            let share = match chan.mbs_sharing {
                MbsSharing::EqualSplit => 1.0 / (others_on_mbs + 1) as f64,
                MbsSharing::None => 1.0,
            };
            rates[i * k] = link_rate(chan.mbs_bandwidth_hz * share, self.rx[i * k], chan.noise_power_w);
            for s in 1..k {
                if !self.covered[i * k + s] {
                    continue;
                }
                let mut interference = total_at[s];
                if let Some(serving) = own {
                    if serving != s && interferes(chan, serving) {
                        interference -= self.rx[i * k + s];
                    }
                }
                let interference = interference.max(0.0);
                rates[i * k + s] = link_rate(
                    chan.sbs_bandwidth_hz,
                    self.rx[i * k + s],
                    chan.noise_power_w + interference,
                );
            }
        }
        RateTable { stations: k, rates }
    }

    /// Interference-free rates (nobody else transmitting).
    pub fn quiet_rates(&self) -> RateTable {
        self.rates(&vec![None; self.devices])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::topology::tests::{device, station};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn two_cell_topology() -> Topology {
        let stations = vec![
            station(0, [0.0, 0.0], 0.0, 50e9),
            station(1, [200.0, 0.0], 100.0, 10e9),
            station(2, [-200.0, 0.0], 100.0, 10e9),
        ];
        let devices = vec![
            device(0, [250.0, 0.0]),  // 50 m from SBS 1, 250 m from MBS
            device(1, [-250.0, 0.0]), // 50 m from SBS 2
            device(2, [0.0, 200.0]),  // 200 m from MBS, no small cell
        ];
        Topology::from_parts(stations, devices, None).unwrap()
    }

    #[test]
    fn sbs_rate_hand_value() {
        let t = two_cell_topology();
        let chan = ChannelParams::default();
        let r = uplink_rate_sbs(&t, &chan, 0, 1, &[]).unwrap();
        // SNR = 0.1 * 50^-4 / 1e-11 = 1600
        let expected = 5e6 * 1601f64.log2();
        assert!(rel(r, expected) <= 1e-9, "{r} vs {expected}");
        assert!(rel(r, 5.3224e7) < 1e-4);
    }

    #[test]
    fn mbs_rate_hand_values() {
        let t = two_cell_topology();
        let chan = ChannelParams::default();
        let r = uplink_rate_mbs(&t, &chan, 2).unwrap();
        // SNR = 0.1 * 200^-4 / 1e-11 = 6.25
        let expected = 1e7 * 7.25f64.log2();
        assert!(rel(r, expected) <= 1e-9);
        assert!(rel(r, 2.8580e7) < 1e-4);
        assert_eq!(link_rate(1e7, 1023.0, 1.0), 1e8);
    }

    #[test]
    fn zero_power_is_zero_rate() {
        assert_eq!(link_rate(5e6, 0.0, 1e-11), 0.0);
    }

    #[test]
    fn equal_interference_gives_unit_sinr() {
        // SINR = 1 -> log2(2) = 1
        let r = link_rate(5e6, 1e-6, 1e-30 + 1e-6);
        assert!(rel(r, 5e6) < 1e-9);
    }

    #[test]
    fn interference_lowers_sbs_rate() {
        let t = two_cell_topology();
        let chan = ChannelParams::default();
        let quiet = uplink_rate_sbs(&t, &chan, 0, 1, &[]).unwrap();
        let noisy = uplink_rate_sbs(&t, &chan, 0, 1, &[(1, 2)]).unwrap();
        assert!(noisy < quiet);
        // same-cell and macro uploads do not interfere by default
        assert_eq!(uplink_rate_sbs(&t, &chan, 0, 1, &[(1, 1), (2, 0)]).unwrap(), quiet);
        let all = ChannelParams {
            interference: InterferenceScope::AllOtherStations,
            ..chan.clone()
        };
        assert!(uplink_rate_sbs(&t, &all, 0, 1, &[(2, 0)]).unwrap() < quiet);
    }

    #[test]
    fn sbs_rate_errors() {
        let t = two_cell_topology();
        let chan = ChannelParams::default();
        assert!(matches!(
            uplink_rate_sbs(&t, &chan, 2, 1, &[]),
            Err(Error::OutOfCoverage { .. })
        ));
        assert!(matches!(
            uplink_rate_sbs(&t, &chan, 0, 0, &[]),
            Err(Error::NotSmallCell { .. })
        ));
        let stations = vec![station(0, [0.0, 0.0], 0.0, 50e9)];
        let t = Topology::from_parts(stations, vec![device(0, [0.0, 0.0])], None).unwrap();
        assert!(matches!(
            uplink_rate_mbs(&t, &chan, 0),
            Err(Error::ZeroDistance { .. })
        ));
    }

    #[test]
    fn rate_table_matches_direct_formulas() {
        let t = two_cell_topology();
        let chan = ChannelParams::default();
        let links = Links::new(&t, &chan).unwrap();
        let active = [Some(1), Some(2), Some(MBS)];
        let table = links.rates(&active);
        let direct = uplink_rate_sbs(&t, &chan, 0, 1, &[(1, 2), (2, 0)]).unwrap();
        assert!(rel(table.get(0, 1), direct) < 1e-12);
        // device 2 is the only macro uploader: full band
        assert!(rel(table.get(2, 0), uplink_rate_mbs(&t, &chan, 2).unwrap()) < 1e-12);
        // device 0 moving to the macro cell would share it with device 2
        assert!(rel(table.get(0, 0), uplink_rate_mbs(&t, &chan, 0).unwrap() / 2.0) < 1e-12);
        assert_eq!(table.get(2, 1), 0.0);
    }
}
