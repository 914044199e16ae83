//! Network model: base stations, devices, tasks and uplink rates.

mod channel;
mod tasks;
pub(crate) mod topology;

pub use channel::{
    link_rate, uplink_rate_mbs, uplink_rate_sbs, ChannelParams, GainModel, InterferenceScope,
    Links, MbsSharing, RateTable,
};
pub use tasks::{sample_tasks, TaskConfig, TaskKind, TaskSpec, TaskType, BITS_PER_MB, CYCLES_PER_GCYCLE};
pub use topology::{
    build_topology, candidate_stations, Device, Station, StationKind, Topology, TopologyConfig,
    MBS,
};
