//! Deep deterministic policy gradient learner built on hand-written
//! dense networks.

mod agent;
mod checkpoint;
mod nn;
mod noise;
mod replay;
mod train;

pub use agent::{Agent, GRAD_CHUNK};
pub use checkpoint::{from_bytes, load_checkpoint, save_checkpoint, to_bytes, CHECKPOINT_VERSION};
pub use nn::{Activation, DenseNet, Gradients, Layer, Trace};
pub use noise::OuProcess;
pub use replay::{ReplayMemory, Transition};
pub use train::{evaluate, rollout, train, EpisodeStats, TrainConfig, Trainer};
