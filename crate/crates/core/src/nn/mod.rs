//! Small CPU neural networks with reverse-mode gradients.

pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod policy;
pub mod tape;

pub use adam::{Adam, AdamConfig};
pub use layers::{Gru, Init, Linear, Mlp, ParamSet};
pub use policy::{gaussian, joint_forward, CriticNet, JointState, NetConfig, NetInput, PolicyNet, PopArt, Synchronizer};
pub use tape::{Grads, ParamKey, Tape, Var};
