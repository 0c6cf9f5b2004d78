//! Divide-and-conquer reinforcement learning for a grid FPS: two UNREAL-trained agents
//! (action and navigation) combined at runtime through the navigation agent's
//! reward-prediction head.

pub mod minidoom;
pub mod netcore;
pub mod losses;
pub mod replay;
pub mod trainer;
pub mod arbiter;
pub mod evalkit;
