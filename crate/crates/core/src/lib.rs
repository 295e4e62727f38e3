pub mod behavior;
pub mod chshn;
pub mod codec;
pub mod distribution;
pub mod efficiency;
pub mod error;
pub mod functional;
pub mod gilbert;
pub mod local;
pub mod report;
pub mod separation;
pub mod simplex;
pub mod thresholds;
