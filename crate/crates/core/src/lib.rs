pub mod cat;
pub mod ctl;
pub mod env;
pub mod envs;
pub mod eval;
pub mod export;
pub mod rollout;
