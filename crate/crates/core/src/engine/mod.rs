//! Discrete-time simulation engine (1 timestep = 1 ms).

mod network;
mod policy;
mod wta;

use std::fmt;
use std::str::FromStr;

pub use network::{
    run, Endpoint, EngineError, Link, LinkSpec, Network, NetworkBuilder, NeuronState, ReceptorRole, SectionSpec,
    SpikeLog, SpikeRecord, THRESHOLD,
};
pub use policy::{connects, resolve_policy, Policy, PolicyError};
pub use wta::wta_resolve;

/// How a spike on a link acts on its target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LinkKind {
    /// Adds a fixed weight to the membrane potential.
    Static,
    /// Adds a learned weight to the membrane potential.
    Plastic,
    /// Opens (positive) or vetoes (negative) firing for one timestep without
    /// touching the potential.
    Gating,
    /// Delivers a dopamine signal to the target's plastic inputs.
    Reward,
}

impl LinkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkKind::Static => "static",
            LinkKind::Plastic => "plastic",
            LinkKind::Gating => "gating",
            LinkKind::Reward => "reward",
        }
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LinkKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "static" => Ok(LinkKind::Static),
            "plastic" => Ok(LinkKind::Plastic),
            "gating" => Ok(LinkKind::Gating),
            "reward" => Ok(LinkKind::Reward),
            _ => Err(()),
        }
    }
}
