use std::fmt::Write as _;
use std::iter::Peekable;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::policy::{resolve_policy, Policy, PolicyError};
use super::wta::wta_resolve;
use super::LinkKind;
use crate::encoding::{InputNode, SpikeEvent};
use crate::plasticity::{PlasticMatrix, PlasticityParams};

/// Default firing threshold; potentials are normalized to it.
pub const THRESHOLD: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("no receptor accepts input node {0:?}")]
    UnknownNode(InputNode),
    #[error("external spike at t={got} delivered at t={expected}")]
    TimeMismatch { expected: u64, got: u64 },
    #[error("network clock is at {clock}, run starts at {start}")]
    ClockMismatch { clock: u64, start: u64 },
    #[error("unknown endpoint {0:?}")]
    UnknownEndpoint(String),
    #[error("link {from}->{to}: {reason}")]
    BadLink { from: String, to: String, reason: String },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Which external inputs a receptor array accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReceptorRole {
    Pixels,
    Classes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Receptor(usize),
    Section(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectionSpec {
    pub name: String,
    pub n: usize,
    pub chartime: f64,
}

/// Snapshot of one neuron.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronState {
    pub potential: f64,
    pub gate_level: f64,
    pub last_spike_time: Option<u64>,
    pub chartime: f64,
}

#[derive(Clone, Debug)]
struct Receptor {
    name: String,
    n: usize,
    role: ReceptorRole,
    out_links: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Section {
    spec: SectionSpec,
    decay: f64,
    potential: Vec<f64>,
    gate: Vec<f64>,
    gate_opened: Vec<bool>,
    last_spike: Vec<Option<u64>>,
    /// Targets of positive gating links fire only when a gate opens them.
    default_closed: bool,
    /// Mutually inhibiting group: at most one neuron fires per timestep.
    wta: bool,
    out_links: Vec<usize>,
    plastic_in: Vec<usize>,
}

impl Section {
    fn new(spec: SectionSpec) -> Self {
        let n = spec.n;
        Self {
            decay: (-1.0 / spec.chartime).exp(),
            potential: vec![0.0; n],
            gate: vec![0.0; n],
            gate_opened: vec![false; n],
            last_spike: vec![None; n],
            default_closed: false,
            wta: false,
            out_links: Vec::new(),
            plastic_in: Vec::new(),
            spec,
        }
    }

    fn may_fire(&self, i: usize, threshold: f64) -> bool {
        self.potential[i] >= threshold && self.gate[i] >= 0.0 && (!self.default_closed || self.gate_opened[i])
    }
}

/// A compiled link: either a fan-out table with one shared weight, or a
/// plastic matrix.
#[derive(Clone, Debug)]
pub struct Link {
    pub from: Endpoint,
    pub to: usize,
    pub kind: LinkKind,
    pub policy: Policy,
    pub weight: f64,
    pub delay: u32,
    fanout: Vec<Vec<u32>>,
    plastic: Option<PlasticMatrix>,
}

impl Link {
    pub fn synapse_count(&self) -> usize {
        match &self.plastic {
            Some(m) => m.synapse_count(),
            None => self.fanout.iter().map(Vec::len).sum(),
        }
    }

    /// All `(pre, post)` pairs, pre-major.
    pub fn pairs(&self) -> Vec<(u32, u32)> {
        match &self.plastic {
            Some(m) => {
                let mut v: Vec<_> = m.weights().map(|(pre, post, _)| (pre as u32, post as u32)).collect();
                v.sort_unstable();
                v
            }
            None => self
                .fanout
                .iter()
                .enumerate()
                .flat_map(|(pre, posts)| posts.iter().map(move |&p| (pre as u32, p)))
                .collect(),
        }
    }

    pub fn plastic(&self) -> Option<&PlasticMatrix> {
        self.plastic.as_ref()
    }

    pub fn plastic_mut(&mut self) -> Option<&mut PlasticMatrix> {
        self.plastic.as_mut()
    }
}

/// Declarative description of a link for [`NetworkBuilder`].
#[derive(Clone, Debug)]
pub struct LinkSpec {
    pub from: String,
    pub to: String,
    pub kind: LinkKind,
    pub policy: Policy,
    /// Fixed weight; ignored for plastic links.
    pub weight: f64,
    /// Inclusive delay range in ms, sampled per synapse.
    pub delay: (u32, u32),
    pub probability: f64,
    /// Initial resource range for plastic links.
    pub ini_resource: (f64, f64),
    pub plasticity: Option<PlasticityParams>,
}

impl LinkSpec {
    pub fn new(from: &str, to: &str, kind: LinkKind, policy: Policy, weight: f64) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            kind,
            policy,
            weight,
            delay: (0, 0),
            probability: 1.0,
            ini_resource: (0.0, 0.0),
            plasticity: None,
        }
    }

    pub fn plastic(from: &str, to: &str, params: PlasticityParams, ini_resource: (f64, f64)) -> Self {
        Self { ini_resource, plasticity: Some(params), ..Self::new(from, to, LinkKind::Plastic, Policy::Full, 0.0) }
    }

    pub fn with_delay(mut self, ms: u32) -> Self {
        self.delay = (ms, ms);
        self
    }
}

/// Assembles a [`Network`]. Links are materialized as they are added, using
/// the builder's seeded rng for connection sampling and initial resources.
pub struct NetworkBuilder {
    receptors: Vec<Receptor>,
    sections: Vec<Section>,
    links: Vec<Link>,
    class_dim: usize,
    threshold: f64,
    rng: ChaCha8Rng,
}

impl NetworkBuilder {
    pub fn new(seed: u64) -> Self {
        Self {
            receptors: Vec::new(),
            sections: Vec::new(),
            links: Vec::new(),
            class_dim: crate::data::CLASSES,
            threshold: THRESHOLD,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Firing threshold shared by every neuron, in the units of the link
    /// weights.
    pub fn threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn class_dim(mut self, class_dim: usize) -> Self {
        self.class_dim = class_dim;
        self
    }

    pub fn receptor(&mut self, name: &str, n: usize, role: ReceptorRole) -> &mut Self {
        self.receptors.push(Receptor { name: name.into(), n, role, out_links: Vec::new() });
        self
    }

    pub fn section(&mut self, spec: SectionSpec) -> &mut Self {
        self.sections.push(Section::new(spec));
        self
    }

    fn endpoint(&self, name: &str) -> Result<Endpoint, EngineError> {
        if let Some(i) = self.sections.iter().position(|s| s.spec.name == name) {
            return Ok(Endpoint::Section(i));
        }
        self.receptors
            .iter()
            .position(|r| r.name == name)
            .map(Endpoint::Receptor)
            .ok_or_else(|| EngineError::UnknownEndpoint(name.into()))
    }

    pub fn link(&mut self, spec: LinkSpec) -> Result<&mut Self, EngineError> {
        let bad =
            |reason: &str| EngineError::BadLink { from: spec.from.clone(), to: spec.to.clone(), reason: reason.into() };
        let from = self.endpoint(&spec.from)?;
        let to = match self.endpoint(&spec.to)? {
            Endpoint::Section(i) => i,
            Endpoint::Receptor(_) => return Err(bad("a receptor cannot be a link target")),
        };
        let from_size = match from {
            Endpoint::Receptor(i) => self.receptors[i].n,
            Endpoint::Section(i) => self.sections[i].spec.n,
        };
        let to_size = self.sections[to].spec.n;
        let same = from == Endpoint::Section(to);
        let pairs = resolve_policy(spec.policy, from_size, to_size, self.class_dim, same)?;
        if spec.delay.0 > spec.delay.1 {
            return Err(bad("delay min exceeds max"));
        }
        let (dmin, dmax) = spec.delay;
        // one delay per link; a range is sampled once
        let delay = if dmin == dmax { dmin } else { self.rng.random_range(dmin..=dmax) };
        let p = spec.probability;

        let mut link = Link {
            from,
            to,
            kind: spec.kind,
            policy: spec.policy,
            weight: spec.weight,
            delay,
            fanout: Vec::new(),
            plastic: None,
        };
        if spec.kind == LinkKind::Plastic {
            let params = spec.plasticity.ok_or_else(|| bad("plastic link without plasticity parameters"))?;
            let mut keep = vec![false; from_size * to_size];
            for &(i, j) in &pairs {
                keep[i as usize * to_size + j as usize] = true;
            }
            let (lo, hi) = spec.ini_resource;
            let rng = &mut self.rng;
            link.plastic = Some(PlasticMatrix::new(from_size, to_size, params, |pre, post| {
                if !keep[pre * to_size + post] || (p < 1.0 && rng.random::<f64>() >= p) {
                    return None;
                }
                Some(if hi > lo { rng.random_range(lo..=hi) } else { lo })
            }));
            self.sections[to].plastic_in.push(self.links.len());
        } else {
            let mut fanout = vec![Vec::new(); from_size];
            for (i, j) in pairs {
                if p >= 1.0 || self.rng.random::<f64>() < p {
                    fanout[i as usize].push(j);
                }
            }
            link.fanout = fanout;
            if spec.kind == LinkKind::Gating {
                if spec.weight > 0.0 {
                    self.sections[to].default_closed = true;
                }
                if same && spec.weight < 0.0 && spec.policy == Policy::AllToAllSections {
                    self.sections[to].wta = true;
                }
            }
        }
        let idx = self.links.len();
        match from {
            Endpoint::Receptor(i) => self.receptors[i].out_links.push(idx),
            Endpoint::Section(i) => self.sections[i].out_links.push(idx),
        }
        self.links.push(link);
        Ok(self)
    }

    pub fn build(self) -> Network {
        let max_delay = self.links.iter().map(|l| l.delay).max().unwrap_or(0) as usize;
        let fired = vec![Vec::new(); self.sections.len()];
        Network {
            receptors: self.receptors,
            sections: self.sections,
            links: self.links,
            queue: vec![Vec::new(); max_delay + 2],
            inbox: vec![Vec::new(); fired.len()],
            fired,
            rewards: Vec::new(),
            rng: self.rng,
            clock: 0,
            plasticity_enabled: true,
            class_dim: self.class_dim,
            threshold: self.threshold,
        }
    }
}

/// Sections of neurons, compiled links, pending deliveries, and the clock.
#[derive(Clone, Debug)]
pub struct Network {
    receptors: Vec<Receptor>,
    sections: Vec<Section>,
    links: Vec<Link>,
    /// Ring of pending `(link, pre)` deliveries indexed by `time % len`.
    queue: Vec<Vec<(u32, u32)>>,
    fired: Vec<Vec<u32>>,
    /// Deliveries due this step, per target section.
    inbox: Vec<Vec<(u32, u32)>>,
    rewards: Vec<(usize, u32)>,
    rng: ChaCha8Rng,
    clock: u64,
    plasticity_enabled: bool,
    class_dim: usize,
    threshold: f64,
}

impl Network {
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn class_dim(&self) -> usize {
        self.class_dim
    }

    pub fn set_plasticity(&mut self, enabled: bool) {
        self.plasticity_enabled = enabled;
    }

    pub fn plasticity_enabled(&self) -> bool {
        self.plasticity_enabled
    }

    /// Moves the plasticity cutoff of every plastic link.
    pub fn set_learning_until(&mut self, t: u64) {
        for m in self.links.iter_mut().filter_map(|l| l.plastic.as_mut()) {
            m.set_learning_until(t);
        }
    }

    pub fn section_count(&self) -> usize {
        self.sections.len()
    }

    pub fn section_index(&self, name: &str) -> Option<usize> {
        self.sections.iter().position(|s| s.spec.name == name)
    }

    pub fn section_name(&self, idx: usize) -> &str {
        &self.sections[idx].spec.name
    }

    pub fn section_spec(&self, idx: usize) -> &SectionSpec {
        &self.sections[idx].spec
    }

    pub fn is_wta(&self, idx: usize) -> bool {
        self.sections[idx].wta
    }

    pub fn is_default_closed(&self, idx: usize) -> bool {
        self.sections[idx].default_closed
    }

    pub fn receptor_index(&self, name: &str) -> Option<usize> {
        self.receptors.iter().position(|r| r.name == name)
    }

    pub fn endpoint_name(&self, e: Endpoint) -> &str {
        match e {
            Endpoint::Receptor(i) => &self.receptors[i].name,
            Endpoint::Section(i) => &self.sections[i].spec.name,
        }
    }

    pub fn neuron(&self, section: usize, i: usize) -> NeuronState {
        let s = &self.sections[section];
        NeuronState {
            potential: s.potential[i],
            gate_level: s.gate[i],
            last_spike_time: s.last_spike[i],
            chartime: s.spec.chartime,
        }
    }

    pub fn potentials(&self, section: usize) -> &[f64] {
        &self.sections[section].potential
    }

    pub fn set_potential(&mut self, section: usize, i: usize, v: f64) {
        self.sections[section].potential[i] = v;
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// Links from `from` to `to`, by name.
    pub fn links_between<'a>(&'a self, from: &'a str, to: &'a str) -> impl Iterator<Item = &'a Link> + 'a {
        self.links.iter().filter(move |l| self.endpoint_name(l.from) == from && self.sections[l.to].spec.name == to)
    }

    /// The first plastic link into `section`.
    pub fn plastic_into(&self, section: usize) -> Option<&PlasticMatrix> {
        self.sections[section].plastic_in.first().and_then(|&l| self.links[l].plastic.as_ref())
    }

    pub fn plastic_into_mut(&mut self, section: usize) -> Option<&mut PlasticMatrix> {
        let l = *self.sections[section].plastic_in.first()?;
        self.links[l].plastic.as_mut()
    }

    /// Name of the section fed by the first plastic link, if any.
    pub fn plastic_section(&self) -> Option<usize> {
        self.links.iter().find(|l| l.plastic.is_some()).map(|l| l.to)
    }

    fn input_target(&self, node: InputNode) -> Result<(usize, usize), EngineError> {
        let (role, idx) = match node {
            InputNode::Pixel(p) => (ReceptorRole::Pixels, p as usize),
            InputNode::Class(c) => (ReceptorRole::Classes, c as usize),
        };
        self.receptors
            .iter()
            .position(|r| r.role == role && idx < r.n)
            .map(|r| (r, idx))
            .ok_or(EngineError::UnknownNode(node))
    }

    fn slot(&self, t: u64) -> usize {
        (t % self.queue.len() as u64) as usize
    }

    /// Advances the network by one timestep and returns the neurons that
    /// fired, per section.
    ///
    /// Every potential decays first. Sections then update in declaration
    /// order: delivery of potential and gating inputs, candidate selection,
    /// winner-take-all resolution, reset, propagation. Plasticity runs last.
    ///
    /// A spike on a link with delay `d > 0` arrives `d` steps later. With no
    /// delay it reaches a section declared later in the same step, and an
    /// earlier section (or its own) in the next step.
    pub fn step(&mut self, external: &[SpikeEvent]) -> Result<&[Vec<u32>], EngineError> {
        let t = self.clock;
        let slot = self.slot(t);
        let mut now = std::mem::take(&mut self.queue[slot]);
        for ev in external {
            if ev.time != t {
                return Err(EngineError::TimeMismatch { expected: t, got: ev.time });
            }
            let (r, idx) = self.input_target(ev.node)?;
            for &l in &self.receptors[r].out_links {
                let d = u64::from(self.links[l].delay);
                if d == 0 {
                    now.push((l as u32, idx as u32));
                } else {
                    let slot = self.slot(t + d);
                    self.queue[slot].push((l as u32, idx as u32));
                }
            }
        }

        for s in &mut self.sections {
            let decay = s.decay;
            s.potential.iter_mut().for_each(|v| *v *= decay);
        }

        self.rewards.clear();
        let mut inbox = std::mem::take(&mut self.inbox);
        for &(l, pre) in &now {
            inbox[self.links[l as usize].to].push((l, pre));
        }
        now.clear();
        // hand the buffer back to the ring to keep its allocation
        let slot = self.slot(t);
        if self.queue[slot].is_empty() {
            self.queue[slot] = now;
        }

        let threshold = self.threshold;
        for si in 0..self.sections.len() {
            for (l, pre) in std::mem::take(&mut inbox[si]) {
                deliver(&mut self.links[l as usize], &mut self.sections[si], pre, t, &mut self.rewards);
            }
            let s = &mut self.sections[si];
            let fired = &mut self.fired[si];
            fired.clear();
            fired.extend((0..s.spec.n).filter(|&i| s.may_fire(i, threshold)).map(|i| i as u32));
            if s.wta && fired.len() > 1 {
                let winner = wta_resolve(fired, &s.potential, &mut self.rng);
                for &loser in fired.iter() {
                    s.potential[loser as usize] = 0.0;
                }
                fired.clear();
                fired.push(winner);
            }
            for &f in fired.iter() {
                s.potential[f as usize] = 0.0;
                s.last_spike[f as usize] = Some(t);
            }
            s.gate.iter_mut().for_each(|g| *g = 0.0);
            s.gate_opened.iter_mut().for_each(|g| *g = false);

            if self.fired[si].is_empty() {
                continue;
            }
            for &l in &self.sections[si].out_links {
                let link = &self.links[l];
                let fired = self.fired[si].iter().map(|&f| (l as u32, f));
                if link.delay == 0 && link.to > si {
                    inbox[link.to].extend(fired);
                } else {
                    let d = u64::from(link.delay.max(1));
                    let slot = ((t + d) % self.queue.len() as u64) as usize;
                    self.queue[slot].extend(fired);
                }
            }
        }
        self.inbox = inbox;

        if self.plasticity_enabled {
            for &(section, post) in &self.rewards {
                for &l in &self.sections[section].plastic_in {
                    if let Some(m) = self.links[l].plastic.as_mut() {
                        m.on_reward(post as usize, t);
                    }
                }
            }
            for (si, fired) in self.fired.iter().enumerate() {
                if fired.is_empty() {
                    continue;
                }
                for &l in &self.sections[si].plastic_in {
                    let m = self.links[l].plastic.as_mut().expect("plastic link has a matrix");
                    if !m.is_learning(t) {
                        continue;
                    }
                    let eligible = m.eligible_pres(t);
                    for &f in fired {
                        m.on_post_spike_with(f as usize, t, &eligible);
                    }
                }
            }
        }

        self.clock += 1;
        Ok(&self.fired)
    }

    /// Steps through `[clock, t_end)` with no external input.
    pub fn idle_until(&mut self, t_end: u64) -> Result<(), EngineError> {
        while self.clock < t_end {
            self.step(&[])?;
        }
        Ok(())
    }
}

/// One logged spike.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpikeRecord {
    pub time: u64,
    pub section: usize,
    pub neuron: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpikeLog {
    pub spikes: Vec<SpikeRecord>,
}

impl SpikeLog {
    /// CSV lines `time,section,neuron_index`.
    pub fn to_csv(&self, network: &Network) -> String {
        let mut out = String::from("time,section,neuron_index\n");
        for s in &self.spikes {
            let _ = writeln!(out, "{},{},{}", s.time, network.section_name(s.section), s.neuron);
        }
        out
    }

    pub fn push_step(&mut self, t: u64, fired: &[Vec<u32>]) {
        for (section, ns) in fired.iter().enumerate() {
            self.spikes.extend(ns.iter().map(|&neuron| SpikeRecord { time: t, section, neuron }));
        }
    }
}

/// Runs `[t_start, t_end)`, feeding events from `stream` at their
/// timesteps and calling `observe(t, fired)` after every step. Events before
/// `t_start` are an error; events at or after `t_end` stay in the stream.
pub fn run<I, F>(
    network: &mut Network,
    stream: &mut Peekable<I>,
    t_start: u64,
    t_end: u64,
    plasticity_enabled: bool,
    mut observe: F,
) -> Result<(), EngineError>
where
    I: Iterator<Item = SpikeEvent>,
    F: FnMut(u64, &[Vec<u32>]),
{
    if network.clock() != t_start {
        return Err(EngineError::ClockMismatch { clock: network.clock(), start: t_start });
    }
    network.set_plasticity(plasticity_enabled);
    let mut batch = Vec::new();
    for t in t_start..t_end {
        batch.clear();
        while let Some(ev) = stream.next_if(|e| e.time <= t) {
            if ev.time < t {
                return Err(EngineError::TimeMismatch { expected: t, got: ev.time });
            }
            batch.push(ev);
        }
        let fired = network.step(&batch)?;
        observe(t, fired);
    }
    Ok(())
}

fn deliver(link: &mut Link, section: &mut Section, pre: u32, t: u64, rewards: &mut Vec<(usize, u32)>) {
    match link.kind {
        LinkKind::Static => {
            for &post in &link.fanout[pre as usize] {
                section.potential[post as usize] += link.weight;
            }
        }
        LinkKind::Plastic => {
            let m = link.plastic.as_mut().expect("plastic link has a matrix");
            m.deliver(pre as usize, t, &mut section.potential);
        }
        LinkKind::Gating => {
            for &post in &link.fanout[pre as usize] {
                section.gate[post as usize] += link.weight;
                if link.weight > 0.0 {
                    section.gate_opened[post as usize] = true;
                }
            }
        }
        LinkKind::Reward => {
            rewards.extend(link.fanout[pre as usize].iter().map(|&post| (link.to, post)));
        }
    }
}
