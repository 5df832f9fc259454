//! Three-factor plasticity for the receptor-to-learning-layer synapses.
//!
//! Every postsynaptic spike depresses the synapses whose presynaptic node
//! fired within the eligibility window (anti-Hebbian phase) and leaves a tag
//! naming them. A reward reaching the same neuron within the dopamine window
//! restores the depression and adds the dopamine step on top. With equal
//! steps, an unrewarded spike costs `d_H` and a rewarded one gains `d_D`.
//!
//! Each synapse holds a *resource*; the weight it transmits is derived from
//! it by a [`WeightMap`].

use std::collections::VecDeque;
use std::fmt::Write as _;

/// Headroom below `min_weight`, in depression steps, for clamped resources.
pub const RESOURCE_FLOOR_MARGIN: f64 = 10.0;

/// How a synaptic resource turns into a transmitted weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WeightMap {
    /// `clamp(r, min_weight, max_weight)`. The resource is kept in
    /// `[min_weight - RESOURCE_FLOOR_MARGIN * d_H, resource_ceiling]`.
    #[default]
    Clamp,
    /// `min + D r / (D + r)` for `r > 0` and `min` otherwise, with
    /// `D = max_weight - min_weight`. The weight approaches `max_weight`
    /// asymptotically, so the resource needs no bounds.
    Saturating,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlasticityParams {
    /// Anti-Hebbian step `d_H` (magnitude of `weight_inc`).
    pub depression: f64,
    /// Dopamine step `d_D`, carried by the reward link weight.
    pub dopamine: f64,
    pub dopamine_window: u64,
    /// How far back a presynaptic spike keeps its synapse eligible.
    pub eligibility_window: u64,
    /// Plasticity is frozen from this timestep on.
    pub learning_until: u64,
    pub min_weight: f64,
    pub max_weight: f64,
    /// Upper bound on a clamped resource.
    pub resource_ceiling: f64,
    pub map: WeightMap,
}

impl PlasticityParams {
    pub fn resource_floor(&self) -> f64 {
        self.min_weight - RESOURCE_FLOOR_MARGIN * self.depression
    }

    pub fn weight_of(&self, resource: f64) -> f64 {
        match self.map {
            WeightMap::Clamp => resource.clamp(self.min_weight, self.max_weight),
            WeightMap::Saturating => {
                let span = self.max_weight - self.min_weight;
                let r = resource.max(0.0);
                self.min_weight + span * r / (span + r)
            }
        }
    }

    fn bound_resource(&self, resource: f64) -> f64 {
        match self.map {
            WeightMap::Clamp => resource.clamp(self.resource_floor(), self.resource_ceiling),
            WeightMap::Saturating => resource,
        }
    }
}

/// Read-only view of one plastic synapse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlasticSynapse {
    pub resource: f64,
    pub last_pre_spike: Option<u64>,
}

impl PlasticSynapse {
    pub fn effective_weight(&self, params: &PlasticityParams) -> f64 {
        params.weight_of(self.resource)
    }
}

/// The weight a synapse transmits under `params.map`.
pub fn effective_weight(synapse: &PlasticSynapse, params: &PlasticityParams) -> f64 {
    synapse.effective_weight(params)
}

/// Synapses depressed by one postsynaptic spike, awaiting a possible reward.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlasticityTag {
    pub post_neuron: u32,
    pub spike_time: u64,
    /// Presynaptic indices of the touched synapses.
    pub touched: Vec<u32>,
}

/// Dense plastic projection from `n_pre` input nodes onto `n_post` neurons.
#[derive(Clone, Debug)]
pub struct PlasticMatrix {
    n_pre: usize,
    n_post: usize,
    /// Pre-major: `resources[pre * n_post + post]`.
    resources: Vec<f64>,
    present: Option<Vec<bool>>,
    last_pre_spike: Vec<Option<u64>>,
    tags: Vec<VecDeque<PlasticityTag>>,
    params: PlasticityParams,
}

impl PlasticMatrix {
    /// `init(pre, post)` returns the starting resource, or `None` where no
    /// synapse exists.
    pub fn new(
        n_pre: usize,
        n_post: usize,
        params: PlasticityParams,
        mut init: impl FnMut(usize, usize) -> Option<f64>,
    ) -> Self {
        let mut resources = vec![0.0; n_pre * n_post];
        let mut present = vec![true; n_pre * n_post];
        for pre in 0..n_pre {
            for post in 0..n_post {
                match init(pre, post) {
                    Some(r) => resources[pre * n_post + post] = params.bound_resource(r),
                    None => present[pre * n_post + post] = false,
                }
            }
        }
        let present = present.iter().any(|&p| !p).then_some(present);
        Self {
            n_pre,
            n_post,
            resources,
            present,
            last_pre_spike: vec![None; n_pre],
            tags: vec![VecDeque::new(); n_post],
            params,
        }
    }

    pub fn n_pre(&self) -> usize {
        self.n_pre
    }

    pub fn n_post(&self) -> usize {
        self.n_post
    }

    pub fn params(&self) -> &PlasticityParams {
        &self.params
    }

    pub fn synapse_count(&self) -> usize {
        self.present.as_ref().map_or(self.resources.len(), |p| p.iter().filter(|&&x| x).count())
    }

    fn exists(&self, idx: usize) -> bool {
        self.present.as_ref().is_none_or(|p| p[idx])
    }

    pub fn synapse(&self, pre: usize, post: usize) -> Option<PlasticSynapse> {
        let idx = pre * self.n_post + post;
        self.exists(idx)
            .then(|| PlasticSynapse { resource: self.resources[idx], last_pre_spike: self.last_pre_spike[pre] })
    }

    pub fn weight(&self, pre: usize, post: usize) -> Option<f64> {
        self.synapse(pre, post).map(|s| s.effective_weight(&self.params))
    }

    /// Overwrites a resource, e.g. when restoring a snapshot.
    pub fn set_resource(&mut self, pre: usize, post: usize, resource: f64) {
        let idx = pre * self.n_post + post;
        if self.exists(idx) {
            self.resources[idx] = self.params.bound_resource(resource);
        }
    }

    /// Iterates `(pre, post, weight)` over existing synapses.
    pub fn weights(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.resources.len())
            .filter(|&i| self.exists(i))
            .map(|i| (i / self.n_post, i % self.n_post, self.params.weight_of(self.resources[i])))
    }

    /// Delivers one presynaptic spike at `t`: adds each effective weight to
    /// the target potential and stamps the eligibility time.
    pub fn deliver(&mut self, pre: usize, t: u64, potentials: &mut [f64]) {
        self.last_pre_spike[pre] = Some(t);
        let row = &self.resources[pre * self.n_post..(pre + 1) * self.n_post];
        match &self.present {
            None => {
                for (v, &r) in potentials.iter_mut().zip(row) {
                    *v += self.params.weight_of(r);
                }
            }
            Some(present) => {
                let mask = &present[pre * self.n_post..(pre + 1) * self.n_post];
                for ((v, &r), &m) in potentials.iter_mut().zip(row).zip(mask) {
                    if m {
                        *v += self.params.weight_of(r);
                    }
                }
            }
        }
    }

    /// Marks a presynaptic spike without delivering it.
    pub fn record_pre_spike(&mut self, pre: usize, t: u64) {
        self.last_pre_spike[pre] = Some(t);
    }

    pub fn set_learning_until(&mut self, t: u64) {
        self.params.learning_until = t;
    }

    pub fn is_learning(&self, t: u64) -> bool {
        t < self.params.learning_until
    }

    /// Presynaptic nodes whose last spike lies in `[t - window, t]`.
    pub fn eligible_pres(&self, t: u64) -> Vec<u32> {
        let from = t.saturating_sub(self.params.eligibility_window);
        self.last_pre_spike
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_some_and(|s| s >= from && s <= t))
            .map(|(i, _)| i as u32)
            .collect()
    }

    fn prune(&mut self, post: usize, t: u64) {
        let window = self.params.dopamine_window;
        let tags = &mut self.tags[post];
        while tags.front().is_some_and(|tag| tag.spike_time + window < t) {
            tags.pop_front();
        }
    }

    /// Anti-Hebbian phase. Returns `None` once learning has ended.
    pub fn on_post_spike(&mut self, post: usize, t: u64) -> Option<&PlasticityTag> {
        let eligible = self.eligible_pres(t);
        self.on_post_spike_with(post, t, &eligible)
    }

    /// As [`Self::on_post_spike`], with the eligible set precomputed by the
    /// caller (it is shared by every neuron firing at `t`).
    pub fn on_post_spike_with(&mut self, post: usize, t: u64, eligible: &[u32]) -> Option<&PlasticityTag> {
        if !self.is_learning(t) {
            return None;
        }
        self.prune(post, t);
        let step = self.params.depression;
        let mut touched = Vec::with_capacity(eligible.len());
        for &pre in eligible {
            let idx = pre as usize * self.n_post + post;
            if self.exists(idx) {
                self.resources[idx] = self.params.bound_resource(self.resources[idx] - step);
                touched.push(pre);
            }
        }
        self.tags[post].push_back(PlasticityTag { post_neuron: post as u32, spike_time: t, touched });
        self.tags[post].back()
    }

    /// Dopamine phase: every live tag of `post` is rewarded and consumed.
    pub fn on_reward(&mut self, post: usize, t: u64) {
        if !self.is_learning(t) {
            return;
        }
        self.prune(post, t);
        let step = self.params.depression + self.params.dopamine;
        for tag in std::mem::take(&mut self.tags[post]) {
            // tags from the future cannot exist; the window check is the prune above
            for pre in tag.touched {
                let idx = pre as usize * self.n_post + post;
                self.resources[idx] = self.params.bound_resource(self.resources[idx] + step);
            }
        }
    }

    pub fn live_tags(&self, post: usize) -> impl Iterator<Item = &PlasticityTag> {
        self.tags[post].iter()
    }
}

/// One row of a weight snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightRow {
    pub section: String,
    pub post: usize,
    pub pre: usize,
    pub weight: f64,
}

/// CSV `section,post_index,pre_index,weight` with a header line.
pub fn snapshot_csv(section: &str, matrix: &PlasticMatrix) -> String {
    let mut out = String::from("section,post_index,pre_index,weight\n");
    let mut rows: Vec<_> = matrix.weights().collect();
    rows.sort_by_key(|&(pre, post, _)| (post, pre));
    for (pre, post, w) in rows {
        let _ = writeln!(out, "{section},{post},{pre},{w}");
    }
    out
}

#[derive(Debug, thiserror::Error)]
#[error("weight snapshot line {line}: {reason}")]
pub struct SnapshotError {
    pub line: usize,
    pub reason: String,
}

pub fn parse_snapshot(text: &str) -> Result<Vec<WeightRow>, SnapshotError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "section,post_index,pre_index,weight" => {}
        _ => return Err(SnapshotError { line: 1, reason: "missing header".into() }),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| SnapshotError { line: i + 1, reason: reason.to_string() };
        let fields: Vec<&str> = line.trim().split(',').collect();
        let [section, post, pre, weight] = fields[..] else {
            return Err(bad("expected 4 fields"));
        };
        rows.push(WeightRow {
            section: section.to_string(),
            post: post.parse().map_err(|_| bad("bad post index"))?,
            pre: pre.parse().map_err(|_| bad("bad pre index"))?,
            weight: weight.parse().map_err(|_| bad("bad weight"))?,
        });
    }
    Ok(rows)
}
