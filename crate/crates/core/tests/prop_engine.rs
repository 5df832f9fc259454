use colanet::config::{build_network, reference_config};
use colanet::data::{Dataset, ImageRecord, PIXELS};
use colanet::encoding::{build_stream, EncodingParams, InputNode, SpikeEvent};
use colanet::engine::{run, LinkKind, LinkSpec, Network, NetworkBuilder, Policy, ReceptorRole, SectionSpec};
use proptest::prelude::*;

const INPUTS: usize = 6;

/// Receptor `R` feeding section `A` through fixed per-input weights, plus an
/// optional veto receptor `G`.
fn feed_forward(weights: &[f64], n: usize, chartime: f64, threshold: f64, veto: bool) -> Network {
    let mut b = NetworkBuilder::new(0).threshold(threshold);
    b.receptor("R", INPUTS, ReceptorRole::Pixels);
    b.receptor("G", 1, ReceptorRole::Classes);
    b.section(SectionSpec { name: "A".into(), n, chartime });
    // one static link per input so each carries its own weight
    for &w in weights {
        b.link(LinkSpec::new("R", "A", LinkKind::Static, Policy::Full, w)).unwrap();
    }
    if veto {
        b.link(LinkSpec::new("G", "A", LinkKind::Gating, Policy::Full, -5.0)).unwrap();
    }
    b.build()
}

fn bursts(steps: usize) -> impl Strategy<Value = Vec<(Vec<bool>, bool)>> {
    proptest::collection::vec((proptest::collection::vec(any::<bool>(), INPUTS), proptest::bool::weighted(0.2)), steps)
}

fn events(t: u64, inputs: &[bool], gate: bool) -> Vec<SpikeEvent> {
    let mut ev: Vec<_> = inputs
        .iter()
        .enumerate()
        .filter(|(_, &on)| on)
        .map(|(p, _)| SpikeEvent { time: t, node: InputNode::Pixel(p as u16) })
        .collect();
    if gate {
        ev.push(SpikeEvent { time: t, node: InputNode::Class(0) });
    }
    ev
}

proptest! {
    /// Threshold, reset, decay and gating against a scalar oracle. All links
    /// use the full policy, so every input spike reaches every neuron.
    #[test]
    fn matches_scalar_oracle(
        weights in proptest::collection::vec(-3.0f64..4.0, 1..INPUTS),
        chartime in 1.0f64..6.0,
        threshold in 0.5f64..9.0,
        veto in any::<bool>(),
        input in bursts(60),
    ) {
        let mut net = feed_forward(&weights, 2, chartime, threshold, veto);
        // each input node fans out to one link per weight
        let per_spike: f64 = weights.iter().sum();
        let decay = (-1.0 / chartime).exp();
        let mut v = 0.0f64;
        for (t, (inputs, gate)) in input.iter().enumerate() {
            let arriving = inputs.iter().filter(|&&b| b).count() as f64 * per_spike;
            let vetoed = *gate && veto;
            v = v * decay + arriving;
            let fires = v >= threshold && !vetoed;
            let fired = net.step(&events(t as u64, inputs, *gate)).unwrap().to_vec();
            prop_assert_eq!(fired[0].len(), if fires { 2 } else { 0 }, "t={} v={}", t, v);
            if fires {
                v = 0.0;
                prop_assert_eq!(net.neuron(0, 0).last_spike_time, Some(t as u64));
            }
            let got = net.neuron(0, 1).potential;
            prop_assert!((got - v).abs() <= 1e-9 * (1.0 + v.abs()), "t={} got={} want={}", t, got, v);
            prop_assert_eq!(net.neuron(0, 1).gate_level, 0.0);
        }
    }

    #[test]
    fn silent_decay(v0 in -50.0f64..50.0, chartime in 1.0f64..10.0, k in 1u64..40) {
        let mut net = feed_forward(&[1.0], 1, chartime, 1e9, false);
        net.set_potential(0, 0, v0);
        net.idle_until(k).unwrap();
        let want = v0 * (-(k as f64) / chartime).exp();
        prop_assert!((net.neuron(0, 0).potential - want).abs() <= 1e-12 * (1.0 + v0.abs()) * k as f64);
    }

    /// A WTA group fires at most one neuron per step, whatever the drive.
    #[test]
    fn wta_group_has_one_winner(
        n in 2usize..40,
        drive in proptest::collection::vec(proptest::collection::vec(any::<bool>(), INPUTS), 1..30),
        seed in any::<u64>(),
    ) {
        let mut b = NetworkBuilder::new(seed);
        b.receptor("R", INPUTS, ReceptorRole::Pixels);
        b.section(SectionSpec { name: "W".into(), n, chartime: 1.0 });
        let mut spec = LinkSpec::new("R", "W", LinkKind::Static, Policy::Full, 2.0);
        spec.probability = 0.5;
        b.link(spec).unwrap();
        b.link(LinkSpec::new("W", "W", LinkKind::Gating, Policy::AllToAllSections, -10.0)).unwrap();
        let mut net = b.build();
        for (t, inputs) in drive.iter().enumerate() {
            let fired = net.step(&events(t as u64, inputs, false)).unwrap();
            prop_assert!(fired[0].len() <= 1);
        }
    }
}

fn tiny_dataset(seed: u64) -> Dataset {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let recs = (0..6)
        .map(|k| {
            let px: Vec<u8> = (0..PIXELS).map(|_| if rng.random_bool(0.2) { rng.random() } else { 0 }).collect();
            ImageRecord::from_slice(&px, (k % 10) as u8).unwrap()
        })
        .collect();
    Dataset::new(recs, 4).unwrap()
}

fn trajectory(data: &Dataset, seed: u64) -> (Vec<(u64, usize, u32)>, Vec<f64>) {
    let doc = reference_config();
    let mut net = build_network(&doc, seed).unwrap();
    let mut stream = build_stream(data, &EncodingParams::default()).peekable();
    let mut spikes = Vec::new();
    run(&mut net, &mut stream, 0, data.len() as u64 * 20, true, |t, fired| {
        for (s, ns) in fired.iter().enumerate() {
            spikes.extend(ns.iter().map(|&n| (t, s, n)));
        }
    })
    .unwrap();
    let l = net.section_index("L").unwrap();
    let weights = net.plastic_into(l).unwrap().weights().map(|(_, _, w)| w).collect();
    (spikes, weights)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn seed_and_stream_determine_everything(data_seed in any::<u64>(), seed in any::<u64>()) {
        let data = tiny_dataset(data_seed);
        let a = trajectory(&data, seed);
        let b = trajectory(&data, seed);
        prop_assert_eq!(a, b);
    }
}
