use colanet::data::{encode_idx, load_flat, load_idx, write_flat, Dataset, ImageRecord, PIXELS};
use colanet::encoding::{build_stream, encode_window, EncodingParams, InputNode};
use proptest::prelude::*;

fn record() -> impl Strategy<Value = ImageRecord> {
    (proptest::collection::vec(any::<u8>(), PIXELS), 0u8..10)
        .prop_map(|(px, label)| ImageRecord::from_slice(&px, label).unwrap())
}

fn dataset(max: usize) -> impl Strategy<Value = Dataset> {
    proptest::collection::vec(record(), 0..max)
        .prop_flat_map(|recs| {
            let n = recs.len();
            (Just(recs), 0..=n)
        })
        .prop_map(|(recs, train)| Dataset::new(recs, train).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flat_round_trip_and_idx_agreement(ds in dataset(6)) {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = (dir.path().join("MNIST.bin"), dir.path().join("MNIST.target"));
        write_flat(&ds, &img, &lab).unwrap();
        let flat = load_flat(&img, &lab).unwrap();
        prop_assert_eq!(flat.records(), ds.records());

        let (ibytes, lbytes) = encode_idx(ds.records());
        let (ii, li) = (dir.path().join("i.idx"), dir.path().join("l.idx"));
        std::fs::write(&ii, ibytes).unwrap();
        std::fs::write(&li, lbytes).unwrap();
        prop_assert_eq!(load_idx(&ii, &li).unwrap(), flat);
    }

    #[test]
    fn window_confinement_and_label_coverage(rec in record(), k in 0u64..5_000) {
        let p = EncodingParams::default();
        let events = encode_window(&rec, k, &p, true);
        let start = 20 * k;
        let mut label_times = Vec::new();
        for e in &events {
            match e.node {
                InputNode::Pixel(_) => prop_assert!((start..start + 10).contains(&e.time)),
                InputNode::Class(c) => {
                    prop_assert_eq!(c, rec.label());
                    label_times.push(e.time);
                }
            }
        }
        prop_assert_eq!(label_times, (start..start + 20).collect::<Vec<_>>());
        for (px, &b) in rec.pixels().iter().enumerate() {
            let n = events.iter().filter(|e| e.node == InputNode::Pixel(px as u16)).count() as u64;
            prop_assert_eq!(n, 10 * u64::from(b) / 255);
        }
    }

    #[test]
    fn stream_is_deterministic_and_sorted(ds in dataset(4)) {
        let p = EncodingParams::default();
        let a: Vec<_> = build_stream(&ds, &p).collect();
        let b: Vec<_> = build_stream(&ds, &p).collect();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.windows(2).all(|w| w[0].time <= w[1].time));
        let labelled = a.iter().filter(|e| matches!(e.node, InputNode::Class(_))).count();
        prop_assert_eq!(labelled, 20 * ds.train_count());
    }
}
