use proptest::prelude::*;
use uplift_policy::dataset::{self, CustomerRecord, ExperimentDataset, Schema, TreatmentSet};

fn records() -> impl Strategy<Value = ExperimentDataset> {
    (2usize..4, 1usize..4, 0usize..3, 1usize..30).prop_flat_map(|(arms, d, n_aux, n)| {
        let rec = (
            prop::collection::vec(-1e6f64..1e6, d),
            0..arms,
            prop_oneof![(-1e6f64..1e6), Just(0.0), Just(1.0)],
            prop::collection::vec(-1e3f64..1e3, n_aux),
        );
        prop::collection::vec(rec, n).prop_map(move |rows| {
            let labels = std::iter::once("ctrl".to_string())
                .chain((1..arms).map(|k| format!("arm {k}")))
                .collect();
            let records = rows
                .into_iter()
                .enumerate()
                .map(|(i, (x, t, y, aux))| CustomerRecord {
                    id: format!("u-{i}"),
                    x,
                    t,
                    y,
                    aux,
                })
                .collect();
            ExperimentDataset::new(
                TreatmentSet::uniform(labels).unwrap(),
                (0..d).map(|j| format!("f{j}")).collect(),
                (0..n_aux).map(|j| format!("z{j}")).collect(),
                records,
            )
            .unwrap()
        })
    })
}

proptest! {
    #[test]
    fn csv_round_trip_is_lossless(ds in records()) {
        let mut buf = Vec::new();
        dataset::to_writer(&ds, &mut buf).unwrap();
        prop_assert!(!buf.contains(&b'\r'));
        let back = dataset::read_experiment(&buf[..], &Schema::for_dataset(&ds)).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn split_partitions_the_ids(ds in records(), frac in 0.1f64..0.9, seed in any::<u64>()) {
        prop_assume!(ds.len() >= 2);
        let (a, b) = dataset::split(&ds, frac, seed).unwrap();
        let mut all: Vec<String> = a.ids().into_iter().chain(b.ids()).collect();
        all.sort();
        let mut expected = ds.ids();
        expected.sort();
        prop_assert_eq!(all, expected);
    }
}

#[test]
fn file_round_trip_through_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("d.csv");
    let text = "id,treatment,outcome,age,aux:sales\nb,control,1,30,10.5\na,promo,0,41,12\n";
    std::fs::write(&path, text).unwrap();
    let schema = Schema::with_labels(["control", "promo"]);
    let ds = dataset::load_experiment(&path, &schema).unwrap();
    assert_eq!(ds.feature_names(), ["age".to_string()]);
    assert_eq!(ds.aux_names(), ["sales".to_string()]);
    let out = tmp.path().join("e.csv");
    dataset::write_experiment(&ds, &out).unwrap();
    assert_eq!(dataset::load_experiment(&out, &schema).unwrap(), ds);
}
