use std::fs;

use geomclass::canonical::to_canonical_string;
use geomclass::geojson::{parse_geojson, to_geojson};
use geomclass::modelfile::{ModelFile, SavedModel};
use geomclass::wkt::{parse_wkt, to_wkt, WktError};
use geomclass::{Dataset, Parallel};
use geomclass_core::datagen::{generate, Placement, ShapeClass};
use geomclass_core::exec::Sequential;
use geomclass_core::harness::{split, FeatureTable, FittedShallow};
use geomclass_core::models::{build_cnn, DeepModel};
use geomclass_core::shallow::{FitOptions, Hyper};
use geomclass_core::{Geometry, Point, Ring};
use proptest::prelude::*;

fn ring_strategy() -> impl Strategy<Value = Ring> {
    (3usize..20, -1e6..1e6f64, -1e6..1e6f64, 1e-3..1e3f64).prop_flat_map(|(n, cx, cy, size)| {
        prop::collection::vec((0.0..1.0f64, 0.3..1.0f64), n).prop_map(move |mut v| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            let pts = v
                .iter()
                .map(|(t, r)| {
                    let t = t * std::f64::consts::TAU;
                    Point::new(cx + size * r * t.cos(), cy + size * r * t.sin())
                })
                .collect();
            Ring::from_open(pts).unwrap()
        })
    })
}

fn geometry_strategy() -> impl Strategy<Value = Geometry> {
    prop::collection::vec(ring_strategy(), 1..4)
        .prop_map(|rings| Geometry::new("g7", rings).unwrap())
}

proptest! {
    #[test]
    fn wkt_round_trips_exactly(g in geometry_strategy()) {
        let text = to_wkt(&g);
        let back = parse_wkt(&g.id, &text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(to_wkt(&back), text);
    }

    #[test]
    fn geojson_round_trips_exactly(gs in prop::collection::vec(geometry_strategy(), 1..5)) {
        let items: Vec<(Geometry, String)> = gs
            .into_iter()
            .enumerate()
            .map(|(i, mut g)| {
                g.id = format!("f{i}");
                (g, format!("class{}", i % 2))
            })
            .collect();
        let text = serde_json::to_string(&to_geojson(&items, "kind")).unwrap();
        let back = parse_geojson(&text, "kind").unwrap();
        prop_assert_eq!(back, items);
    }
}

#[test]
fn wkt_errors_report_byte_offsets() {
    match parse_wkt("x", "POLYGON ((0 0, 1 0, 1 1 0 0))") {
        Err(WktError::Syntax { pos, .. }) => assert_eq!(pos, 24),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        parse_wkt("x", "LINESTRING (0 0, 1 1)"),
        Err(WktError::Unsupported(_))
    ));
    assert!(matches!(
        parse_wkt("x", "POLYGON ((0 0, 4 0, 4 4, 0 0), (1 1, 2 1, 2 2, 1 1))"),
        Err(WktError::InteriorRing { polygon: 0 })
    ));
    assert!(matches!(
        parse_wkt("x", "POLYGON EMPTY"),
        Err(WktError::Empty)
    ));
}

#[test]
fn geojson_reports_missing_labels() {
    let text = r#"{"type":"FeatureCollection","features":[
        {"type":"Feature","properties":{},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}}]}"#;
    assert!(parse_geojson(text, "label").is_err());
}

fn small_dataset() -> Dataset {
    let items = generate(
        &ShapeClass::ALL[..3],
        20,
        5,
        &Placement::default(),
        &Sequential,
    );
    let sp = split(items.len(), 5).unwrap();
    Dataset::from_split(
        &items,
        &sp,
        vec!["a".into(), "b".into(), "c".into()],
        Some(5),
        serde_json::json!({}),
    )
}

#[test]
fn dataset_save_load_save_is_byte_identical() {
    let ds = small_dataset();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ds.save(a.path()).unwrap();
    let back = Dataset::load(a.path()).unwrap();
    back.save(b.path()).unwrap();
    for f in ["manifest.json", "train.ndjson", "val.ndjson", "test.ndjson"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let enc = geomclass::pipeline::encode_dataset(&ds, 1024).unwrap();
    enc.save(a.path()).unwrap();
    let back = Dataset::load(a.path()).unwrap();
    assert_eq!(back, enc);
    back.save(b.path()).unwrap();
    assert_eq!(
        fs::read(a.path().join("train.ndjson")).unwrap(),
        fs::read(b.path().join("train.ndjson")).unwrap()
    );
}

fn assert_stable(model: &ModelFile) {
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("one.json"), dir.path().join("two.json"));
    model.save(&p1).unwrap();
    let back = ModelFile::load(&p1).unwrap();
    // Training traces are not persisted; everything else must survive.
    assert_eq!(
        to_canonical_string(&back).unwrap(),
        to_canonical_string(model).unwrap()
    );
    back.save(&p2).unwrap();
    assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
}

#[test]
fn models_reload_bit_exactly() {
    let ds = small_dataset();
    let exec = Parallel::new(1);
    let (table, _, labels) = geomclass::pipeline::feature_table(&ds, "train", 4, &exec).unwrap();
    for hyper in [
        Hyper::Knn { k: 3 },
        Hyper::Dtree { max_depth: 4 },
        Hyper::Logreg { c: 1.0 },
        Hyper::SvmRbf { c: 1.0, gamma: 0.1 },
    ] {
        let fitted = FittedShallow::fit(&table, &labels, 4, hyper, &FitOptions::default()).unwrap();
        let file = ModelFile::new(
            ds.manifest.class_names.clone(),
            SavedModel::Shallow(fitted.clone()),
        );
        assert_stable(&file);
        let text = to_canonical_string(&file).unwrap();
        let SavedModel::Shallow(back) = serde_json::from_str::<ModelFile>(&text).unwrap().model
        else {
            unreachable!()
        };
        assert_eq!(
            back.predict(&table).unwrap(),
            fitted.predict(&table).unwrap()
        );
    }
    let cnn = build_cnn(3, 9).unwrap();
    assert_stable(&ModelFile::new(
        vec!["a".into(), "b".into(), "c".into()],
        SavedModel::Deep {
            network: DeepModel::Cnn(cnn),
            scale_factor: 0.1 + 0.2,
            max_points: 1024,
            mask_padding: false,
            train_bins: vec![8, 64],
        },
    ));
}

#[test]
fn feature_tables_are_stable_across_executors() {
    let ds = small_dataset();
    let items = geomclass::pipeline::geometries(&ds, "train").unwrap();
    let gs: Vec<&Geometry> = items.iter().map(|g| &g.geometry).collect();
    let a = FeatureTable::compute(&gs, 6, &Sequential).unwrap();
    let b = FeatureTable::compute(&gs, 6, &Parallel::new(3)).unwrap();
    assert_eq!(a.matrix, b.matrix);
}
