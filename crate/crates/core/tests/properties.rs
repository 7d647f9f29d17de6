use gmra::eval::fit_rate;
use gmra::pointset::{load_points, save_points, PointFormat};
use gmra::PointCloud;
use proptest::prelude::*;

fn cloud() -> impl Strategy<Value = PointCloud> {
    (1usize..6, 1usize..40).prop_flat_map(|(dim, n)| {
        prop::collection::vec(-1e6f64..1e6, dim * n).prop_map(move |data| PointCloud::new(dim, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_laws_are_recovered(slope in -3.0f64..3.0, scale in 0.01f64..100.0, k in 3usize..12) {
        let xs: Vec<f64> = (0..k).map(|i| 10f64.powf(i as f64 * 0.3)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| scale * x.powf(slope)).collect();
        let fit = fit_rate(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - scale.log10()).abs() < 1e-9);
        prop_assert_eq!(fit.points, k);
    }

    #[test]
    fn binary_and_csv_round_trip(c in cloud()) {
        let dir = tempfile::tempdir().unwrap();
        for (name, format) in [("p.bin", PointFormat::Binary), ("p.csv", PointFormat::Csv)] {
            let path = dir.path().join(name);
            save_points(&path, &c, format).unwrap();
            let back = load_points(&path, format).unwrap();
            prop_assert_eq!(back.dim(), c.dim());
            prop_assert_eq!(back.as_slice(), c.as_slice());
        }
    }
}

#[test]
fn truncated_binary_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.bin");
    let c = PointCloud::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    save_points(&path, &c, PointFormat::Binary).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(load_points(&path, PointFormat::Binary).is_err());
    std::fs::write(&path, b"NOTMAGIC").unwrap();
    assert!(load_points(&path, PointFormat::Binary).is_err());
}

#[test]
fn ragged_csv_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    std::fs::write(&path, "1,2\n3\n").unwrap();
    assert!(load_points(&path, PointFormat::Csv).is_err());
    std::fs::write(&path, "1,x\n").unwrap();
    assert!(load_points(&path, PointFormat::Csv).is_err());
}
