use deadwood::grid::Grid;
use deadwood::raster::{
    decode_raster, encode_raster, parse_annotations, read_raster, write_raster, Annotation, AnnotationCollection, ChannelRole,
    GeoTransform, InstanceMap, MultiChannelRaster,
};
use deadwood::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ROLES: [ChannelRole; 5] =
    [ChannelRole::Segmentation, ChannelRole::Centroid, ChannelRole::Hybrid, ChannelRole::ImageBand, ChannelRole::Other];

fn random_raster(rng: &mut ChaCha8Rng) -> MultiChannelRaster {
    let (w, h, k) = (rng.random_range(1..40), rng.random_range(1..40), rng.random_range(1..5));
    let data = (0..w * h * k)
        .map(|_| loop {
            // arbitrary bit patterns, including subnormals and signed zero
            let v = f32::from_bits(rng.random());
            if v.is_finite() {
                break v;
            }
        })
        .collect();
    let geo = GeoTransform::new(
        rng.random_range(-1e6..1e6),
        rng.random_range(-1e7..1e7),
        rng.random_range(0.01..30.0),
        rng.random_range(0.01..30.0),
    )
    .unwrap();
    let roles = (0..k).map(|_| ROLES[rng.random_range(0..ROLES.len())]).collect();
    MultiChannelRaster::new(w, h, k, data, geo, roles).unwrap()
}

#[test]
fn thousand_random_rasters_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..1000 {
        let r = random_raster(&mut rng);
        let back = if i % 10 == 0 {
            let path = dir.path().join(format!("r{i}.raster"));
            write_raster(&r, &path).unwrap();
            read_raster(&path).unwrap()
        } else {
            decode_raster(encode_raster(&r).unwrap().as_slice()).unwrap()
        };
        assert_eq!(back.width(), r.width());
        assert_eq!(back.geo, r.geo);
        assert_eq!(back.channel_roles, r.channel_roles);
        let bits = |x: &MultiChannelRaster| x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&r));
    }
}

#[test]
fn header_is_one_json_line_with_signed_geotransform() {
    let geo = GeoTransform::new(500.0, 7000.0, 0.5, 0.25).unwrap();
    let r = MultiChannelRaster::zeros(3, 2, 1, geo).unwrap();
    let bytes = encode_raster(&r).unwrap();
    let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
    let header: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
    assert_eq!(header["dtype"], "f32le");
    assert_eq!(header["geotransform"], serde_json::json!([500.0, 7000.0, 0.5, -0.25]));
    assert_eq!(bytes.len() - nl - 1, 3 * 2 * 4);
}

#[test]
fn missing_file_is_io_error_with_path() {
    let err = read_raster("/nonexistent/dir/x.raster").unwrap_err();
    assert!(err.is_io());
    assert!(err.to_string().contains("/nonexistent/dir/x.raster"));
}

#[test]
fn annotations_round_trip_through_geojson() {
    let sq = |x: f64, y: f64| vec![[x, y], [x + 2.0, y], [x + 2.0, y + 3.0], [x, y + 3.0], [x, y]];
    let col = AnnotationCollection {
        crs_epsg: Some(3067),
        annotations: vec![Annotation::from_polygon(sq(0.0, 0.0)).unwrap(), Annotation::from_polygon(sq(10.0, 5.0)).unwrap()],
    };
    let text = serde_json::to_string(&col.to_geojson()).unwrap();
    let back = parse_annotations(&text).unwrap();
    assert_eq!(back, col);
    assert_eq!(back.annotations[0].centroid, [1.0, 1.5]);
}

#[test]
fn holes_are_ignored_and_non_polygons_rejected() {
    let with_hole = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{},"geometry":{"type":"Polygon",
        "coordinates":[[[0,0],[4,0],[4,4],[0,4],[0,0]],[[1,1],[2,1],[2,2],[1,2],[1,1]]]}}]}"#;
    let parsed = parse_annotations(with_hole).unwrap();
    assert_eq!(parsed.annotations[0].polygon.len(), 5);
    let line = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{},"geometry":{"type":"LineString","coordinates":[[0,0],[1,1]]}}]}"#;
    assert!(matches!(parse_annotations(line), Err(Error::UnsupportedGeometry(_))));
}

proptest! {
    #[test]
    fn integer_pixels_map_round_trip(ox in -1e6f64..1e6, oy in -1e6f64..1e7, px in 0.05f64..20.0, py in 0.05f64..20.0, r in 0usize..5000, c in 0usize..5000) {
        let geo = GeoTransform::new(ox, oy, px, py).unwrap();
        let m = geo.pixel_to_map(c as f64, r as f64);
        prop_assert_eq!(geo.map_to_pixel(m[0], m[1]), [c as f64, r as f64]);
    }

    #[test]
    fn compaction_is_idempotent_and_gap_free(cells in proptest::collection::vec(0u32..7, 36)) {
        let map = InstanceMap::new(Grid::from_vec(6, 6, cells).unwrap(), GeoTransform::default());
        let once = map.compact();
        prop_assert_eq!(once.compact(), once.clone());
        let k = once.max_label() as usize;
        let counts = once.pixel_counts();
        prop_assert!((1..=k).all(|l| counts[l] > 0));
        prop_assert_eq!(k, map.instance_count());
    }

    #[test]
    fn instance_maps_round_trip_through_raster(cells in proptest::collection::vec(0u32..100_000, 20)) {
        let map = InstanceMap::new(Grid::from_vec(5, 4, cells).unwrap(), GeoTransform::default());
        let r = map.to_raster().unwrap();
        prop_assert_eq!(InstanceMap::from_raster(&r).unwrap(), map);
    }
}
