use m2mt_wasm::demo::{attribution, heat, mosaic, perturbation, render_view, scene, Family, View, GRID, SIDE};
use m2mt::Tensor;

#[test]
fn every_view_keeps_every_sample() {
    let n = GRID * GRID * SIDE * SIDE;
    for name in ["spatial", "angular", "epi_h", "epi_v", "macpi"] {
        let img = render_view(View::parse(name).unwrap(), 0.5, 1).unwrap();
        assert_eq!(img.width * img.height, n, "{name}");
        assert_eq!(img.rgba.len(), n * 4);
    }
    let tiles = render_view(View::Sais, 0.5, 1).unwrap();
    assert_eq!((tiles.width, tiles.height), (GRID * (SIDE + 1) - 1, GRID * (SIDE + 1) - 1));
    assert!(View::parse("cube").is_err());
}

#[test]
fn mosaic_places_views_on_tiles() {
    let lf = scene(0.5, 2).unwrap();
    let m = mosaic(&lf);
    let cols = m.dims()[1];
    assert_eq!(m.data()[(3 * (SIDE + 1) + 4) * cols + 2 * (SIDE + 1) + 7], lf.at(3, 2, 4, 7, 0));
    assert!(m.data()[SIDE * cols].is_nan());
}

#[test]
fn heat_ramp_is_monotone_and_black_at_zero() {
    let p = Tensor::new(vec![1, 5], vec![0.0, 1e-5, 1e-3, 0.1, 1.0]).unwrap();
    let img = heat(&p);
    let lum: Vec<u32> = img.rgba.chunks(4).map(|c| c[0] as u32 + c[1] as u32 + c[2] as u32).collect();
    assert_eq!(lum[0], 0);
    assert!(lum.windows(2).all(|w| w[0] <= w[1]), "{lum:?}");
    assert_eq!(lum[4], 765);
}

#[test]
fn one_pixel_reaches_every_view_only_through_correlation() {
    let m2m = perturbation(Family::ManyToMany, 8, 8, 3).unwrap();
    let o2o = perturbation(Family::OneToOne, 8, 8, 3).unwrap();
    assert_eq!(m2m.reach, 1.0);
    assert_eq!(o2o.reach, 1.0 / (GRID * GRID) as f64);
    assert!(perturbation(Family::OneToOne, SIDE, 0, 3).is_err());
}

#[test]
fn attribution_diffuses_more_for_many_to_many() {
    let a = attribution(Family::ManyToMany, 10, 10, 8, 4, 3).unwrap();
    let b = attribution(Family::OneToOne, 10, 10, 8, 4, 3).unwrap();
    assert!(a.di > b.di, "{} vs {}", a.di, b.di);
    assert!(a.reach > b.reach);
    assert!((0.0..=100.0).contains(&a.di) && (0.0..=1.0).contains(&a.gini));
    assert!(attribution(Family::ManyToMany, 30, 30, 4, 2, 3).is_err());
    assert!(Family::parse("cnn").is_err());
}
