//! Byte-exact plot files for fixed grids. `UPDATE_GOLDEN=1` rewrites them.

use std::path::PathBuf;

use entropy_core::analysis::{curves_csv, equilibrium_curve, heatmap_svg};
use entropy_core::landscape::{Axis, EntropyGrid, GridSpec};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn check(name: &str, actual: &str) {
    let path = fixture(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(want == actual, "{name} differs from its fixture");
}

/// Flat landscape, nothing visited.
fn flat() -> EntropyGrid {
    EntropyGrid::new(GridSpec::new(Axis::new(0.0, 1.0, 4), Axis::new(0.0, 1.0, 4))).unwrap()
}

/// Tilted landscape with both walls inside the range.
fn walled() -> EntropyGrid {
    let spec = GridSpec::new(Axis::new(-4.0, 2.0, 12), Axis::accuracy(8)).with_walls(1.0, 0.9, 3000.0);
    let mut g = EntropyGrid::new(spec).unwrap();
    for ix in 0..12 {
        for iy in 0..g.shape().1 {
            if g.is_valid_bin(ix, iy) {
                g.set_s(ix, iy, 0.5 * ix as f64 - (iy as f64 - 4.0).powi(2) / 4.0);
            }
        }
    }
    g
}

/// Point deposits along a diagonal, leaving most bins unvisited.
fn deposited() -> EntropyGrid {
    let mut g = EntropyGrid::new(GridSpec::new(Axis::new(-2.0, 0.0, 8), Axis::new(0.0, 1.0, 6))).unwrap();
    for k in 0..40 {
        let t = k as f64 / 40.0;
        g.deposit_point(-2.0 + 2.0 * t, t, 0.5 / (1.0 + k as f64 / 10.0));
    }
    g
}

#[test]
fn heatmap_fixtures() {
    check("flat.svg", &heatmap_svg(&flat()));
    check("walled.svg", &heatmap_svg(&walled()));
    check("deposited.svg", &heatmap_svg(&deposited()));
}

#[test]
fn heatmap_is_repeatable() {
    assert_eq!(heatmap_svg(&walled()), heatmap_svg(&walled()));
}

#[test]
fn curve_fixture() {
    let c = equilibrium_curve(&walled()).unwrap();
    check("walled_curve.csv", &curves_csv(&[("equilibrium", &c)]));
}
