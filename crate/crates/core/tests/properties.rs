use approx::assert_relative_eq;
use proptest::prelude::*;

use polylab::field::{clamp_ringing, inner, pairwise_sum};
use polylab::rd::reaction_substep;
use polylab::snapshot::{read_snapshot, write_snapshot};
use polylab::spectral::Workspace;
use polylab::{make_kernel, DensityField, Grid, InitialData, McEstimate, MollifierSpec};

fn grid_1d(n_log2: u32) -> Grid {
    Grid::new(1, 8.0, 1 << n_log2).unwrap()
}

proptest! {
    #[test]
    fn ravel_inverts_unravel(d in 1usize..=3, n_log2 in 4u32..=6, seed in any::<u64>()) {
        let g = Grid::new(d, 4.0, 1 << n_log2).unwrap();
        let flat = (seed % g.len() as u64) as usize;
        let idx = g.unravel(flat);
        prop_assert_eq!(g.ravel(&idx[..d]), flat);
    }

    #[test]
    fn coordinates_map_back_to_their_index(n_log2 in 4u32..=10, half_width in 0.5f64..100.0, seed in any::<u64>()) {
        let g = Grid::new(1, half_width, 1 << n_log2).unwrap();
        let i = (seed % g.len() as u64) as usize;
        let x = g.coordinate(i);
        prop_assert!(x >= -half_width && x < half_width);
        prop_assert_eq!(g.index_of(&[x]), Some(i));
    }

    #[test]
    fn grids_reject_bad_point_counts(points in 0usize..2000) {
        let ok = Grid::new(1, 1.0, points).is_ok();
        prop_assert_eq!(ok, points >= 16 && points.is_power_of_two());
    }

    #[test]
    fn pairwise_sum_matches_naive(values in prop::collection::vec(-1e3f64..1e3, 0..300)) {
        let naive: f64 = values.iter().sum();
        let scale: f64 = values.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        prop_assert!((pairwise_sum(&values) - naive).abs() <= 1e-12 * scale);
    }

    #[test]
    fn estimate_is_shift_equivariant(values in prop::collection::vec(-10f64..10.0, 2..100), shift in -50f64..50.0) {
        let a = McEstimate::from_samples(&values).unwrap();
        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        let b = McEstimate::from_samples(&shifted).unwrap();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a.mean >= lo - 1e-12 && a.mean <= hi + 1e-12);
        prop_assert!(a.stderr >= 0.0);
        prop_assert!((b.mean - a.mean - shift).abs() <= 1e-10);
        prop_assert!((b.stderr - a.stderr).abs() <= 1e-9 * (1.0 + a.stderr));
        prop_assert!(a.agrees_with(a.mean, 0.0, 0.0));
    }

    #[test]
    fn clamp_leaves_no_negative_values(
        values in prop::collection::vec(prop_oneof![0f64..1.0, -1e-14f64..0.0], 1..200),
        dx in 0.01f64..1.0,
    ) {
        let mut v = values.clone();
        let clamped = clamp_ringing(&mut v, dx).unwrap();
        let negative: f64 = values.iter().filter(|x| **x < 0.0).map(|x| -x).sum();
        prop_assert!(v.iter().all(|x| *x >= 0.0));
        prop_assert!((clamped - negative * dx).abs() <= 1e-30);
    }

    #[test]
    fn clamp_rejects_values_below_the_floor(values in prop::collection::vec(0f64..0.5, 1..50), bad in -1.0f64..-1e-13) {
        let mut v = values;
        v.push(bad);
        prop_assert!(clamp_ringing(&mut v, 1.0).is_err());
    }

    #[test]
    fn reaction_moves_each_value_toward_the_level(
        values in prop::collection::vec(0f64..5.0, 64),
        e in 0f64..3.0,
        beta in 0f64..2.0,
        dt in 1e-4f64..1.0,
    ) {
        let g = DensityField::new(grid_1d(6), values.clone(), 0.0).unwrap();
        let out = reaction_substep(&g, e, beta, dt).unwrap();
        for (a, b) in values.iter().zip(out.values()) {
            let (lo, hi) = if *a < e { (*a, e) } else { (e, *a) };
            prop_assert!(*b >= lo * (1.0 - 1e-12) && *b <= hi * (1.0 + 1e-12), "{} -> {} at level {}", a, b, e);
        }
        prop_assert_eq!(out.time(), dt);
    }

    #[test]
    fn covariance_pairing_is_symmetric(
        a in prop::collection::vec(0f64..1.0, 64),
        b in prop::collection::vec(0f64..1.0, 64),
        width in 0.5f64..3.0,
        boxcar in any::<bool>(),
    ) {
        let grid = grid_1d(6);
        let spec = if boxcar { MollifierSpec::boxcar(width) } else { MollifierSpec::smooth(width) };
        let kernel = make_kernel(spec, &grid).unwrap();
        let mut ws = Workspace::new();
        let ra = kernel.convolve(&a, &mut ws);
        let rb = kernel.convolve(&b, &mut ws);
        let lhs = inner(&ra, &b, grid.cell_volume());
        let rhs = inner(&a, &rb, grid.cell_volume());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn snapshots_roundtrip_bitwise(values in prop::collection::vec(0f64..1e3, 32), t in 0f64..1e5, beta in 0f64..2.0) {
        let g = DensityField::new(Grid::new(1, 3.5, 32).unwrap(), values, t).unwrap();
        let text = write_snapshot(&g, beta, "dirac");
        let (head, back) = read_snapshot(&text).unwrap();
        prop_assert_eq!(head.beta, beta);
        prop_assert_eq!(head.points, 32);
        prop_assert_eq!(back, g);
    }

    #[test]
    fn initial_data_has_unit_mass(variance in 0.2f64..4.0, width in 1.0f64..4.0) {
        let grid = Grid::new(1, 16.0, 256).unwrap();
        for init in [InitialData::Gaussian { variance }, InitialData::Bump { width }, InitialData::DeltaBump] {
            let q = init.build(&grid).unwrap();
            prop_assert!((q.mass() - 1.0).abs() <= 1e-12);
            prop_assert!(q.values().iter().all(|v| *v >= 0.0));
        }
    }
}

#[test]
fn estimate_of_known_samples() {
    let e = McEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_relative_eq!(e.mean, 2.5);
    assert_relative_eq!(e.stderr, (5.0f64 / 3.0 / 4.0).sqrt(), max_relative = 1e-14);
    assert!(McEstimate::from_samples(&[1.0]).is_err());
}
