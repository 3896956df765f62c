use polylab::she::{mollification_study, InverseMassMoments, NoisePath, SheConfig, SheRunner};
use polylab::{make_kernel, CovarianceKernel, Grid, InitialData, McEstimate, MollifierSpec};

fn config(kernel: CovarianceKernel, beta: f64, t: f64, reals: usize, seed: u64) -> SheConfig {
    let dx = kernel.grid().spacing();
    let mut cfg = SheConfig::new(kernel, beta, 0.5 * dx * dx, t, reals, seed);
    cfg.initial = InitialData::Gaussian { variance: 1.0 };
    cfg
}

fn dirac(beta: f64, t: f64, reals: usize, seed: u64) -> SheConfig {
    config(CovarianceKernel::dirac(&Grid::new(1, 8.0, 64).unwrap()).unwrap(), beta, t, reals, seed)
}

fn final_states(runner: &SheRunner) -> Vec<Vec<f64>> {
    let t = runner.config().t_final;
    let (states, discards) = runner
        .run(|r| {
            r.advance_to(t)?;
            Ok(r.u().to_vec())
        })
        .unwrap();
    assert!(discards.is_empty());
    states
}

#[test]
fn ensemble_mean_follows_the_heat_flow() {
    let runner = SheRunner::new(&dirac(0.5, 0.5, 2000, 11)).unwrap();
    let states = final_states(&runner);
    let mean = runner.mean_field(0.5).unwrap();
    let grid = runner.config().grid;
    for x in [-1.0, 0.0, 1.0] {
        let i = grid.index_of(&[x]).unwrap();
        let samples: Vec<f64> = states.iter().map(|u| u[i]).collect();
        let est = McEstimate::from_samples(&samples).unwrap();
        assert!(est.agrees_with(mean.values()[i], 4.0, 0.0), "x = {x}: {est:?} vs {}", mean.values()[i]);
    }
    let masses: Vec<f64> = states.iter().map(|u| u.iter().sum::<f64>() * grid.cell_volume()).collect();
    let est = McEstimate::from_samples(&masses).unwrap();
    assert!(est.agrees_with(1.0, 4.0, 0.0), "{est:?}");
    assert!(states.iter().flatten().all(|v| *v > 0.0));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let base = dirac(0.5, 0.25, 24, 3);
    let one = final_states(&SheRunner::new(&SheConfig { threads: Some(1), ..base.clone() }).unwrap());
    let four = final_states(&SheRunner::new(&SheConfig { threads: Some(4), ..base.clone() }).unwrap());
    let global = final_states(&SheRunner::new(&base).unwrap());
    let bits = |s: &Vec<Vec<f64>>| s.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&one), bits(&four));
    assert_eq!(bits(&one), bits(&global));
}

#[test]
fn seeds_select_independent_streams() {
    let a = final_states(&SheRunner::new(&dirac(0.5, 0.125, 4, 1)).unwrap());
    let b = final_states(&SheRunner::new(&dirac(0.5, 0.125, 4, 2)).unwrap());
    assert_ne!(a, b);
    assert_ne!(a[0], a[1]);
}

#[test]
fn zero_coupling_is_deterministic() {
    let runner = SheRunner::new(&dirac(0.0, 0.5, 4, 9)).unwrap();
    let mean = runner.mean_field(0.5).unwrap();
    for u in final_states(&runner) {
        for (a, b) in u.iter().zip(mean.values()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1e-300), "{a} vs {b}");
        }
    }
}

#[test]
fn noise_increments_have_the_covariance_at_the_origin() {
    let grid = Grid::new(1, 8.0, 64).unwrap();
    for kernel in [CovarianceKernel::dirac(&grid).unwrap(), make_kernel(MollifierSpec::smooth(1.0), &grid).unwrap()] {
        let runner = SheRunner::new(&config(kernel, 0.5, 1.0, 2, 5)).unwrap();
        let path = NoisePath::record(&runner, 0, 4000);
        let worst = path.variance_zscores().into_iter().map(f64::abs).fold(0.0, f64::max);
        assert!(worst < 5.0, "max |z| = {worst}");
    }
}

#[test]
fn inverse_mass_moments_compare_the_two_halves() {
    let m = InverseMassMoments::from_inverse(&[2.0; 8]).unwrap();
    assert_eq!(m.fourth_full, 16.0);
    assert_eq!(m.fourth_half, 16.0);
    assert!(m.stable);
    let heavy = InverseMassMoments::from_inverse(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 3.0]).unwrap();
    assert_eq!(heavy.fourth_half, 1.0);
    assert_eq!(heavy.fourth_full, 88.0 / 8.0);
    assert!(!heavy.stable);
    assert!(InverseMassMoments::from_inverse(&[1.0; 3]).is_err());
}

#[test]
fn mollification_differences_vanish_without_coupling() {
    let grid = Grid::new(1, 8.0, 64).unwrap();
    let base = config(CovarianceKernel::dirac(&grid).unwrap(), 0.0, 0.25, 8, 1);
    let table = mollification_study(&base, MollifierSpec::smooth(1.0), [2.0, 1.0, 0.5], grid.origin_index()).unwrap();
    assert!(table.differences.iter().all(|d| d.mean == 0.0));
    assert!(table.monotone);
    assert!(table.discards.is_empty());
}
