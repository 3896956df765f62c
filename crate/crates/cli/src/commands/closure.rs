use polylab::closure::{closure_solve, closure_vs_mc, factorization_defect, DefectReport};
use polylab::rd::{self, RdConfig};
use polylab::she::{SheConfig, SheRunner};

use super::{axis_points, num, Outcome};
use crate::config::{key, Config, KeySpec};
use crate::error::{CliError, Result};

pub(super) fn keys() -> Vec<KeySpec> {
    vec![
        key("grid.L", "8", "half-width of the periodic box"),
        key("grid.N", "128", "points per axis (power of two)"),
        key("grid.d", "1", "spatial dimension; must be 1"),
        key("model.kernel", "bump", "covariance kernel: dirac, bump or box"),
        key("model.phi_width", "1", "support diameter of the mollifier for bump and box"),
        key("init.q0", "gaussian:0.25", "initial density: bump:<w>, delta, gaussian:<var>, plateau:<h>[:<edge>]"),
        key("time.dt", "auto", "SHE time step; auto is Δx²/2"),
        key("time.T", "1", "final time"),
        key("mc.realizations", "2000", "number of realizations per beta"),
        key("mc.seed", "1", "master seed"),
        key("closure.betas", "0.1,0.3,0.5", "inverse temperatures of the sweep"),
        key("closure.probes", "-0.5,0,0.5", "probe coordinates for the factorization defect"),
        key("closure.rd_dt", "1e-3", "step of the closed-equation solve"),
    ]
}

pub(super) fn closure_compare(c: &Config) -> Result<Outcome> {
    let betas = c.f64_list("closure.betas")?;
    if betas.is_empty() {
        return Err(CliError::Config("closure.betas is empty".into()));
    }
    let t = c.f64("time.T")?;
    let rd_dt = c.f64("closure.rd_dt")?;
    let mut out = Outcome::default();
    let mut defects = format!("{}\n", DefectReport::csv_header());
    let mut l1 = String::from("T,beta,l1,band\n");
    let mut ratios = Vec::new();
    let mut identical = true;
    for &beta in &betas {
        let cfg = SheConfig { beta, ..she_config_at(c, t)? };
        let runner = SheRunner::new(&cfg)?;
        let probes = axis_points(&cfg.grid, &c.f64_list("closure.probes")?)?;
        let rep = factorization_defect(&runner, &probes)?;
        defects.push_str(&rep.csv_row());
        defects.push('\n');
        out.discards(&format!("defect_beta{beta}"), &rep.discards);
        ratios.push((rep.ratio(), rep.stderr / rep.scale, rep.inconclusive));
        out.metric(&format!("defect_ratio_beta{beta}"), rep.ratio());

        let cmp = closure_vs_mc(&runner, rd_dt)?;
        l1.push_str(&format!("{},{},{},{}\n", num(cmp.t), num(beta), num(cmp.l1), num(cmp.band)));
        out.discards(&format!("closure_beta{beta}"), &cmp.discards);
        out.metric(&format!("l1_beta{beta}"), cmp.l1);

        let mut rc = RdConfig::new(beta, cfg.kernel.clone(), rd_dt, t);
        rc.cadence = 10;
        let a = closure_solve(&rc, runner.q0()).map_err(|f| CliError::Core(f.error))?;
        let b = rd::run(&rc, runner.q0()).map_err(|f| CliError::Core(f.error))?;
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        identical &= bits(a.final_state.values()) == bits(b.final_state.values()) && a.series == b.series;
    }
    out.file("defect.csv", defects);
    out.file("closure.csv", l1);
    out.check("closure_matches_solver", identical, "closed solve bitwise identical to the reaction-diffusion run");
    let grows = ratios.windows(2).all(|w| w[1].0 + w[1].1.hypot(w[0].1) >= w[0].0);
    out.metric("defect_monotone_in_beta", f64::from(u8::from(grows)));
    out.metric("inconclusive", ratios.iter().filter(|r| r.2).count() as f64);
    Ok(out)
}

/// SHE configuration with `beta` left at zero for the sweep to set.
fn she_config_at(c: &Config, t: f64) -> Result<SheConfig> {
    let grid = super::grid(c)?;
    if grid.dim() != 1 {
        return Err(CliError::Config("closure-compare needs grid.d = 1".into()));
    }
    let kernel = super::kernel(c, &grid)?;
    let dt = super::she_dt(c, &grid)?;
    let mut cfg = SheConfig::new(kernel, 0.0, dt, t, c.usize("mc.realizations")?, c.u64("mc.seed")?);
    cfg.initial = super::initial(c)?;
    cfg.threads = super::threads(c)?;
    Ok(cfg)
}
