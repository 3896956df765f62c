use polylab::error::Error;
use polylab::she::{
    estimate_products, two_point_moment, Field, InverseMassMoments, NoisePath, SheRunner, UNDERFLOW_FLOOR,
};
use polylab::McEstimate;

use super::{axis_points, grid_index, num, she_config, Outcome};
use crate::config::{key, Config, KeySpec};
use crate::error::{CliError, Result};

fn she_keys(kernel: &'static str, q0: &'static str) -> Vec<KeySpec> {
    vec![
        key("grid.L", "8", "half-width of the periodic box"),
        key("grid.N", "128", "points per axis (power of two)"),
        key("grid.d", "1", "spatial dimension (1 to 3; dirac needs 1)"),
        key("model.beta", "0.5", "inverse temperature"),
        key("model.kernel", kernel, "covariance kernel: dirac, bump or box"),
        key("model.phi_width", "1", "support diameter of the mollifier for bump and box"),
        key("init.q0", q0, "initial density: bump:<w>, delta, gaussian:<var>, plateau:<h>[:<edge>]"),
        key("time.dt", "auto", "time step; auto is Δx²/2"),
        key("time.T", "1", "final time"),
        key("mc.realizations", "10000", "number of realizations"),
        key("mc.seed", "1", "master seed"),
    ]
}

pub(super) fn run_keys() -> Vec<KeySpec> {
    let mut k = she_keys("dirac", "delta");
    k.push(key("she.probes", "-2,-1,0,1,2", "probe coordinates along the first axis for the mean law"));
    k
}

pub(super) fn qn_keys() -> Vec<KeySpec> {
    let mut k = she_keys("bump", "gaussian:0.1");
    k.extend([
        key("qn.n", "2", "number of points per tuple (1 to 3)"),
        key("qn.points", "-0.5,-0.5;-0.5,0.5;0,0;0,0.5;0.5,1", "tuples separated by ';', n·d coordinates each"),
        key("qn.field", "solution", "solution (u) or density (q = u/∫u)"),
        key("qn.oracle", "true", "compare with the deterministic moment solve where one applies"),
        key("qn.oracle_refine", "4", "the moment solve uses time.dt divided by this"),
    ]);
    k
}

/// Relative error allowed against the two-point moment solve.
const ORACLE_TOLERANCE: f64 = 0.05;

pub(super) fn she_run(c: &Config) -> Result<Outcome> {
    let t = c.f64("time.T")?;
    let cfg = she_config(c, t)?;
    let runner = SheRunner::new(&cfg)?;
    let xs = c.f64_list("she.probes")?;
    let probes = axis_points(&cfg.grid, &xs)?;
    let (samples, discards) = runner.run(|r| {
        r.advance_to(t)?;
        let m = r.mass();
        if !(m >= UNDERFLOW_FLOOR) {
            return Err(Error::Discard(format!("total mass {m:.3e}")));
        }
        let u = r.u();
        let positive = u.iter().all(|&v| v > 0.0);
        Ok((probes.iter().map(|&i| u[i]).collect::<Vec<f64>>(), m, positive))
    })?;
    let mut out = Outcome::default();
    out.discards("ensemble", &discards);
    let exact = runner.mean_field(t)?;
    let mut csv = String::from("quantity,x,mc_mean,stderr,exact,z\n");
    let mut worst: f64 = 0.0;
    for (k, (&x, &i)) in xs.iter().zip(&probes).enumerate() {
        let col: Vec<f64> = samples.iter().map(|s| s.0[k]).collect();
        let e = McEstimate::from_samples(&col)?;
        let want = exact.values()[i];
        let z = (e.mean - want) / e.stderr;
        worst = worst.max(z.abs());
        csv.push_str(&format!("u,{},{},{},{},{}\n", num(x), num(e.mean), num(e.stderr), num(want), num(z)));
        out.check(format!("mean_u_x{x}"), e.agrees_with(want, 3.0, 0.0), format!("z = {z:.3}"));
    }
    let masses: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let mass = McEstimate::from_samples(&masses)?;
    let zm = (mass.mean - 1.0) / mass.stderr;
    csv.push_str(&format!("mass,,{},{},{},{}\n", num(mass.mean), num(mass.stderr), num(1.0), num(zm)));
    out.check(
        "mean_mass",
        mass.agrees_with(1.0, 3.0, 0.0),
        format!("{:.5} ± {:.5}, z = {zm:.3}", mass.mean, mass.stderr),
    );
    out.file("mean_law.csv", csv);
    out.metric("max_probe_z", worst);
    out.metric("mass_z", zm);

    out.check("positivity", samples.iter().all(|s| s.2), "u > 0 in every cell of every realization");

    let steps = cfg.steps_to(t)?;
    let zs = NoisePath::record(&runner, 0, steps).variance_zscores();
    let zmax = zs.iter().fold(0.0f64, |a, z| a.max(z.abs()));
    let mut noise = String::from("cell,zscore\n");
    for (i, z) in zs.iter().enumerate() {
        noise.push_str(&format!("{i},{}\n", num(*z)));
    }
    out.file("noise.csv", noise);
    out.metric("noise_max_z", zmax);
    out.check("noise_variance", zmax <= 5.0, format!("max |z| = {zmax:.3} over {} cells", zs.len()));

    let inv: Vec<f64> = masses.iter().map(|m| 1.0 / m).collect();
    let im = InverseMassMoments::from_inverse(&inv)?;
    out.file(
        "inverse_mass.csv",
        format!(
            "fourth_full,fourth_half,realizations,stable\n{},{},{},{}\n",
            num(im.fourth_full),
            num(im.fourth_half),
            im.realizations,
            im.stable
        ),
    );
    out.metric("inverse_mass_fourth", im.fourth_full);
    out.check(
        "inverse_mass_stable",
        im.stable,
        format!("E[Z^-4] = {:.4} (full) vs {:.4} (first half)", im.fourth_full, im.fourth_half),
    );
    Ok(out)
}

pub(super) fn qn_estimate(c: &Config) -> Result<Outcome> {
    let t = c.f64("time.T")?;
    let cfg = she_config(c, t)?;
    let grid = cfg.grid;
    let d = grid.dim();
    let n = c.usize("qn.n")?;
    if !(1..=3).contains(&n) {
        return Err(CliError::Config("qn.n must be 1, 2 or 3".into()));
    }
    let field = match c.string("qn.field")?.as_str() {
        "solution" => Field::Solution,
        "density" => Field::Density,
        other => return Err(CliError::Config(format!("qn.field = {other}: expected solution or density"))),
    };
    let tuples: Vec<Vec<usize>> = c
        .tuples("qn.points")?
        .iter()
        .map(|tp| {
            if tp.len() != n * d {
                return Err(CliError::Config(format!("each qn.points tuple needs n·d = {} coordinates", n * d)));
            }
            tp.chunks(d).map(|x| grid_index(&grid, x)).collect()
        })
        .collect::<Result<_>>()?;
    if tuples.is_empty() {
        return Err(CliError::Config("qn.points is empty".into()));
    }
    let mut all = tuples.clone();
    let reversed: Vec<Vec<usize>> = tuples.iter().map(|tp| tp.iter().rev().copied().collect()).collect();
    if n > 1 {
        all.extend(reversed.iter().cloned());
    }
    let runner = SheRunner::new(&cfg)?;
    let report = estimate_products(&runner, &all, t, field)?;
    let mut out = Outcome::default();
    out.file("qn.csv", report.to_csv());
    out.discards("ensemble", &report.discards);
    out.check("confidence", !report.low_confidence, format!("{} valid realizations", report.realizations));
    if n > 1 {
        let m = tuples.len();
        let same = (0..m).all(|k| {
            let (a, b) = (&report.estimates[k], &report.estimates[m + k]);
            a.mean.to_bits() == b.mean.to_bits() && a.stderr.to_bits() == b.stderr.to_bits()
        });
        out.check("permutation_symmetry", same, "reversed tuples give bitwise identical estimates");
    }

    if c.bool("qn.oracle")? && field == Field::Solution {
        let coords = |i: usize| grid.position(i)[..d].iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ");
        if n == 2 && d == 1 {
            let refine = c.usize("qn.oracle_refine")?.max(1);
            let q2 = two_point_moment(runner.q0(), &cfg.kernel, cfg.beta, t, cfg.dt / refine as f64)?;
            let np = grid.points_per_axis();
            let mut csv = String::from("x1,x2,mc_mean,stderr,oracle,rel_error\n");
            let mut worst: f64 = 0.0;
            for (tp, e) in tuples.iter().zip(&report.estimates) {
                let want = q2[tp[0] * np + tp[1]];
                let rel = (e.mean - want).abs() / want.abs();
                worst = worst.max(rel);
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    coords(tp[0]),
                    coords(tp[1]),
                    num(e.mean),
                    num(e.stderr),
                    num(want),
                    num(rel)
                ));
            }
            out.file("oracle.csv", csv);
            out.metric("max_rel_error", worst);
            out.check(
                "second_moment_oracle",
                worst <= ORACLE_TOLERANCE,
                format!("max relative error {:.3}% over {} pairs", 100.0 * worst, tuples.len()),
            );
        } else if n == 1 {
            let mean = runner.mean_field(t)?;
            let mut csv = String::from("x1,mc_mean,stderr,oracle,z\n");
            let mut ok = true;
            for (tp, e) in tuples.iter().zip(&report.estimates) {
                let want = mean.values()[tp[0]];
                ok &= e.agrees_with(want, 3.0, 0.0);
                let z = (e.mean - want) / e.stderr;
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    coords(tp[0]),
                    num(e.mean),
                    num(e.stderr),
                    num(want),
                    num(z)
                ));
            }
            out.file("oracle.csv", csv);
            out.check("mean_oracle", ok, "E[u] within 3 stderr of the heat flow of q0");
        }
    }
    out.metric("realizations", report.realizations as f64);
    Ok(out)
}
