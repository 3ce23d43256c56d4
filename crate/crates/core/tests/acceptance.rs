//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use gridfreq::ident::{
    default_bounds, identify_grid_following, identify_grid_forming, identify_hydro,
    identify_thermal, inertia_bounds, r_squared, rms_error, IdentResult, MultistartConfig, UnitIo,
};
use gridfreq::io::{write_results, Project, ResultBundle, RESULTS_FILE};
use gridfreq::lti::{lsim, Complex, RationalTF, Trace};
use gridfreq::pipeline;
use gridfreq::plant::{
    coupling_power_tfs, grid_following_tfs, grid_forming_tfs, pll_tfs, thermal_tf, BaseQuantities,
    CouplingParams, GridFollowingParams, GridFormingParams, HydroParams, OperatingPoint,
    ThermalParams,
};
use gridfreq::synth::reference_config;
use gridfreq::system::{assemble_system, scenario_inputs};
use gridfreq::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_first_order_step() -> Outcome {
    let tau = 0.7;
    let dt = 1e-3;
    let n = 10_001;
    let g = RationalTF::from_coeffs(&[1.0], &[1.0, tau]).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let u = Trace::uniform(n, dt)
        .with("u", vec![1.0; n])
        .map_err(|e| e.to_string())?;
    let y = lsim(&g, &u).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let y = y.get("y").map_err(|e| e.to_string())?;
    let worst = y
        .iter()
        .enumerate()
        .map(|(k, v)| (v - (1.0 - (-(k as f64) * dt / tau).exp())).abs())
        .fold(0.0, f64::max);
    check(
        worst <= 1e-6 && elapsed < Duration::from_secs(1),
        format!(
            "max error {worst:.2e}, {:.1} ms",
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn random_op(rng: &mut ChaCha8Rng) -> OperatingPoint {
    OperatingPoint::new(
        rng.random_range(0.0..1.0),
        rng.random_range(-0.3..0.3),
        rng.random_range(0.95..1.1),
        rng.random_range(0.005..0.3),
        rng.random_range(0.95..1.05),
        0.0,
    )
    .unwrap()
}

fn random_coupling(rng: &mut ChaCha8Rng) -> CouplingParams {
    CouplingParams::new(rng.random_range(0.05..0.3), rng.random_range(0.001..0.02))
}

fn c2_droop_laws() -> Outcome {
    let base = BaseQuantities::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_gf, mut worst_gfl) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let gf = GridFormingParams {
            m_p: rng.random_range(0.005..0.1),
            omega_c: rng.random_range(10.0..60.0),
            t1: rng.random_range(0.01..0.1),
            t2: rng.random_range(0.003..0.03),
        };
        let op = random_op(&mut rng);
        let cp = random_coupling(&mut rng);
        let t = coupling_power_tfs(&op, &cp, &base)
            .map_err(|e| e.to_string())?
            .entry(0, 0)
            .clone();
        let g = grid_forming_tfs(&gf, &t, &base).map_err(|e| e.to_string())?;
        let dc = g
            .by_name("dP", "domega_g")
            .ok_or("no ω_g channel")?
            .dcgain()
            .value();
        worst_gf = worst_gf.max((dc * gf.m_p + 1.0).abs());

        let gfl = GridFollowingParams {
            k_p_pll: rng.random_range(1000.0..8000.0),
            k_i_pll: rng.random_range(50.0..400.0),
            zeta: 0.707,
            omega_lpf: rng.random_range(10.0..60.0),
            k_p_c: rng.random_range(0.2..2.0),
            k_i_c: rng.random_range(0.2..3.0),
            r_p: rng.random_range(0.01..0.1),
        };
        let op = random_op(&mut rng);
        let cp = random_coupling(&mut rng);
        let g = grid_following_tfs(&gfl, &op, &cp, &base).map_err(|e| e.to_string())?;
        let dc = g
            .by_name("dP", "dPref")
            .ok_or("no P* channel")?
            .dcgain()
            .value();
        worst_gfl = worst_gfl.max((dc - 1.0).abs());
    }
    check(
        worst_gf <= 1e-6 && worst_gfl <= 1e-6,
        format!("max |m_p·G_Pω(0) + 1| = {worst_gf:.2e}, max |G_PP*(0) − 1| = {worst_gfl:.2e}"),
    )
}

fn c3_pll_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = GridFollowingParams {
        k_p_pll: 3800.0,
        k_i_pll: 180.0,
        zeta: 0.707,
        omega_lpf: 2.0 * std::f64::consts::PI * 4.0,
        k_p_c: 0.73,
        k_i_c: 1.19,
        r_p: 0.02,
    };
    let v_g0 = 0.98;
    let (g, _) = pll_tfs(&p, v_g0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for _ in 0..32 {
        let s = Complex::new(
            rng.random_range(-100.0..100.0),
            rng.random_range(-300.0..300.0),
        );
        let pi = p.k_p_pll + p.k_i_pll / s;
        let gs = g.eval(s);
        let lhs = s * gs + pi * v_g0 * gs;
        worst = worst.max((lhs - 1.0).norm());
    }
    check(
        worst < 1e-9,
        format!("max relative error {worst:.2e} over 32 points"),
    )
}

fn step_col(n: usize, dt: f64, t0: f64, v: f64) -> Vec<f64> {
    (0..n)
        .map(|k| if k as f64 * dt >= t0 - 1e-9 { v } else { 0.0 })
        .collect()
}

fn rel_errors(r: &IdentResult, truth: &[(&str, f64)]) -> f64 {
    truth
        .iter()
        .map(|(n, v)| (r.param(n).unwrap_or(f64::NAN) - v).abs() / v.abs())
        .fold(0.0, f64::max)
}

struct UnitCase {
    name: &'static str,
    tol: f64,
    result: IdentResult,
    elapsed: Duration,
    truth: Vec<(&'static str, f64)>,
}

fn unit_cases() -> Result<Vec<UnitCase>, Error> {
    let base = BaseQuantities::default();
    let cfg = MultistartConfig::default();
    let (n, dt) = (6001, 0.01);
    let mut out = Vec::new();

    let hp = HydroParams {
        k_g: 1.0,
        t_g: 0.3,
        t_r: 5.0,
        r_t: 0.4,
        r: 0.05,
        t_w: 1.5,
        k: 1.0,
        p0: 0.7,
    };
    let u = Trace::uniform(n, dt).with("u", step_col(n, dt, 1.0, 0.1))?;
    let tr = u.clone().with(
        "dP",
        lsim(&gridfreq::plant::hydro_tf(&hp)?, &u)?
            .get("y")?
            .to_vec(),
    )?;
    let t0 = Instant::now();
    let r = identify_hydro(
        &tr,
        &UnitIo::new(["u"], "dP"),
        &hp,
        &default_bounds("hydro")?,
        &cfg,
    )?;
    out.push(UnitCase {
        name: "hydro",
        tol: 0.01,
        result: r,
        elapsed: t0.elapsed(),
        truth: vec![("t_g", 0.3), ("t_r", 5.0), ("r_t", 0.4)],
    });

    let tp = ThermalParams {
        k_g: 1.0,
        t_g1: 0.25,
        t_g2: 0.1,
        t_rh: 7.0,
        t_ch: 0.35,
        f_hp: 0.3,
        f_lp: 0.7,
        r: 0.05,
        k: 1.0,
        p0: 0.83,
    };
    let tr = u
        .clone()
        .with("dP", lsim(&thermal_tf(&tp)?, &u)?.get("y")?.to_vec())?;
    let t0 = Instant::now();
    let r = identify_thermal(
        &tr,
        &UnitIo::new(["u"], "dP"),
        &tp,
        &default_bounds("thermal")?,
        &cfg,
    )?;
    out.push(UnitCase {
        name: "thermal",
        tol: 0.01,
        result: r,
        elapsed: t0.elapsed(),
        truth: vec![
            ("t_g1", 0.25),
            ("t_g2", 0.1),
            ("t_rh", 7.0),
            ("t_ch", 0.35),
            ("f_hp", 0.3),
        ],
    });

    let (n, dt) = (1001, 0.002);
    let cp = CouplingParams::new(0.2, 0.005);
    let converter_inputs = |second: &str| -> Result<Trace, Error> {
        Trace::uniform(n, dt)
            .with("dPref", step_col(n, dt, 0.1, 0.1))?
            .with(second, vec![0.0; n])?
            .with("domega_g", step_col(n, dt, 1.0, -0.002))
    };
    let gf = GridFormingParams {
        m_p: 0.02,
        omega_c: 31.4,
        t1: 0.033,
        t2: 0.011,
    };
    let op = OperatingPoint::new(0.25, 0.0, 1.0, 0.05, 1.0, 0.0)?;
    let t = coupling_power_tfs(&op, &cp, &base)?.entry(0, 0).clone();
    let u = converter_inputs("domegaref")?;
    let tr = u.clone().with(
        "dP",
        lsim(&grid_forming_tfs(&gf, &t, &base)?, &u)?
            .get("dP")?
            .to_vec(),
    )?;
    let io = UnitIo::new(["dPref", "domegaref", "domega_g"], "dP");
    let t0 = Instant::now();
    let r = identify_grid_forming(
        &tr,
        &io,
        &gf,
        &op,
        &cp,
        &base,
        &default_bounds("grid_forming")?,
        &cfg,
    )?;
    out.push(UnitCase {
        name: "grid-forming",
        tol: 0.02,
        result: r,
        elapsed: t0.elapsed(),
        truth: vec![("omega_c", 31.4), ("t1", 0.033), ("t2", 0.011)],
    });

    let gfl = GridFollowingParams {
        k_p_pll: 3800.0,
        k_i_pll: 180.0,
        zeta: 0.707,
        omega_lpf: 2.0 * std::f64::consts::PI * 4.0,
        k_p_c: 0.73,
        k_i_c: 1.19,
        r_p: 0.02,
    };
    let op = OperatingPoint::new(0.56, 0.0, 1.0, 0.01, 1.0, 0.0)?;
    let u = converter_inputs("dQref")?;
    let tr = u.clone().with(
        "dP",
        lsim(&grid_following_tfs(&gfl, &op, &cp, &base)?, &u)?
            .get("dP")?
            .to_vec(),
    )?;
    let io = UnitIo::new(["dPref", "dQref", "domega_g"], "dP");
    let t0 = Instant::now();
    let r = identify_grid_following(
        &tr,
        &io,
        &gfl,
        &op,
        &cp,
        &base,
        &default_bounds("grid_following")?,
        &cfg,
    )?;
    out.push(UnitCase {
        name: "grid-following",
        tol: 0.05,
        result: r,
        elapsed: t0.elapsed(),
        truth: vec![
            ("k_i_pll", 180.0),
            ("k_p_pll", 3800.0),
            ("k_i_c", 1.19),
            ("k_p_c", 0.73),
            ("omega_lpf", 2.0 * std::f64::consts::PI * 4.0),
        ],
    });
    Ok(out)
}

fn c4_unit_round_trips() -> Outcome {
    let cases = unit_cases().map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for c in &cases {
        let err = rel_errors(&c.result, &c.truth);
        let pass = err <= c.tol && c.result.r2 >= 0.9999 && c.elapsed < Duration::from_secs(60);
        ok &= pass;
        parts.push(format!(
            "{} err {:.2e} (tol {}) R² {:.8} {:.1} s",
            c.name,
            err,
            c.tol,
            c.result.r2,
            c.elapsed.as_secs_f64()
        ));
    }
    check(ok, parts.join("; "))
}

fn c5_multistart_consistency() -> Outcome {
    let hp = HydroParams {
        k_g: 1.0,
        t_g: 0.3,
        t_r: 5.0,
        r_t: 0.4,
        r: 0.05,
        t_w: 1.5,
        k: 1.0,
        p0: 0.7,
    };
    let (n, dt) = (6001, 0.01);
    let run = || -> Result<(IdentResult, f64), Error> {
        let u = Trace::uniform(n, dt).with("u", step_col(n, dt, 1.0, 0.1))?;
        let y = lsim(&gridfreq::plant::hydro_tf(&hp)?, &u)?
            .get("y")?
            .to_vec();
        let scale: f64 = y.iter().map(|v| v * v).sum();
        let tr = u.with("dP", y)?;
        let cfg = MultistartConfig {
            n_starts: 100,
            rng_seed: 5,
            ..Default::default()
        };
        Ok((
            identify_hydro(
                &tr,
                &UnitIo::new(["u"], "dP"),
                &hp,
                &default_bounds("hydro")?,
                &cfg,
            )?,
            scale,
        ))
    };
    let (r, scale) = run().map_err(|e| e.to_string())?;
    let hits = r
        .starts
        .iter()
        .filter(|s| (s.sse - r.sse) / scale <= 1e-6)
        .count();
    check(
        hits >= 95,
        format!("{hits}/100 starts within 1e-6 of the best objective (relative to Σŷ²)"),
    )
}

struct PipelineRun {
    units: ResultBundle,
    grid: ResultBundle,
    files: Vec<(String, Vec<u8>)>,
    grid_elapsed: Duration,
}

fn run_pipeline(p: &Project, dir: &std::path::Path) -> Result<PipelineRun, Error> {
    let cfg = p.identification;
    let measured = pipeline::gen_synth(p, "a", 0.0, cfg.rng_seed)?;
    gridfreq::io::write_trace_csv(&measured, &dir.join("measured.csv"))?;
    let measured = gridfreq::io::read_trace_csv(&dir.join("measured.csv"))?;
    let units = pipeline::identify_units(p, &measured, &cfg)?;
    write_results(&units, &dir.join("units"))?;
    let step1 = ResultBundle::read(&dir.join("units").join(RESULTS_FILE))?;
    let q = pipeline::apply_unit_results(p, &step1.units)?;
    let t0 = Instant::now();
    let mut grid = pipeline::identify_grid_step(&q, std::slice::from_ref(&measured), &cfg)?;
    let grid_elapsed = t0.elapsed();
    grid.units = step1.units.clone();
    write_results(&grid, &dir.join("grid"))?;
    let mut fit = units.traces[pipeline::UNITS_FIT].clone();
    for (k, v) in &grid.traces[pipeline::GRID_FIT].channels {
        fit.insert(k.clone(), v.clone())?;
    }
    write_results(
        &pipeline::metrics_bundle(&fit, &measured)?,
        &dir.join("metrics"),
    )?;
    let mut files = Vec::new();
    for sub in ["units", "grid", "metrics"] {
        let mut names: Vec<_> = std::fs::read_dir(dir.join(sub))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        names.sort();
        for path in names {
            files.push((
                format!("{sub}/{}", path.file_name().unwrap().to_string_lossy()),
                std::fs::read(&path)?,
            ));
        }
    }
    Ok(PipelineRun {
        units,
        grid,
        files,
        grid_elapsed,
    })
}

fn c6_grid_fit(p: &Project, run: &PipelineRun) -> Outcome {
    let mut ok = run.grid_elapsed < Duration::from_secs(300);
    let mut parts = Vec::new();
    let grid = run.grid.grid.as_ref().ok_or("no grid fit")?;
    for (a, r) in p.areas.iter().zip(&run.grid.areas) {
        let (eh, ed) = ((r.h - a.h).abs() / a.h, (r.d - a.d).abs() / a.d);
        let (lo, hi) = inertia_bounds(a.h).map_err(|e| e.to_string())?;
        let box_ok = p.grid_bounds.get(&format!("h_{}", a.id)) == Some((lo, hi))
            && lo == 0.8 * a.h
            && hi == 1.2 * a.h;
        ok &= eh <= 0.01 && ed <= 0.05 && box_ok && (lo..=hi).contains(&r.h);
        parts.push(format!(
            "{} H err {:.3}% D err {:.3}%",
            a.id,
            100.0 * eh,
            100.0 * ed
        ));
    }
    let feasible = grid.starts.iter().all(|s| p.grid_bounds.contains(&s.x));
    ok &= feasible;
    parts.push(format!(
        "all starts inside box: {feasible}; {:.1} s",
        run.grid_elapsed.as_secs_f64()
    ));
    check(ok, parts.join("; "))
}

fn c7_multi_area_physics(p: &Project) -> Outcome {
    let sys = assemble_system(&p.areas, &p.ties, &p.base).map_err(|e| e.to_string())?;
    let mut worst_eq = 0.0f64;
    let mut worst_bal = 0.0f64;
    for sc in &p.scenarios {
        let cols = scenario_inputs(&sys, sc).map_err(|e| e.to_string())?;
        let u: indexmap::IndexMap<String, f64> = sys
            .inputs
            .iter()
            .cloned()
            .zip(cols.iter().map(|c| *c.last().unwrap_or(&0.0)))
            .collect();
        let ss = sys.steady_state(&u).map_err(|e| e.to_string())?;
        let w: Vec<f64> = p
            .areas
            .iter()
            .map(|a| ss[&format!("domega_{}", a.id)])
            .collect();
        for x in &w {
            worst_eq = worst_eq.max((x - w[0]).abs());
        }
        let units: f64 = p
            .areas
            .iter()
            .flat_map(|a| a.units.iter())
            .map(|un| ss[&format!("dP_{}", un.id)])
            .sum();
        let damping: f64 = p.areas.iter().zip(&w).map(|(a, x)| a.d * x).sum();
        let load: f64 = p.areas.iter().map(|a| u[&format!("dPL_{}", a.id)]).sum();
        worst_bal = worst_bal.max((units - damping - load).abs());
    }
    check(
        worst_eq <= 1e-6 && worst_bal <= 1e-6,
        format!("max frequency spread {worst_eq:.2e} pu, max balance residual {worst_bal:.2e} pu over 4 scenarios"),
    )
}

fn c8_metrics() -> Outcome {
    let mut worst = 0.0f64;
    let r = r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).map_err(|e| e.to_string())?;
    worst = worst.max((r - 11.0 / 14.0).abs());
    let r = r_squared(&[2.0, 4.0, 9.0], &[2.0, 4.0, 9.0]).map_err(|e| e.to_string())?;
    worst = worst.max((r - 1.0).abs());
    let r = r_squared(&[5.0, 5.0, 5.0], &[3.0, 4.0, 8.0]).map_err(|e| e.to_string())?;
    worst = worst.max(r.abs());
    let e = rms_error(&[0.0, 3.0, 4.0], &[0.0, 0.0, 0.0]).map_err(|e| e.to_string())?;
    worst = worst.max((e - (25.0f64 / 3.0).sqrt()).abs());
    let e = rms_error(&[1.5, 2.5, -0.5], &[1.0, 2.0, -1.0]).map_err(|e| e.to_string())?;
    worst = worst.max((e - 0.5).abs());
    let e = rms_error(&[0.3, 0.7], &[0.3, 0.7]).map_err(|e| e.to_string())?;
    worst = worst.max(e.abs());
    let degenerate = r_squared(&[1.0, 2.0], &[3.0, 3.0]);
    check(
        worst <= 1e-12 && degenerate == Err(Error::ConstantReference),
        format!("max deviation {worst:.1e}; constant reference -> {degenerate:?}"),
    )
}

fn c9_determinism(p: &Project, first: &PipelineRun) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let second = run_pipeline(p, dir.path()).map_err(|e| e.to_string())?;
    let same = first.files == second.files;
    let n = first.files.len();
    let bytes: usize = first.files.iter().map(|(_, b)| b.len()).sum();
    let diff: Vec<&str> = first
        .files
        .iter()
        .zip(&second.files)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    let _ = &first.units;
    check(
        same,
        format!("{n} files, {bytes} bytes compared; differing: {diff:?}"),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: u32, name: &str, r: Outcome| match r {
        Ok(d) => println!("PASS {id} {name}: {d}"),
        Err(d) => {
            failures += 1;
            println!("FAIL {id} {name}: {d}");
        }
    };
    report(1, "first-order step response", c1_first_order_step());
    report(2, "droop laws by final value", c2_droop_laws());
    report(3, "PLL algebraic identity", c3_pll_identity());
    report(4, "unit round-trip identification", c4_unit_round_trips());
    report(5, "multistart consistency", c5_multistart_consistency());

    let project = reference_config().and_then(|c| c.project());
    let project = match project {
        Ok(p) => p,
        Err(e) => {
            for (id, name) in [
                (6, "grid-level fit"),
                (7, "multi-area physics"),
                (9, "determinism"),
            ] {
                report(id, name, Err(format!("reference example: {e}")));
            }
            report(8, "fit metrics", c8_metrics());
            return ExitCode::FAILURE;
        }
    };
    let dir = tempfile::tempdir().expect("temp dir");
    let run = run_pipeline(&project, dir.path());
    match &run {
        Ok(r) => report(6, "grid-level fit", c6_grid_fit(&project, r)),
        Err(e) => report(6, "grid-level fit", Err(e.to_string())),
    }
    report(7, "multi-area physics", c7_multi_area_physics(&project));
    report(8, "fit metrics", c8_metrics());
    match &run {
        Ok(r) => report(9, "determinism", c9_determinism(&project, r)),
        Err(e) => report(9, "determinism", Err(e.to_string())),
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
