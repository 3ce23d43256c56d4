//! End-to-end steps shared by the command-line tool and the tests.

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::ident::{
    identify_grid, identify_grid_following, identify_grid_forming, identify_hydro,
    identify_thermal, r_squared, rms_error, GridProblem, IdentResult, MultistartConfig, UnitIo,
};
use crate::io::{AreaResult, ChannelMetric, FitSummary, Project, ResultBundle, UnitResult};
use crate::lti::{lsim_ss_hold, mimo_to_ss, Hold, Trace};
use crate::plant::{BaseQuantities, UnitModel, GFL_INPUTS, GF_INPUTS, REG_INPUT};
use crate::synth::{generate, SynthSpec};
use crate::system::{assemble_system, simulate_scenario, AreaSpec, UnitSpec};

pub const UNITS_FIT: &str = "units_fit";
pub const GRID_FIT: &str = "grid_fit";

pub fn simulate(project: &Project, scenario: &str) -> Result<Trace> {
    let sys = assemble_system(&project.areas, &project.ties, &project.base)?;
    simulate_scenario(&sys, project.scenario(scenario)?)
}

pub fn gen_synth(project: &Project, scenario: &str, noise_std: f64, seed: u64) -> Result<Trace> {
    let model = assemble_system(&project.areas, &project.ties, &project.base)?;
    generate(&SynthSpec {
        model,
        scenario: project.scenario(scenario)?.clone(),
        noise_std,
        seed,
        channels: None,
    })
}

/// Extracts the channels one unit is fitted on, in unit base, named after
/// the model's own inputs and output `dP`.
pub fn unit_trace(
    area: &AreaSpec,
    unit: &UnitSpec,
    base: &BaseQuantities,
    trace: &Trace,
) -> Result<(Trace, UnitIo)> {
    let scale = unit.scale(base);
    let id = &unit.id;
    let mut tr = Trace::new(trace.t.clone());
    let zeros = || vec![0.0; trace.len()];
    let optional = |name: &str| trace.channels.get(name).cloned().unwrap_or_else(zeros);
    let inputs: Vec<String> = match unit.model {
        UnitModel::Hydro(_) | UnitModel::Thermal(_) => {
            tr.insert(REG_INPUT, trace.get(&format!("u_{id}"))?.to_vec())?;
            vec![REG_INPUT.into()]
        }
        UnitModel::GridForming { .. } | UnitModel::GridFollowing { .. } => {
            let (names, second) = match unit.model {
                UnitModel::GridForming { .. } => (GF_INPUTS, format!("domegaref_{id}")),
                _ => (GFL_INPUTS, format!("dQref_{id}")),
            };
            tr.insert(names[0], optional(&format!("dPref_{id}")))?;
            tr.insert(names[1], optional(&second))?;
            tr.insert(
                names[2],
                trace.get(&format!("domega_{}", area.id))?.to_vec(),
            )?;
            names.iter().map(|s| s.to_string()).collect()
        }
    };
    let p = trace.get(&format!("dP_{id}"))?;
    tr.insert("dP", p.iter().map(|v| v / scale).collect())?;
    let holds: Vec<Hold> = match unit.model {
        UnitModel::Hydro(_) | UnitModel::Thermal(_) => vec![Hold::First],
        _ => vec![Hold::Zero, Hold::Zero, Hold::First],
    };
    Ok((tr, UnitIo::new(inputs, "dP").with_holds(&holds)))
}

/// Copy of `model` with the identified parameters substituted.
pub fn with_params(model: &UnitModel, p: &IndexMap<String, f64>) -> Result<UnitModel> {
    let get = |n: &str| {
        p.get(n)
            .copied()
            .ok_or_else(|| Error::MissingChannel(n.to_string()))
    };
    let mut m = model.clone();
    match &mut m {
        UnitModel::Hydro(h) => {
            h.t_g = get("t_g")?;
            h.t_r = get("t_r")?;
            h.r_t = get("r_t")?;
        }
        UnitModel::Thermal(t) => {
            t.t_g1 = get("t_g1")?;
            t.t_g2 = get("t_g2")?;
            t.t_rh = get("t_rh")?;
            t.t_ch = get("t_ch")?;
            t.f_hp = get("f_hp")?;
            t.f_lp = 1.0 - t.f_hp;
        }
        UnitModel::GridForming { params, .. } => {
            params.omega_c = get("omega_c")?;
            params.t1 = get("t1")?;
            params.t2 = get("t2")?;
        }
        UnitModel::GridFollowing { params, .. } => {
            params.k_i_pll = get("k_i_pll")?;
            params.k_p_pll = get("k_p_pll")?;
            params.k_i_c = get("k_i_c")?;
            params.k_p_c = get("k_p_c")?;
            params.omega_lpf = get("omega_lpf")?;
        }
    }
    Ok(m)
}

pub fn fit_unit(
    project: &Project,
    unit_id: &str,
    trace: &Trace,
    cfg: &MultistartConfig,
) -> Result<IdentResult> {
    let (area, unit) = project
        .unit(unit_id)
        .ok_or_else(|| Error::validation("unit", format!("unknown unit `{unit_id}`")))?;
    let bounds = project.unit_bounds.get(unit_id).ok_or_else(|| {
        Error::validation(
            "unit",
            format!("unit `{unit_id}` is not marked for identification"),
        )
    })?;
    let (tr, io) = unit_trace(area, unit, &project.base, trace)?;
    let base = &project.base;
    match &unit.model {
        UnitModel::Hydro(h) => identify_hydro(&tr, &io, h, bounds, cfg),
        UnitModel::Thermal(t) => identify_thermal(&tr, &io, t, bounds, cfg),
        UnitModel::GridForming {
            params,
            op,
            coupling,
        } => identify_grid_forming(&tr, &io, params, op, coupling, base, bounds, cfg),
        UnitModel::GridFollowing {
            params,
            op,
            coupling,
        } => identify_grid_following(&tr, &io, params, op, coupling, base, bounds, cfg),
    }
}

/// Step 1 for every unit marked for identification. The bundle holds the
/// fitted unit powers (system base) as trace `units_fit`.
pub fn identify_units(
    project: &Project,
    trace: &Trace,
    cfg: &MultistartConfig,
) -> Result<ResultBundle> {
    let mut bundle = ResultBundle::default();
    let mut fit = Trace::new(trace.t.clone());
    for area in &project.areas {
        for unit in &area.units {
            if !project.unit_bounds.contains_key(&unit.id) {
                continue;
            }
            log::info!("identifying unit {}", unit.id);
            let r = fit_unit(project, &unit.id, trace, cfg)?;
            let model = with_params(&unit.model, &r.best_params)?;
            let (tr, io) = unit_trace(area, unit, &project.base, trace)?;
            let y = simulate_unit(&model, &project.base, &tr, &io)?;
            let scale = unit.scale(&project.base);
            fit.insert(
                format!("dP_{}", unit.id),
                y.iter().map(|v| v * scale).collect(),
            )?;
            bundle.units.push(UnitResult {
                unit: unit.id.clone(),
                kind: unit.model.kind().to_string(),
                params: r.best_params.clone(),
                fit: FitSummary::from(&r),
            });
        }
    }
    bundle.traces.insert(UNITS_FIT.into(), fit);
    Ok(bundle)
}

/// Model output for a unit trace, with the same holds the fit used.
pub fn simulate_unit(
    model: &UnitModel,
    base: &BaseQuantities,
    tr: &Trace,
    io: &UnitIo,
) -> Result<Vec<f64>> {
    let ss = mimo_to_ss(&model.transfer(base)?)?;
    let cols = io
        .inputs
        .iter()
        .map(|c| tr.get(c))
        .collect::<Result<Vec<_>>>()?;
    let dt = tr.dt()?;
    Ok(lsim_ss_hold(&ss, dt, &cols, &io.holds)?.swap_remove(0))
}

/// Substitutes step-1 results into the project's unit models.
pub fn apply_unit_results(project: &Project, units: &[UnitResult]) -> Result<Project> {
    let mut p = project.clone();
    for r in units {
        let spec = p
            .areas
            .iter_mut()
            .flat_map(|a| a.units.iter_mut())
            .find(|u| u.id == r.unit)
            .ok_or_else(|| {
                Error::validation("units", format!("result for unknown unit `{}`", r.unit))
            })?;
        if spec.model.kind() != r.kind {
            return Err(Error::validation(
                format!("units.{}", r.unit),
                format!(
                    "result kind `{}` does not match configured `{}`",
                    r.kind,
                    spec.model.kind()
                ),
            ));
        }
        spec.model = with_params(&spec.model, &r.params)?;
        spec.model.validate()?;
    }
    Ok(p)
}

/// Step 2 on the project's (already identified) units. The bundle holds the
/// fitted area frequencies of the first trace as `grid_fit`.
pub fn identify_grid_step(
    project: &Project,
    traces: &[Trace],
    cfg: &MultistartConfig,
) -> Result<ResultBundle> {
    let prob = GridProblem {
        areas: &project.areas,
        ties: &project.ties,
        base: &project.base,
    };
    let r = identify_grid(traces, &prob, &project.grid_bounds, cfg)?;
    let mut bundle = ResultBundle::default();
    let mut areas = project.areas.clone();
    for a in areas.iter_mut() {
        let h = r.param(&format!("h_{}", a.id)).unwrap_or(a.h);
        let d = r.param(&format!("d_{}", a.id)).unwrap_or(a.d);
        a.h = h;
        a.d = d;
        bundle.areas.push(AreaResult {
            area: a.id.clone(),
            h,
            d,
        });
    }
    bundle.grid = Some(FitSummary::from(&r));
    if let Some(first) = traces.first() {
        let sys = assemble_system(&areas, &project.ties, &project.base)?;
        let u = sys.inputs.iter().map(|n| {
            first
                .channels
                .get(n)
                .cloned()
                .unwrap_or_else(|| vec![0.0; first.len()])
        });
        let mut tu = Trace::new(first.t.clone());
        for (n, c) in sys.inputs.iter().zip(u) {
            tu.insert(n.clone(), c)?;
        }
        let y = crate::lti::lsim(&sys, &tu)?;
        let mut fit = Trace::new(first.t.clone());
        for a in &areas {
            let name = format!("domega_{}", a.id);
            fit.insert(name.clone(), y.get(&name)?.to_vec())?;
        }
        bundle.traces.insert(GRID_FIT.into(), fit);
    }
    Ok(bundle)
}

/// R² and RMS for every channel present in both traces (time column excluded).
pub fn channel_metrics(
    model: &Trace,
    measured: &Trace,
    model_name: &str,
    measured_name: &str,
) -> Result<Vec<ChannelMetric>> {
    if model.len() != measured.len() {
        return Err(Error::LengthMismatch {
            expected: measured.len(),
            got: model.len(),
        });
    }
    let mut out = Vec::new();
    for (name, y) in &model.channels {
        let Some(m) = measured.channels.get(name) else {
            continue;
        };
        let r2 = match r_squared(y, m) {
            Ok(v) => Some(v),
            Err(Error::ConstantReference) => {
                log::info!("channel {name}: measured signal is constant, R² undefined");
                None
            }
            Err(e) => return Err(e),
        };
        out.push(ChannelMetric {
            channel: name.clone(),
            model: model_name.into(),
            measured: measured_name.into(),
            r2,
            rms: rms_error(y, m)?,
        });
    }
    if out.is_empty() {
        return Err(Error::validation(
            "channels",
            "model and measured traces share no channel",
        ));
    }
    Ok(out)
}

pub fn metrics_bundle(model: &Trace, measured: &Trace) -> Result<ResultBundle> {
    let mut b = ResultBundle::default();
    b.metrics = channel_metrics(model, measured, "model", "measured")?;
    b.traces.insert("model".into(), model.clone());
    b.traces.insert("measured".into(), measured.clone());
    Ok(b)
}
