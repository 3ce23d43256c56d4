use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::bounds::{GRID_FOLLOWING_PARAMS, GRID_FORMING_PARAMS, HYDRO_PARAMS, THERMAL_PARAMS};
use super::lsq::{multistart, BoundsBox, MultistartConfig, StartRecord};
use super::metrics::r_squared;
use crate::error::{Error, Result};
use crate::lti::{lsim_ss_hold, tf_to_ss, Hold, RationalTF, Trace};
use crate::plant::{
    coupling_power_tfs, grid_following_tfs, grid_forming_tfs, hydro_tf, thermal_tf, BaseQuantities,
    CouplingParams, GridFollowingParams, GridFormingParams, HydroParams, OperatingPoint,
    ThermalParams,
};

/// Input channels with RMS below this are treated as unexcited.
pub const MIN_EXCITATION_RMS: f64 = 1e-9;

/// Trace channels feeding a unit fit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitIo {
    pub inputs: Vec<String>,
    pub output: String,
    /// Hold assumed for each input when simulating the model; zero-order by default.
    pub holds: Vec<Hold>,
}

impl UnitIo {
    pub fn new<S: Into<String>>(
        inputs: impl IntoIterator<Item = S>,
        output: impl Into<String>,
    ) -> Self {
        let inputs: Vec<String> = inputs.into_iter().map(Into::into).collect();
        Self {
            holds: vec![Hold::Zero; inputs.len()],
            inputs,
            output: output.into(),
        }
    }

    pub fn with_holds(mut self, holds: &[Hold]) -> Self {
        self.holds = holds.to_vec();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentResult {
    pub names: Vec<String>,
    pub best_params: IndexMap<String, f64>,
    pub sse: f64,
    pub r2: f64,
    pub best_start: usize,
    pub starts: Vec<StartRecord>,
}

impl IdentResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.best_params.get(name).copied()
    }
}

type Builder<'a> = dyn Fn(&[f64]) -> Result<Vec<RationalTF>> + Sync + 'a;

struct Fit<'a> {
    inputs: Vec<&'a [f64]>,
    holds: &'a [Hold],
    active: Vec<bool>,
    y: &'a [f64],
    dt: f64,
    build: &'a Builder<'a>,
}

impl Fit<'_> {
    fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let entries = (self.build)(x)?;
        let mut out = vec![0.0; self.y.len()];
        for (k, g) in entries.iter().enumerate() {
            if !self.active[k] || g.is_zero() {
                continue;
            }
            let ss = tf_to_ss(g)?;
            let y = lsim_ss_hold(&ss, self.dt, &[self.inputs[k]], &[self.holds[k]])?;
            for (o, v) in out.iter_mut().zip(&y[0]) {
                *o += v;
            }
        }
        Ok(out)
    }
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Shared driver. `deps[p]` lists the input channels parameter `p` acts
/// through; `structural_zero[k]` marks channels whose model is identically zero.
#[allow(clippy::too_many_arguments)]
fn fit_unit(
    trace: &Trace,
    io: &UnitIo,
    names: &[&str],
    bounds: &BoundsBox,
    cfg: &MultistartConfig,
    deps: &[Vec<usize>],
    structural_zero: &[bool],
    build: &Builder<'_>,
) -> Result<IdentResult> {
    if trace.len() < 2 {
        return Err(Error::EmptyTrace);
    }
    bounds.require(names)?;
    cfg.validate()?;
    if io.holds.len() != io.inputs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} hold flags for {} inputs",
            io.holds.len(),
            io.inputs.len()
        )));
    }
    let dt = trace.dt()?;
    let inputs = io
        .inputs
        .iter()
        .map(|c| trace.get(c))
        .collect::<Result<Vec<_>>>()?;
    let y = trace.get(&io.output)?;
    let active: Vec<bool> = inputs
        .iter()
        .zip(structural_zero)
        .map(|(u, z)| !z && rms(u) >= MIN_EXCITATION_RMS)
        .collect();
    let starved: Vec<String> = names
        .iter()
        .zip(deps)
        .filter(|(_, d)| !d.iter().any(|&k| active[k]))
        .map(|(n, _)| n.to_string())
        .collect();
    if !starved.is_empty() {
        return Err(Error::UnidentifiableInput { params: starved });
    }
    let fit = Fit {
        inputs,
        holds: &io.holds,
        active,
        y,
        dt,
        build,
    };
    let residual = |x: &[f64]| -> Option<Vec<f64>> {
        let p = fit.predict(x).ok()?;
        Some(p.iter().zip(y).map(|(a, b)| a - b).collect())
    };
    let scale: f64 = y.iter().map(|v| v * v).sum();
    let (best, starts) = multistart(&residual, bounds, cfg, 1e-30 * scale.max(f64::MIN_POSITIVE))?;
    let x = starts[best].x.clone();
    let r2 = r_squared(&fit.predict(&x)?, y)?;
    Ok(IdentResult {
        names: names.iter().map(|s| s.to_string()).collect(),
        best_params: names
            .iter()
            .map(|s| s.to_string())
            .zip(x.iter().copied())
            .collect(),
        sse: starts[best].sse,
        r2,
        best_start: best,
        starts,
    })
}

/// Fits `[t_g, t_r, r_t]` of a hydro unit; the other fields of `fixed` are
/// held. `io.inputs` holds the regulating signal, `io.output` the unit power,
/// both on the unit base.
pub fn identify_hydro(
    trace: &Trace,
    io: &UnitIo,
    fixed: &HydroParams,
    bounds: &BoundsBox,
    cfg: &MultistartConfig,
) -> Result<IdentResult> {
    single_input(io)?;
    let build = |x: &[f64]| -> Result<Vec<RationalTF>> {
        Ok(vec![hydro_tf(&HydroParams {
            t_g: x[0],
            t_r: x[1],
            r_t: x[2],
            ..*fixed
        })?])
    };
    fit_unit(
        trace,
        io,
        &HYDRO_PARAMS,
        bounds,
        cfg,
        &[vec![0], vec![0], vec![0]],
        &[false],
        &build,
    )
}

/// Fits `[t_g1, t_g2, t_rh, t_ch, f_hp]` with `f_lp = 1 − f_hp`.
pub fn identify_thermal(
    trace: &Trace,
    io: &UnitIo,
    fixed: &ThermalParams,
    bounds: &BoundsBox,
    cfg: &MultistartConfig,
) -> Result<IdentResult> {
    single_input(io)?;
    let build = |x: &[f64]| -> Result<Vec<RationalTF>> {
        let p = ThermalParams {
            t_g1: x[0],
            t_g2: x[1],
            t_rh: x[2],
            t_ch: x[3],
            f_hp: x[4],
            f_lp: 1.0 - x[4],
            ..*fixed
        };
        Ok(vec![thermal_tf(&p)?])
    };
    let deps = vec![vec![0]; 5];
    fit_unit(
        trace,
        io,
        &THERMAL_PARAMS,
        bounds,
        cfg,
        &deps,
        &[false],
        &build,
    )
}

/// Fits `[omega_c, t1, t2]`; `io.inputs` are `(ΔP*, Δω*, Δω_g)` in that order.
#[allow(clippy::too_many_arguments)]
pub fn identify_grid_forming(
    trace: &Trace,
    io: &UnitIo,
    fixed: &GridFormingParams,
    op: &OperatingPoint,
    cp: &CouplingParams,
    base: &BaseQuantities,
    bounds: &BoundsBox,
    cfg: &MultistartConfig,
) -> Result<IdentResult> {
    triple_input(io)?;
    let t_p_delta = coupling_power_tfs(op, cp, base)?.entry(0, 0).clone();
    let build = |x: &[f64]| -> Result<Vec<RationalTF>> {
        let p = GridFormingParams {
            omega_c: x[0],
            t1: x[1],
            t2: x[2],
            ..*fixed
        };
        Ok(grid_forming_tfs(&p, &t_p_delta, base)?.entries()[0].clone())
    };
    let deps = vec![vec![0, 1, 2]; 3];
    fit_unit(
        trace,
        io,
        &GRID_FORMING_PARAMS,
        bounds,
        cfg,
        &deps,
        &[false; 3],
        &build,
    )
}

/// Fits `[k_i_pll, k_p_pll, k_i_c, k_p_c, omega_lpf]`; `io.inputs` are
/// `(ΔP*, ΔQ*, Δω_g)` in that order.
#[allow(clippy::too_many_arguments)]
pub fn identify_grid_following(
    trace: &Trace,
    io: &UnitIo,
    fixed: &GridFollowingParams,
    op: &OperatingPoint,
    cp: &CouplingParams,
    base: &BaseQuantities,
    bounds: &BoundsBox,
    cfg: &MultistartConfig,
) -> Result<IdentResult> {
    triple_input(io)?;
    let build = |x: &[f64]| -> Result<Vec<RationalTF>> {
        let p = GridFollowingParams {
            k_i_pll: x[0],
            k_p_pll: x[1],
            k_i_c: x[2],
            k_p_c: x[3],
            omega_lpf: x[4],
            ..*fixed
        };
        Ok(grid_following_tfs(&p, op, cp, base)?.entries()[0].clone())
    };
    let pll = vec![2];
    let current = vec![0, 1, 2];
    let deps = vec![pll.clone(), pll.clone(), current.clone(), current, pll];
    let q_zero = op.e_gq0 == 0.0;
    fit_unit(
        trace,
        io,
        &GRID_FOLLOWING_PARAMS,
        bounds,
        cfg,
        &deps,
        &[false, q_zero, false],
        &build,
    )
}

fn single_input(io: &UnitIo) -> Result<()> {
    if io.inputs.len() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "expected 1 input channel, got {}",
            io.inputs.len()
        )));
    }
    Ok(())
}

fn triple_input(io: &UnitIo) -> Result<()> {
    if io.inputs.len() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "expected 3 input channels, got {}",
            io.inputs.len()
        )));
    }
    Ok(())
}
