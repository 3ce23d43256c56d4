use super::lsq::{multistart, BoundsBox, MultistartConfig};
use super::metrics::r_squared;
use super::units::IdentResult;
use crate::error::{Error, Result};
use crate::lti::{lsim_ss, StateSpace, Trace};
use crate::plant::BaseQuantities;
use crate::system::{compose, resolve_ties, unit_blocks, AreaSpec, TieLine};

/// Areas (with their already identified units), ties and bases. The `h`
/// and `d` fields of the areas are ignored by the fit.
#[derive(Debug, Clone, Copy)]
pub struct GridProblem<'a> {
    pub areas: &'a [AreaSpec],
    pub ties: &'a [TieLine],
    pub base: &'a BaseQuantities,
}

/// Parameter names `[h_<A1>, d_<A1>, h_<A2>, ...]` for a set of areas.
pub fn grid_param_names(areas: &[AreaSpec]) -> Vec<String> {
    areas
        .iter()
        .flat_map(|a| [format!("h_{}", a.id), format!("d_{}", a.id)])
        .collect()
}

/// Fits inertia and damping of every area to the measured area frequencies
/// `domega_<A>` of one or more traces. Model inputs missing from a trace are
/// taken as zero.
pub fn identify_grid(
    traces: &[Trace],
    problem: &GridProblem<'_>,
    bounds: &BoundsBox,
    cfg: &MultistartConfig,
) -> Result<IdentResult> {
    let names = grid_param_names(problem.areas);
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    bounds.require(&name_refs)?;
    cfg.validate()?;
    if traces.is_empty() || traces.iter().any(|t| t.len() < 2) {
        return Err(Error::EmptyTrace);
    }
    let units = unit_blocks(problem.areas, problem.base)?;
    let ties = resolve_ties(problem.areas, problem.ties)?;
    let ids: Vec<String> = problem.areas.iter().map(|a| a.id.clone()).collect();
    let omega_b = problem.base.omega_b();
    let na = ids.len();

    let probe = compose(&ids, &vec![(1.0, 1.0); na], &units, &ties, omega_b, false)?;
    struct Case {
        dt: f64,
        inputs: Vec<Vec<f64>>,
        measured: Vec<f64>,
    }
    let mut cases = Vec::new();
    for tr in traces {
        let dt = tr.dt()?;
        let inputs: Vec<Vec<f64>> = probe
            .inputs
            .iter()
            .map(|n| {
                tr.channels
                    .get(n)
                    .cloned()
                    .unwrap_or_else(|| vec![0.0; tr.len()])
            })
            .collect();
        let mut measured = Vec::with_capacity(na * tr.len());
        for a in &ids {
            measured.extend_from_slice(tr.get(&format!("domega_{a}"))?);
        }
        cases.push(Case {
            dt,
            inputs,
            measured,
        });
    }
    if cases
        .iter()
        .all(|c| c.inputs.iter().all(|u| u.iter().all(|&v| v == 0.0)))
    {
        return Err(Error::UnidentifiableInput { params: names });
    }
    let measured: Vec<f64> = cases
        .iter()
        .flat_map(|c| c.measured.iter().copied())
        .collect();

    let predict = |x: &[f64]| -> Result<Vec<f64>> {
        let hd: Vec<(f64, f64)> = (0..na).map(|i| (x[2 * i], x[2 * i + 1])).collect();
        let sys = compose(&ids, &hd, &units, &ties, omega_b, false)?;
        let ss = StateSpace {
            c: sys.ss.c.rows(0, na).into_owned(),
            d: sys.ss.d.rows(0, na).into_owned(),
            ..sys.ss
        };
        let mut out = Vec::with_capacity(measured.len());
        for c in &cases {
            let refs: Vec<&[f64]> = c.inputs.iter().map(Vec::as_slice).collect();
            for y in lsim_ss(&ss, c.dt, &refs)? {
                out.extend(y);
            }
        }
        Ok(out)
    };
    let residual = |x: &[f64]| -> Option<Vec<f64>> {
        let p = predict(x).ok()?;
        Some(p.iter().zip(&measured).map(|(a, b)| a - b).collect())
    };
    let scale: f64 = measured.iter().map(|v| v * v).sum();
    let (best, starts) = multistart(&residual, bounds, cfg, 1e-30 * scale.max(f64::MIN_POSITIVE))?;
    let x = starts[best].x.clone();
    let r2 = r_squared(&predict(&x)?, &measured)?;
    Ok(IdentResult {
        best_params: names.iter().cloned().zip(x.iter().copied()).collect(),
        names,
        sse: starts[best].sse,
        r2,
        best_start: best,
        starts,
    })
}
