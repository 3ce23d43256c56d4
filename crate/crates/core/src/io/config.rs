//! Project configuration (TOML).
//!
//! ```toml
//! [base]
//! s_b = 100.0
//! f_b = 50.0
//!
//! [identification]
//! n_starts = 20
//!
//! [[areas]]
//! id = "A1"
//! h = 7.056
//! kpv_range = [1.0, 2.0]
//! kpf_range = [1.0, 2.0]
//! loads = [{ p_l0 = 6.0, k_pv = 1.5, k_pf = 1.5, v_g0 = 0.98 }]
//!
//! [[areas.units]]
//! id = "G1"
//! kind = "hydro"
//! rating_mva = 500.0
//! params = { k_g = 1.0, t_g = 0.3, t_r = 5.0, r_t = 0.5, r = 0.05, t_w = 1.5, p0 = 0.7 }
//! bounds = { t_r = [2.5, 10.0] }
//!
//! [[ties]]
//! from = "A1"
//! to = "A2"
//! load_flow = { v1 = 1.0, v2 = 1.0, x12 = 0.05, delta1_0 = 0.1, delta2_0 = 0.0 }
//!
//! [[scenarios]]
//! name = "load_step"
//! duration = 30.0
//! dt = 0.01
//! events = [{ time = 1.0, channel = "dPL_A1", value = 0.5 }]
//! ```
//!
//! Converter units additionally take `op = { p0, q0, e_g0, delta0, v_g0 }`
//! and `coupling = { l_c, r_c }`. Area `d` may be omitted when `loads` are
//! given; it is then the sum of the load damping coefficients. Each tie
//! takes exactly one of `t_sync` or `load_flow`.

use std::collections::HashSet;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ident::{
    damping_bounds, default_bounds, inertia_bounds, param_names, BoundsBox, MultistartConfig,
};
use crate::plant::{
    load_damping_coeff, BaseQuantities, CouplingParams, GridFollowingParams, GridFormingParams,
    HydroParams, LoadModel, OperatingPoint, ThermalParams, UnitModel,
};
use crate::system::{tie_line_coeff, AreaSpec, Scenario, TieLine, UnitSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    #[serde(default)]
    pub base: BaseQuantities,
    #[serde(default)]
    pub identification: MultistartConfig,
    pub areas: Vec<AreaConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ties: Vec<TieConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaConfig {
    pub id: String,
    /// Theoretical inertia constant, s.
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loads: Vec<LoadModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kpv_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kpf_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_bounds: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_bounds: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub units: Vec<UnitConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitConfig {
    pub id: String,
    pub kind: String,
    pub rating_mva: f64,
    /// Whether step 1 fits this unit; otherwise `params` are taken as known.
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub identify: bool,
    pub params: toml::Table,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<OperatingPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingParams>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub bounds: IndexMap<String, [f64; 2]>,
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TieConfig {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_sync: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_flow: Option<LoadFlow>,
}

/// Voltages (pu), series reactance (pu) and bus angles (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadFlow {
    pub v1: f64,
    pub v2: f64,
    pub x12: f64,
    pub delta1_0: f64,
    pub delta2_0: f64,
}

/// A validated configuration turned into model objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub base: BaseQuantities,
    pub identification: MultistartConfig,
    pub areas: Vec<AreaSpec>,
    pub ties: Vec<TieLine>,
    pub scenarios: Vec<Scenario>,
    /// Step-1 boxes keyed by unit id, for units with `identify = true`.
    pub unit_bounds: IndexMap<String, BoundsBox>,
    /// Step-2 box over `[h_<A>, d_<A>, ...]`.
    pub grid_bounds: BoundsBox,
}

impl Project {
    pub fn scenario(&self, name: &str) -> Result<&Scenario> {
        self.scenarios
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::validation("scenario", format!("no scenario named `{name}`")))
    }

    pub fn unit(&self, id: &str) -> Option<(&AreaSpec, &UnitSpec)> {
        self.areas
            .iter()
            .find_map(|a| a.units.iter().find(|u| u.id == id).map(|u| (a, u)))
    }
}

pub fn parse_config(path: &Path) -> Result<ProjectConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Parses and validates; the returned config has every tie in `t_sync`
/// form and every area damping filled in.
pub fn parse_config_str(text: &str) -> Result<ProjectConfig> {
    let raw: ProjectConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let v = raw.validated()?;
    v.project()?;
    Ok(v)
}

impl ProjectConfig {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Normalizes tie lines and area damping.
    pub fn validated(&self) -> Result<ProjectConfig> {
        let mut out = self.clone();
        self.base
            .validate()
            .map_err(|e| Error::validation("base", e.to_string()))?;
        self.identification
            .validate()
            .map_err(|e| Error::validation("identification", e.to_string()))?;
        for (i, a) in out.areas.iter_mut().enumerate() {
            if a.d.is_none() {
                if a.loads.is_empty() {
                    return Err(Error::validation(
                        format!("areas[{i}].d"),
                        "missing: give `d` or `loads`",
                    ));
                }
                let mut d = 0.0;
                for (j, lm) in a.loads.iter().enumerate() {
                    d += load_damping_coeff(lm).map_err(|e| {
                        Error::validation(format!("areas[{i}].loads[{j}]"), e.to_string())
                    })?;
                }
                a.d = Some(d);
            }
        }
        for (i, t) in out.ties.iter_mut().enumerate() {
            let field = format!("ties[{i}]");
            match (t.t_sync, t.load_flow) {
                (Some(_), None) => {}
                (None, Some(lf)) => {
                    let ts = tie_line_coeff(lf.v1, lf.v2, lf.x12, lf.delta1_0, lf.delta2_0)
                        .map_err(|e| {
                            Error::validation(format!("{field}.load_flow"), e.to_string())
                        })?;
                    t.t_sync = Some(ts);
                    t.load_flow = None;
                }
                (Some(_), Some(_)) => {
                    return Err(Error::validation(
                        field,
                        "give exactly one of `t_sync` or `load_flow`, not both",
                    ))
                }
                (None, None) => {
                    return Err(Error::validation(field, "missing `t_sync` or `load_flow`"))
                }
            }
        }
        Ok(out)
    }

    /// Builds model objects; call on a validated config.
    pub fn project(&self) -> Result<Project> {
        let mut area_ids = HashSet::new();
        let mut unit_ids = HashSet::new();
        let mut areas = Vec::new();
        let mut unit_bounds = IndexMap::new();
        let mut grid = Vec::new();
        for (i, a) in self.areas.iter().enumerate() {
            let field = format!("areas[{i}]");
            if a.id.is_empty() || !area_ids.insert(a.id.clone()) {
                return Err(Error::validation(
                    format!("{field}.id"),
                    format!("empty or duplicate area id `{}`", a.id),
                ));
            }
            let d =
                a.d.ok_or_else(|| Error::validation(format!("{field}.d"), "missing"))?;
            if !(a.h > 0.0 && a.h.is_finite()) {
                return Err(Error::validation(
                    format!("{field}.h"),
                    format!("must be positive, got {}", a.h),
                ));
            }
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::validation(
                    format!("{field}.d"),
                    format!("must be positive, got {d}"),
                ));
            }
            let hb = match a.h_bounds {
                Some(b) => b,
                None => inertia_bounds(a.h)?.into(),
            };
            let db = match (a.d_bounds, a.kpv_range, a.kpf_range) {
                (Some(b), _, _) => b,
                (None, Some(kpv), Some(kpf)) if !a.loads.is_empty() => {
                    damping_bounds(&a.loads, (kpv[0], kpv[1]), (kpf[0], kpf[1]))
                        .map_err(|e| {
                            Error::validation(format!("{field}.kpv_range"), e.to_string())
                        })?
                        .into()
                }
                _ => [d, d],
            };
            for (name, b) in [("h_bounds", hb), ("d_bounds", db)] {
                check_pair(&format!("{field}.{name}"), b)?;
            }
            grid.push((format!("h_{}", a.id), hb[0], hb[1]));
            grid.push((format!("d_{}", a.id), db[0], db[1]));

            let mut units = Vec::new();
            for (j, u) in a.units.iter().enumerate() {
                let field = format!("{field}.units[{j}]");
                if u.id.is_empty() || !unit_ids.insert(u.id.clone()) {
                    return Err(Error::validation(
                        format!("{field}.id"),
                        format!("empty or duplicate unit id `{}`", u.id),
                    ));
                }
                let model = unit_model(u).map_err(|e| relabel(e, &field))?;
                model
                    .validate()
                    .map_err(|e| relabel(e, &format!("{field}.params")))?;
                if !(u.rating_mva > 0.0 && u.rating_mva.is_finite()) {
                    return Err(Error::validation(
                        format!("{field}.rating_mva"),
                        "must be positive",
                    ));
                }
                if u.identify {
                    unit_bounds.insert(
                        u.id.clone(),
                        unit_box(u).map_err(|e| relabel(e, &format!("{field}.bounds")))?,
                    );
                } else if !u.bounds.is_empty() {
                    return Err(Error::validation(
                        format!("{field}.bounds"),
                        "given for a unit with `identify = false`",
                    ));
                }
                units.push(UnitSpec {
                    id: u.id.clone(),
                    model,
                    rating_mva: u.rating_mva,
                });
            }
            areas.push(AreaSpec {
                id: a.id.clone(),
                h: a.h,
                d,
                units,
            });
        }
        let mut ties = Vec::new();
        for (i, t) in self.ties.iter().enumerate() {
            let field = format!("ties[{i}]");
            for (end, id) in [("from", &t.from), ("to", &t.to)] {
                if !area_ids.contains(id) {
                    return Err(Error::validation(
                        format!("{field}.{end}"),
                        format!("unknown area `{id}`"),
                    ));
                }
            }
            if t.from == t.to {
                return Err(Error::validation(field, "tie connects an area to itself"));
            }
            let ts = t
                .t_sync
                .ok_or_else(|| Error::validation(format!("{field}.t_sync"), "missing"))?;
            if !(ts > 0.0 && ts.is_finite()) {
                return Err(Error::validation(
                    format!("{field}.t_sync"),
                    format!("must be positive, got {ts}"),
                ));
            }
            ties.push(TieLine {
                from: t.from.clone(),
                to: t.to.clone(),
                t_sync: ts,
            });
        }
        let probe = crate::system::assemble_system(&areas, &ties, &self.base)?;
        let mut names = HashSet::new();
        for (i, s) in self.scenarios.iter().enumerate() {
            let field = format!("scenarios[{i}]");
            if !names.insert(s.name.clone()) {
                return Err(Error::validation(
                    format!("{field}.name"),
                    format!("duplicate scenario `{}`", s.name),
                ));
            }
            s.validate().map_err(|e| relabel(e, &field))?;
            for (k, ev) in s.events.iter().enumerate() {
                if !probe.inputs.contains(&ev.channel) {
                    return Err(Error::validation(
                        format!("{field}.events[{k}].channel"),
                        format!("unknown input channel `{}`", ev.channel),
                    ));
                }
            }
        }
        let grid_bounds = BoundsBox::from_pairs(grid).map_err(|e| relabel(e, "areas"))?;
        Ok(Project {
            base: self.base.clone(),
            identification: self.identification,
            areas,
            ties,
            scenarios: self.scenarios.clone(),
            unit_bounds,
            grid_bounds,
        })
    }
}

fn check_pair(field: &str, b: [f64; 2]) -> Result<()> {
    if b[0].is_finite() && b[1].is_finite() && b[0] <= b[1] {
        Ok(())
    } else {
        Err(Error::validation(
            field,
            format!(
                "lower bound {} exceeds upper bound {} or not finite",
                b[0], b[1]
            ),
        ))
    }
}

fn relabel(e: Error, field: &str) -> Error {
    match e {
        Error::Validation { field: f, message } => Error::Validation {
            field: format!("{field}.{f}"),
            message,
        },
        Error::InfeasibleBounds { param, lb, ub } => Error::validation(
            format!("{field}.{param}"),
            format!("lower bound {lb} exceeds upper bound {ub} or not finite"),
        ),
        other => Error::validation(field, other.to_string()),
    }
}

fn params<T: serde::de::DeserializeOwned>(u: &UnitConfig) -> Result<T> {
    toml::Value::Table(u.params.clone())
        .try_into()
        .map_err(|e: toml::de::Error| Error::validation("params", e.message().to_string()))
}

fn converter_parts(u: &UnitConfig) -> Result<(OperatingPoint, CouplingParams)> {
    let op =
        u.op.ok_or_else(|| Error::validation("op", "missing operating point"))?;
    let coupling = u
        .coupling
        .ok_or_else(|| Error::validation("coupling", "missing coupling parameters"))?;
    Ok((op, coupling))
}

fn unit_model(u: &UnitConfig) -> Result<UnitModel> {
    let governor = |u: &UnitConfig| -> Result<()> {
        if u.op.is_some() || u.coupling.is_some() {
            return Err(Error::validation(
                "op",
                format!("not used by `{}` units", u.kind),
            ));
        }
        Ok(())
    };
    Ok(match u.kind.as_str() {
        "hydro" => {
            governor(u)?;
            UnitModel::Hydro(params::<HydroParams>(u)?)
        }
        "thermal" => {
            governor(u)?;
            UnitModel::Thermal(params::<ThermalParams>(u)?)
        }
        "grid_forming" => {
            let (op, coupling) = converter_parts(u)?;
            UnitModel::GridForming {
                params: params::<GridFormingParams>(u)?,
                op,
                coupling,
            }
        }
        "grid_following" => {
            let (op, coupling) = converter_parts(u)?;
            UnitModel::GridFollowing {
                params: params::<GridFollowingParams>(u)?,
                op,
                coupling,
            }
        }
        other => {
            return Err(Error::validation(
                "kind",
                format!("unknown unit kind `{other}`"),
            ))
        }
    })
}

fn unit_box(u: &UnitConfig) -> Result<BoundsBox> {
    let names = param_names(&u.kind)?;
    let mut b = default_bounds(&u.kind)?;
    for (name, pair) in &u.bounds {
        let k = names.iter().position(|n| n == name).ok_or_else(|| {
            Error::validation(
                name.as_str(),
                format!("not an identified `{}` parameter", u.kind),
            )
        })?;
        check_pair(name, *pair)?;
        b.lb[k] = pair[0];
        b.ub[k] = pair[1];
    }
    Ok(b)
}

/// Serializes a unit model back into config form.
pub fn unit_config(spec: &UnitSpec, identify: bool) -> Result<UnitConfig> {
    let (params, op, coupling) = match &spec.model {
        UnitModel::Hydro(p) => (table(p)?, None, None),
        UnitModel::Thermal(p) => (table(p)?, None, None),
        UnitModel::GridForming {
            params,
            op,
            coupling,
        } => (table(params)?, Some(*op), Some(*coupling)),
        UnitModel::GridFollowing {
            params,
            op,
            coupling,
        } => (table(params)?, Some(*op), Some(*coupling)),
    };
    Ok(UnitConfig {
        id: spec.id.clone(),
        kind: spec.model.kind().to_string(),
        rating_mva: spec.rating_mva,
        identify,
        params,
        op,
        coupling,
        bounds: IndexMap::new(),
    })
}

fn table<T: Serialize>(v: &T) -> Result<toml::Table> {
    toml::Table::try_from(v).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[[areas]]
id = "A"
h = 5.0
d = 1.0

[[areas.units]]
id = "G"
kind = "hydro"
rating_mva = 200.0
params = { k_g = 1.0, t_g = 0.3, t_r = 5.0, r_t = 0.5, r = 0.05, t_w = 1.5, p0 = 0.7 }
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.base, BaseQuantities::default());
        assert_eq!(c.identification, MultistartConfig::default());
        let p = c.project().unwrap();
        let (_, u) = p.unit("G").unwrap();
        let UnitModel::Hydro(h) = &u.model else {
            panic!()
        };
        assert_eq!(h.k, 1.0);
        assert_eq!(p.unit_bounds["G"], default_bounds("hydro").unwrap());
        assert_eq!(p.grid_bounds.get("h_A"), Some((4.0, 6.0)));
        assert_eq!(p.grid_bounds.get("d_A"), Some((1.0, 1.0)));
    }

    fn two_areas(tie: &str) -> String {
        format!(
            "[[areas]]\nid = \"A1\"\nh = 5.0\nd = 1.0\n[[areas]]\nid = \"A2\"\nh = 4.0\nd = 1.0\n\
             [[ties]]\nfrom = \"A1\"\nto = \"A2\"\n{tie}\n"
        )
    }

    #[test]
    fn load_flow_tie_is_converted_and_echoed() {
        let lf =
            "load_flow = { v1 = 1.02, v2 = 0.98, x12 = 0.025, delta1_0 = 0.15, delta2_0 = 0.05 }";
        let c = parse_config_str(&two_areas(lf)).unwrap();
        let expect = tie_line_coeff(1.02, 0.98, 0.025, 0.15, 0.05).unwrap();
        assert_eq!(c.ties[0].t_sync, Some(expect));
        assert!(c.ties[0].load_flow.is_none());
        let echoed = c.to_toml_string().unwrap();
        assert!(echoed.contains("t_sync"));
        assert_eq!(parse_config_str(&echoed).unwrap(), c);
    }

    #[test]
    fn tie_needs_exactly_one_form() {
        let both = "t_sync = 3.0\nload_flow = { v1 = 1.0, v2 = 1.0, x12 = 0.1, delta1_0 = 0.0, delta2_0 = 0.0 }";
        for tie in [both, ""] {
            let e = parse_config_str(&two_areas(tie)).unwrap_err();
            assert!(
                matches!(e, Error::Validation { ref field, .. } if field == "ties[0]"),
                "{e}"
            );
        }
    }

    #[test]
    fn inverted_bound_names_parameter() {
        let text = format!("{MINIMAL}bounds = {{ t_r = [9.0, 3.0] }}\n");
        let e = parse_config_str(&text).unwrap_err();
        assert!(
            matches!(e, Error::Validation { ref field, .. } if field.ends_with("bounds.t_r")),
            "{e}"
        );
    }

    #[test]
    fn unknown_area_in_tie() {
        let text = format!("{MINIMAL}[[ties]]\nfrom = \"A\"\nto = \"B\"\nt_sync = 1.0\n");
        let e = parse_config_str(&text).unwrap_err();
        assert!(e.to_string().contains("unknown area `B`"), "{e}");
    }

    #[test]
    fn converter_without_operating_point() {
        let text = r#"
[[areas]]
id = "A"
h = 5.0
d = 1.0
[[areas.units]]
id = "C"
kind = "grid_forming"
rating_mva = 100.0
params = { m_p = 0.02, omega_c = 31.4, t1 = 0.033, t2 = 0.011 }
coupling = { l_c = 0.2, r_c = 0.005 }
"#;
        let e = parse_config_str(text).unwrap_err();
        assert!(e.to_string().contains("missing operating point"), "{e}");
    }

    #[test]
    fn parse_error_reports_line() {
        let e = parse_config_str("[[areas]]\nid = \"A\"\nh = = 5\n").unwrap_err();
        let Error::Parse(msg) = e else { panic!("{e}") };
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_event_channel() {
        let text = format!(
            "{MINIMAL}[[scenarios]]\nname = \"s\"\nduration = 1.0\ndt = 0.1\n\
             events = [{{ time = 0.0, channel = \"dPL_B\", value = 1.0 }}]\n"
        );
        let e = parse_config_str(&text).unwrap_err();
        assert!(e.to_string().contains("dPL_B"), "{e}");
    }

    #[test]
    fn damping_from_loads() {
        let text = r#"
[[areas]]
id = "A"
h = 5.0
kpv_range = [1.0, 2.0]
kpf_range = [1.0, 2.0]
loads = [{ p_l0 = 1.5, k_pv = 1.5, k_pf = 1.5, v_g0 = 0.97 }]
"#;
        let c = parse_config_str(text).unwrap();
        let lm = c.areas[0].loads[0];
        assert_eq!(c.areas[0].d, Some(load_damping_coeff(&lm).unwrap()));
        let p = c.project().unwrap();
        let (lo, hi) = p.grid_bounds.get("d_A").unwrap();
        assert!((lo - 1.5 * 0.97f64.powi(2)).abs() < 1e-12);
        assert!((hi - 3.0 * 0.97).abs() < 1e-12);
    }

    #[test]
    fn unit_config_round_trip() {
        let c = parse_config_str(MINIMAL).unwrap();
        let p = c.project().unwrap();
        let back = unit_config(&p.areas[0].units[0], true).unwrap();
        assert_eq!(unit_model(&back).unwrap(), p.areas[0].units[0].model);
    }
}
