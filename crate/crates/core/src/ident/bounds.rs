use indexmap::IndexMap;

use super::lsq::BoundsBox;
use crate::error::{Error, Result};
use crate::plant::{load_damping_coeff, LoadModel};

pub const HYDRO_PARAMS: [&str; 3] = ["t_g", "t_r", "r_t"];
pub const THERMAL_PARAMS: [&str; 5] = ["t_g1", "t_g2", "t_rh", "t_ch", "f_hp"];
pub const GRID_FORMING_PARAMS: [&str; 3] = ["omega_c", "t1", "t2"];
pub const GRID_FOLLOWING_PARAMS: [&str; 5] = ["k_i_pll", "k_p_pll", "k_i_c", "k_p_c", "omega_lpf"];

const DEFAULTS: &str = include_str!("../../data/default_bounds.toml");

/// Parameter names identified for a unit kind (`hydro`, `thermal`, ...).
pub fn param_names(kind: &str) -> Result<&'static [&'static str]> {
    match kind {
        "hydro" => Ok(&HYDRO_PARAMS),
        "thermal" => Ok(&THERMAL_PARAMS),
        "grid_forming" => Ok(&GRID_FORMING_PARAMS),
        "grid_following" => Ok(&GRID_FOLLOWING_PARAMS),
        other => Err(Error::validation(
            "kind",
            format!("unknown unit kind `{other}`"),
        )),
    }
}

/// Shipped default box for a unit kind.
pub fn default_bounds(kind: &str) -> Result<BoundsBox> {
    let table: IndexMap<String, IndexMap<String, [f64; 2]>> =
        toml::from_str(DEFAULTS).map_err(|e| Error::Parse(e.to_string()))?;
    let names = param_names(kind)?;
    let t = table
        .get(kind)
        .ok_or_else(|| Error::validation(kind, "no default bounds"))?;
    BoundsBox::from_pairs(names.iter().map(|n| {
        let [lo, hi] = t.get(*n).copied().unwrap_or([f64::NAN, f64::NAN]);
        (*n, lo, hi)
    }))
}

/// `(0.8·H, 1.2·H)`
pub fn inertia_bounds(h_theoretical: f64) -> Result<(f64, f64)> {
    if !(h_theoretical > 0.0 && h_theoretical.is_finite()) {
        return Err(Error::invalid(
            "h_theoretical",
            format!("must be positive, got {h_theoretical}"),
        ));
    }
    Ok((0.8 * h_theoretical, 1.2 * h_theoretical))
}

/// Area damping range from the load models. Each load's coefficient is
/// monotone in `k_pf` and `k_pv`, so its extremes sit on the range corners.
pub fn damping_bounds(
    loads: &[LoadModel],
    kpv_range: (f64, f64),
    kpf_range: (f64, f64),
) -> Result<(f64, f64)> {
    for (name, (lo, hi)) in [("kpv_range", kpv_range), ("kpf_range", kpf_range)] {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InfeasibleBounds {
                param: name.into(),
                lb: lo,
                ub: hi,
            });
        }
    }
    let (mut dmin, mut dmax) = (0.0, 0.0);
    for lm in loads {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for kpv in [kpv_range.0, kpv_range.1] {
            for kpf in [kpf_range.0, kpf_range.1] {
                let k = load_damping_coeff(&LoadModel {
                    k_pv: kpv,
                    k_pf: kpf,
                    ..*lm
                })?;
                lo = lo.min(k);
                hi = hi.max(k);
            }
        }
        dmin += lo;
        dmax += hi;
    }
    Ok((dmin, dmax))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn load(p: f64, ratio: f64) -> LoadModel {
        LoadModel {
            p_l0: p,
            k_pv: 0.0,
            k_pf: 0.0,
            v_n: 1.0,
            v_g0: ratio,
        }
    }

    #[test]
    fn inertia_examples() {
        assert_eq!(inertia_bounds(10.0).unwrap(), (8.0, 12.0));
        let (lo, hi) = inertia_bounds(7.056).unwrap();
        assert_relative_eq!(lo, 5.6448, max_relative = 1e-15);
        assert_relative_eq!(hi, 8.4672, max_relative = 1e-15);
        assert!(inertia_bounds(0.0).is_err());
    }

    #[test]
    fn damping_examples() {
        assert_eq!(
            damping_bounds(&[load(1.0, 1.0)], (0.5, 3.0), (1.0, 2.0)).unwrap(),
            (1.0, 2.0)
        );
        let one = damping_bounds(&[load(1.3, 1.04)], (1.0, 2.0), (0.5, 2.0)).unwrap();
        let two = damping_bounds(&[load(1.3, 1.04); 2], (1.0, 2.0), (0.5, 2.0)).unwrap();
        assert_relative_eq!(two.0, 2.0 * one.0, max_relative = 1e-15);
        assert_relative_eq!(two.1, 2.0 * one.1, max_relative = 1e-15);
        let (lo, hi) = damping_bounds(&[load(1.5, 0.97)], (1.0, 2.0), (1.0, 2.0)).unwrap();
        assert_relative_eq!(lo, 1.5 * 0.97 * 0.97, max_relative = 1e-15);
        assert_relative_eq!(hi, 1.5 * 0.97 * 2.0, max_relative = 1e-15);
        assert!(damping_bounds(&[], (2.0, 1.0), (1.0, 2.0)).is_err());
    }

    #[test]
    fn defaults_cover_every_kind() {
        for kind in ["hydro", "thermal", "grid_forming", "grid_following"] {
            let b = default_bounds(kind).unwrap();
            b.require(param_names(kind).unwrap()).unwrap();
        }
        assert_eq!(
            default_bounds("hydro").unwrap().get("t_r"),
            Some((2.5, 25.0))
        );
    }
}
