//! Unit-level transfer functions: converter coupling, grid-forming and
//! grid-following control loops, hydro and thermal governors, load damping.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{MimoTF, Polynomial, RationalTF, CANCEL_TOL};

/// Per-unit system bases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseQuantities {
    /// MVA
    pub s_b: f64,
    /// Hz
    pub f_b: f64,
    /// kV, one entry per voltage level
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub v_b: Vec<f64>,
}

impl BaseQuantities {
    pub fn new(s_b: f64, f_b: f64) -> Self {
        Self {
            s_b,
            f_b,
            v_b: Vec::new(),
        }
    }

    pub fn omega_b(&self) -> f64 {
        2.0 * PI * self.f_b
    }

    pub fn validate(&self) -> Result<()> {
        positive("s_b", self.s_b)?;
        positive("f_b", self.f_b)?;
        for v in &self.v_b {
            positive("v_b", *v)?;
        }
        Ok(())
    }
}

impl Default for BaseQuantities {
    fn default() -> Self {
        Self::new(100.0, 50.0)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be non-negative and finite, got {v}"),
        ))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, "must be finite"))
    }
}

/// Load-flow quantities at the converter terminal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatingPointInput", into = "OperatingPointInput")]
pub struct OperatingPoint {
    pub p0: f64,
    pub q0: f64,
    pub e_g0: f64,
    pub delta0: f64,
    pub v_g0: f64,
    pub theta0: f64,
    pub e_gd0: f64,
    pub e_gq0: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatingPointInput {
    p0: f64,
    q0: f64,
    e_g0: f64,
    delta0: f64,
    v_g0: f64,
    #[serde(default)]
    theta0: f64,
}

impl TryFrom<OperatingPointInput> for OperatingPoint {
    type Error = Error;
    fn try_from(o: OperatingPointInput) -> Result<Self> {
        OperatingPoint::new(o.p0, o.q0, o.e_g0, o.delta0, o.v_g0, o.theta0)
    }
}

impl From<OperatingPoint> for OperatingPointInput {
    fn from(o: OperatingPoint) -> Self {
        Self {
            p0: o.p0,
            q0: o.q0,
            e_g0: o.e_g0,
            delta0: o.delta0,
            v_g0: o.v_g0,
            theta0: o.theta0,
        }
    }
}

impl OperatingPoint {
    pub fn new(p0: f64, q0: f64, e_g0: f64, delta0: f64, v_g0: f64, theta0: f64) -> Result<Self> {
        for (n, v) in [
            ("p0", p0),
            ("q0", q0),
            ("e_g0", e_g0),
            ("delta0", delta0),
            ("theta0", theta0),
        ] {
            finite(n, v)?;
        }
        positive("v_g0", v_g0)?;
        Ok(Self {
            p0,
            q0,
            e_g0,
            delta0,
            v_g0,
            theta0,
            e_gd0: e_g0 * delta0.cos(),
            e_gq0: e_g0 * delta0.sin(),
        })
    }
}

/// Coupling transformer / filter impedance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingParams {
    pub l_c: f64,
    pub r_c: f64,
    #[serde(default = "one")]
    pub omega_g: f64,
}

fn one() -> f64 {
    1.0
}

impl CouplingParams {
    pub fn new(l_c: f64, r_c: f64) -> Self {
        Self {
            l_c,
            r_c,
            omega_g: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("l_c", self.l_c)?;
        nonnegative("r_c", self.r_c)?;
        positive("omega_g", self.omega_g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFormingParams {
    pub m_p: f64,
    pub omega_c: f64,
    pub t1: f64,
    pub t2: f64,
}

impl GridFormingParams {
    pub fn validate(&self) -> Result<()> {
        positive("m_p", self.m_p)?;
        positive("omega_c", self.omega_c)?;
        positive("t1", self.t1)?;
        positive("t2", self.t2)?;
        if self.t1 <= self.t2 {
            log::debug!("lead-lag filter has t1 = {} <= t2 = {}", self.t1, self.t2);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFollowingParams {
    pub k_p_pll: f64,
    pub k_i_pll: f64,
    pub zeta: f64,
    pub omega_lpf: f64,
    pub k_p_c: f64,
    pub k_i_c: f64,
    pub r_p: f64,
}

impl GridFollowingParams {
    pub fn validate(&self) -> Result<()> {
        nonnegative("k_p_pll", self.k_p_pll)?;
        nonnegative("k_i_pll", self.k_i_pll)?;
        nonnegative("k_p_c", self.k_p_c)?;
        nonnegative("k_i_c", self.k_i_c)?;
        if !(self.zeta > 0.0 && self.zeta <= 2.0) {
            return Err(Error::invalid(
                "zeta",
                format!("must lie in (0, 2], got {}", self.zeta),
            ));
        }
        positive("omega_lpf", self.omega_lpf)?;
        positive("r_p", self.r_p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroParams {
    pub k_g: f64,
    pub t_g: f64,
    pub t_r: f64,
    pub r_t: f64,
    pub r: f64,
    pub t_w: f64,
    #[serde(default = "one")]
    pub k: f64,
    pub p0: f64,
}

impl HydroParams {
    pub fn validate(&self) -> Result<()> {
        finite("k_g", self.k_g)?;
        positive("t_g", self.t_g)?;
        positive("t_r", self.t_r)?;
        nonnegative("r_t", self.r_t)?;
        positive("r", self.r)?;
        positive("t_w", self.t_w)?;
        finite("k", self.k)?;
        finite("p0", self.p0)
    }

    /// `α₁ = α₂ = k·P₀`
    pub fn alpha(&self) -> f64 {
        self.k * self.p0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalParams {
    pub k_g: f64,
    pub t_g1: f64,
    pub t_g2: f64,
    pub t_rh: f64,
    pub t_ch: f64,
    pub f_hp: f64,
    pub f_lp: f64,
    pub r: f64,
    #[serde(default = "one")]
    pub k: f64,
    pub p0: f64,
}

impl ThermalParams {
    pub fn validate(&self) -> Result<()> {
        finite("k_g", self.k_g)?;
        positive("t_g1", self.t_g1)?;
        positive("t_g2", self.t_g2)?;
        positive("t_rh", self.t_rh)?;
        positive("t_ch", self.t_ch)?;
        nonnegative("f_hp", self.f_hp)?;
        nonnegative("f_lp", self.f_lp)?;
        if (self.f_hp + self.f_lp - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "f_lp",
                format!("f_hp + f_lp must equal 1, got {}", self.f_hp + self.f_lp),
            ));
        }
        positive("r", self.r)?;
        finite("k", self.k)?;
        finite("p0", self.p0)
    }

    /// `β₃ = k·P₀`
    pub fn beta3(&self) -> f64 {
        self.k * self.p0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadModel {
    pub p_l0: f64,
    pub k_pv: f64,
    pub k_pf: f64,
    #[serde(default = "one")]
    pub v_n: f64,
    #[serde(default = "one")]
    pub v_g0: f64,
}

/// Any unit the assembly knows how to reduce to transfer functions.
#[derive(Debug, Clone, PartialEq)]
pub enum UnitModel {
    Hydro(HydroParams),
    Thermal(ThermalParams),
    GridForming {
        params: GridFormingParams,
        op: OperatingPoint,
        coupling: CouplingParams,
    },
    GridFollowing {
        params: GridFollowingParams,
        op: OperatingPoint,
        coupling: CouplingParams,
    },
}

pub const REG_INPUT: &str = "u";
pub const GF_INPUTS: [&str; 3] = ["dPref", "domegaref", "domega_g"];
pub const GFL_INPUTS: [&str; 3] = ["dPref", "dQref", "domega_g"];

impl UnitModel {
    pub fn kind(&self) -> &'static str {
        match self {
            UnitModel::Hydro(_) => "hydro",
            UnitModel::Thermal(_) => "thermal",
            UnitModel::GridForming { .. } => "grid_forming",
            UnitModel::GridFollowing { .. } => "grid_following",
        }
    }

    /// Permanent droop for governor-driven units.
    pub fn droop(&self) -> Option<f64> {
        match self {
            UnitModel::Hydro(h) => Some(h.r),
            UnitModel::Thermal(t) => Some(t.r),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            UnitModel::Hydro(h) => h.validate(),
            UnitModel::Thermal(t) => t.validate(),
            UnitModel::GridForming {
                params, coupling, ..
            } => {
                params.validate()?;
                coupling.validate()
            }
            UnitModel::GridFollowing {
                params, coupling, ..
            } => {
                params.validate()?;
                coupling.validate()
            }
        }
    }

    /// Single-output model `dP` over the unit's input channels: `u` for
    /// governor units, the set-point/frequency triple for converters.
    pub fn transfer(&self, base: &BaseQuantities) -> Result<MimoTF> {
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        match self {
            UnitModel::Hydro(h) => siso(hydro_tf(h)?),
            UnitModel::Thermal(t) => siso(thermal_tf(t)?),
            UnitModel::GridForming {
                params,
                op,
                coupling,
            } => {
                let power = coupling_power_tfs(op, coupling, base)?;
                let g = grid_forming_tfs(params, power.entry(0, 0), base)?;
                MimoTF::new(g.entries().to_vec(), names(&GF_INPUTS), vec!["dP".into()])
            }
            UnitModel::GridFollowing {
                params,
                op,
                coupling,
            } => {
                let g = grid_following_tfs(params, op, coupling, base)?;
                MimoTF::new(g.entries().to_vec(), names(&GFL_INPUTS), vec!["dP".into()])
            }
        }
    }
}

fn siso(g: RationalTF) -> Result<MimoTF> {
    MimoTF::new(vec![vec![g]], vec![REG_INPUT.into()], vec!["dP".into()])
}

/// `Z(s) = L_c/ω_b·s + R_c` and `X = ω_g·L_c`.
fn impedance(cp: &CouplingParams, base: &BaseQuantities) -> (Polynomial, f64) {
    (
        Polynomial::linear(cp.l_c / base.omega_b(), cp.r_c),
        cp.omega_g * cp.l_c,
    )
}

/// `Z² + X²`, shared by every coupling entry.
fn coupling_den(cp: &CouplingParams, base: &BaseQuantities) -> Polynomial {
    let (z, x) = impedance(cp, base);
    &(&z * &z) + &Polynomial::constant(x * x)
}

/// Numerators of `G_{i_d,E}` and `G_{i_q,E}`.
fn current_e_nums(
    op: &OperatingPoint,
    cp: &CouplingParams,
    base: &BaseQuantities,
) -> (Polynomial, Polynomial) {
    let (z, x) = impedance(cp, base);
    let (sd, cd) = op.delta0.sin_cos();
    let md = &z.scale(cd) + &Polynomial::constant(x * sd);
    let mq = &z.scale(sd) - &Polynomial::constant(x * cd);
    (md, mq)
}

/// Current deviations `(Δi_gd, Δi_gq)` in response to `(Δδ, ΔE_g)`.
pub fn coupling_current_tfs(
    op: &OperatingPoint,
    cp: &CouplingParams,
    base: &BaseQuantities,
) -> Result<MimoTF> {
    cp.validate()?;
    let (z, x) = impedance(cp, base);
    let (sd, cd) = op.delta0.sin_cos();
    let den = coupling_den(cp, base);
    let id_delta = (&z.scale(-sd) + &Polynomial::constant(x * cd)).scale(op.e_g0);
    let iq_delta = (&z.scale(cd) + &Polynomial::constant(x * sd)).scale(op.e_g0);
    let (id_e, iq_e) = current_e_nums(op, cp, base);
    let tf = |n: Polynomial| RationalTF::new(n, den.clone());
    MimoTF::new(
        vec![
            vec![tf(id_delta)?, tf(id_e)?],
            vec![tf(iq_delta)?, tf(iq_e)?],
        ],
        vec!["delta".into(), "E".into()],
        vec!["id".into(), "iq".into()],
    )
}

/// Active/reactive power deviations `(ΔP, ΔQ)` in response to `(Δδ, ΔE_g)`.
pub fn coupling_power_tfs(
    op: &OperatingPoint,
    cp: &CouplingParams,
    base: &BaseQuantities,
) -> Result<MimoTF> {
    cp.validate()?;
    if op.e_g0 == 0.0 {
        return Err(Error::DivisionByZero("e_g0"));
    }
    let (lc, rc, wg, wb) = (cp.l_c, cp.r_c, cp.omega_g, base.omega_b());
    let (p0, q0, e) = (op.p0, op.q0, op.e_g0);
    let d0 = rc * rc + wg * wg * lc * lc;
    let d1 = 2.0 * rc * lc / wb;
    let d2 = lc * lc / (wb * wb);
    let den = Polynomial::new(vec![d0, d1, d2]);

    let p_delta = [q0 * d0 + e * e * wg * lc, q0 * d1, q0 * d2];
    let q_delta = [
        e * e * rc - p0 * d0,
        e * e * lc / wb - 2.0 * p0 * lc * rc / wb,
        -p0 * d2,
    ];
    let p_e = [p0 / e * d0 + e * rc, p0 / e * d1 + e * lc / wb, p0 / e * d2];
    let q_e = [q0 / e * d0 - e * wg * lc, q0 / e * d1, q0 / e * d2];

    let tf = |c: [f64; 3]| RationalTF::new(Polynomial::new(c.to_vec()), den.clone());
    MimoTF::new(
        vec![vec![tf(p_delta)?, tf(p_e)?], vec![tf(q_delta)?, tf(q_e)?]],
        vec!["delta".into(), "E".into()],
        vec!["P".into(), "Q".into()],
    )
}

/// Closed-loop grid-forming model `ΔP_r` over `(ΔP_r*, Δω_r*, Δω_g)`.
pub fn grid_forming_tfs(
    gf: &GridFormingParams,
    t_p_delta: &RationalTF,
    base: &BaseQuantities,
) -> Result<MimoTF> {
    gf.validate()?;
    let wb = base.omega_b();
    let (nt, dt) = (t_p_delta.num(), t_p_delta.den());
    let lag = Polynomial::linear(gf.t1, 1.0);
    let lead = Polynomial::linear(gf.t2, 1.0);
    let filt = Polynomial::linear(1.0, gf.omega_c);
    // 1 + m_p G1 T G2 over the common denominator s(s+ωc)·D_T·(T1 s+1)
    let open = &(&(&Polynomial::s() * &filt) * dt) * &lag;
    let loop_ = (nt * &lead).scale(gf.m_p * wb * gf.omega_c);
    let den = &open + &loop_;
    if den.max_abs() <= 1e-13 * open.max_abs().max(loop_.max_abs()) {
        return Err(Error::DegenerateLoop);
    }
    let base_num = nt * &lag;
    let p_pref = base_num.scale(gf.m_p * wb * gf.omega_c);
    let p_wref = base_num.scale(wb * gf.omega_c);
    let p_wg = (&base_num * &filt).scale(-wb);
    let tf = |n: Polynomial| -> Result<RationalTF> {
        Ok(RationalTF::new(n, den.clone())?.minreal(CANCEL_TOL))
    };
    MimoTF::new(
        vec![vec![tf(p_pref)?, tf(p_wref)?, tf(p_wg)?]],
        GF_INPUTS.iter().map(|s| s.to_string()).collect(),
        vec!["dP".into()],
    )
}

/// `s² + K_p V s + K_i V`, the PLL characteristic polynomial.
fn pll_den(gfl: &GridFollowingParams, v_g0: f64) -> Polynomial {
    Polynomial::new(vec![gfl.k_i_pll * v_g0, gfl.k_p_pll * v_g0, 1.0])
}

/// Second-order low-pass filter numerator constant and denominator.
fn lpf(gfl: &GridFollowingParams) -> (f64, Polynomial) {
    let w = gfl.omega_lpf;
    (w * w, Polynomial::new(vec![w * w, 2.0 * gfl.zeta * w, 1.0]))
}

/// PLL angle and filtered-frequency responses to grid frequency:
/// `(G_{δ,ω_g}, G_{ω_pll,ω_g})`.
pub fn pll_tfs(gfl: &GridFollowingParams, v_g0: f64) -> Result<(RationalTF, RationalTF)> {
    gfl.validate()?;
    positive("v_g0", v_g0)?;
    let dp = pll_den(gfl, v_g0);
    let g_delta = RationalTF::new(Polynomial::s(), dp.clone())?;
    let (wl2, dl) = lpf(gfl);
    let pi_num = Polynomial::linear(gfl.k_p_pll * v_g0, gfl.k_i_pll * v_g0);
    let g_omega = RationalTF::new(pi_num.scale(wl2), &dp * &dl)?;
    Ok((g_delta, g_omega))
}

/// Closed-loop grid-following model `ΔP_z` over `(ΔP_z*, ΔQ_z*, Δω_g)`.
pub fn grid_following_tfs(
    gfl: &GridFollowingParams,
    op: &OperatingPoint,
    cp: &CouplingParams,
    base: &BaseQuantities,
) -> Result<MimoTF> {
    gfl.validate()?;
    cp.validate()?;
    if op.e_gd0 == 0.0 {
        return Err(Error::DivisionByZero("e_gd0"));
    }
    let dc = coupling_den(cp, base);
    let (md, mq) = current_e_nums(op, cp, base);
    let pi_c = Polynomial::linear(gfl.k_p_c, gfl.k_i_c);
    let s = Polynomial::s();
    let s_dc = &s * &dc;

    let dcl_d = &s_dc + &(&pi_c * &md);
    let dcl_q = &s_dc - &(&pi_c * &mq);
    if dcl_d.is_zero() || dcl_q.is_zero() {
        return Err(Error::DegenerateLoop);
    }
    let g_pp = RationalTF::new(&pi_c * &md, dcl_d.clone())?.minreal(CANCEL_TOL);
    let g_qq = if op.e_gq0 == 0.0 {
        RationalTF::zero()
    } else {
        RationalTF::new((&pi_c * &mq).scale(op.e_gq0 / op.e_gd0), dcl_q)?.minreal(CANCEL_TOL)
    };

    // (G_idδ e_gd0 + G_iqδ e_gq0) reduces to E_g0²·X / D_c
    let x = cp.omega_g * cp.l_c;
    let (sd, cd) = op.delta0.sin_cos();
    let (z, _) = impedance(cp, base);
    let n_id = &z.scale(-sd) + &Polynomial::constant(x * cd);
    let n_iq = &z.scale(cd) + &Polynomial::constant(x * sd);
    let n_delta = (&n_id.scale(op.e_gd0) + &n_iq.scale(op.e_gq0)).scale(op.e_g0);

    let v = op.v_g0;
    let dp = pll_den(gfl, v);
    let (wl2, dl) = lpf(gfl);
    let pi_pll = Polynomial::linear(gfl.k_p_pll * v, gfl.k_i_pll * v);
    let angle_path = &(&(&n_delta * &s) * &s) * &dl;
    let droop_path = (&(&pi_c * &md) * &pi_pll).scale(wl2 / gfl.r_p);
    let den = &(&dcl_d * &dp) * &dl;
    let g_pw = RationalTF::new(&angle_path - &droop_path, den)?.minreal(CANCEL_TOL);

    MimoTF::new(
        vec![vec![g_pp, g_qq, g_pw]],
        GFL_INPUTS.iter().map(|s| s.to_string()).collect(),
        vec!["dP".into()],
    )
}

/// Hydro governor and turbine, input `ΔP* − Δω/R`, output `ΔP`.
pub fn hydro_tf(hp: &HydroParams) -> Result<RationalTF> {
    hp.validate()?;
    let a = hp.alpha();
    let governor = RationalTF::first_order(hp.k_g, hp.t_g);
    let transient = RationalTF::lead_lag(hp.t_r, hp.r_t / hp.r * hp.t_r);
    let turbine = RationalTF::lead_lag(-a * hp.t_w, a * hp.t_w / 2.0);
    Ok(&(&governor * &transient) * &turbine)
}

/// Steam governor with reheat turbine.
pub fn thermal_tf(tp: &ThermalParams) -> Result<RationalTF> {
    tp.validate()?;
    let governor = RationalTF::lead_lag(tp.t_g2, tp.t_g1).scale(tp.k_g);
    let reheat = RationalTF::lead_lag(tp.f_hp * tp.t_rh, tp.t_rh);
    let chest = RationalTF::first_order(tp.beta3(), tp.t_ch);
    Ok(&(&governor * &reheat) * &chest)
}

/// Frequency sensitivity `K = P_l0 (V_g0/V_n)^k_pv k_pf` of a static load.
pub fn load_damping_coeff(lm: &LoadModel) -> Result<f64> {
    positive("v_n", lm.v_n)?;
    nonnegative("p_l0", lm.p_l0)?;
    positive("v_g0", lm.v_g0)?;
    Ok(lm.p_l0 * (lm.v_g0 / lm.v_n).powf(lm.k_pv) * lm.k_pf)
}
