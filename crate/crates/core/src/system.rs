//! Multi-area swing dynamics with tie-lines and embedded unit models.

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{lsim_ss, mimo_to_ss, LinearSystem, SimTrace, StateSpace, Trace};
use crate::plant::{BaseQuantities, UnitModel};

/// A generating unit placed in an area, with its rating for base conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitSpec {
    pub id: String,
    pub model: UnitModel,
    /// MVA; unit quantities are on this base.
    pub rating_mva: f64,
}

impl UnitSpec {
    pub fn scale(&self, base: &BaseQuantities) -> f64 {
        self.rating_mva / base.s_b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaSpec {
    pub id: String,
    /// s, on the system base
    pub h: f64,
    /// pu/pu, on the system base
    pub d: f64,
    pub units: Vec<UnitSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TieLine {
    pub from: String,
    pub to: String,
    pub t_sync: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub time: f64,
    pub channel: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    pub dt: f64,
    #[serde(default)]
    pub events: Vec<Event>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(
                "dt",
                format!("must be positive, got {}", self.dt),
            ));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(Error::invalid(
                "duration",
                format!("must be at least dt, got {}", self.duration),
            ));
        }
        for e in &self.events {
            if !(0.0..=self.duration).contains(&e.time) {
                return Err(Error::invalid(
                    "events.time",
                    format!(
                        "event on `{}` at {} s lies outside [0, {}]",
                        e.channel, e.time, self.duration
                    ),
                ));
            }
            if !e.value.is_finite() {
                return Err(Error::invalid(
                    "events.value",
                    format!("non-finite step on `{}`", e.channel),
                ));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration / self.dt).round() as usize + 1
    }
}

/// Assembled continuous-time system with named channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub ss: StateSpace,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl LinearSystem for SystemModel {
    fn input_names(&self) -> Vec<String> {
        self.inputs.clone()
    }
    fn output_names(&self) -> Vec<String> {
        self.outputs.clone()
    }
    fn state_space(&self) -> Result<StateSpace> {
        Ok(self.ss.clone())
    }
}

impl SystemModel {
    pub fn input_index(&self, name: &str) -> Result<usize> {
        self.inputs
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn output_index(&self, name: &str) -> Result<usize> {
        self.outputs
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    /// Equilibrium outputs under constant inputs. Conserved quantities of
    /// the free dynamics (loop tie angles) are held at their initial zero.
    pub fn steady_state(&self, u: &IndexMap<String, f64>) -> Result<IndexMap<String, f64>> {
        let m = self.inputs.len();
        let mut uv = DVector::zeros(m);
        for (name, v) in u {
            uv[self.input_index(name)?] = *v;
        }
        let n = self.ss.n_states();
        let x = if n == 0 {
            DVector::zeros(0)
        } else {
            let a = &self.ss.a;
            let rhs = -(&self.ss.b * &uv);
            let k = a
                .clone()
                .complex_eigenvalues()
                .iter()
                .filter(|l| l.norm() <= CONSERVED_RATE)
                .count();
            let v = null_basis(a, k);
            let w = null_basis(&a.transpose(), k);
            let mut kkt = DMatrix::zeros(n + k, n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(a);
            kkt.view_mut((0, n), (n, k)).copy_from(&v);
            kkt.view_mut((n, 0), (k, n)).copy_from(&w.transpose());
            let (r, c) = equilibrate(&kkt);
            for i in 0..n + k {
                kkt.row_mut(i).scale_mut(r[i]);
            }
            for j in 0..n + k {
                kkt.column_mut(j).scale_mut(c[j]);
            }
            let mut b = DVector::zeros(n + k);
            b.rows_mut(0, n).copy_from(&rhs);
            let z = kkt
                .full_piv_lu()
                .solve(&b.component_mul(&r))
                .ok_or_else(|| Error::Solver("equilibrium equations are singular".into()))?
                .component_mul(&c);
            let x = z.rows(0, n).into_owned();
            let ax = a * &x;
            let scale = a.abs() * x.abs() + rhs.abs();
            let bad = (0..n).any(|i| (ax[i] - rhs[i]).abs() > 1e-8 * scale[i] + 1e-14);
            if bad {
                return Err(Error::Solver(
                    "system has no equilibrium for these inputs".into(),
                ));
            }
            x
        };
        let y = &self.ss.c * x + &self.ss.d * uv;
        Ok(self
            .outputs
            .iter()
            .cloned()
            .zip(y.iter().copied())
            .collect())
    }
}

/// Modes slower than this (rad/s) are treated as conserved quantities.
const CONSERVED_RATE: f64 = 1e-6;

/// Orthonormal basis for the `k`-dimensional near-null space of `m`, by
/// shifted subspace inverse iteration.
fn null_basis(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = m.nrows();
    if k == 0 {
        return DMatrix::zeros(n, 0);
    }
    let shifted = m + DMatrix::identity(n, n) * (CONSERVED_RATE * 1e-3);
    let lu = shifted.full_piv_lu();
    let mut q = DMatrix::from_fn(n, k, |i, j| ((i * 7 + j * 13) % 11) as f64 + 1.0);
    for _ in 0..6 {
        let y = lu.solve(&q).unwrap_or(q);
        q = y.qr().q();
    }
    q
}

/// Row and column scalings that bring every row and column of `a` to unit
/// max-norm, so that rank decisions are insensitive to unit choices.
fn equilibrate(a: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = a.nrows();
    let mut r = DVector::from_element(n, 1.0);
    let mut c = DVector::from_element(a.ncols(), 1.0);
    let mut m = a.clone();
    for _ in 0..20 {
        for i in 0..n {
            let v = m.row(i).amax();
            if v > 0.0 {
                let f = 1.0 / v.sqrt();
                m.row_mut(i).scale_mut(f);
                r[i] *= f;
            }
        }
        for j in 0..m.ncols() {
            let v = m.column(j).amax();
            if v > 0.0 {
                let f = 1.0 / v.sqrt();
                m.column_mut(j).scale_mut(f);
                c[j] *= f;
            }
        }
    }
    (r, c)
}

/// Linearized synchronizing coefficient of a line between two buses.
pub fn tie_line_coeff(v1: f64, v2: f64, x12: f64, delta1_0: f64, delta2_0: f64) -> Result<f64> {
    if !(x12 > 0.0) {
        return Err(Error::invalid(
            "x12",
            format!("must be positive, got {x12}"),
        ));
    }
    Ok(v1 * v2 / x12 * (delta1_0 - delta2_0).cos())
}

/// A unit realization wired into an area.
#[derive(Debug, Clone)]
pub(crate) struct UnitBlock {
    pub id: String,
    pub area: usize,
    pub ss: StateSpace,
    pub scale: f64,
    pub kind: UnitKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum UnitKind {
    Governor { droop: f64 },
    GridForming,
    GridFollowing,
}

impl UnitBlock {
    pub fn new(unit: &UnitSpec, area: usize, base: &BaseQuantities) -> Result<Self> {
        unit.model.validate()?;
        if !(unit.rating_mva > 0.0) {
            return Err(Error::invalid(
                format!("units.{}.rating_mva", unit.id),
                "must be positive",
            ));
        }
        let kind = match &unit.model {
            UnitModel::Hydro(p) => UnitKind::Governor { droop: p.r },
            UnitModel::Thermal(p) => UnitKind::Governor { droop: p.r },
            UnitModel::GridForming { .. } => UnitKind::GridForming,
            UnitModel::GridFollowing { .. } => UnitKind::GridFollowing,
        };
        Ok(Self {
            id: unit.id.clone(),
            area,
            ss: mimo_to_ss(&unit.model.transfer(base)?)?,
            scale: unit.scale(base),
            kind,
        })
    }

    /// Set-point channels in the order the realization expects them
    /// (frequency input excluded).
    fn setpoints(&self) -> Vec<String> {
        let id = &self.id;
        match self.kind {
            UnitKind::Governor { .. } => vec![format!("dPref_{id}")],
            UnitKind::GridForming => vec![format!("dPref_{id}"), format!("domegaref_{id}")],
            UnitKind::GridFollowing => vec![format!("dPref_{id}"), format!("dQref_{id}")],
        }
    }
}

/// Tie-line with endpoints resolved to area indices.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TieBlock {
    pub from: usize,
    pub to: usize,
    pub t_sync: f64,
}

pub(crate) fn resolve_ties(areas: &[AreaSpec], ties: &[TieLine]) -> Result<Vec<TieBlock>> {
    let find = |id: &str| {
        areas
            .iter()
            .position(|a| a.id == id)
            .ok_or_else(|| Error::UnknownArea(id.to_string()))
    };
    ties.iter()
        .map(|t| {
            let (from, to) = (find(&t.from)?, find(&t.to)?);
            if from == to {
                return Err(Error::invalid(
                    "ties",
                    format!("tie `{}` connects an area to itself", t.from),
                ));
            }
            if !(t.t_sync > 0.0 && t.t_sync.is_finite()) {
                return Err(Error::invalid(
                    format!("ties.{}_{}.t_sync", t.from, t.to),
                    format!("must be positive, got {}", t.t_sync),
                ));
            }
            Ok(TieBlock {
                from,
                to,
                t_sync: t.t_sync,
            })
        })
        .collect()
}

pub(crate) fn unit_blocks(areas: &[AreaSpec], base: &BaseQuantities) -> Result<Vec<UnitBlock>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, a) in areas.iter().enumerate() {
        for u in &a.units {
            if !seen.insert(u.id.clone()) {
                return Err(Error::invalid(
                    "units.id",
                    format!("duplicate unit id `{}`", u.id),
                ));
            }
            out.push(UnitBlock::new(u, i, base)?);
        }
    }
    Ok(out)
}

fn check_area(a: &AreaSpec) -> Result<()> {
    if !(a.h > 0.0 && a.h.is_finite()) {
        return Err(Error::invalid(
            format!("areas.{}.h", a.id),
            format!("must be positive, got {}", a.h),
        ));
    }
    if !(a.d >= 0.0 && a.d.is_finite()) {
        return Err(Error::invalid(
            format!("areas.{}.d", a.id),
            format!("must be non-negative, got {}", a.d),
        ));
    }
    Ok(())
}

/// Builds the composite state space. `hd` gives `(H, D)` per area, `port`
/// adds an external tie-power input per area.
pub(crate) fn compose(
    area_ids: &[String],
    hd: &[(f64, f64)],
    units: &[UnitBlock],
    ties: &[TieBlock],
    omega_b: f64,
    port: bool,
) -> Result<SystemModel> {
    let na = area_ids.len();
    let nt = ties.len();
    let nx = na + nt + units.iter().map(|u| u.ss.n_states()).sum::<usize>();

    let mut inputs: Vec<String> = area_ids.iter().map(|a| format!("dPL_{a}")).collect();
    let mut sp_offset = Vec::with_capacity(units.len());
    for u in units {
        sp_offset.push(inputs.len());
        inputs.extend(u.setpoints());
    }
    let port_offset = inputs.len();
    if port {
        inputs.extend(area_ids.iter().map(|a| format!("dPtie_{a}")));
    }
    let mut outputs: Vec<String> = area_ids.iter().map(|a| format!("domega_{a}")).collect();
    for u in units {
        outputs.push(format!("dP_{}", u.id));
        if matches!(u.kind, UnitKind::Governor { .. }) {
            outputs.push(format!("u_{}", u.id));
        }
    }
    for t in ties {
        outputs.push(format!("dPtie_{}_{}", area_ids[t.from], area_ids[t.to]));
    }
    let (nu, ny) = (inputs.len(), outputs.len());

    let mut a = DMatrix::zeros(nx, nx);
    let mut b = DMatrix::zeros(nx, nu);
    let mut c = DMatrix::zeros(ny, nx);
    let mut d = DMatrix::zeros(ny, nu);

    // swing rows: 2H ω' = Σ P_units − D ω − P_L − P_tie
    for (i, &(h, damp)) in hd.iter().enumerate() {
        let k = 1.0 / (2.0 * h);
        a[(i, i)] = -damp * k;
        b[(i, i)] = -k;
        if port {
            b[(i, port_offset + i)] = -k;
        }
    }
    for (j, t) in ties.iter().enumerate() {
        let th = na + j;
        a[(th, t.from)] = omega_b;
        a[(th, t.to)] = -omega_b;
        a[(t.from, th)] -= t.t_sync / (2.0 * hd[t.from].0);
        a[(t.to, th)] += t.t_sync / (2.0 * hd[t.to].0);
    }

    let mut xo = na + nt;
    let mut yo = na;
    for (ui, u) in units.iter().enumerate() {
        let ns = u.ss.n_states();
        let w = u.area;
        let sp = sp_offset[ui];
        // unit input v = Sx·x + Su·u
        let mut sx = DMatrix::<f64>::zeros(u.ss.n_inputs(), nx);
        let mut su = DMatrix::<f64>::zeros(u.ss.n_inputs(), nu);
        match u.kind {
            UnitKind::Governor { droop } => {
                su[(0, sp)] = 1.0;
                sx[(0, w)] = -1.0 / droop;
            }
            UnitKind::GridForming | UnitKind::GridFollowing => {
                su[(0, sp)] = 1.0;
                su[(1, sp + 1)] = 1.0;
                sx[(2, w)] = 1.0;
            }
        }
        let bu = &u.ss.b;
        a.view_mut((xo, xo), (ns, ns)).copy_from(&u.ss.a);
        let bx = bu * &sx;
        let bus = bu * &su;
        let mut av = a.view_mut((xo, 0), (ns, nx));
        av += &bx;
        let mut bv = b.view_mut((xo, 0), (ns, nu));
        bv += &bus;

        // unit power y = Cu xu + Du v, in unit base
        let mut cy = DMatrix::<f64>::zeros(1, nx);
        cy.view_mut((0, xo), (1, ns)).copy_from(&u.ss.c);
        cy += &u.ss.d * &sx;
        let dy = &u.ss.d * &su;
        let k = u.scale / (2.0 * hd[w].0);
        for j in 0..nx {
            a[(w, j)] += k * cy[(0, j)];
        }
        for j in 0..nu {
            b[(w, j)] += k * dy[(0, j)];
        }
        c.row_mut(yo).copy_from(&(&cy * u.scale).row(0));
        d.row_mut(yo).copy_from(&(&dy * u.scale).row(0));
        yo += 1;
        if matches!(u.kind, UnitKind::Governor { .. }) {
            c.row_mut(yo).copy_from(&sx.row(0));
            d.row_mut(yo).copy_from(&su.row(0));
            yo += 1;
        }
        xo += ns;
    }
    for i in 0..na {
        c[(i, i)] = 1.0;
    }
    for (j, t) in ties.iter().enumerate() {
        c[(yo + j, na + j)] = t.t_sync;
    }

    Ok(SystemModel {
        ss: StateSpace::new(a, b, c, d)?,
        inputs,
        outputs,
    })
}

/// Single area with its tie-power port `dPtie_<area>` exposed as an input.
pub fn assemble_area(spec: &AreaSpec, base: &BaseQuantities) -> Result<SystemModel> {
    base.validate()?;
    check_area(spec)?;
    let units = unit_blocks(std::slice::from_ref(spec), base)?;
    compose(
        std::slice::from_ref(&spec.id),
        &[(spec.h, spec.d)],
        &units,
        &[],
        base.omega_b(),
        true,
    )
}

pub fn assemble_system(
    areas: &[AreaSpec],
    ties: &[TieLine],
    base: &BaseQuantities,
) -> Result<SystemModel> {
    base.validate()?;
    for a in areas {
        check_area(a)?;
    }
    let mut ids = std::collections::HashSet::new();
    for a in areas {
        if !ids.insert(&a.id) {
            return Err(Error::invalid(
                "areas.id",
                format!("duplicate area id `{}`", a.id),
            ));
        }
    }
    let tb = resolve_ties(areas, ties)?;
    let units = unit_blocks(areas, base)?;
    let ids: Vec<String> = areas.iter().map(|a| a.id.clone()).collect();
    let hd: Vec<(f64, f64)> = areas.iter().map(|a| (a.h, a.d)).collect();
    compose(&ids, &hd, &units, &tb, base.omega_b(), false)
}

/// Piecewise-constant input columns for a scenario, in the model's input order.
pub fn scenario_inputs(sys: &SystemModel, sc: &Scenario) -> Result<Vec<Vec<f64>>> {
    sc.validate()?;
    let n = sc.n_samples();
    let mut cols = vec![vec![0.0; n]; sys.inputs.len()];
    for e in &sc.events {
        let j = sys.input_index(&e.channel)?;
        let k0 = (e.time / sc.dt - 1e-9).ceil().max(0.0) as usize;
        for v in cols[j].iter_mut().skip(k0) {
            *v += e.value;
        }
    }
    Ok(cols)
}

/// Runs a scenario from rest; the trace holds every output followed by the
/// input channels.
pub fn simulate_scenario(sys: &SystemModel, sc: &Scenario) -> Result<SimTrace> {
    let cols = scenario_inputs(sys, sc)?;
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let ys = lsim_ss(&sys.ss, sc.dt, &refs)?;
    let mut tr = Trace::uniform(sc.n_samples(), sc.dt);
    for (name, y) in sys.outputs.iter().zip(ys) {
        tr.insert(name.clone(), y)?;
    }
    for (name, u) in sys.inputs.iter().zip(cols) {
        tr.insert(name.clone(), u)?;
    }
    Ok(tr)
}
