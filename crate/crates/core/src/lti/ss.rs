use nalgebra::DMatrix;

use super::balance::balance_in_place;
use super::tf::{MimoTF, RationalTF};
use crate::error::{Error, Result};

/// `x' = A x + B u`, `y = C x + D u` (or the sampled counterpart when `dt` is set).
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// Sampling period for a discrete-time system.
    pub dt: Option<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::DimensionMismatch(what.to_string()))
            }
        };
        check(a.ncols() == n, "A must be square")?;
        check(b.nrows() == n, "B rows must equal state count")?;
        check(c.ncols() == n, "C columns must equal state count")?;
        check(d.nrows() == c.nrows(), "D rows must equal output count")?;
        check(d.ncols() == b.ncols(), "D columns must equal input count")?;
        Ok(Self {
            a,
            b,
            c,
            d,
            dt: None,
        })
    }

    /// Pure feedthrough with no states.
    pub fn static_gain(d: DMatrix<f64>) -> Self {
        let (p, m) = d.shape();
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, m),
            c: DMatrix::zeros(p, 0),
            d,
            dt: None,
        }
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_discrete(&self) -> bool {
        self.dt.is_some()
    }
}

/// Controllable canonical realization of a proper SISO transfer function.
pub fn tf_to_ss(g: &RationalTF) -> Result<StateSpace> {
    let (num, den) = (g.num(), g.den());
    if !g.is_proper() {
        return Err(Error::ImproperSystem {
            num: num.degree(),
            den: den.degree(),
        });
    }
    let lead = den.leading();
    let num = num.scale(1.0 / lead);
    let den = den.scale(1.0 / lead);
    let n = den.degree();
    let (q, r) = num.div_rem(&den);
    let d = if num.degree() == n && !num.is_zero() {
        q.coeffs()[0]
    } else {
        0.0
    };
    let r = if num.degree() == n { r } else { num };
    if n == 0 || r.is_zero() {
        return Ok(StateSpace::static_gain(DMatrix::from_element(1, 1, d)));
    }
    let dc = den.coeffs();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -dc[j];
    }
    let mut b = DMatrix::zeros(n, 1);
    b[(n - 1, 0)] = 1.0;
    let mut c = DMatrix::zeros(1, n);
    for (j, v) in r.coeffs().iter().enumerate() {
        c[(0, j)] = *v;
    }
    StateSpace::new(a, b, c, DMatrix::from_element(1, 1, d))
}

/// Block-diagonal aggregation of per-entry realizations. Identically zero
/// entries contribute no states.
pub fn mimo_to_ss(g: &MimoTF) -> Result<StateSpace> {
    let (p, m) = (g.n_outputs(), g.n_inputs());
    let mut parts = Vec::new();
    let mut d = DMatrix::zeros(p, m);
    let mut n = 0;
    for o in 0..p {
        for i in 0..m {
            let e = g.entry(o, i);
            if e.is_zero() {
                continue;
            }
            let ss = tf_to_ss(e)?;
            d[(o, i)] = ss.d[(0, 0)];
            n += ss.n_states();
            parts.push((o, i, ss));
        }
    }
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, m);
    let mut c = DMatrix::zeros(p, n);
    let mut off = 0;
    for (o, i, ss) in parts {
        let k = ss.n_states();
        a.view_mut((off, off), (k, k)).copy_from(&ss.a);
        b.view_mut((off, i), (k, 1)).copy_from(&ss.b);
        c.view_mut((o, off), (1, k)).copy_from(&ss.c);
        off += k;
    }
    StateSpace::new(a, b, c, d)
}

/// Exact zero-order-hold discretization via the exponential of `[A B; 0 0]·dt`.
pub fn discretize_zoh(ss: &StateSpace, dt: f64) -> Result<StateSpace> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    if ss.is_discrete() {
        return Err(Error::invalid("system", "already discrete"));
    }
    let (n, m) = (ss.n_states(), ss.n_inputs());
    let mut out = ss.clone();
    out.dt = Some(dt);
    if n == 0 {
        return Ok(out);
    }
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&ss.a * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(&ss.b * dt));
    let scale = balance_in_place(&mut aug);
    let mut e = aug.exp();
    for i in 0..n + m {
        for j in 0..n + m {
            e[(i, j)] *= scale[i] / scale[j];
        }
    }
    out.a = e.view((0, 0), (n, n)).into_owned();
    out.b = e.view((0, n), (n, m)).into_owned();
    Ok(out)
}

/// Inter-sample behaviour assumed for an input channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Hold {
    /// Piecewise constant (set-points, switched loads).
    #[default]
    Zero,
    /// Piecewise linear between samples (sampled continuous signals).
    First,
}

/// Exact discretization for mixed holds. With `Φ, Γ₁, Γ₂` the hold
/// integrals, first-order-hold columns use the state `ξ = x − Γ₂u`, giving
/// `B_j = ΦΓ₂ⱼ + Γ₁ⱼ − Γ₂ⱼ`, `D_j = Dⱼ + CΓ₂ⱼ`. Returns the system and `Γ₂`
/// restricted to first-order columns (zero elsewhere), so a run from rest
/// starts at `ξ₀ = −Γ₂u₀`.
pub fn discretize_hold(
    ss: &StateSpace,
    dt: f64,
    holds: &[Hold],
) -> Result<(StateSpace, DMatrix<f64>)> {
    let (n, m) = (ss.n_states(), ss.n_inputs());
    if holds.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} hold flags for {m} inputs",
            holds.len()
        )));
    }
    if holds.iter().all(|h| *h == Hold::Zero) || n == 0 {
        return Ok((discretize_zoh(ss, dt)?, DMatrix::zeros(n, m)));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    if ss.is_discrete() {
        return Err(Error::invalid("system", "already discrete"));
    }
    let k = n + 2 * m;
    let mut aug = DMatrix::zeros(k, k);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&ss.a * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(&ss.b * dt));
    for j in 0..m {
        aug[(n + j, n + m + j)] = 1.0;
    }
    let scale = balance_in_place(&mut aug);
    let mut e = aug.exp();
    for i in 0..k {
        for j in 0..k {
            e[(i, j)] *= scale[i] / scale[j];
        }
    }
    let phi = e.view((0, 0), (n, n)).into_owned();
    let g1 = e.view((0, n), (n, m)).into_owned();
    let mut g2 = e.view((0, n + m), (n, m)).into_owned();
    for (j, h) in holds.iter().enumerate() {
        if *h == Hold::Zero {
            g2.column_mut(j).fill(0.0);
        }
    }
    let mut out = ss.clone();
    out.dt = Some(dt);
    out.b = &phi * &g2 + &g1 - &g2;
    out.d = &ss.d + &ss.c * &g2;
    out.a = phi;
    Ok((out, g2))
}
