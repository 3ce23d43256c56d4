use indexmap::IndexMap;

use super::ss::{discretize_hold, mimo_to_ss, tf_to_ss, Hold, StateSpace};
use super::tf::{MimoTF, RationalTF};
use crate::error::{Error, Result};

/// Relative tolerance on sample spacing.
pub const UNIFORM_TOL: f64 = 1e-9;

/// Uniformly sampled, named signals sharing one time axis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub t: Vec<f64>,
    pub channels: IndexMap<String, Vec<f64>>,
}

pub type SimTrace = Trace;
pub type MeasurementTrace = Trace;

impl Trace {
    pub fn new(t: Vec<f64>) -> Self {
        Self {
            t,
            channels: IndexMap::new(),
        }
    }

    /// `n` samples starting at zero with spacing `dt`.
    pub fn uniform(n: usize, dt: f64) -> Self {
        Self::new((0..n).map(|k| k as f64 * dt).collect())
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn insert(&mut self, name: impl Into<String>, data: Vec<f64>) -> Result<()> {
        if data.len() != self.t.len() {
            return Err(Error::LengthMismatch {
                expected: self.t.len(),
                got: data.len(),
            });
        }
        self.channels.insert(name.into(), data);
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, data: Vec<f64>) -> Result<Self> {
        self.insert(name, data)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Result<&[f64]> {
        self.channels
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingChannel(name.to_string()))
    }

    /// Sample period, verifying uniform spacing.
    pub fn dt(&self) -> Result<f64> {
        let n = self.t.len();
        if n < 2 {
            return Err(Error::EmptyTrace);
        }
        let dt = (self.t[n - 1] - self.t[0]) / (n - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::NonuniformSampling { row: 1 });
        }
        for k in 1..n {
            let step = self.t[k] - self.t[k - 1];
            if (step - dt).abs() > UNIFORM_TOL * dt.max(self.t[k].abs() * f64::EPSILON * 1e6) {
                return Err(Error::NonuniformSampling { row: k });
            }
        }
        Ok(dt)
    }
}

/// Anything with named input and output channels and a continuous realization.
pub trait LinearSystem {
    fn input_names(&self) -> Vec<String>;
    fn output_names(&self) -> Vec<String>;
    fn state_space(&self) -> Result<StateSpace>;
}

fn default_names(prefix: &str, n: usize) -> Vec<String> {
    if n == 1 {
        vec![prefix.to_string()]
    } else {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }
}

impl LinearSystem for RationalTF {
    fn input_names(&self) -> Vec<String> {
        vec!["u".into()]
    }
    fn output_names(&self) -> Vec<String> {
        vec!["y".into()]
    }
    fn state_space(&self) -> Result<StateSpace> {
        tf_to_ss(self)
    }
}

impl LinearSystem for MimoTF {
    fn input_names(&self) -> Vec<String> {
        MimoTF::input_names(self).to_vec()
    }
    fn output_names(&self) -> Vec<String> {
        MimoTF::output_names(self).to_vec()
    }
    fn state_space(&self) -> Result<StateSpace> {
        mimo_to_ss(self)
    }
}

impl LinearSystem for StateSpace {
    fn input_names(&self) -> Vec<String> {
        default_names("u", self.n_inputs())
    }
    fn output_names(&self) -> Vec<String> {
        default_names("y", self.n_outputs())
    }
    fn state_space(&self) -> Result<StateSpace> {
        Ok(self.clone())
    }
}

/// Simulates `sys` from rest under the inputs in `u` (matched by channel name)
/// and returns a trace holding the output channels.
pub fn lsim<S: LinearSystem + ?Sized>(sys: &S, u: &Trace) -> Result<Trace> {
    if u.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let ss = sys.state_space()?;
    let names = sys.input_names();
    let inputs = names.iter().map(|n| u.get(n)).collect::<Result<Vec<_>>>()?;
    let dt = if u.len() == 1 { 1.0 } else { u.dt()? };
    let ys = lsim_ss(&ss, dt, &inputs)?;
    let mut out = Trace::new(u.t.clone());
    for (name, y) in sys.output_names().into_iter().zip(ys) {
        out.insert(name, y)?;
    }
    Ok(out)
}

/// Simulates a continuous system given raw input columns (one slice per input).
pub fn lsim_ss(ss: &StateSpace, dt: f64, inputs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    lsim_ss_hold(ss, dt, inputs, &vec![Hold::Zero; inputs.len()])
}

/// As [`lsim_ss`] with a hold assumption per input column.
pub fn lsim_ss_hold(
    ss: &StateSpace,
    dt: f64,
    inputs: &[&[f64]],
    holds: &[Hold],
) -> Result<Vec<Vec<f64>>> {
    if holds.len() != inputs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} hold flags for {} inputs",
            holds.len(),
            inputs.len()
        )));
    }
    if ss.is_discrete() {
        return simulate_discrete(ss, inputs);
    }
    let used: Vec<usize> = (0..inputs.len())
        .filter(|&i| inputs[i].iter().any(|&v| v != 0.0))
        .collect();
    let n_samples = inputs.first().map_or(0, |c| c.len());
    if used.is_empty() {
        return Ok(vec![vec![0.0; n_samples]; ss.n_outputs()]);
    }
    let keep = structural_core(ss, &used);
    let pruned = StateSpace {
        a: ss.a.select_rows(keep.iter()).select_columns(keep.iter()),
        b: ss.b.select_rows(keep.iter()).select_columns(used.iter()),
        c: ss.c.select_columns(keep.iter()),
        d: ss.d.select_columns(used.iter()),
        dt: None,
    };
    let cols: Vec<&[f64]> = used.iter().map(|&i| inputs[i]).collect();
    let used_holds: Vec<Hold> = used.iter().map(|&i| holds[i]).collect();
    let (disc, g2) = discretize_hold(&pruned, dt, &used_holds)?;
    let u0 = nalgebra::DVector::from_iterator(cols.len(), cols.iter().map(|c| c[0]));
    let x0 = -(&g2 * u0);
    simulate_from(&disc, x0.as_slice(), &cols)
}

/// States that are structurally reachable from the `used` inputs and
/// structurally observable at some output. The remaining states stay exactly
/// zero or never reach an output, so dropping them leaves every sample intact.
fn structural_core(ss: &StateSpace, used: &[usize]) -> Vec<usize> {
    let n = ss.n_states();
    let mut reach = vec![false; n];
    let mut stack: Vec<usize> = (0..n)
        .filter(|&i| used.iter().any(|&j| ss.b[(i, j)] != 0.0))
        .collect();
    for &i in &stack {
        reach[i] = true;
    }
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !reach[j] && ss.a[(j, i)] != 0.0 {
                reach[j] = true;
                stack.push(j);
            }
        }
    }
    let mut obs = vec![false; n];
    let mut stack: Vec<usize> = (0..n)
        .filter(|&i| (0..ss.n_outputs()).any(|o| ss.c[(o, i)] != 0.0))
        .collect();
    for &i in &stack {
        obs[i] = true;
    }
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !obs[j] && ss.a[(i, j)] != 0.0 {
                obs[j] = true;
                stack.push(j);
            }
        }
    }
    (0..n).filter(|&i| reach[i] && obs[i]).collect()
}

/// Runs `y_k = C x_k + D u_k`, `x_{k+1} = A x_k + B u_k` from `x_0 = 0`.
pub fn simulate_discrete(ss: &StateSpace, inputs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    simulate_from(ss, &vec![0.0; ss.n_states()], inputs)
}

fn simulate_from(ss: &StateSpace, x0: &[f64], inputs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let (n, m, p) = (ss.n_states(), ss.n_inputs(), ss.n_outputs());
    if inputs.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "system has {m} inputs, {} supplied",
            inputs.len()
        )));
    }
    let len = inputs.first().map_or(0, |c| c.len());
    if len == 0 {
        return Err(Error::EmptyTrace);
    }
    for c in inputs {
        if c.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                got: c.len(),
            });
        }
    }
    // row-major copies for the inner loop
    let row_major =
        |mat: &nalgebra::DMatrix<f64>| -> Vec<f64> { mat.transpose().as_slice().to_vec() };
    let (a, b, c, d) = (
        row_major(&ss.a),
        row_major(&ss.b),
        row_major(&ss.c),
        row_major(&ss.d),
    );
    let mut x = x0.to_vec();
    let mut xn = vec![0.0; n];
    let mut uk = vec![0.0; m];
    let mut ys = vec![vec![0.0; len]; p];
    for k in 0..len {
        for (j, col) in inputs.iter().enumerate() {
            uk[j] = col[k];
        }
        for (o, y) in ys.iter_mut().enumerate() {
            let cr = &c[o * n..(o + 1) * n];
            let dr = &d[o * m..(o + 1) * m];
            let mut acc = 0.0;
            for i in 0..n {
                acc += cr[i] * x[i];
            }
            for j in 0..m {
                acc += dr[j] * uk[j];
            }
            y[k] = acc;
        }
        for i in 0..n {
            let ar = &a[i * n..(i + 1) * n];
            let br = &b[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for l in 0..n {
                acc += ar[l] * x[l];
            }
            for j in 0..m {
                acc += br[j] * uk[j];
            }
            xn[i] = acc;
        }
        std::mem::swap(&mut x, &mut xn);
    }
    Ok(ys)
}
