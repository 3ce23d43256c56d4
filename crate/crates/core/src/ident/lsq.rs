//! Box-constrained Levenberg–Marquardt with seeded multistart.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named box `lb ≤ x ≤ ub`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsBox {
    pub names: Vec<String>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl BoundsBox {
    pub fn new(names: Vec<String>, lb: Vec<f64>, ub: Vec<f64>) -> Result<Self> {
        if names.len() != lb.len() || names.len() != ub.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} names, {} lower and {} upper bounds",
                names.len(),
                lb.len(),
                ub.len()
            )));
        }
        for i in 0..names.len() {
            if !(lb[i].is_finite() && ub[i].is_finite() && lb[i] <= ub[i]) {
                return Err(Error::InfeasibleBounds {
                    param: names[i].clone(),
                    lb: lb[i],
                    ub: ub[i],
                });
            }
        }
        Ok(Self { names, lb, ub })
    }

    pub fn from_pairs<S: Into<String>>(
        pairs: impl IntoIterator<Item = (S, f64, f64)>,
    ) -> Result<Self> {
        let (mut n, mut l, mut u) = (vec![], vec![], vec![]);
        for (name, lo, hi) in pairs {
            n.push(name.into());
            l.push(lo);
            u.push(hi);
        }
        Self::new(n, l, u)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        self.index(name).map(|i| (self.lb[i], self.ub[i]))
    }

    /// Checks that the box covers exactly `expected`, in order.
    pub fn require(&self, expected: &[&str]) -> Result<()> {
        if self.names.len() != expected.len()
            || self.names.iter().zip(expected).any(|(a, b)| a != b)
        {
            return Err(Error::validation(
                "bounds",
                format!(
                    "expected parameters [{}], got [{}]",
                    expected.join(", "),
                    self.names.join(", ")
                ),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lb.iter().zip(&self.ub))
            .all(|(v, (l, u))| l <= v && v <= u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultistartConfig {
    pub n_starts: usize,
    pub rng_seed: u64,
    /// Relative objective decrease below which a local run stops.
    pub local_tol: f64,
    pub max_evals: usize,
}

impl Default for MultistartConfig {
    fn default() -> Self {
        Self {
            n_starts: 20,
            rng_seed: 42,
            local_tol: 1e-12,
            max_evals: 2000,
        }
    }
}

impl MultistartConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return Err(Error::invalid("n_starts", "must be at least 1"));
        }
        if !(self.local_tol > 0.0 && self.local_tol < 1.0) {
            return Err(Error::invalid(
                "local_tol",
                format!("must lie in (0, 1), got {}", self.local_tol),
            ));
        }
        if self.max_evals < 2 {
            return Err(Error::invalid("max_evals", "must be at least 2"));
        }
        Ok(())
    }
}

/// Outcome of one local solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub x0: Vec<f64>,
    pub x: Vec<f64>,
    pub sse: f64,
    pub evals: usize,
    /// Objective after every accepted step, starting with the initial value.
    #[serde(skip)]
    pub history: Vec<f64>,
}

const XTOL: f64 = 1e-13;
const LAMBDA_MAX: f64 = 1e16;

/// Residual callback; `None` marks a point where the model cannot be built.
pub trait Residual: Sync {
    fn eval(&self, x: &[f64]) -> Option<Vec<f64>>;
}

impl<F> Residual for F
where
    F: Fn(&[f64]) -> Option<Vec<f64>> + Sync,
{
    fn eval(&self, x: &[f64]) -> Option<Vec<f64>> {
        self(x)
    }
}

fn sse(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimizes `Σ r(x)²` over the box from `x0`. The objective never
/// increases and the returned point lies in the box. `floor` is an absolute
/// objective value at which the fit counts as exact.
pub fn solve_local<R: Residual + ?Sized>(
    res: &R,
    x0: &[f64],
    bounds: &BoundsBox,
    cfg: &MultistartConfig,
    floor: f64,
) -> StartRecord {
    let n = x0.len();
    let width: Vec<f64> = bounds
        .lb
        .iter()
        .zip(&bounds.ub)
        .map(|(l, u)| u - l)
        .collect();
    let to_x = |z: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (bounds.lb[i] + z[i] * width[i]).clamp(bounds.lb[i], bounds.ub[i]))
            .collect()
    };
    let mut z: Vec<f64> = (0..n)
        .map(|i| {
            if width[i] > 0.0 {
                ((x0[i] - bounds.lb[i]) / width[i]).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    let mut evals = 0;
    let eval = |z: &[f64], evals: &mut usize| -> Option<Vec<f64>> {
        *evals += 1;
        res.eval(&to_x(z))
            .filter(|r| r.iter().all(|v| v.is_finite()))
    };

    let Some(mut r) = eval(&z, &mut evals) else {
        return StartRecord {
            x0: x0.to_vec(),
            x: to_x(&z),
            sse: f64::INFINITY,
            evals,
            history: vec![f64::INFINITY],
        };
    };
    let mut f = sse(&r);
    let mut history = vec![f];
    let mut lambda = 1e-3;
    let free_dims: Vec<usize> = (0..n).filter(|&i| width[i] > 0.0).collect();

    'outer: while f > floor && evals < cfg.max_evals && !free_dims.is_empty() {
        // forward-difference Jacobian in normalized coordinates
        let m = r.len();
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for &j in &free_dims {
            let x = bounds.lb[j] + z[j] * width[j];
            let hz = 1e-6 * x.abs().max(1.0) / width[j];
            let mut zp = z.clone();
            let step = if z[j] + hz <= 1.0 { hz } else { -hz };
            zp[j] = (z[j] + step).clamp(0.0, 1.0);
            let actual = zp[j] - z[j];
            let Some(rp) = eval(&zp, &mut evals) else {
                break 'outer;
            };
            for i in 0..m {
                jac[(i, j)] = (rp[i] - r[i]) / actual;
            }
            if evals >= cfg.max_evals {
                break 'outer;
            }
        }
        let rv = DVector::from_column_slice(&r);
        let g = jac.transpose() * &rv;
        let free: Vec<usize> = free_dims
            .iter()
            .copied()
            .filter(|&j| !((z[j] <= 0.0 && g[j] > 0.0) || (z[j] >= 1.0 && g[j] < 0.0)))
            .collect();
        if free.is_empty() {
            break;
        }
        let jf = jac.select_columns(free.iter());
        let jtj = jf.transpose() * &jf;
        let gf = DVector::from_iterator(free.len(), free.iter().map(|&j| g[j]));
        let dmax = jtj.diagonal().max();
        if !(dmax > 0.0) {
            break;
        }
        loop {
            let mut lhs = jtj.clone();
            for k in 0..free.len() {
                lhs[(k, k)] += lambda * jtj[(k, k)].max(1e-12 * dmax);
            }
            let step = lhs.cholesky().map(|c| c.solve(&(-&gf)));
            let Some(step) = step else {
                lambda *= 10.0;
                if lambda > LAMBDA_MAX {
                    break 'outer;
                }
                continue;
            };
            let mut zn = z.clone();
            for (k, &j) in free.iter().enumerate() {
                zn[j] = (z[j] + step[k]).clamp(0.0, 1.0);
            }
            let moved = (0..n).map(|j| (zn[j] - z[j]).abs()).fold(0.0, f64::max);
            if moved < XTOL {
                break 'outer;
            }
            let trial = eval(&zn, &mut evals);
            let fn_ = trial.as_ref().map_or(f64::INFINITY, |t| sse(t));
            if fn_ < f {
                let decrease = f - fn_;
                z = zn;
                r = trial.expect("finite objective implies a residual");
                f = fn_;
                history.push(f);
                lambda = (lambda / 10.0).max(1e-12);
                if decrease <= cfg.local_tol * (f + decrease) || moved < 1e-10 {
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > LAMBDA_MAX || evals >= cfg.max_evals {
                break 'outer;
            }
        }
    }
    StartRecord {
        x0: x0.to_vec(),
        x: to_x(&z),
        sse: f,
        evals,
        history,
    }
}

/// Uniform draws over the box, generated up front from `seed`.
pub fn draw_starts(bounds: &BoundsBox, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            (0..bounds.len())
                .map(|i| {
                    let u: f64 = rng.random();
                    bounds.lb[i] + u * (bounds.ub[i] - bounds.lb[i])
                })
                .collect()
        })
        .collect()
}

/// Runs one local solve per start in parallel. Returns all records in start
/// order and the index of the best (lowest SSE, earliest on ties).
pub fn multistart<R: Residual + ?Sized>(
    res: &R,
    bounds: &BoundsBox,
    cfg: &MultistartConfig,
    floor: f64,
) -> Result<(usize, Vec<StartRecord>)> {
    cfg.validate()?;
    let starts = draw_starts(bounds, cfg.n_starts, cfg.rng_seed);
    let records: Vec<StartRecord> = starts
        .par_iter()
        .map(|x0| solve_local(res, x0, bounds, cfg, floor))
        .collect();
    let mut best = 0;
    for (i, r) in records.iter().enumerate() {
        if r.sse < records[best].sse {
            best = i;
        }
    }
    if !records[best].sse.is_finite() {
        return Err(Error::Solver("no start produced a finite objective".into()));
    }
    Ok((best, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosen(x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]])
    }

    fn cfg() -> MultistartConfig {
        MultistartConfig {
            n_starts: 8,
            rng_seed: 7,
            local_tol: 1e-14,
            max_evals: 5000,
        }
    }

    #[test]
    fn bounds_validation() {
        assert!(matches!(
            BoundsBox::from_pairs([("a", 2.0, 1.0)]),
            Err(Error::InfeasibleBounds { .. })
        ));
        assert!(BoundsBox::from_pairs([("a", 1.0, f64::INFINITY)]).is_err());
        assert!(BoundsBox::from_pairs([("a", 1.0, 1.0)]).is_ok());
    }

    #[test]
    fn finds_interior_minimum() {
        let b = BoundsBox::from_pairs([("a", -2.0, 2.0), ("b", -1.0, 3.0)]).unwrap();
        let r = solve_local(&rosen, &[-1.5, 2.5], &b, &cfg(), 1e-30);
        assert!(
            (r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6,
            "{:?}",
            r.x
        );
    }

    #[test]
    fn objective_is_monotone() {
        let b = BoundsBox::from_pairs([("a", -2.0, 2.0), ("b", -1.0, 3.0)]).unwrap();
        let r = solve_local(&rosen, &[-1.9, -0.5], &b, &cfg(), 0.0);
        assert!(r.history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn stops_on_active_bound() {
        let b = BoundsBox::from_pairs([("a", -2.0, 0.5), ("b", -1.0, 3.0)]).unwrap();
        let r = solve_local(&rosen, &[-1.0, 2.0], &b, &cfg(), 0.0);
        assert_eq!(r.x[0], 0.5);
        assert!((r.x[1] - 0.25).abs() < 1e-6);
        assert!(b.contains(&r.x));
    }

    #[test]
    fn failed_evaluations_are_rejected() {
        let f = |x: &[f64]| {
            if x[0] > 0.5 {
                None
            } else {
                Some(vec![x[0] - 1.0])
            }
        };
        let b = BoundsBox::from_pairs([("a", 0.0, 2.0)]).unwrap();
        let r = solve_local(&f, &[0.1], &b, &cfg(), 0.0);
        assert!(r.x[0] <= 0.5 && r.x[0] > 0.49);
    }

    #[test]
    fn multistart_is_deterministic() {
        let b = BoundsBox::from_pairs([("a", -2.0, 2.0), ("b", -1.0, 3.0)]).unwrap();
        let (i1, r1) = multistart(&rosen, &b, &cfg(), 1e-30).unwrap();
        let (i2, r2) = multistart(&rosen, &b, &cfg(), 1e-30).unwrap();
        assert_eq!(i1, i2);
        assert_eq!(r1, r2);
        assert_eq!(draw_starts(&b, 3, 1), draw_starts(&b, 3, 1));
        assert_ne!(draw_starts(&b, 3, 1), draw_starts(&b, 3, 2));
    }

    #[test]
    fn fixed_width_parameter_held() {
        let b = BoundsBox::from_pairs([("a", 0.3, 0.3), ("b", -1.0, 3.0)]).unwrap();
        let r = solve_local(&rosen, &[0.3, 0.0], &b, &cfg(), 0.0);
        assert_eq!(r.x[0], 0.3);
        assert!((r.x[1] - 0.09).abs() < 1e-8);
    }
}
