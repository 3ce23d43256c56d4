use nalgebra::DMatrix;

const RADIX: f64 = 2.0;

/// Parlett–Reinsch diagonal balancing with power-of-two scale factors.
///
/// Replaces `a` with `D⁻¹ A D` and returns the diagonal of `D`. Since every
/// factor is a power of two the similarity is exact in floating point.
pub fn balance_in_place(a: &mut DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut d = vec![1.0; n];
    if n < 2 {
        return d;
    }
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut g = r / RADIX;
            let mut f = 1.0;
            let s = c + r;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                d[i] *= f;
                for j in 0..n {
                    a[(i, j)] *= g;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_similarity() {
        let orig = DMatrix::from_row_slice(3, 3, &[1.0, 1e6, 0.0, 1e-6, 2.0, 1e4, 0.0, 1e-4, 3.0]);
        let mut a = orig.clone();
        let d = balance_in_place(&mut a);
        for i in 0..3 {
            for j in 0..3 {
                let back = a[(i, j)] * d[i] / d[j];
                assert!((back - orig[(i, j)]).abs() <= 1e-15 * orig[(i, j)].abs().max(1.0));
            }
        }
        let norm_before: f64 = orig.iter().map(|x| x.abs()).sum();
        let norm_after: f64 = a.iter().map(|x| x.abs()).sum();
        assert!(norm_after < norm_before);
    }
}
