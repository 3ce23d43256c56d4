use gridfreq::lti::{lsim, tf_feedback, Complex, RationalTF, Trace};
use proptest::prelude::*;

fn stable_tf() -> impl Strategy<Value = RationalTF> {
    (
        0.1f64..5.0,
        -2.0f64..2.0,
        0.5f64..3.0,
        0.05f64..2.0,
        0.3f64..1.5,
    )
        .prop_map(|(k, z, wn, tz, zeta)| {
            RationalTF::from_coeffs(&[k, k * z * tz], &[wn * wn, 2.0 * zeta * wn, 1.0])
                .unwrap()
                .scale(1.0 / (wn * wn))
        })
}

fn rhp_point() -> impl Strategy<Value = Complex<f64>> {
    (0.1f64..5.0, -10.0f64..10.0).prop_map(|(re, im)| Complex::new(re, im))
}

fn close(a: Complex<f64>, b: Complex<f64>, tol: f64) -> bool {
    (a - b).norm() <= tol * a.norm().max(b.norm()).max(1.0)
}

fn step(n: usize) -> Vec<f64> {
    (0..n).map(|k| if k >= 3 { 1.0 } else { 0.0 }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_laws(a in stable_tf(), b in stable_tf(), c in stable_tf(), s in rhp_point()) {
        let (av, bv, cv) = (a.eval(s), b.eval(s), c.eval(s));
        prop_assert!(close((&a + &b).eval(s), av + bv, 1e-9));
        prop_assert!(close((&a - &b).eval(s), av - bv, 1e-9));
        prop_assert!(close((&a * &b).eval(s), av * bv, 1e-9));
        prop_assert!(close((&a * &(&b + &c)).eval(s), av * (bv + cv), 1e-9));
        prop_assert!(close((&(&a + &b) + &c).eval(s), (&a + &(&b + &c)).eval(s), 1e-9));
    }

    #[test]
    fn feedback_identity(g in stable_tf(), h in stable_tf(), s in rhp_point()) {
        let cl = tf_feedback(&g, &h).unwrap();
        let (gv, hv) = (g.eval(s), h.eval(s));
        prop_assert!(close(cl.eval(s), gv / (1.0 + gv * hv), 1e-9));
    }

    #[test]
    fn lsim_is_linear(g in stable_tf(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in 0u64..1000) {
        let n = 400;
        let dt = 0.02;
        let u1 = step(n);
        let u2: Vec<f64> = (0..n).map(|k| ((k as f64) * 0.1 + seed as f64).sin()).collect();
        let mix: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| alpha * a + beta * b).collect();
        let run = |u: Vec<f64>| lsim(&g, &Trace::uniform(n, dt).with("u", u).unwrap()).unwrap().get("y").unwrap().to_vec();
        let (y1, y2, ym) = (run(u1), run(u2), run(mix));
        let scale = ym.iter().chain(&y1).chain(&y2).fold(1.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            prop_assert!((ym[k] - alpha * y1[k] - beta * y2[k]).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn first_order_step_is_exact(k in 0.1f64..10.0, tau in 0.01f64..5.0, dt in 0.001f64..0.5) {
        let n = 200;
        let g = RationalTF::first_order(k, tau);
        let y = lsim(&g, &Trace::uniform(n, dt).with("u", vec![1.0; n]).unwrap()).unwrap();
        for (i, v) in y.get("y").unwrap().iter().enumerate() {
            let exact = k * (1.0 - (-(i as f64) * dt / tau).exp());
            prop_assert!((v - exact).abs() <= 1e-9 * k.max(1.0));
        }
    }

    #[test]
    fn step_settles_at_dc_gain(g in stable_tf()) {
        let n = 20_000;
        let y = lsim(&g, &Trace::uniform(n, 0.02).with("u", vec![1.0; n]).unwrap()).unwrap();
        let last = *y.get("y").unwrap().last().unwrap();
        let dc = g.dcgain().value();
        prop_assert!((last - dc).abs() <= 1e-6 * dc.abs().max(1.0), "{} vs {}", last, dc);
    }
}
