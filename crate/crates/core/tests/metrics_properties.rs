use eqanis::metrics::{err_sm, err_td_single};
use eqanis::trace::MomentTrace;
use eqanis::vec3;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

const N: usize = 64;

fn trace(coef: [f64; 4]) -> MomentTrace {
    let times: Vec<f64> = (0..N).map(|j| j as f64 / N as f64).collect();
    let moments = times
        .iter()
        .map(|&t| {
            let w = 2.0 * PI * t;
            [
                coef[0] * w.sin() + coef[3],
                coef[1] * (2.0 * w).cos(),
                coef[2] * (3.0 * w).sin(),
            ]
        })
        .collect();
    MomentTrace::new(times, moments).unwrap()
}

fn coefs() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-2.0f64..2.0).prop_filter("nonzero", |c| c[0].abs() > 0.1)
}

fn row() -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

proptest! {
    #[test]
    fn err_td_is_scale_invariant(a in coefs(), b in coefs(), s in 0.01f64..100.0) {
        let e = err_td_single(&trace(a), &trace(b)).unwrap();
        let es = err_td_single(&trace(a.map(|v| s * v)), &trace(b.map(|v| s * v))).unwrap();
        prop_assert!((e - es).abs() <= 1e-12 * e.max(1e-12));
    }

    /// Against a zero approximation the error is the mean over the peak of the
    /// analytic derivative magnitude.
    #[test]
    fn err_td_against_zero(a in coefs()) {
        let zero = trace([0.0; 4]);
        let e = err_td_single(&trace(a), &zero).unwrap();
        let d: Vec<f64> = (0..N)
            .map(|j| {
                let w = 2.0 * PI * j as f64 / N as f64;
                let v = [
                    2.0 * PI * a[0] * w.cos(),
                    -4.0 * PI * a[1] * (2.0 * w).sin(),
                    6.0 * PI * a[2] * (3.0 * w).cos(),
                ];
                vec3::norm(v)
            })
            .collect();
        let expected = d.iter().sum::<f64>() / N as f64 / d.iter().cloned().fold(0.0, f64::max);
        prop_assert!((e - expected).abs() < 1e-12, "{e} vs {expected}");
    }

    #[test]
    fn err_sm_is_invariant_under_complex_scaling(r in row(), q in row(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let z = Complex64::new(re, im);
        prop_assume!(z.norm() > 1e-3);
        let e = err_sm(&r, &q).unwrap();
        let rs: Vec<Complex64> = r.iter().map(|v| z * v).collect();
        let qs: Vec<Complex64> = q.iter().map(|v| z * v).collect();
        prop_assert!((err_sm(&rs, &qs).unwrap() - e).abs() <= 1e-12 * e.max(1e-12));
        let rc: Vec<Complex64> = r.iter().map(|v| v.conj()).collect();
        let qc: Vec<Complex64> = q.iter().map(|v| v.conj()).collect();
        prop_assert!((err_sm(&rc, &qc).unwrap() - e).abs() <= 1e-12 * e.max(1e-12));
        prop_assert_eq!(err_sm(&r, &r).unwrap(), 0.0);
    }
}
