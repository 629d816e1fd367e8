use eqanis::oracle::{oracle_sphere_moment, oracle_zz, scaled_i0, scaled_i1_over_y};
use eqanis::physics::{tm_to_am2, AnisotropyModel, ParticleParams};
use eqanis::quadrature::integrate;
use eqanis::series::{eval_series, mean_moment, SeriesParams, L_CAP};
use eqanis::vec3::{self, Vec3};
use proptest::prelude::*;

fn particle() -> ParticleParams {
    ParticleParams::with_diameter(20e-9).unwrap()
}

fn unit() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0f64..1.0).prop_filter_map("nonzero", |v| {
        let n = vec3::norm(v);
        (n > 0.1).then(|| vec3::scale(1.0 / n, v))
    })
}

/// Field with β|H| up to about 20.
fn field() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-20_000.0f64..20_000.0)
}

fn rotation(axis: Vec3, angle: f64) -> [[f64; 3]; 3] {
    let [x, y, z] = axis;
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

/// ln Z at field `h` from the series.
fn ln_z(h: Vec3, n: Vec3, alpha_k: f64, p: &ParticleParams) -> f64 {
    let xi = vec3::scale(p.beta(), h);
    let b = vec3::dot(xi, n);
    let a = vec3::norm(vec3::sub(xi, vec3::scale(b, n)));
    let sp = SeriesParams::new(a, b, alpha_k).unwrap();
    eval_series(sp, 1e-15, L_CAP).unwrap().ln_z(&sp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moment_is_bounded_by_saturation(h in field(), n in unit(), ak in 0.0f64..25.0) {
        let p = particle();
        let m = mean_moment(h, n, ak, &p, 1e-12).unwrap();
        prop_assert!(vec3::norm(m) <= p.m0() * (1.0 + 1e-12));
    }

    #[test]
    fn moment_is_odd_and_axis_sign_free(h in field(), n in unit(), ak in 0.0f64..25.0) {
        let p = particle();
        let m = mean_moment(h, n, ak, &p, 1e-13).unwrap();
        let odd = mean_moment(vec3::scale(-1.0, h), n, ak, &p, 1e-13).unwrap();
        let flipped = mean_moment(h, vec3::scale(-1.0, n), ak, &p, 1e-13).unwrap();
        let tol = 1e-11 * p.m0();
        prop_assert!(vec3::norm(vec3::add(m, odd)) < tol);
        prop_assert!(vec3::norm(vec3::sub(m, flipped)) < tol);
    }

    #[test]
    fn moment_lies_in_span_of_field_and_axis(h in field(), n in unit(), ak in 0.0f64..25.0) {
        let p = particle();
        let m = mean_moment(h, n, ak, &p, 1e-13).unwrap();
        let normal = vec3::cross(h, n);
        let nn = vec3::norm(normal);
        prop_assume!(nn > 1e-6 * vec3::norm(h));
        prop_assert!(vec3::dot(m, normal).abs() / nn < 1e-12 * p.m0());
    }

    #[test]
    fn rotation_invariance(h in field(), n in unit(), axis in unit(), angle in 0.0f64..6.28, ak in 0.0f64..25.0) {
        let p = particle();
        let r = rotation(axis, angle);
        let m = mean_moment(h, n, ak, &p, 1e-13).unwrap();
        let rotated = mean_moment(vec3::mat_vec(&r, h), vec3::mat_vec(&r, n), ak, &p, 1e-13).unwrap();
        let expected = vec3::mat_vec(&r, m);
        prop_assert!(vec3::norm(vec3::sub(rotated, expected)) <= 1e-10 * vec3::norm(m).max(1e-3 * p.m0()));
    }

    #[test]
    fn moment_is_gradient_of_ln_z(h in field(), n in unit(), ak in 0.0f64..25.0) {
        let p = particle();
        let hn = vec3::norm(h);
        prop_assume!(hn > 50.0);
        let m = mean_moment(h, n, ak, &p, 1e-14).unwrap();
        let step = 1e-4 * hn;
        for i in 0..3 {
            let mut hp = h;
            let mut hm = h;
            hp[i] += step;
            hm[i] -= step;
            let d = (ln_z(hp, n, ak, &p) - ln_z(hm, n, ak, &p)) / (2.0 * step);
            let fd = p.m0() / p.beta() * d;
            prop_assert!((fd - m[i]).abs() <= 1e-5 * vec3::norm(m), "component {i}: {fd} vs {}", m[i]);
        }
    }

    #[test]
    fn oracles_agree(h in prop::array::uniform3(-1000.0f64..1000.0), n in unit(), ak in 0.0f64..10.0) {
        let p = particle();
        let sphere = oracle_sphere_moment(h, n, ak, &p).unwrap();
        let xi = vec3::scale(p.beta(), h);
        let b = vec3::dot(xi, n);
        let perp = vec3::sub(xi, vec3::scale(b, n));
        let o = oracle_zz(SeriesParams::new(vec3::norm(perp), b, ak).unwrap(), 1e-300).unwrap();
        let line = vec3::scale(p.m0(), vec3::add(vec3::scale(o.z3 / o.z, n), vec3::scale(o.z_perp / o.z, perp)));
        prop_assert!(vec3::norm(vec3::sub(sphere, line)) <= 1e-8 * p.m0());
    }

    #[test]
    fn beta_scales_with_volume(d in 5e-9f64..40e-9) {
        let p = ParticleParams::with_diameter(d).unwrap();
        let q = ParticleParams::with_diameter(2.0 * d).unwrap();
        prop_assert!((q.beta() / p.beta() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn fluid_axis_is_radial_and_strength_grows(x in prop::array::uniform3(-0.02f64..0.02), s in 1.01f64..3.0, q in 0.5f64..3.0) {
        let g = tm_to_am2(1.0);
        let gradient = [-g, -g, 2.0 * g];
        let model = AnisotropyModel::fluid_b3(3500.0, q, 13_000.0).unwrap();
        let p = particle();
        let (a1, n) = model.at(&p, gradient, x);
        let gx = [gradient[0] * x[0], gradient[1] * x[1], gradient[2] * x[2]];
        prop_assume!(vec3::norm(gx) > 1.0);
        prop_assert!(vec3::norm(vec3::cross(n, gx)) < 1e-12 * vec3::norm(gx));
        prop_assert!(vec3::dot(n, gx) > 0.0);
        let (a2, _) = model.at(&p, gradient, vec3::scale(s, x));
        prop_assert!(a2 >= a1);
    }
}

/// Half-integer modified Bessel functions in closed form.
fn bessel_half(order2: usize, a: f64) -> f64 {
    let pre = (2.0 / (std::f64::consts::PI * a)).sqrt();
    match order2 {
        1 => pre * a.sinh(),
        3 => pre * (a.cosh() - a.sinh() / a),
        5 => pre * ((1.0 + 3.0 / (a * a)) * a.sinh() - 3.0 * a.cosh() / a),
        _ => unreachable!(),
    }
}

#[test]
fn bessel_integral_identity() {
    for n in [0i32, 2, 4] {
        for a in [0.5, 5.0, 20.0] {
            let lhs = integrate(
                |x: f64| {
                    scaled_i0(a * (1.0 - x * x).sqrt())
                        * (a * (1.0 - x * x).sqrt()).exp()
                        * x.powi(n)
                },
                0.0,
                1.0,
                1e-300,
                1e-13,
                10_000,
            )
            .unwrap()
            .value;
            let nu = (n as f64 + 1.0) / 2.0;
            let gamma = match n {
                0 => std::f64::consts::PI.sqrt(),
                2 => 0.5 * std::f64::consts::PI.sqrt(),
                _ => 0.75 * std::f64::consts::PI.sqrt(),
            };
            let rhs = 2f64.powf((n as f64 - 1.0) / 2.0)
                * gamma
                * a.powf(-nu)
                * bessel_half(n as usize + 1, a);
            assert!(
                (lhs - rhs).abs() <= 1e-9 * rhs.abs(),
                "n={n} a={a}: {lhs} vs {rhs}"
            );
        }
    }
}

#[test]
fn bessel_differentiation_relation() {
    // d/dξ I₀(ξ) = I₁(ξ)
    for xi in [0.3, 2.0, 15.0, 60.0] {
        let i0 = |y: f64| scaled_i0(y) * y.exp();
        let h = 1e-4;
        let fd = (i0(xi + h) - i0(xi - h)) / (2.0 * h);
        let i1 = scaled_i1_over_y(xi) * xi * xi.exp();
        assert!((fd - i1).abs() <= 1e-8 * i1, "ξ={xi}: {fd} vs {i1}");
    }
}
