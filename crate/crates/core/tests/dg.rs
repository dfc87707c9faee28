use std::f64::consts::PI;

use ipdg_qmc::dg::{
    assemble_ipdg, assemble_load, assemble_operator, dg_norm, dg_star_norm, l2_error, l2_norm, norm_parts,
    penalty_for_sample, penalty_value, solve_conforming_p1, solve_system, trace_constant_sq,
    CoefficientValues, PenaltyPolicy, Reference,
};
use ipdg_qmc::experiment::fit_rate;
use ipdg_qmc::field::{CoefficientModel, RandomFieldSpec};
use ipdg_qmc::{DgFunction, DgSpace, Error, Mesh, ParameterVector, Theta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn space(m: usize, k: usize) -> DgSpace {
    DgSpace::new(Mesh::structured(m).unwrap(), k).unwrap()
}

fn random_function(s: &DgSpace, rng: &mut ChaCha8Rng) -> DgFunction {
    s.function((0..s.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .unwrap()
}

fn exact(x: [f64; 2]) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

fn source(x: [f64; 2]) -> f64 {
    2.0 * PI * PI * exact(x)
}

#[test]
fn nipg_energy_identity_with_lognormal_coefficient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = RandomFieldSpec::standard(CoefficientModel::Lognormal, 6).unwrap();
    for k in [1, 2] {
        let s = space(3, k);
        let sampler = spec.sampler(s.coefficient_points());
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = CoefficientValues::new(&s, sampler.values(&y).unwrap()).unwrap();
        let op = assemble_operator(&s, &a, Theta::NonSymmetric, 3.5).unwrap();
        for _ in 0..5 {
            let v = random_function(&s, &mut rng);
            let norm = dg_norm(&s, &v, &a, 3.5).unwrap().powi(2);
            assert!((op.quadratic_form(&v.coeffs) - norm).abs() <= 1e-10 * norm);
        }
    }
}

#[test]
fn sipg_operator_is_symmetric() {
    let s = space(4, 2);
    let a = CoefficientValues::from_fn(&s, |x| 1.0 + x[0] * x[1]).unwrap();
    let op = assemble_operator(&s, &a, Theta::Symmetric, 20.0).unwrap();
    assert!(op.max_asymmetry() <= 1e-12 * op.max_abs());
    let nonsym = assemble_operator(&s, &a, Theta::NonSymmetric, 20.0).unwrap();
    assert!(nonsym.max_asymmetry() > 1e-3 * nonsym.max_abs());
}

#[test]
fn zero_vector_has_zero_energy() {
    let s = space(2, 1);
    let a = CoefficientValues::constant(&s, 2.0).unwrap();
    let op = assemble_operator(&s, &a, Theta::Incomplete, 4.0).unwrap();
    assert_eq!(op.quadratic_form(&s.zero().coeffs), 0.0);
}

#[test]
fn assembly_rejects_bad_input() {
    let s = space(1, 1);
    let mut values = vec![1.0; s.coefficient_points().len()];
    values[3] = -0.5;
    assert!(matches!(
        CoefficientValues::new(&s, values),
        Err(Error::ModelViolation(_))
    ));
    let a = CoefficientValues::constant(&s, 1.0).unwrap();
    assert!(assemble_operator(&s, &a, Theta::Symmetric, 0.0).is_err());
}

#[test]
fn load_examples() {
    let s = space(3, 2);
    assert!(assemble_load(&s, |_| 0.0).iter().all(|&b| b == 0.0));
    let b = assemble_load(&s, |x| x[0]);
    let ones = s.constant(1.0);
    let total: f64 = b.iter().zip(&ones.coeffs).map(|(x, y)| x * y).sum();
    assert!((total - 0.5).abs() < 1e-14);
}

#[test]
fn zero_load_gives_zero_solution() {
    let s = space(2, 1);
    let a = CoefficientValues::constant(&s, 1.0).unwrap();
    let sys = assemble_ipdg(&s, &a, Theta::Symmetric, 10.0, vec![0.0; s.num_dofs()]).unwrap();
    assert!(solve_system(&sys).unwrap().coeffs.iter().all(|&c| c == 0.0));
}

/// `(m, error)` pairs.
type Series = Vec<(f64, f64)>;

fn manufactured_errors(theta: Theta, k: usize, ms: &[usize]) -> (Series, Series) {
    let mut l2 = Vec::new();
    let mut energy = Vec::new();
    for &m in ms {
        let s = space(m, k);
        let a = CoefficientValues::constant(&s, 1.0).unwrap();
        let eta = 10.0 * (k * k) as f64;
        let sys = assemble_ipdg(&s, &a, theta, eta, assemble_load(&s, source)).unwrap();
        let u = solve_system(&sys).unwrap();
        l2.push((m as f64, l2_error(&s, &u, Reference::Analytic(&exact)).unwrap()));
        // DG-norm error against the quadratic projection of the exact solution
        let fine = space(m, 2);
        let ue = fine.project(exact);
        let mut diff = fine.zero();
        let nb_c = s.local_dim();
        let nb_f = fine.local_dim();
        for e in 0..s.mesh().num_elements() {
            for b in 0..nb_f {
                let uc = if b < nb_c { u.coeffs[e * nb_c + b] } else { 0.0 };
                diff.coeffs[e * nb_f + b] = uc - ue.coeffs[e * nb_f + b];
            }
        }
        let af = CoefficientValues::constant(&fine, 1.0).unwrap();
        energy.push((m as f64, dg_norm(&fine, &diff, &af, eta).unwrap()));
    }
    (l2, energy)
}

#[test]
fn manufactured_solution_rates_sipg_p1() {
    let (l2, energy) = manufactured_errors(Theta::Symmetric, 1, &[4, 8, 16]);
    // errors are fitted against m = 1/h
    let r2 = -fit_rate(&l2).unwrap().r;
    let r1 = -fit_rate(&energy).unwrap().r;
    assert!((r2 - 2.0).abs() < 0.2, "L2 rate {r2}");
    assert!((r1 - 1.0).abs() < 0.2, "energy rate {r1}");
}

#[test]
fn manufactured_solution_rates_nipg_p2() {
    let (l2, _) = manufactured_errors(Theta::NonSymmetric, 2, &[4, 8, 16]);
    let r = -fit_rate(&l2).unwrap().r;
    // NIPG loses the duality argument for even degree
    assert!(r > 1.8, "L2 rate {r}");
}

#[test]
fn norm_examples() {
    let s = space(2, 2);
    let a = CoefficientValues::constant(&s, 1.5).unwrap();
    assert_eq!(dg_norm(&s, &s.zero(), &a, 2.0).unwrap(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let v = random_function(&s, &mut rng);
        assert!(dg_norm(&s, &v, &a, 2.0).unwrap() <= dg_star_norm(&s, &v, &a, 2.0).unwrap());
    }
}

#[test]
fn piecewise_constant_norm_matches_face_sum() {
    // m = 1: element 0 = (0,0),(1,0),(1,1); element 1 = (0,0),(1,1),(0,1)
    let s = space(1, 1);
    let a = CoefficientValues::constant(&s, 1.0).unwrap();
    let mut u = s.zero();
    u.coeffs[0] = 1.0;
    // jump 1 on two unit legs and on the diagonal of length sqrt(2):
    // sum (eta/h_F) |F| = 1 + 1 + 1 = 3
    let n = dg_norm(&s, &u, &a, 1.0).unwrap();
    assert!((n * n - 3.0).abs() < 1e-13);
    let parts = norm_parts(&s, &u, &a, 1.0).unwrap();
    assert_eq!(parts.gradient, 0.0);
    assert_eq!(parts.flux, 0.0);
}

#[test]
fn l2_examples() {
    let s = space(4, 1);
    let u = s.constant(2.5);
    assert_eq!(l2_error(&s, &u, Reference::Discrete(&u)).unwrap(), 0.0);
    assert!((l2_error(&s, &u, Reference::Discrete(&s.zero())).unwrap() - 2.5).abs() < 1e-14);
    let other = space(3, 1);
    assert!(l2_error(&s, &u, Reference::Discrete(&other.zero())).is_err());
}

#[test]
fn analytic_l2_error_against_refined_quadrature() {
    let s = space(4, 1);
    let u = s.project(|x| x[0] * x[1]);
    let f = |x: [f64; 2]| (3.0 * x[0]).sin() * x[1];
    let e = l2_error(&s, &u, Reference::Analytic(&f)).unwrap();
    // oracle: 400-point collapsed Gauss rule per element
    let g = ipdg_qmc::quadrature::GaussLegendre::new(20);
    let mut acc = 0.0;
    for e_idx in 0..s.mesh().num_elements() {
        let [p0, p1, p2] = s.mesh().element_points(e_idx);
        let area2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        for (a, wa) in g.nodes.iter().zip(&g.weights) {
            for (b, wb) in g.nodes.iter().zip(&g.weights) {
                let r = [*a, b * (1.0 - a)];
                let x = s.from_reference(e_idx, r);
                let d = s.eval_local(&u, e_idx, r) - f(x);
                acc += wa * wb * (1.0 - a) * area2.abs() * d * d;
            }
        }
    }
    assert!((e - acc.sqrt()).abs() < 1e-8);
}

#[test]
fn jump_average_product_rule_at_face_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = space(3, 2);
    let u = random_function(&s, &mut rng);
    let v = random_function(&s, &mut rng);
    for f in 0..s.mesh().num_faces() {
        if s.mesh().faces()[f].is_boundary() {
            continue;
        }
        let tu = s.face_traces(&u, f);
        let tv = s.face_traces(&v, f);
        for ((up, um), (vp, vm)) in tu.iter().zip(&tv) {
            let (um, vm) = (um.unwrap(), vm.unwrap());
            let jump_uv = up * vp - um * vm;
            let rhs = 0.5 * (up + um) * (vp - vm) + (up - um) * 0.5 * (vp + vm);
            assert!((jump_uv - rhs).abs() < 1e-12);
        }
    }
}

#[test]
fn discrete_poincare_constant_is_mesh_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut ratios = Vec::new();
    for m in [2, 4, 8, 16] {
        let s = space(m, 1);
        let a = CoefficientValues::constant(&s, 1.0).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let v = random_function(&s, &mut rng);
            worst = worst.max(l2_norm(&s, &v).unwrap() / dg_norm(&s, &v, &a, 1.0).unwrap());
        }
        ratios.push(worst);
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    assert!(max < 1.0, "{ratios:?}");
}

#[test]
fn stability_bound_grows_like_inverse_sqrt_amin() {
    let spec = RandomFieldSpec::standard(CoefficientModel::Lognormal, 4).unwrap();
    let s = space(4, 1);
    let sampler = spec.sampler(s.coefficient_points());
    let f_norm = (1.0f64 / 3.0).sqrt();
    let trace = trace_constant_sq(s.mesh(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..6 {
        let y: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let pen = penalty_for_sample(
            PenaltyPolicy::Analytic,
            &spec,
            &y,
            Theta::NonSymmetric,
            trace,
            1.0,
        )
        .unwrap();
        let a = CoefficientValues::new(&s, sampler.values(&y).unwrap()).unwrap();
        let sys = assemble_ipdg(&s, &a, Theta::NonSymmetric, pen.eta, assemble_load(&s, |x| x[0])).unwrap();
        let u = solve_system(&sys).unwrap();
        let (a_min, _) = spec
            .bounds(&ParameterVector::new(y.clone(), spec.model().parameter_domain()).unwrap())
            .unwrap();
        let n = dg_norm(&s, &u, &a, pen.eta).unwrap();
        assert!(
            n.is_finite() && n <= f_norm / a_min.sqrt(),
            "{n} vs {}",
            f_norm / a_min.sqrt()
        );
    }
}

#[test]
fn penalty_examples() {
    let ln = RandomFieldSpec::new(CoefficientModel::Lognormal, 1.0, 1.3, 3).unwrap();
    let p = penalty_value(
        PenaltyPolicy::Analytic,
        &ln,
        &[0.0; 3],
        Theta::NonSymmetric,
        12.0,
        1.0,
    )
    .unwrap();
    assert_eq!(p.eta, 1.0);
    let aff = RandomFieldSpec::standard(CoefficientModel::Affine, 3).unwrap();
    let zero = ParameterVector::zeros(3, aff.model().parameter_domain());
    let (lo, hi) = aff.bounds(&zero).unwrap();
    let p = penalty_value(
        PenaltyPolicy::Analytic,
        &aff,
        &[0.1, 0.2, -0.3],
        Theta::Symmetric,
        12.0,
        1.0,
    )
    .unwrap();
    assert_eq!(p.eta, hi * hi / lo);
    let p = penalty_value(
        PenaltyPolicy::Constant(10.0),
        &aff,
        &[0.0; 3],
        Theta::NonSymmetric,
        12.0,
        1.0,
    )
    .unwrap();
    assert_eq!(p.eta, 10.0);
    assert!(!p.below_threshold());
    assert!(penalty_value(
        PenaltyPolicy::Constant(-1.0),
        &aff,
        &[0.0; 3],
        Theta::NonSymmetric,
        12.0,
        1.0
    )
    .is_err());
    assert!(trace_constant_sq(&Mesh::structured(4).unwrap(), 1) - 12.0 < 1e-12);
}

#[test]
fn conforming_p1_examples() {
    let (_, u) = solve_conforming_p1(4, |_| 1.0, |_| 0.0).unwrap();
    assert!(u.values.iter().all(|&v| v == 0.0));
    let (p1, u) = solve_conforming_p1(30, |_| 1.0, |x| x[0]).unwrap();
    assert!(p1.mean(&u) > 0.0);
    let mut pts = Vec::new();
    for m in [4, 8, 16, 32] {
        let (p1, u) = solve_conforming_p1(m, |_| 1.0, source).unwrap();
        pts.push((m as f64, p1.l2_error(&u, exact)));
    }
    let r = -fit_rate(&pts).unwrap().r;
    assert!((r - 2.0).abs() < 0.2, "{r}");
}
