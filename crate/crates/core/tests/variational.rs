mod common;

use common::*;
use grevf_core::features::covariance;
use grevf_core::prelude::*;
use grevf_core::variational::{epoch_batches, optimize_from, ElboObjective, Params};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_gaussian(m: usize, rng: &mut StdRng) -> FiniteGaussian {
    let mean: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let cov = SymMatrix::new(to_matrix(&random_spd(m, rng)).scale(0.5)).unwrap();
    FiniteGaussian::new(mean, cov).unwrap()
}

fn mixed_features(k: &Kernel, r: &QuadratureRule) -> FeatureSet {
    FeatureSet::new(
        vec![
            DualElement::dirac(0.2),
            make_bump_interdomain(&unit(), 0.5, 0.1).unwrap(),
            DualElement::inter_domain(|x| (3.0 * x).cos()),
            DualElement::dirac(0.85),
        ],
        *k,
        r.clone(),
    )
    .unwrap()
}

fn dense_elbo(vs: &VariationalState, ds: &Dataset) -> f64 {
    let fs = vs.features();
    let c_ll = to_rows(fs.gram().unwrap().as_matrix());
    let c_ld = to_rows(&fs.data_cross(ds.x()).unwrap());
    let kdiag: Vec<f64> = ds.x().iter().map(|x| fs.kernel().eval(*x, *x)).collect();
    literal_elbo(&c_ll, &c_ld, &kdiag, ds.y(), ds.noise_variance(), vs.q().mean(), &to_rows(vs.q().cov().as_matrix()))
}

#[test]
fn prior_state_pushes_forward_prior() {
    let k = se(0.3);
    let r = rule(64);
    let vs = VariationalState::prior(mixed_features(&k, &r)).unwrap();
    let targets = vec![DualElement::dirac(0.1), DualElement::inter_domain(|x| x), DualElement::dirac(0.6)];
    let (m, c) = q_moments(&vs, &targets).unwrap();
    assert!(m.iter().all(|v| *v == 0.0));
    let prior = covariance(&targets, &k, &r).unwrap();
    assert!(c.sub(&prior).unwrap().max_abs() <= 1e-10);
}

#[test]
fn zero_covariance_pins_feature() {
    let fs = FeatureSet::diracs(&[0.4], se(0.3), rule(16)).unwrap();
    let q = FiniteGaussian::new(vec![1.0], SymMatrix::new(Matrix::zeros(1, 1)).unwrap()).unwrap();
    let vs = VariationalState::new(fs, q).unwrap();
    let (m, v) = vs.predict_points(&[0.4]).unwrap();
    assert!((m[0] - 1.0).abs() <= 1e-12);
    assert!(v[0].abs() <= 1e-9, "{}", v[0]);
}

#[test]
fn moments_of_features_are_q() {
    let mut rng = StdRng::seed_from_u64(4);
    let r = rule(96);
    for k in [se(0.3), kernel(KernelFamily::Matern32, 0.2)] {
        for fs in [mixed_features(&k, &r), make_eigen_features(&k, &r, 4).unwrap()] {
            let q = random_gaussian(4, &mut rng);
            let vs = VariationalState::new(fs.clone(), q.clone()).unwrap();
            let (m, c) = q_moments(&vs, fs.elements()).unwrap();
            let scale = q.cov().max_abs().max(1.0);
            assert!(max_abs_diff(&m, q.mean()) <= 1e-8 * scale);
            assert!(c.sub(q.cov()).unwrap().max_abs() <= 1e-8 * scale);
        }
    }
}

#[test]
fn kl_closed_forms() {
    let mut rng = StdRng::seed_from_u64(1);
    let p = random_gaussian(3, &mut rng);
    assert!(kl_finite_gaussians(&p, &p).unwrap().abs() <= 1e-10);
    let q1 = FiniteGaussian::new(vec![1.0], SymMatrix::identity(1)).unwrap();
    let p1 = FiniteGaussian::new(vec![0.0], SymMatrix::identity(1)).unwrap();
    assert!((kl_finite_gaussians(&q1, &p1).unwrap() - 0.5).abs() <= 1e-15);
    assert_eq!(kl_finite_gaussians(&q1, &p).unwrap_err().category(), "shape");
}

#[test]
fn kl_monte_carlo() {
    let mut rng = StdRng::seed_from_u64(77);
    let q = random_gaussian(3, &mut rng);
    let p = random_gaussian(3, &mut rng);
    let kl = kl_finite_gaussians(&q, &p).unwrap();
    let lq = to_rows(q.factor().lower());
    let (qc, pc) = (to_rows(q.cov().as_matrix()), to_rows(p.cov().as_matrix()));
    let (mut sum, mut sq) = (0.0, 0.0);
    let n = 1_000_000;
    for _ in 0..n {
        let z: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x: Vec<f64> = matvec(&lq, &z).iter().zip(q.mean()).map(|(a, b)| a + b).collect();
        let dq: Vec<f64> = x.iter().zip(q.mean()).map(|(a, b)| a - b).collect();
        let dp: Vec<f64> = x.iter().zip(p.mean()).map(|(a, b)| a - b).collect();
        let s = mvn_log_density(&dq, &qc) - mvn_log_density(&dp, &pc);
        sum += s;
        sq += s * s;
    }
    let mean = sum / n as f64;
    let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((mean - kl).abs() <= 3.0 * se, "mc {mean} ± {se}, closed {kl}");
}

#[test]
fn elbo_tight_at_exact_posterior() {
    let ds = dataset(8, 0.1, 3);
    let k = se(0.3);
    let fs = FeatureSet::diracs(ds.x(), k, rule(32)).unwrap();
    let post = ExactPosterior::fit(&ds, &k).unwrap();
    let (m, c) = post.predict(&DualElement::diracs(ds.x())).unwrap();
    let vs = VariationalState::new(fs, FiniteGaussian::new(m, c).unwrap()).unwrap();
    let lm = log_marginal(&ds, &k).unwrap();
    assert!((elbo(&vs, &ds).unwrap() - lm).abs() <= 1e-6);
    assert!(kl_to_posterior(&vs, &ds).unwrap().abs() <= 1e-6);
}

#[test]
fn elbo_matches_literal_formula() {
    let mut rng = StdRng::seed_from_u64(12);
    let ds = dataset(10, 0.2, 9);
    let k = kernel(KernelFamily::Matern52, 0.3);
    let fs = mixed_features(&k, &rule(64));
    let prior = VariationalState::prior(fs.clone()).unwrap();
    assert!((elbo(&prior, &ds).unwrap() - dense_elbo(&prior, &ds)).abs() <= 1e-8);
    for _ in 0..5 {
        let vs = VariationalState::new(fs.clone(), random_gaussian(4, &mut rng)).unwrap();
        let a = elbo(&vs, &ds).unwrap();
        assert!((a - dense_elbo(&vs, &ds)).abs() <= 1e-8 * a.abs().max(1.0));
    }
}

#[test]
fn kl_to_posterior_probe() {
    let ds = dataset(10, 0.1, 2);
    let k = se(0.25);
    let fs = FeatureSet::diracs(ds.x(), k, rule(32)).unwrap();
    let opt = optimal_params(&fs, &ds).unwrap();
    let vs = VariationalState::new(fs.clone(), opt.clone()).unwrap();
    let base = kl_to_posterior(&vs, &ds).unwrap();
    assert!(base.abs() <= 1e-6);
    for i in [0, 4, 9] {
        let mut mu = opt.mean().to_vec();
        mu[i] += 1.0;
        let moved = VariationalState::new(fs.clone(), FiniteGaussian::new(mu, opt.cov().clone()).unwrap()).unwrap();
        assert!(kl_to_posterior(&moved, &ds).unwrap() > base);
    }
}

#[test]
fn optimal_params_against_raw_formula() {
    for (seed, fs_kind) in [(1u64, 0), (2, 1)] {
        let ds = dataset(9, 0.15, seed);
        let k = se(0.3);
        let r = rule(64);
        let fs = if fs_kind == 0 { mixed_features(&k, &r) } else { make_eigen_features(&k, &r, 4).unwrap() };
        let c_ll = to_rows(fs.gram().unwrap().as_matrix());
        let c_ld = to_rows(&fs.data_cross(ds.x()).unwrap());
        let s2 = ds.noise_variance();
        let ldl = matmul(&c_ld, &transpose(&c_ld));
        let m = c_ll.len();
        let a: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| s2 * c_ll[i][j] + ldl[i][j]).collect()).collect();
        let mu = matvec(&matmul(&c_ll, &inverse(&a)), &matvec(&c_ld, ds.y()));
        let b: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| c_ll[i][j] + ldl[i][j] / s2).collect()).collect();
        let sigma = matmul(&matmul(&c_ll, &inverse(&b)), &c_ll);
        let opt = optimal_params(&fs, &ds).unwrap();
        let scale = mu.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        assert!(max_abs_diff(opt.mean(), &mu) <= 1e-8 * scale);
        assert!(opt.cov().sub(&to_matrix(&sigma)).unwrap().max_abs() <= 1e-8 * c_ll[0][0].max(1.0));
    }
}

#[test]
fn optimal_params_closed_forms() {
    let ds = dataset(7, 0.05, 5);
    let k = kernel(KernelFamily::Matern32, 0.3);
    let fs = FeatureSet::diracs(ds.x(), k, rule(16)).unwrap();
    let (exact_mean, _) = ExactPosterior::fit(&ds, &k).unwrap().predict_points(ds.x()).unwrap();
    assert!(max_abs_diff(optimal_params(&fs, &ds).unwrap().mean(), &exact_mean) <= 1e-8);

    let zero = Dataset::new(unit(), ds.x().to_vec(), vec![0.0; 7], 0.05).unwrap();
    assert!(optimal_params(&fs, &zero).unwrap().mean().iter().all(|v| v.abs() <= 1e-15));

    let one = Dataset::new(unit(), vec![0.0], vec![1.0], 0.1).unwrap();
    let fs1 = FeatureSet::diracs(&[0.0], se(1.0), rule(8)).unwrap();
    assert!((optimal_params(&fs1, &one).unwrap().mean()[0] - 1.0 / 1.1).abs() <= 1e-12);
}

#[test]
fn optimal_predict_two_routes() {
    let mut rng = StdRng::seed_from_u64(21);
    let r = rule(64);
    for k in [se(0.2), kernel(KernelFamily::Matern12, 0.3)] {
        for fs in [mixed_features(&k, &r), make_eigen_features(&k, &r, 5).unwrap()] {
            let ds = dataset(15, 0.05 + rng.random::<f64>() * 0.2, rng.random());
            let targets = vec![DualElement::dirac(0.05), DualElement::dirac(0.5), DualElement::inter_domain(|x| x * x)];
            let (m1, c1) = optimal_predict(&fs, &ds, &targets).unwrap();
            let vs = VariationalState::new(fs.clone(), optimal_params(&fs, &ds).unwrap()).unwrap();
            let (m2, c2) = q_moments(&vs, &targets).unwrap();
            assert!(max_abs_diff(&m1, &m2) <= 1e-8);
            assert!(c1.sub(&c2).unwrap().max_abs() <= 1e-8);
        }
    }
}

#[test]
fn optimal_predict_recovers_exact() {
    let ds = dataset(20, 0.02, 8);
    for k in [se(0.2), kernel(KernelFamily::Matern32, 0.2)] {
        let fs = FeatureSet::diracs(ds.x(), k, rule(32)).unwrap();
        let targets = DualElement::diracs(&unit().linspace(25));
        let (m1, c1) = optimal_predict(&fs, &ds, &targets).unwrap();
        let (m2, c2) = predict_exact(&ExactPosterior::fit(&ds, &k).unwrap(), &targets).unwrap();
        assert!(max_abs_diff(&m1, &m2) <= 1e-7);
        assert!(c1.sub(&c2).unwrap().max_abs() <= 1e-7);
    }
}

#[test]
fn far_targets_fall_back_to_prior() {
    let x: Vec<f64> = (0..10).map(|i| 0.03 * i as f64).collect();
    let y: Vec<f64> = x.iter().map(|v| (20.0 * v).sin()).collect();
    let ds = Dataset::new(unit(), x, y, 0.01).unwrap();
    let k = se(0.02);
    let fs = FeatureSet::diracs(&[0.05, 0.15, 0.25], k, rule(64)).unwrap();
    let (m, c) = optimal_predict(&fs, &ds, &DualElement::diracs(&[0.9, 0.95])).unwrap();
    assert!(m.iter().all(|v| v.abs() <= 1e-3));
    assert!((c[(0, 0)] - 1.0).abs() <= 1e-3 && (c[(1, 1)] - 1.0).abs() <= 1e-3);
    assert!((c[(0, 1)] - k.eval(0.9, 0.95)).abs() <= 1e-3);
}

fn random_params(m: usize, rng: &mut StdRng) -> Params {
    let len = m + m * (m + 1) / 2;
    let v: Vec<f64> = (0..len).map(|_| rng.random::<f64>() - 0.5).collect();
    Params::from_vec(m, &v).unwrap()
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut rng = StdRng::seed_from_u64(31);
    let r = rule(64);
    for trial in 0..5 {
        let ds = dataset(12, 0.05 + 0.1 * trial as f64, 100 + trial);
        let k = kernel(if trial % 2 == 0 { KernelFamily::SquaredExponential } else { KernelFamily::Matern52 }, 0.3);
        let fs = if trial < 3 { mixed_features(&k, &r) } else { make_eigen_features(&k, &r, 4).unwrap() };
        let obj = ElboObjective::new(&fs, &ds).unwrap();
        let p = random_params(4, &mut rng);
        let g = obj.gradient(&p).unwrap();
        let fd = fd_gradient(|v| obj.value(&Params::from_vec(4, v).unwrap()).unwrap(), &p.to_vec(), 1e-5);
        let scale = g.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let err = max_abs_diff(&g, &fd);
        assert!(err <= 1e-5 * scale, "trial {trial}: {err} (scale {scale})");
    }
}

#[test]
fn optimum_is_stationary() {
    let ds = dataset(20, 0.05, 14);
    let k = se(0.2);
    let fs = FeatureSet::diracs(&unit().linspace(5).iter().map(|x| 0.1 + 0.8 * x).collect::<Vec<_>>(), k, rule(32)).unwrap();
    let obj = ElboObjective::new(&fs, &ds).unwrap();
    let p = Params::from_state(&optimal_state(&fs, &ds).unwrap());
    let fd = fd_gradient(|v| obj.value(&Params::from_vec(5, v).unwrap()).unwrap(), &p.to_vec(), 1e-5);
    let inf = fd.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(inf <= 1e-5, "{inf}");
}

#[test]
fn superset_never_decreases_optimal_elbo() {
    let ds = dataset(25, 0.05, 17);
    let k = kernel(KernelFamily::Matern32, 0.2);
    let mut fs = FeatureSet::diracs(&[0.5], k, rule(64)).unwrap();
    let mut prev = elbo(&optimal_state(&fs, &ds).unwrap(), &ds).unwrap();
    let extra = [
        DualElement::dirac(0.1),
        make_bump_interdomain(&unit(), 0.3, 0.1).unwrap(),
        DualElement::inter_domain(|x| (5.0 * x).sin()),
        DualElement::dirac(0.9),
        DualElement::rkhs_preimage(|x| x * x),
        DualElement::dirac(0.7),
    ];
    for e in extra {
        fs = fs.with_element(e).unwrap();
        let next = elbo(&optimal_state(&fs, &ds).unwrap(), &ds).unwrap();
        assert!(next >= prev - 1e-8, "{next} < {prev}");
        prev = next;
    }
    assert!(prev <= log_marginal(&ds, fs.kernel()).unwrap() + 1e-8);
}

fn optimizer_fixture() -> (FeatureSet, Dataset) {
    let ds = dataset(20, 0.05, 42);
    let z: Vec<f64> = Interval::new(0.1, 0.9).unwrap().linspace(5);
    (FeatureSet::diracs(&z, se(0.2), rule(32)).unwrap(), ds)
}

#[test]
fn full_batch_ascent_reaches_closed_form() {
    let (fs, ds) = optimizer_fixture();
    let target = elbo(&optimal_state(&fs, &ds).unwrap(), &ds).unwrap();
    let res = optimize_elbo(&fs, &ds, &OptimizerConfig { iterations: 2000, ..Default::default() }).unwrap();
    assert!(res.iterations <= 2000);
    assert!((res.final_elbo() - target).abs() <= 1e-4, "{} vs {target}", res.final_elbo());
    assert!((elbo(&res.state, &ds).unwrap() - res.final_elbo()).abs() <= 1e-9);
}

#[test]
fn kl_decreases_along_ascent() {
    let (fs, ds) = optimizer_fixture();
    let lm = log_marginal(&ds, fs.kernel()).unwrap();
    let res = optimize_elbo(&fs, &ds, &OptimizerConfig { iterations: 300, ..Default::default() }).unwrap();
    let kls: Vec<f64> = res.trace.iter().map(|e| lm - e).collect();
    assert!(kls.windows(2).all(|w| w[1] <= w[0] + 1e-8));
    assert!(kls.iter().all(|k| *k >= -1e-8));
}

#[test]
fn epoch_gradient_is_full_gradient() {
    let (fs, ds) = optimizer_fixture();
    let obj = ElboObjective::new(&fs, &ds).unwrap();
    let mut rng = StdRng::seed_from_u64(3);
    let p = random_params(5, &mut rng);
    let full = obj.gradient(&p).unwrap();
    let batches = epoch_batches(20, 5, &mut <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9));
    assert_eq!(batches.len(), 4);
    let mut avg = vec![0.0; full.len()];
    for b in &batches {
        for (a, g) in avg.iter_mut().zip(obj.gradient_on(&p, b).unwrap()) {
            *a += g / batches.len() as f64;
        }
    }
    let scale = full.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    assert!(max_abs_diff(&avg, &full) <= 1e-10 * scale);
    let v_avg: f64 = batches.iter().map(|b| obj.value_on(&p, b).unwrap()).sum::<f64>() / 4.0;
    assert!((v_avg - obj.value(&p).unwrap()).abs() <= 1e-10 * v_avg.abs().max(1.0));
}

#[test]
fn minibatch_runs_are_reproducible() {
    let (fs, ds) = optimizer_fixture();
    let cfg = OptimizerConfig { step: 1e-3, iterations: 200, batch_size: Some(5), seed: 7, ..Default::default() };
    let a = optimize_elbo(&fs, &ds, &cfg).unwrap();
    let b = optimize_elbo(&fs, &ds, &cfg).unwrap();
    assert_eq!(a.trace, b.trace);
    assert!(a.final_elbo() > a.trace[0]);
}

#[test]
fn zero_iterations_keep_initial_state() {
    let (fs, ds) = optimizer_fixture();
    let obj = ElboObjective::new(&fs, &ds).unwrap();
    let init = random_params(5, &mut StdRng::seed_from_u64(1));
    let res = optimize_from(&obj, init.clone(), &OptimizerConfig { iterations: 0, ..Default::default() }).unwrap();
    assert_eq!(res.trace.len(), 1);
    assert_eq!(Params::from_state(&res.state).to_vec().len(), init.to_vec().len());
    assert!(max_abs_diff(&Params::from_state(&res.state).to_vec(), &init.to_vec()) <= 1e-12);
}

#[test]
fn divergent_steps_are_reported() {
    let (fs, ds) = optimizer_fixture();
    let cfg = OptimizerConfig { step: 1e200, iterations: 10, batch_size: Some(5), ..Default::default() };
    match optimize_elbo(&fs, &ds, &cfg) {
        Err(Error::Divergence { iteration }) => assert!(iteration >= 1),
        other => panic!("expected divergence, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn elbo_below_log_marginal(seed in any::<u64>(), n in 2usize..15, noise in 0.01f64..1.0, m in 1usize..5) {
        let mut rng = StdRng::seed_from_u64(seed);
        let ds = dataset(n, noise, seed);
        let k = se(0.3);
        let fs = make_eigen_features(&k, &rule(48), m).unwrap();
        let vs = VariationalState::new(fs.clone(), random_gaussian(m, &mut rng)).unwrap();
        let lm = log_marginal(&ds, &k).unwrap();
        prop_assert!(elbo(&vs, &ds).unwrap() <= lm + 1e-8);
        prop_assert!(kl_to_posterior(&vs, &ds).unwrap() >= -1e-8);
        prop_assert!(elbo(&optimal_state(&fs, &ds).unwrap(), &ds).unwrap() <= lm + 1e-8);
    }

    #[test]
    fn clustered_inducing_points_keep_covariance_psd(seed in any::<u64>(), n in 10usize..45, m in 2usize..10, ell in 0.1f64..0.5) {
        let ds = dataset(n, 0.01, seed);
        let k = se(ell);
        // The leftmost sorted inputs make C_LL numerically singular.
        let fs = FeatureSet::diracs(&ds.x()[..m], k, rule(16)).unwrap();
        let (_, c) = optimal_predict(&fs, &ds, &DualElement::diracs(&unit().linspace(30))).unwrap();
        prop_assert!(min_eig_over_trace(&c) >= -1e-8);
    }
}
