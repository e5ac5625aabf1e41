mod common;

use common::*;
use face_core::face::center_columns;
use face_core::linalg::{frob2, t_mul};
use face_core::sim::{generate_sample, mcar_mask, CovModel, GridTruth};
use face_core::structured::psd_factor;
use face_core::*;
use proptest::prelude::*;

fn fixed(lambda: f64) -> FaceConfig {
    FaceConfig {
        search: SearchSpec::Fixed(lambda),
        ..FaceConfig::default()
    }
}

fn stats_for(y: MatRef<'_, f64>, f: &SmootherFactor) -> PgcvStats {
    let yt = t_mul(f.a_s(), y);
    PgcvStats::with_residual(y, yt.as_ref(), f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn implied_covariance_equals_explicit_sandwich(
        j in 30usize..=100,
        knots in 2usize..=8,
        n in 2usize..=20,
        lambda_idx in 0usize..5,
        seed in any::<u64>(),
    ) {
        let lambda = [0.0, 0.1, 1.0, 10.0, 1e4][lambda_idx];
        let spec = BasisSpec::equispaced(j, knots);
        let f = factorize_smoother(&spec).unwrap();
        let y = gaussian(j, n, &mut rng(seed));
        let fit = face_fit(&DataMatrix::new(y.clone()).unwrap(), &f, &fixed(lambda)).unwrap();
        let s = direct_smoother(&spec, lambda);
        let want = sandwich(s.as_ref(), centered(y.as_ref()).as_ref());
        let got = fit.smoothed_covariance().unwrap();
        prop_assert!(frob((got - &want).as_ref()) <= 1e-8 * frob(want.as_ref()));
        prop_assert!(fit.rank() <= f.num_basis().min(n));
    }

    #[test]
    fn fast_pgcv_equals_definition(
        j in 30usize..=100,
        knots in 2usize..=8,
        n in 1usize..=20,
        lambda_idx in 0usize..5,
        alpha in 1.0f64..1.5,
        seed in any::<u64>(),
    ) {
        let lambda = [0.0, 0.1, 1.0, 10.0, 1e4][lambda_idx];
        let spec = BasisSpec::equispaced(j, knots);
        let f = factorize_smoother(&spec).unwrap();
        let y = gaussian(j, n, &mut rng(seed));
        let fast = pgcv(lambda, &stats_for(y.as_ref(), &f), f.s(), alpha).unwrap();
        let s = direct_smoother(&spec, lambda);
        let slow = pgcv_definition(s.as_ref(), y.as_ref(), alpha);
        prop_assert!((fast - slow).abs() <= 1e-8 * slow);
    }

    #[test]
    fn eigen_outputs_are_consistent(j in 40usize..=120, n in 3usize..=15, seed in any::<u64>()) {
        let f = factorize_smoother(&BasisSpec::equispaced(j, 10)).unwrap();
        let y = gaussian(j, n, &mut rng(seed));
        let fit = face_fit(&DataMatrix::new(y).unwrap(), &f, &FaceConfig::default()).unwrap();
        let g = t_mul(fit.eigvecs.as_ref(), fit.eigvecs.as_ref());
        prop_assert!(max_abs_diff(g.as_ref(), Mat::<f64>::identity(fit.rank(), fit.rank()).as_ref()) < 1e-8);
        prop_assert!(fit.eigvals_matrix.iter().all(|v| *v >= 0.0));
        prop_assert!(fit.eigvals_matrix.windows(2).all(|w| w[0] >= w[1]));
        for (m, fv) in fit.eigvals_matrix.iter().zip(&fit.eigvals_function) {
            prop_assert_eq!(*fv, m / j as f64);
        }
        prop_assert!(fit.sigma2 >= 0.0);
    }

    #[test]
    fn pair_products_match_sums(n_pairs in 1usize..=5, j in 2usize..=12, seed in any::<u64>()) {
        let y = gaussian(j, 2 * n_pairs, &mut rng(seed));
        let (hx, hu) = build_pair_designs(n_pairs).unwrap();
        let kx = y.as_ref() * hx.h().as_ref() * y.transpose();
        let ku = y.as_ref() * hu.h().as_ref() * y.transpose();
        let w = 1.0 / (2 * n_pairs) as f64;
        let mut sx = Mat::<f64>::zeros(j, j);
        let mut su = Mat::<f64>::zeros(j, j);
        for i in 0..n_pairs {
            for r in 0..j {
                for c in 0..j {
                    let (a_r, a_c) = (y[(r, i)], y[(c, i)]);
                    let (c_r, c_c) = (y[(r, n_pairs + i)], y[(c, n_pairs + i)]);
                    sx[(r, c)] += w * (a_r * c_c + c_r * a_c);
                    su[(r, c)] += w * (a_r - c_r) * (a_c - c_c);
                }
            }
        }
        prop_assert!(max_abs_diff(kx.as_ref(), sx.as_ref()) < 1e-10);
        prop_assert!(max_abs_diff(ku.as_ref(), su.as_ref()) < 1e-10);
    }
}

#[test]
fn pgcv_fixed_points() {
    let spec = BasisSpec::equispaced(50, 4);
    let f = factorize_smoother(&spec).unwrap();
    let y = uniform(50, 6, &mut rng(21));
    let stats = stats_for(y.as_ref(), &f);
    for lambda in [3.0, 1e12] {
        let fast = pgcv(lambda, &stats, f.s(), 1.0).unwrap();
        let slow = pgcv_definition(qr_smoother(&spec, lambda).as_ref(), y.as_ref(), 1.0);
        assert!((fast - slow).abs() <= 1e-8 * slow, "lambda {lambda}: {fast} vs {slow}");
    }
}

#[test]
fn pure_noise_is_smoothed_heavily() {
    let f = factorize_smoother(&BasisSpec::equispaced(500, 100)).unwrap();
    let y = gaussian(500, 20, &mut rng(5));
    let sel = select_lambda(&stats_for(y.as_ref(), &f), f.s(), 1.0, &SearchSpec::default()).unwrap();
    // median of the log10 grid [-6, 8]
    assert!(sel.lambda >= 10.0, "{}", sel.lambda);
}

#[test]
fn null_space_data_pick_the_largest_lambda() {
    let j = 200;
    let spec = BasisSpec::equispaced(j, 20);
    let b = bspline_design(&spec).unwrap();
    let mut r = rng(6);
    let coef = uniform(2, 10, &mut r);
    // coefficients linear in the basis index are not penalized
    let theta = Mat::from_fn(spec.num_basis(), 10, |k, i| coef[(0, i)] + coef[(1, i)] * k as f64);
    let noise = gaussian(j, 10, &mut r);
    let y = b.as_ref() * theta.as_ref() + noise * 0.01;
    let f = factorize_smoother(&spec).unwrap();
    let sel = select_lambda(&stats_for(y.as_ref(), &f), f.s(), 1.0, &SearchSpec::default()).unwrap();
    let best_grid = sel.scan.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(best_grid.0, sel.scan.last().unwrap().0);
    assert!(sel.lambda >= 10f64.powf(7.3), "{}", sel.lambda);
}

#[test]
fn sigma2_recovers_case_one_noise() {
    let model = CovModel::case(1).unwrap();
    let f = factorize_smoother(&BasisSpec::equispaced(3000, 100)).unwrap();
    let mean: f64 = (0..20)
        .map(|rep| {
            let y = generate_sample(&model, 3000, 50, 100 + rep).unwrap();
            face_fit(&y, &f, &FaceConfig::default()).unwrap().sigma2
        })
        .sum::<f64>()
        / 20.0;
    assert!((mean / 1.75 - 1.0).abs() < 0.1, "{mean}");
}

#[test]
fn numeric_scores_match_riemann_sums() {
    let (j, n) = (60, 12);
    let f = factorize_smoother(&BasisSpec::equispaced(j, 8)).unwrap();
    let y = uniform(j, n, &mut rng(8));
    let fit = face_fit(&DataMatrix::new(y.clone()).unwrap(), &f, &FaceConfig::default()).unwrap();
    let got = scores_numeric(&fit);
    let want = riemann_scores(centered(y.as_ref()).as_ref(), fit.eigvecs.as_ref(), fit.n_selected);
    assert!(max_abs_diff(got.xi.as_ref(), want.as_ref()) < 1e-10);
    assert_eq!(got.xi.ncols(), fit.n_selected);

    let sj = (j as f64).sqrt();
    let curve = Mat::from_fn(j, 1, |r, _| fit.mean[r] + sj * fit.eigvecs[(r, 0)]);
    let s = fit.scores_for(curve.as_ref(), ScoreMethod::NumericIntegration).unwrap();
    assert!((s.xi[(0, 0)] - 1.0).abs() < 1e-10);
    for k in 1..fit.n_selected {
        assert!(s.xi[(0, k)].abs() < 1e-10);
    }
}

#[test]
fn blup_matches_dense_mixed_model() {
    let (j, n) = (60, 15);
    let f = factorize_smoother(&BasisSpec::equispaced(j, 8)).unwrap();
    let y = uniform(j, n, &mut rng(9));
    let fit = face_fit(&DataMatrix::new(y.clone()).unwrap(), &f, &FaceConfig::default()).unwrap();
    assert!(fit.sigma2 > 0.0);
    let got = scores_blup(&fit);
    let sigma = &fit.eigvals_matrix[..fit.n_selected];
    let want = dense_blup(centered(y.as_ref()).as_ref(), fit.eigvecs.as_ref(), sigma, fit.sigma2);
    assert!(max_abs_diff(got.xi.as_ref(), want.as_ref()) < 1e-8);
}

#[test]
fn impute_step_minimizes_the_objective() {
    let (j, n) = (60, 10);
    let f = factorize_smoother(&BasisSpec::equispaced(j, 8)).unwrap();
    let y = uniform(j, n, &mut rng(10));
    let mut fit = face_fit(&DataMatrix::new(y.clone()).unwrap(), &f, &FaceConfig::default()).unwrap();
    fit.n_selected = 2;
    let mask = Mask::from_fn(j, n, |r, c| c != 0 || !(25..33).contains(&r));
    let d = MaskedData::new(y.clone(), mask).unwrap();
    let imp = impute_step(&fit, &d).unwrap();

    let sj = (j as f64).sqrt();
    let obs: Vec<usize> = (0..j).filter(|r| !(25..33).contains(r)).collect();
    let mis: Vec<usize> = (25..33).collect();
    let yc = |r: usize| y[(r, 0)] - fit.mean[r];
    let (s2, lam) = (fit.sigma2, [fit.eigvals_matrix[0], fit.eigvals_matrix[1]]);
    // variables: xi_1, xi_2, then the centered missing values
    let objective = |x: &[f64]| {
        let pred = |r: usize| sj * (fit.eigvecs[(r, 0)] * x[0] + fit.eigvecs[(r, 1)] * x[1]);
        let mut q = 0.0;
        for (m, &r) in mis.iter().enumerate() {
            q += (x[2 + m] - pred(r)).powi(2);
        }
        for &r in &obs {
            q += (yc(r) - pred(r)).powi(2);
        }
        q / (2.0 * s2) + 0.5 * (x[0] * x[0] / lam[0] + x[1] * x[1] / lam[1])
    };
    let oracle = quadratic_minimizer(2 + mis.len(), objective);
    assert!((imp.scores.xi[(0, 0)] - oracle[0]).abs() < 1e-6);
    assert!((imp.scores.xi[(0, 1)] - oracle[1]).abs() < 1e-6);
    for (m, &r) in mis.iter().enumerate() {
        assert!((imp.missing_values[0][m] - fit.mean[r] - oracle[2 + m]).abs() < 1e-6);
    }

    let mut at: Vec<f64> = vec![imp.scores.xi[(0, 0)], imp.scores.xi[(0, 1)]];
    at.extend(mis.iter().enumerate().map(|(m, &r)| imp.missing_values[0][m] - fit.mean[r]));
    let best = objective(&at);
    for k in 0..at.len() {
        for step in [1e-3, -1e-3] {
            let mut p = at.clone();
            p[k] += step;
            assert!(objective(&p) >= best);
        }
    }
}

#[test]
fn incomplete_fit_keeps_observed_entries_and_converges() {
    let model = CovModel::case(1).unwrap();
    let (j, n) = (500, 50);
    let f = factorize_smoother(&BasisSpec::equispaced(j, 100)).unwrap();
    let mut within_15 = 0;
    for rep in 0..100u64 {
        let y = generate_sample(&model, j, n, 1000 + rep).unwrap();
        let mask = mcar_mask(j, n, 5000 + rep).unwrap();
        let d = MaskedData::new(y.values().to_owned(), mask.clone()).unwrap();
        let (_, trace) = face_fit_incomplete(&d, &f, &FaceConfig::default(), 50, 1e-4).unwrap();
        if trace.converged && trace.iterations <= 15 {
            within_15 += 1;
        }
        if rep < 5 {
            for c in 0..n {
                for r in 0..j {
                    if mask.is_observed(r, c) {
                        assert_eq!(trace.completed[(r, c)].to_bits(), y.values()[(r, c)].to_bits());
                    }
                }
            }
        }
    }
    assert!(within_15 >= 95, "{within_15} of 100 converged within 15 iterations");
}

#[test]
fn structured_fit_matches_positive_part_oracle() {
    let (j, n_pairs) = (70, 6);
    let spec = BasisSpec::equispaced(j, 8);
    let f = factorize_smoother(&spec).unwrap();
    let y = gaussian(j, 2 * n_pairs, &mut rng(12));
    let (hx, hu) = build_pair_designs(n_pairs).unwrap();
    let cfg = FaceConfig {
        center: false,
        search: SearchSpec::Fixed(2.0),
        ..FaceConfig::default()
    };
    for design in [&hx, &hu] {
        let h1 = psd_factor(design).unwrap();
        let z = y.as_ref() * h1.as_ref();
        let eig = face_core::sym_eig(design.h().as_ref()).unwrap();
        let pos: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
        let hp = low_rank(eig.vectors.as_ref(), &pos);
        let target = y.as_ref() * hp.as_ref() * y.transpose();
        let zz = z.as_ref() * z.transpose();
        assert!(frob((zz - &target).as_ref()) <= 1e-8 * frob(target.as_ref()));

        let fit = face_fit_structured(&DataMatrix::new(y.clone()).unwrap(), design, &f, &cfg).unwrap();
        let s = direct_smoother(&spec, 2.0);
        let want = s.as_ref() * target.as_ref() * s.as_ref();
        let got = fit.smoothed_covariance().unwrap();
        assert!(frob((got - &want).as_ref()) <= 1e-8 * frob(want.as_ref()));

        let fast = pgcv(2.0, &stats_for(z.as_ref(), &f), f.s(), 1.0).unwrap();
        let slow = pgcv_definition(s.as_ref(), z.as_ref(), 1.0);
        assert!((fast - slow).abs() <= 1e-8 * slow);
    }
}

#[test]
fn paired_design_recovers_between_pair_eigenfunctions() {
    let (j, n_pairs) = (800, 100);
    let kx = GridTruth::equispaced(&CovModel::case(1).unwrap(), j).unwrap();
    let ku = GridTruth::equispaced(&CovModel::case(4).unwrap(), j).unwrap();
    let mut r = rng(13);
    let x = kx.sample_curves(n_pairs, &mut r);
    let ua = ku.sample_curves(n_pairs, &mut r);
    let uc = ku.sample_curves(n_pairs, &mut r);
    let noise = gaussian(j, 2 * n_pairs, &mut r);
    let y = Mat::from_fn(j, 2 * n_pairs, |t, c| {
        let i = c % n_pairs;
        let u = if c < n_pairs { ua[(t, i)] } else { uc[(t, i)] };
        x[(t, i)] + u + 0.5 * noise[(t, c)]
    });
    let (hx, _) = build_pair_designs(n_pairs).unwrap();
    let f = factorize_smoother(&BasisSpec::equispaced(j, 100)).unwrap();
    let fit = face_fit_structured(&DataMatrix::new(y).unwrap(), &hx, &f, &FaceConfig::default()).unwrap();
    for k in 0..3 {
        let psi = kx.eigfuncs.col(k);
        let v = fit.eigvecs.col(k);
        let dot: f64 = psi.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        let corr = dot / (psi.iter().map(|a| a * a).sum::<f64>().sqrt());
        assert!(corr.abs() > 0.95, "component {}: {corr}", k + 1);
    }
}

#[test]
fn centering_helper_matches_oracle() {
    let y = uniform(20, 5, &mut rng(14));
    let (_, c) = center_columns(y.as_ref());
    assert!(max_abs_diff(c.as_ref(), centered(y.as_ref()).as_ref()) < 1e-15);
    assert!(frob2(c.as_ref()) <= frob2(y.as_ref()));
}
