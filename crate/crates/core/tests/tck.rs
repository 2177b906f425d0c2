mod common;

use common::{normal_pdf, random_dataset, synthetic};
use tckae::seed::rng;
use tckae::tck::gmm::{posteriors_for_view, temporal_correlation};
use tckae::tck::{
    gram_matrix, map_em_fit, posteriors, sample_member_configs, GmmParams, MapEm, MemberView, PriorParams,
};
use tckae::tck::log_likelihood_observed;
use tckae::{fit_tck, kernel_matrix, DenseMatrix, TckConfig, TckModel};

fn small_config(c: usize, r: usize, seed: u64) -> TckConfig {
    TckConfig {
        max_components: c,
        realizations: r,
        master_seed: seed,
        ..TckConfig::for_shape(20, 10)
    }
}

fn min_max_eigen(k: &DenseMatrix) -> (f64, f64) {
    let ev = k.symmetric_eigenvalues().unwrap();
    (ev[0], *ev.last().unwrap())
}

#[test]
fn member_specs_count_and_determinism() {
    let cfg = TckConfig {
        max_components: 3,
        realizations: 2,
        ..TckConfig::for_shape(20, 10)
    };
    let specs = sample_member_configs(&cfg, 50, 20, 10).unwrap();
    let g: Vec<usize> = specs.iter().map(|s| s.components).collect();
    assert_eq!(g, vec![2, 2, 3, 3]);
    assert_eq!(specs, sample_member_configs(&cfg, 50, 20, 10).unwrap());
    for s in &specs {
        assert!(s.segment.1 - s.segment.0 >= cfg.min_segment && s.segment.1 <= 20);
        assert!(s.attributes.len() >= 2 && s.attributes.iter().all(|&a| a < 10));
        assert_eq!(s.subsample.len(), 40);
        assert!((0.1..=1.0).contains(&s.prior.a0) && (0.05..=0.2).contains(&s.prior.n0));
    }
    let other = TckConfig {
        master_seed: 1,
        ..cfg.clone()
    };
    assert_ne!(specs, sample_member_configs(&other, 50, 20, 10).unwrap());

    let too_long = TckConfig {
        min_segment: 21,
        ..cfg
    };
    assert!(sample_member_configs(&too_long, 50, 20, 10).is_err());
}

#[test]
fn log_likelihood_examples() {
    assert_eq!(log_likelihood_observed(&[1.0, 2.0], &[false, false], &[0.0, 0.0], &[1.0, 1.0]), 0.0);
    let at_mean = log_likelihood_observed(&[0.3], &[true], &[0.3], &[1.0]);
    assert!((at_mean + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);

    let x = [0.7, -1.2, 5.0];
    let mean = [0.1, -1.0, 0.0];
    let var = [0.5, 2.0, 3.0];
    let ll = log_likelihood_observed(&x, &[true, true, false], &mean, &var);
    let oracle = (normal_pdf(x[0], mean[0], var[0]) * normal_pdf(x[1], mean[1], var[1])).ln();
    assert!((ll - oracle).abs() < 1e-12);
}

#[test]
fn posterior_examples() {
    let params = GmmParams {
        weights: vec![0.5, 0.5],
        means: vec![0.0, 10.0],
        variances: vec![1.0, 1.0],
    };
    let view = MemberView::from_parts(2, 1, 1, vec![0.0, 123.0], vec![true, false]).unwrap();
    let p = posteriors_for_view(&view, &params);
    // Bayes: the second component's odds are exp(-50)
    let odds = (-50.0_f64).exp();
    assert!((p.get(0, 1) - odds / (1.0 + odds)).abs() < 1e-30);
    assert!((p.get(0, 0) - 1.0 / (1.0 + odds)).abs() < 1e-15);
    // fully missing row falls back to the mixing weights
    assert_eq!(p.row(1), &[0.5, 0.5]);

    let skewed = GmmParams {
        weights: vec![0.2, 0.8],
        ..params
    };
    let p = posteriors_for_view(&view, &skewed);
    assert!((p.get(1, 0) - 0.2).abs() < 1e-15 && (p.get(1, 1) - 0.8).abs() < 1e-15);
}

#[test]
fn posterior_rows_sum_to_one_even_when_all_missing() {
    let ds = random_dataset(30, 8, 3, 0.6, 3);
    let cfg = TckConfig {
        max_components: 4,
        realizations: 2,
        min_segment: 2,
        max_segment: Some(3),
        min_attributes: 1,
        ..TckConfig::default()
    };
    let model = fit_tck(&ds, &cfg).unwrap();
    for m in &model.members {
        assert!((m.mixing_weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(m.variances.iter().all(|&v| v > 0.0));
        let p = posteriors(m, &ds).unwrap();
        for i in 0..ds.len() {
            assert!((p.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn objective_is_monotone_on_random_members() {
    let ds = synthetic(120, 0.5, 11);
    let model = fit_tck(&ds, &small_config(6, 4, 5)).unwrap();
    assert_eq!(model.members.len(), 20);
    for (q, m) in model.members.iter().enumerate() {
        assert!(m.objective_trace.len() >= 2);
        assert!(m.objective_non_decreasing(1e-9), "member {q}: {:?}", m.objective_trace);
    }
}

/// Textbook EM for diagonal Gaussian mixtures on complete data.
fn textbook_em_step(x: &[Vec<f64>], p: &GmmParams) -> (Vec<Vec<f64>>, GmmParams) {
    let g_count = p.weights.len();
    let d = x[0].len();
    let resp: Vec<Vec<f64>> = x
        .iter()
        .map(|xi| {
            let logs: Vec<f64> = (0..g_count)
                .map(|g| {
                    let mut l = p.weights[g].ln();
                    for c in 0..d {
                        l += normal_pdf(xi[c], p.means[g * d + c], p.variances[g * d + c]).ln();
                    }
                    l
                })
                .collect();
            let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let mut next = p.clone();
    for g in 0..g_count {
        let ng: f64 = resp.iter().map(|r| r[g]).sum();
        next.weights[g] = ng / x.len() as f64;
        for c in 0..d {
            let mu = x.iter().zip(&resp).map(|(xi, r)| r[g] * xi[c]).sum::<f64>() / ng;
            let var = x.iter().zip(&resp).map(|(xi, r)| r[g] * (xi[c] - mu).powi(2)).sum::<f64>() / ng;
            next.means[g * d + c] = mu;
            next.variances[g * d + c] = var;
        }
    }
    (resp, next)
}

#[test]
fn vanishing_prior_matches_textbook_em() {
    let ds = random_dataset(60, 5, 2, 0.0, 21);
    let view = MemberView::extract(&ds, None, (0, 5), &[0, 1]);
    let x: Vec<Vec<f64>> = (0..60).map(|i| view.series(i).0.to_vec()).collect();
    let em = MapEm::new(view, 3, PriorParams { a0: 1e-12, b0: 1e-12, n0: 0.1 }).unwrap();
    let mut params = em.initial_params(&mut rng(4));
    let mut oracle = params.clone();
    for _ in 0..15 {
        let (resp, _) = em.e_step(&params);
        let (oracle_resp, next) = textbook_em_step(&x, &oracle);
        for i in 0..60 {
            for g in 0..3 {
                assert!((resp[i * 3 + g] - oracle_resp[i][g]).abs() < 1e-6);
            }
        }
        params = em.m_step(&params, &resp).unwrap();
        oracle = next;
    }
}

#[test]
fn single_component_closed_form() {
    let ds = random_dataset(25, 6, 2, 0.3, 8);
    let view = MemberView::extract(&ds, None, (1, 6), &[1, 0]);
    let em = MapEm::new(view.clone(), 1, PriorParams { a0: 0.4, b0: 0.7, n0: 0.15 }).unwrap();
    let init = em.initial_params(&mut rng(0));
    let (resp, _) = em.e_step(&init);
    assert!(resp.iter().all(|&r| r == 1.0));
    let next = em.m_step(&init, &resp).unwrap();
    assert_eq!(next.weights, vec![1.0]);

    let (len, attrs) = (5, 2);
    let cells = len * attrs;
    let mut w = vec![0.0; cells];
    let mut sx = vec![0.0; cells];
    for i in 0..view.len() {
        let (x, obs) = view.series(i);
        for c in 0..cells {
            if obs[c] {
                w[c] += 1.0;
                sx[c] += x[c];
            }
        }
    }
    // MAP mean solves (Λ + diag(W/σ²)) μ = Λ m + Σx / σ² for each attribute
    for a in 0..attrs {
        let lambda = em.mean_precision(a);
        for t in 0..len {
            let c = t * attrs + a;
            let mut lhs = w[c] / init.variances[c] * next.means[c];
            let mut rhs = sx[c] / init.variances[c];
            for s in 0..len {
                let cs = s * attrs + a;
                lhs += lambda[(t, s)] * next.means[cs];
                rhs += lambda[(t, s)] * em.prior_mean()[cs];
            }
            assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()), "cell {c}");
        }
    }
    // MAP variance: (Σ(x−μ)² + κ s²) / (W + κ)
    let kappa = em.kappa();
    assert!((kappa - 0.7 * 25.0).abs() < 1e-12);
    for c in 0..cells {
        let mut sq = 0.0;
        for i in 0..view.len() {
            let (x, obs) = view.series(i);
            if obs[c] {
                sq += (x[c] - next.means[c]).powi(2);
            }
        }
        let expect = (sq + kappa * em.prior_variance()[c]) / (w[c] + kappa);
        assert!((next.variances[c] - expect).abs() < 1e-10 * expect.max(1.0));
    }
    // with a diagonal prior the mean is the precision-weighted average of
    // the prior mean and the observed mean
    let em_diag = MapEm::new(view.clone(), 1, PriorParams { a0: 0.4, b0: 0.7, n0: 1e-9 }).unwrap();
    let init = em_diag.initial_params(&mut rng(0));
    let next = em_diag.m_step(&init, &em_diag.e_step(&init).0).unwrap();
    for c in 0..cells {
        let s = em_diag.prior_variance()[c];
        let prior_prec = 0.4 / s;
        let expect = (prior_prec * em_diag.prior_mean()[c] + sx[c] / init.variances[c])
            / (prior_prec + w[c] / init.variances[c]);
        assert!((next.means[c] - expect).abs() < 1e-12);
    }
}

#[test]
fn separated_clouds_get_their_own_component() {
    let mut r = rng(77);
    let (n, len) = (40, 4);
    let mut values = Vec::new();
    for i in 0..n {
        let centre = if i < n / 2 { -5.0 } else { 5.0 };
        for _ in 0..len {
            values.push(centre + 0.3 * rand::Rng::random_range(&mut r, -1.0..1.0));
        }
    }
    let view = MemberView::from_parts(n, len, 1, values, vec![true; n * len]).unwrap();
    let em = MapEm::new(view.clone(), 2, PriorParams { a0: 0.5, b0: 0.5, n0: 0.1 }).unwrap();
    let mut seed_rng = rng(1);
    // initialize from one series of each cloud
    let mut init = em.initial_params(&mut seed_rng);
    init.means[..len].copy_from_slice(view.series(0).0);
    init.means[len..].copy_from_slice(view.series(n - 1).0);
    let out = em.run(init, 30, 1e-8, &mut seed_rng).unwrap();
    let p = posteriors_for_view(&view, &out.params);
    let own = |i: usize| if i < n / 2 { 0 } else { 1 };
    for i in 0..n {
        assert!(p.get(i, own(i)) >= 0.99, "series {i}: {:?}", p.row(i));
    }
}

#[test]
fn temporal_correlation_is_unit_diagonal() {
    let r = temporal_correlation(6, 1.5);
    for i in 0..6 {
        assert!((r[(i, i)] - 1.0).abs() < 1e-15);
        for j in 0..6 {
            assert_eq!(r[(i, j)], r[(j, i)]);
        }
    }
    assert!(r.clone().cholesky().is_some());
}

#[test]
fn kernel_hand_examples() {
    let one_hot = tckae::tck::GmmMember {
        attribute_subset: vec![0],
        time_segment: (0, 1),
        component_count: 2,
        mixing_weights: vec![0.5, 0.5],
        means: vec![-10.0, 10.0],
        variances: vec![1.0, 1.0],
        prior_params: PriorParams { a0: 1.0, b0: 1.0, n0: 0.1 },
        seed: 0,
        objective_trace: vec![],
        reseeds: vec![],
    };
    let model = TckModel {
        members: vec![one_hot.clone()],
        standardization: None,
        config: TckConfig::default(),
        time_steps: 2,
        variables: 1,
    };
    let ds = tckae::TimeSeriesDataset::new(2, 2, 1, vec![-10.0, 0.0, 10.0, 0.0], vec![true; 4], None).unwrap();
    let k = gram_matrix(&model, &ds).unwrap();
    assert!((k.get(0, 0) - 1.0).abs() < 1e-12 && (k.get(1, 1) - 1.0).abs() < 1e-12);
    assert!(k.get(0, 1) < 1e-12 && k.get(1, 0) < 1e-12);

    // both series missing inside the member's view: posteriors [0.5, 0.5]
    let ds = tckae::TimeSeriesDataset::new(
        2,
        3,
        1,
        vec![f64::NAN, 1.0, 2.0, f64::NAN, 3.0, 4.0],
        vec![false, true, true, false, true, true],
        None,
    )
    .unwrap();
    let model = TckModel {
        time_steps: 3,
        ..model
    };
    let k = gram_matrix(&model, &ds).unwrap();
    assert!(k.as_matrix().as_slice().iter().all(|&v| (v - 0.5).abs() < 1e-15));
}

#[test]
fn kernel_is_psd_symmetric_and_cauchy_schwarz() {
    let ds = synthetic(80, 0.5, 2);
    let model = fit_tck(&ds, &small_config(4, 3, 9)).unwrap();
    let k = gram_matrix(&model, &ds).unwrap();
    assert_eq!(k.as_matrix().max_asymmetry(), 0.0);
    let (lo, hi) = min_max_eigen(k.as_matrix());
    assert!(lo >= -1e-8 * hi, "min eigenvalue {lo}, max {hi}");
    for i in 0..80 {
        for j in 0..80 {
            assert!(k.get(i, j) <= (k.get(i, i) * k.get(j, j)).sqrt() * (1.0 + 1e-12));
        }
    }
}

#[test]
fn masked_values_do_not_matter() {
    let ds = synthetic(60, 0.5, 4);
    let model = fit_tck(&ds, &small_config(4, 2, 1)).unwrap();
    let mut r = rng(99);
    let noisy = ds.overwrite_unobserved(|_, _, _| rand::Rng::random_range(&mut r, -1e3..1e3));
    let refit = fit_tck(&noisy, &small_config(4, 2, 1)).unwrap();
    assert_eq!(model, refit);
    for m in &model.members {
        assert_eq!(posteriors(m, &ds).unwrap(), posteriors(m, &noisy).unwrap());
    }
    assert_eq!(
        kernel_matrix(&model, &ds, &ds).unwrap(),
        kernel_matrix(&model, &noisy, &noisy).unwrap()
    );
}

#[test]
fn fit_is_deterministic_and_seed_sensitive() {
    let ds = synthetic(60, 0.3, 6);
    let cfg = small_config(3, 2, 42);
    let a = fit_tck(&ds, &cfg).unwrap();
    assert_eq!(a.members.len(), 4);
    let b = fit_tck(&ds, &cfg).unwrap();
    assert_eq!(a, b);
    let c = fit_tck(&ds, &small_config(3, 2, 43)).unwrap();
    assert_ne!(a, c);

    // larger ensembles from different seeds still agree on which series are similar
    let ka = gram_matrix(&fit_tck(&ds, &small_config(5, 4, 1)).unwrap(), &ds).unwrap();
    let kc = gram_matrix(&fit_tck(&ds, &small_config(5, 4, 2)).unwrap(), &ds).unwrap();
    assert_ne!(ka, kc);
    let xa = ka.as_matrix().as_slice();
    let xc = kc.as_matrix().as_slice();
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let (ma, mc) = (mean(xa), mean(xc));
    let cov: f64 = xa.iter().zip(xc).map(|(p, q)| (p - ma) * (q - mc)).sum();
    let va: f64 = xa.iter().map(|p| (p - ma).powi(2)).sum();
    let vc: f64 = xc.iter().map(|q| (q - mc).powi(2)).sum();
    let corr = cov / (va * vc).sqrt();
    assert!(corr > 0.3, "kernel correlation {corr}");
}

#[test]
fn single_member_fit_reports_its_view() {
    let ds = synthetic(50, 0.4, 1);
    let cfg = small_config(3, 1, 0);
    let specs = sample_member_configs(&cfg, 50, 20, 10).unwrap();
    let m = map_em_fit(&specs[1], &ds).unwrap();
    assert_eq!(m.component_count, 3);
    assert_eq!(m.attribute_subset, specs[1].attributes);
    let cells = (m.time_segment.1 - m.time_segment.0) * m.attribute_subset.len();
    assert_eq!(m.means.len(), 3 * cells);
}

#[test]
fn model_json_round_trip() {
    let ds = synthetic(40, 0.4, 3);
    let model = fit_tck(&ds, &small_config(3, 1, 0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    model.save(&path).unwrap();
    let back = TckModel::load(&path).unwrap();
    assert_eq!(gram_matrix(&model, &ds).unwrap(), gram_matrix(&back, &ds).unwrap());
}
