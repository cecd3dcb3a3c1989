use maxent::data::{build_empirical, read_table, write_table, CellTable};
use maxent::kernels::{gibbs_distribution, kl_divergence, kl_prox_step};
use maxent::prox;
use maxent::solvers::{
    npdhg_nonsmooth, npdhg_smooth, smooth_stepsizes, NpdhgIteration, Schedule, SolverOptions,
    StopRule,
};
use maxent::{FeatureMatrix, GroupPartition, PenaltyKind, PenaltySpec, Problem, SimplexDistribution};
use proptest::prelude::*;

fn vec_in(len: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, len)
}

fn distribution(n: usize) -> impl Strategy<Value = SimplexDistribution> {
    vec_in(n, 0.01, 1.0).prop_map(|w| SimplexDistribution::from_weights(&w).unwrap())
}

fn matrix(m: usize, n: usize) -> impl Strategy<Value = FeatureMatrix> {
    vec_in(m * n, 0.0, 1.0).prop_map(move |v| FeatureMatrix::from_col_major(m, n, v).unwrap())
}

/// Two vectors of a common length.
fn pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_len).prop_flat_map(|k| (vec_in(k, -5.0, 5.0), vec_in(k, -5.0, 5.0)))
}

fn contiguous_groups(m: usize, cuts: &[bool]) -> GroupPartition {
    let mut sizes = vec![1usize];
    for &cut in cuts.iter().take(m - 1) {
        if cut {
            sizes.push(1);
        } else {
            *sizes.last_mut().unwrap() += 1;
        }
    }
    GroupPartition::contiguous(&sizes).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn small_problem(alpha: f64) -> impl Strategy<Value = Problem> {
    (2usize..=7, 1usize..=3).prop_flat_map(move |(n, m)| {
        (matrix(m, n), distribution(n), distribution(n), 0.1..0.8f64).prop_map(move |(phi, prior, emp, frac)| {
            let spec = PenaltySpec::new(PenaltyKind::ElasticNet { alpha }, 1.0).unwrap();
            let base = Problem::from_empirical(phi, prior, &emp, spec).unwrap();
            let t = frac * maxent::path::t_max(&base).unwrap();
            base.with_t(t.max(1e-6))
        })
    })
}

proptest! {
    #[test]
    fn proxes_are_firmly_nonexpansive((a, b) in pair(8), lambda in 0.0..3.0f64, alpha in 0.05..=1.0f64,
                                      cuts in prop::collection::vec(any::<bool>(), 8)) {
        let groups = contiguous_groups(a.len(), &cuts);
        let ops: [Box<dyn Fn(&[f64]) -> Vec<f64>>; 5] = [
            Box::new(|v| prox::shrink1(v, lambda).unwrap()),
            Box::new(|v| prox::prox_elastic_net(v, lambda, alpha).unwrap()),
            Box::new(|v| prox::prox_group_lasso(v, lambda, &groups).unwrap()),
            Box::new(|v| prox::project_l1_ball(v, lambda).unwrap()),
            Box::new(|v| prox::prox_linf(v, lambda).unwrap()),
        ];
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        for op in &ops {
            let (pa, pb) = (op(&a), op(&b));
            let dp: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x - y).collect();
            prop_assert!(dot(&dp, &dp) <= dot(&dp, &diff) + 1e-12);
        }
    }

    #[test]
    fn l1_projection_is_feasible_and_idempotent(y in prop::collection::vec(-5.0..5.0f64, 1..12), r in 0.0..6.0f64) {
        let p = prox::project_l1_ball(&y, r).unwrap();
        prop_assert!(p.iter().map(|v| v.abs()).sum::<f64>() <= r * (1.0 + 1e-12) + 1e-12);
        let again = prox::project_l1_ball(&p, r).unwrap();
        for (u, v) in p.iter().zip(&again) {
            prop_assert!((u - v).abs() <= 1e-12);
        }
        // Moreau: the l-infinity prox is the remainder.
        let rest = prox::prox_linf(&y, r).unwrap();
        for k in 0..y.len() {
            prop_assert!((p[k] + rest[k] - y[k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn pinsker_holds((p, q) in (2usize..10).prop_flat_map(|n| (distribution(n), distribution(n)))) {
        let kl = kl_divergence(&p, &q).unwrap();
        let l1 = p.l1_distance(&q);
        prop_assert!(kl >= 0.5 * l1 * l1 - 1e-14);
    }

    #[test]
    fn model_average_is_linear((phi, a, b) in (1usize..5, 2usize..9).prop_flat_map(|(m, n)| (matrix(m, n), vec_in(n, -2.0, 2.0), vec_in(n, -2.0, 2.0))),
                               s in -3.0..3.0f64) {
        let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| s * x + y).collect();
        let lhs = phi.weighted_sum(&combo).unwrap();
        let (pa, pb) = (phi.weighted_sum(&a).unwrap(), phi.weighted_sum(&b).unwrap());
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (s * pa[i] + pb[i])).abs() <= 1e-12);
        }
    }

    #[test]
    fn column_norm_bound_is_below_spectral_norm(phi in (1usize..6, 2usize..20).prop_flat_map(|(m, n)| matrix(m, n))) {
        let op = phi.operator_norm_1to2();
        prop_assume!(op > 0.0);
        let spectral = phi.largest_singular_value(1e-12).unwrap();
        prop_assert!(op <= spectral * (1.0 + 1e-9));
        prop_assert!(spectral <= op * (phi.n() as f64).sqrt() * (1.0 + 1e-9));
    }

    #[test]
    fn kl_step_stays_in_the_gibbs_family(
        (phi, prior, z, w) in (1usize..4, 2usize..7).prop_flat_map(|(m, n)| (matrix(m, n), distribution(n), vec_in(m, -3.0, 3.0), vec_in(m, -3.0, 3.0))),
        tau in 0.1..10.0f64,
    ) {
        // p = gibbs(z) maps to gibbs((z + tau w) / (1 + tau)).
        let (p, _) = gibbs_distribution(&prior, &z, &phi).unwrap();
        let next = kl_prox_step(&p, &prior, &phi, tau, &w).unwrap();
        let z_next: Vec<f64> = z.iter().zip(&w).map(|(a, b)| (a + tau * b) / (1.0 + tau)).collect();
        let (expect, _) = gibbs_distribution(&prior, &z_next, &phi).unwrap();
        prop_assert!(next.l1_distance(&expect) <= 1e-12);
    }

    #[test]
    fn smooth_stepsize_law(gamma in 0.01..1.0f64, l in 0.01..10.0f64, t in 1e-4..10.0f64) {
        let (theta, tau, sigma) = smooth_stepsizes(gamma, l, t);
        prop_assert!(theta > 0.0 && theta < 1.0);
        prop_assert!(((tau * sigma * l * l) * theta - 1.0).abs() <= 1e-9);
        prop_assert!((sigma - gamma * tau / t).abs() <= 1e-12 * sigma.max(1.0));
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(("[a-z][a-z0-9]{0,6}", 0usize..3, any::<bool>(), 0.01..5.0f64, vec_in(3, -1e3, 1e3)), 1..20),
                      with_prior in any::<bool>()) {
        let n = rows.len();
        let table = CellTable::new(
            rows.iter().map(|r| r.0.clone()).collect(),
            rows.iter().map(|r| format!("eco{}", r.1)).collect(),
            rows.iter().map(|r| r.2).collect(),
            with_prior.then(|| rows.iter().map(|r| r.3).collect()),
            rows.iter().map(|r| r.4.clone()).collect(),
        ).unwrap();
        let mut buf = Vec::new();
        write_table(&table, &mut buf).unwrap();
        let back = read_table(buf.as_slice()).unwrap();
        prop_assert_eq!(back.n(), n);
        prop_assert_eq!(back, table);
    }

    #[test]
    fn empirical_distribution_is_valid(rows in prop::collection::vec((0usize..4, any::<bool>()), 1..40), forced in any::<prop::sample::Index>()) {
        let n = rows.len();
        let mut fire: Vec<bool> = rows.iter().map(|r| r.1).collect();
        fire[forced.index(n)] = true;
        let table = CellTable::new(
            (0..n).map(|j| format!("c{j}")).collect(),
            rows.iter().map(|r| format!("r{}", r.0)).collect(),
            fire.clone(),
            None,
            vec![vec![0.0]; n],
        ).unwrap();
        let p = build_empirical(&table).unwrap();
        prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for (v, f) in p.probs().iter().zip(&fire) {
            prop_assert_eq!(*v > 0.0, *f);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn accelerated_schedule_keeps_step_product(problem in small_problem(0.7)) {
        let m = problem.phi().m();
        let l = problem.op_norm();
        let mut it = NpdhgIteration::new(&problem, Schedule::Accelerated, &vec![0.0; m], &vec![0.0; m]).unwrap();
        let mut prev_tau = it.state().tau;
        for _ in 0..50 {
            it.step().unwrap();
            let st = it.state();
            prop_assert!((st.tau * st.sigma * l * l - 1.0).abs() <= 1e-9);
            prop_assert!((st.theta - 1.0 / (1.0 + prev_tau).sqrt()).abs() <= 1e-15);
            prop_assert!(st.tau < prev_tau);
            prev_tau = st.tau;
        }
    }

    #[test]
    fn primal_parameter_stays_bounded(problem in small_problem(0.5), z0 in vec_in(3, -1.0, 1.0)) {
        // z is a running average of the extrapolated duals.
        let m = problem.phi().m();
        let mut it = NpdhgIteration::new(&problem, Schedule::Accelerated, &z0[..m], &vec![0.0; m]).unwrap();
        let mut bound = z0[..m].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        for _ in 0..200 {
            let st = it.state();
            let w_bar = st.w.iter().zip(&st.w_prev).map(|(w, wp)| w + st.theta * (w - wp));
            bound = w_bar.fold(bound, |a, v| a.max(v.abs()));
            it.step().unwrap();
            let z_max = it.state().z.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            prop_assert!(z_max <= bound * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn solution_is_a_fixed_point(problem in small_problem(0.6)) {
        let m = problem.phi().m();
        let opts = SolverOptions { tol: 1e-11, stop_rule: StopRule::Kkt, max_iters: 2_000_000, ..SolverOptions::default() };
        let sol = npdhg_nonsmooth(&problem, &vec![0.0; m], &vec![0.0; m], &opts).unwrap();
        prop_assume!(sol.report.converged);
        let mut it = NpdhgIteration::new(&problem, Schedule::Accelerated, &sol.z, &sol.w).unwrap();
        for _ in 0..5 {
            it.step().unwrap();
        }
        let drift = it.state().w.iter().zip(&sol.w).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        prop_assert!(drift <= 1e-6, "drift {drift}");
    }

    #[test]
    fn gap_shrinks_over_decades(problem in small_problem(0.5), smooth in any::<bool>()) {
        let m = problem.phi().m();
        let opts = SolverOptions { tol: 1e-300, min_iters: 1000, max_iters: 1000, trace: true, ..SolverOptions::default() };
        let zero = vec![0.0; m];
        let sol = if smooth {
            npdhg_smooth(&problem, &zero, &zero, &opts)
        } else {
            npdhg_nonsmooth(&problem, &zero, &zero, &opts)
        }.unwrap();
        let gap = |k: usize| sol.report.trace[k].gap();
        for k in [1usize, 10, 100] {
            prop_assert!(gap(10 * k) <= gap(k) + 1e-12, "gap({}) = {} > gap({k}) = {}", 10 * k, gap(10 * k), gap(k));
        }
        for tp in &sol.report.trace {
            prop_assert!(tp.gap() >= -1e-9);
        }
    }

    #[test]
    fn repeated_solves_are_bit_identical(problem in small_problem(0.9)) {
        let m = problem.phi().m();
        let zero = vec![0.0; m];
        let a = npdhg_nonsmooth(&problem, &zero, &zero, &SolverOptions::default()).unwrap();
        let b = npdhg_nonsmooth(&problem, &zero, &zero, &SolverOptions::default()).unwrap();
        prop_assert_eq!(a.w, b.w);
        prop_assert_eq!(a.p.probs(), b.p.probs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn kernels_do_not_depend_on_thread_count(seed in any::<u64>()) {
        // Large enough to take the parallel code paths.
        let (m, n) = (3, 20_000);
        let mut state = seed | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let phi = FeatureMatrix::from_col_major(m, n, (0..m * n).map(|_| next()).collect()).unwrap();
        let weights: Vec<f64> = (0..n).map(|_| next()).collect();
        let z: Vec<f64> = (0..m).map(|_| next() - 0.5).collect();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| (phi.weighted_sum(&weights).unwrap(), phi.column_dots(&z).unwrap()))
        };
        let serial = run(1);
        let parallel = run(4);
        prop_assert_eq!(&serial.0, &parallel.0);
        prop_assert_eq!(&serial.1, &parallel.1);
    }
}
