use proptest::prelude::*;

use simrenew::bounds::{s_hat_prime, s_hat_prime_dominating, theorem1_bound, TrialStats};
use simrenew::domination::random_walk_domination;
use simrenew::exact::{expected_hitting_time_linear, hitting_time_distribution, product_tail};
use simrenew::kernel::{KernelSchedule, Matrix, StateSpace, Tail};
use simrenew::simulate::{
    dirac, extract_renewals, sample_path, simultaneous_renewal_time, trial_sequence,
};

/// Strictly increasing renewal times starting at 0.
fn renewal_list(max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(1usize..6, 1..max_len).prop_map(|gaps| {
        let mut t = vec![0];
        for g in gaps {
            t.push(t.last().unwrap() + g);
        }
        t
    })
}

/// Row-stochastic matrix with a positive diagonal.
fn lazy_matrix(n: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, n), n).prop_map(
        move |mut rows| {
            for (i, r) in rows.iter_mut().enumerate() {
                r[i] += 0.2;
                let s: f64 = r.iter().sum();
                r.iter_mut().for_each(|v| *v /= s);
                let head: f64 = r[..n - 1].iter().sum();
                r[n - 1] = (1.0 - head).max(0.0);
            }
            Matrix::from_rows(&rows).unwrap()
        },
    )
}

fn schedule(m: Matrix) -> KernelSchedule {
    let n = m.rows();
    KernelSchedule::new(
        StateSpace::new(n, [0]).unwrap(),
        Vec::new(),
        Tail::Constant(m),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn trials_are_well_formed(t1 in renewal_list(40), t2 in renewal_list(40), n0 in 0usize..3) {
        let tr = trial_sequence(&t1, &t2, n0);
        for (k, &b) in tr.b.iter().enumerate() {
            prop_assert!(b == 0 || b > n0 || k == 0);
            let own = if k % 2 == 0 { &t1 } else { &t2 };
            prop_assert!(own.contains(&tr.s[k]));
            prop_assert_eq!(tr.s[k], tr.b[..=k].iter().sum::<usize>());
        }
        if let Some(k) = tr.tau_trials {
            prop_assert_eq!(k + 1, tr.b.len());
            prop_assert_eq!(tr.b[k], 0);
            prop_assert!(tr.b[..k].iter().all(|&b| b > 0));
        }
    }

    #[test]
    fn pathwise_inequality_on_renewal_lists(t1 in renewal_list(40), t2 in renewal_list(40)) {
        // Both chains renew at time 0, so the first hitting times vanish.
        let tr = trial_sequence(&t1, &t2, 0);
        if let Some(tp) = tr.t_prime() {
            let t = simultaneous_renewal_time(&t1, &t2).unwrap();
            prop_assert!(t <= tp, "T = {t} > T' = {tp}");
        }
    }

    #[test]
    fn sampled_paths_renew_in_target(m in lazy_matrix(4), seed in any::<u64>()) {
        let s = schedule(m);
        let path = sample_path(&s, &dirac(4, 2), seed, 200).unwrap();
        prop_assert_eq!(path.len(), 201);
        let r = extract_renewals(&path, |x| x == 0);
        for &t in &r.tau {
            prop_assert_eq!(path[t], 0);
        }
        let visits = path.iter().filter(|&&x| x == 0).count();
        prop_assert_eq!(visits, r.tau.len());
    }

    #[test]
    fn exact_laws_conserve_mass_and_match_linear_solve(m in lazy_matrix(4), x in 0usize..4) {
        let s = schedule(m.clone());
        let init = dirac(4, x);
        let law = hitting_time_distribution(&s, &init, 3000).unwrap();
        prop_assert!(law.table.conservation_error() <= 1e-10);
        let lin = expected_hitting_time_linear(&m, s.space(), &init).unwrap();
        prop_assert!(law.mean_lower() <= lin + 1e-8);
        prop_assert!(lin <= law.mean_upper() + 1e-8);

        let pair = product_tail(&s, &s, &init, &dirac(4, 0), 3000, 10_000).unwrap();
        prop_assert!(pair.table.conservation_error() <= 1e-10);
        prop_assert!(pair.survival.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        prop_assert!(pair.mean_lower() >= 1.0 - 1e-12);
    }

    #[test]
    fn dominating_sum_only_adds(p in 0.55f64..0.95, rows in proptest::collection::vec(proptest::collection::vec(0.0f64..0.1, 30), 1..5), n0 in 0usize..3) {
        let g = random_walk_domination(p, 200).unwrap();
        let stats = TrialStats::new(rows);
        let a = s_hat_prime(&g, n0, &stats, 29);
        let b = s_hat_prime_dominating(&g, n0, &stats, 29);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(y >= x);
        }
    }

    #[test]
    fn bound_monotone_in_inputs(m1 in 0.0f64..50.0, m2 in 0.0f64..50.0, n0 in 0usize..5, g in 0.01f64..1.0) {
        let base = theorem1_bound(m1, m2, n0, 1.5, 4.0, g).unwrap();
        prop_assert!(theorem1_bound(m1 + 1.0, m2, n0, 1.5, 4.0, g).unwrap() > base);
        prop_assert!(theorem1_bound(m1, m2, n0 + 1, 1.5, 4.0, g).unwrap() > base);
        prop_assert!(theorem1_bound(m1, m2, n0, 1.5, 4.0, (g * 1.01).min(1.0)).unwrap() <= base);
    }
}
