mod support;

use std::time::Instant;

#[test]
fn analytic_gradients_match_central_differences() {
    let start = Instant::now();
    for rep in support::all_gradient_checks(7) {
        eprintln!("{rep:?}");
        assert!(
            rep.passed(),
            "{}: max rel err {:.3e} over {} checks ({} kink-excluded)",
            rep.op,
            rep.max_rel,
            rep.checked,
            rep.excluded
        );
        assert!(rep.excluded * 10 < rep.checked.max(1) || rep.op == "relu", "{rep:?}");
    }
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn rank_auc_matches_pairwise_oracle() {
    let (n, worst) = support::auc_oracle(3);
    assert_eq!(n, 1000);
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn pairwise_oracle_hand_cases() {
    assert_eq!(support::brute_auc(&[0.9, 0.1], &[true, false]), 1.0);
    assert_eq!(support::brute_auc(&[0.5, 0.5], &[true, false]), 0.5);
    assert_eq!(support::brute_auc(&[0.1, 0.2, 0.3], &[true, false, true]), 0.5);
}
