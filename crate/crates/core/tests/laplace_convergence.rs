use vbspca::laplace::{fit_laplace, LaplaceHyper};
use vbspca::linalg::subspace_angle_deg;
use vbspca::synth::low_rank;

#[test]
fn convergence_metric_settles_monotonically() {
    let h = LaplaceHyper {
        r: 3,
        ..LaplaceHyper::default()
    };
    let mut monotone = 0;
    for seed in 0..100 {
        let problem = low_rank(16, 200, 3, 20.0, seed);
        let model = fit_laplace(&problem.data, &h, seed).unwrap();
        let trace = &model.diagnostics.trace;
        let tail = &trace[trace.len().saturating_sub(10)..];
        if tail.windows(2).all(|w| w[1] <= w[0]) {
            monotone += 1;
        }
    }
    assert!(monotone >= 95, "{monotone}/100 monotone");
}

#[test]
fn clean_subspace_is_recovered_across_seeds() {
    for seed in 0..10 {
        let problem = low_rank(16, 200, 3, 20.0, seed);
        let h = LaplaceHyper {
            r: 3,
            ..LaplaceHyper::default()
        };
        let model = fit_laplace(&problem.data, &h, seed).unwrap();
        assert!(model.diagnostics.converged);
        let angle = subspace_angle_deg(&model.loading, &problem.loading);
        assert!(angle < 5.0, "seed {seed}: {angle}");
    }
}
