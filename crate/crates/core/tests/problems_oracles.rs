use fracbsde::autodiff::Tensor;
use fracbsde::fbm::quadrature::{phi_row_integral, tanh_sinh};
use fracbsde::fbm::{FbmSampler, Grid};
use fracbsde::problems::{
    bs_closed_form, dphi_diag_gbm, geometric_fbm_forward, BsParams, Problem, ProblemKind, ProblemParams,
};
use proptest::prelude::*;

fn params(strike: f64) -> BsParams {
    BsParams {
        mu: 0.06,
        sigma: 0.2,
        r: 0.06,
        strike,
        r_l: 0.06,
        r_b: 0.06,
    }
}

#[test]
fn discounted_payoff_matches_closed_form() {
    let (h, m) = (0.75, 100_000);
    let grid = Grid::uniform(0.5, 4).unwrap();
    let b = FbmSampler::new(grid.clone(), h, 1, 21).unwrap().sample_paths(m);
    let x = geometric_fbm_forward(&b, &[100.0], 0.06, 0.2, &grid, h).unwrap();
    let disc = (-0.06f64 * 0.5).exp();
    let pay: Vec<f64> = (0..m).map(|i| disc * (x.at3(i, 4, 0) - 100.0).max(0.0)).collect();
    let mean = pay.iter().sum::<f64>() / m as f64;
    let var = pay.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let se = (var / m as f64).sqrt();
    let exact = bs_closed_form(0.0, 100.0, &params(100.0), 0.5, h).unwrap();
    assert!((mean - exact).abs() < 4.0 * se, "{mean} vs {exact} (se {se})");
}

#[test]
fn malliavin_diagonal_from_kernel_quadrature() {
    // D^phi_t X_t = sigma X_t int_0^t phi(u, t) du
    let (sigma, x) = (0.2, 103.0);
    for h in [0.6, 0.75, 0.9] {
        for t in [0.1, 0.25, 0.5] {
            let quad = sigma * x * phi_row_integral(t, t, h, 1e-12);
            let closed = dphi_diag_gbm(t, x, sigma, h);
            assert!((quad - closed).abs() < 1e-9 * closed, "H={h} t={t}: {quad} vs {closed}");
        }
    }
}

fn bs1d() -> Problem {
    let p = ProblemParams {
        mu: Some(0.06),
        sigma: Some(0.2),
        r: Some(0.06),
        strike: Some(100.0),
        hurst: Some(0.75),
        t_end: Some(0.5),
        dim: Some(1),
        x0: Some(100.0),
        ..Default::default()
    };
    Problem::build(ProblemKind::BlackScholes1d, &p, true).unwrap()
}

#[test]
fn window_weights_from_kernel_quadrature() {
    // (1/dt) int_{t0}^{t1} D^phi_s X_{tk} ds with D^phi_s X_{tk} = sigma X_{tk} int_0^{tk} phi(u, s) du
    let prob = bs1d();
    let x = Tensor::full(&[1, 1], 95.0);
    for (tk, t0, t1) in [(0.1, 0.3, 0.325), (0.2, 0.2, 0.225), (0.05, 0.45, 0.5)] {
        let inner = |s: f64| phi_row_integral(s, tk, 0.75, 1e-12);
        let quad = 0.2 * 95.0 * tanh_sinh(inner, t0, t1, 1e-11) / (t1 - t0);
        let got = prob.dphi_window(tk, t0, t1, &x).data()[0];
        assert!((got - quad).abs() < 1e-7 * quad, "({tk},{t0},{t1}): {got} vs {quad}");
    }
}

proptest! {
    #[test]
    fn price_bounds(x in 50.0f64..150.0, h in 0.5f64..1.0, t in 0.0f64..0.49) {
        let p = params(100.0);
        let u = bs_closed_form(t, x, &p, 0.5, h).unwrap();
        let disc_k = 100.0 * (-0.06f64 * (0.5 - t)).exp();
        // no-arbitrage bounds of a call
        prop_assert!(u >= (x - disc_k).max(0.0) - 1e-9);
        prop_assert!(u <= x);
    }
}
