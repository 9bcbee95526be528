//! Monte Carlo oracles for the omniscient formulas and the white-Wishart
//! cross-check of the multiplicative factor.

use corrgcv::covariance::{df1_inverse, SpectralCovariance};
use corrgcv::experiments::{empirical_risks, CovarianceSpec, GeneratorContext};
use corrgcv::kernel::KernelFamily;
use corrgcv::risk::{risk_matched, risk_uncorrelated};
use corrgcv::rng::{standard_normal_mat, stream_rng, Component};
use corrgcv::selfconsistent::{solve, SolveInput, SolveMode};
use corrgcv::stransform::{s_identity, s_wishart_factor};
use faer::Side;

fn mean_se(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn uncorrelated_risk_matches_monte_carlo() {
    // Sigma = I, uniform teacher, q = 0.5, lambda = 1, sigma = 1 at N = 500
    let n = 500usize;
    let t = 1000usize;
    let cov = CovarianceSpec::Identity { n }.build(MASTER_SEED).unwrap();
    let id = s_identity::<f64>();
    let sol = solve(&SolveInput {
        spectrum: cov.eigenvalues(),
        s_kernel: &id,
        q: 0.5,
        lambda: 1.0,
        mode: SolveMode::Omniscient,
    })
    .unwrap();
    let theory = risk_uncorrelated(&sol, &cov, 1.0);
    // the matched formulas agree on identity kernels
    let matched = risk_matched(&sol, &cov, 1.0);
    assert!((theory.r_g - matched.r_g).abs() <= 1e-12 * theory.r_g);

    let mut ctx =
        GeneratorContext::new(cov.clone(), KernelFamily::Identity, KernelFamily::Identity, 1.0);
    let mut rg = Vec::new();
    let mut rin = Vec::new();
    for s in 0..10u64 {
        let d = ctx.generate(t, MASTER_SEED, s).unwrap();
        let fit = corrgcv::estimators::fit_ridge(d.x.as_ref(), &d.y, 1.0).unwrap();
        let e = empirical_risks(&d, &fit.w_hat, &cov, 1.0);
        rg.push(e.r_g);
        rin.push(e.r_in);
    }
    let (mg, seg) = mean_se(&rg);
    let (mi, sei) = mean_se(&rin);
    assert!((theory.r_g - mg).abs() <= 3.0 * seg, "R_g {} vs {mg} +- {seg}", theory.r_g);
    assert!((theory.r_in - mi).abs() <= 3.0 * sei, "R_in {} vs {mi} +- {sei}", theory.r_in);
}

const MASTER_SEED: u64 = 424242;

#[test]
fn wishart_factor_matches_empirical_white_spectra() {
    // S of Z^T Z / T against the empirical df1 inversion at N = 500
    let n = 500usize;
    for (q, seed) in [(0.5f64, 1u64), (2.0, 2)] {
        let t = (n as f64 / q) as usize;
        let mut rng = stream_rng(seed, 0, Component::Design);
        let z = standard_normal_mat(&mut rng, t, n);
        let tf = t as f64;
        let mut w = z.transpose() * &z;
        for j in 0..n {
            for i in 0..n {
                w[(i, j)] /= tf;
            }
        }
        let eigs = w.self_adjoint_eigenvalues(Side::Lower).unwrap();
        let analytic = s_wishart_factor(q).unwrap();
        // empirical transform through the df1 inversion, zero modes included
        for df in [0.1, 0.25, 0.4] {
            let lam = df1_inverse_padded(&eigs, df);
            let emp = (1.0 - df) / (df * lam);
            let want = analytic.value(df).unwrap();
            assert!(
                (emp - want).abs() / want < 5.0 / (n as f64).sqrt(),
                "q={q} df={df}: {emp} vs {want}"
            );
        }
    }
}

fn df1_inverse_padded(spectrum: &[f64], df: f64) -> f64 {
    // keep zero modes: bisection directly on the raw spectrum
    let positive: Vec<f64> = spectrum.iter().cloned().filter(|&l| l > 1e-12).collect();
    let padded: Vec<f64> = {
        let mut p = positive.clone();
        p.resize(spectrum.len(), 0.0);
        p
    };
    // the largest reachable df1 is rank / N
    assert!(df < positive.len() as f64 / spectrum.len() as f64);
    df1_inverse(&padded, df).unwrap()
}

#[test]
fn solution_serializes_to_flat_json() {
    let cov = SpectralCovariance::<f64>::isotropic(10);
    let id = s_identity::<f64>();
    let sol = solve(&SolveInput {
        spectrum: cov.eigenvalues(),
        s_kernel: &id,
        q: 0.5,
        lambda: 1.0,
        mode: SolveMode::Omniscient,
    })
    .unwrap();
    let json = sol.to_json();
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    for field in [
        "kappa",
        "kappa_tilde",
        "s",
        "s_tilde",
        "df1",
        "df2",
        "df_tilde_1",
        "df_tilde_2",
        "gamma",
        "dkappa_dlambda",
        "dkappa_tilde_dlambda",
        "converged",
        "iterations",
    ] {
        assert!(parsed.get(field).is_some(), "missing {field} in {json}");
    }
}
