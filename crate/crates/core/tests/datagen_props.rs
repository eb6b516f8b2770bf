//! Distributional checks for the synthetic data generator.

use qrs_core::datagen::{
    banded_covariance, error_quantile, generate, CovariateLaw, ErrorLaw, MvSampler, SyntheticSpec,
};
use qrs_core::Streams;

/// Conditional quantile of standardized residuals should sit at zero: the
/// empirical tau-quantile of (y - beta.x) / s(x) over many draws matches the
/// centering used at generation time.
#[test]
fn standardized_residual_quantile_sits_at_zero() {
    let n = 1_000_000;
    let tau = 0.75;
    let spec = SyntheticSpec {
        beta_true: vec![1.0; 3],
        ..SyntheticSpec::new(n, CovariateLaw::MvNormal, ErrorLaw::Exponential1, tau, 404)
    };
    let (data, beta) = generate(&spec).unwrap();
    let p = beta.len();
    let mut standardized: Vec<f64> = (0..n)
        .map(|i| {
            let row = data.row(i);
            let mean: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let scale: f64 = row.iter().map(|v| v.abs()).sum::<f64>() / p as f64;
            (data.y()[i] - mean) / scale
        })
        .collect();
    standardized.sort_unstable_by(f64::total_cmp);
    let empirical = standardized[(tau * n as f64) as usize];

    // The standardized residual is e - q_tau(e) with e ~ Exp(1), so its
    // tau-quantile is 0 and its density there is exp(-q) = 1 - tau.
    let density_at_quantile = 1.0 - tau;
    let se = (tau * (1.0 - tau) / n as f64).sqrt() / density_at_quantile;
    assert!(
        empirical.abs() <= 3.0 * se,
        "quantile {empirical} exceeds 3 SE = {}",
        3.0 * se
    );
}

#[test]
fn exponential_shift_is_log_four_at_three_quarters() {
    assert!((error_quantile(ErrorLaw::Exponential1, 0.75) - 4.0f64.ln()).abs() < 1e-15);
}

#[test]
fn univariate_normal_sampler_has_unit_variance() {
    use rand::Rng;
    let sigma = banded_covariance(1, 0.5);
    let sampler = MvSampler::new(&sigma, None).unwrap();
    let mut rng = Streams::new(31).probe(0);
    let draws = 100_000;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let v = sampler.sample(&mut rng)[0];
        sum += v;
        sum_sq += v * v;
        let _: f64 = rng.random(); // keep streams moving irregularly
    }
    let mean = sum / draws as f64;
    let var = sum_sq / draws as f64 - mean * mean;
    assert!((0.97..=1.03).contains(&var), "variance {var}");
}

#[test]
fn banded_correlation_shows_up_in_adjacent_coordinates() {
    let sigma = banded_covariance(2, 0.5);
    let sampler = MvSampler::new(&sigma, None).unwrap();
    let mut rng = Streams::new(37).probe(1);
    let draws = 100_000;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..draws {
        let v = sampler.sample(&mut rng);
        sx += v[0];
        sy += v[1];
        sxx += v[0] * v[0];
        syy += v[1] * v[1];
        sxy += v[0] * v[1];
    }
    let nf = draws as f64;
    let cov = sxy / nf - sx / nf * (sy / nf);
    let vx = sxx / nf - (sx / nf) * (sx / nf);
    let vy = syy / nf - (sy / nf) * (sy / nf);
    let corr = cov / (vx * vy).sqrt();
    assert!((corr - 0.5).abs() < 0.02, "correlation {corr}");
}

#[test]
fn heavy_tail_mixture_has_excess_kurtosis() {
    let sigma = banded_covariance(1, 0.5);
    let normal = MvSampler::new(&sigma, None).unwrap();
    let t2 = MvSampler::new(&sigma, Some(2.0)).unwrap();
    let mut rng = Streams::new(41).probe(2);
    let draws = 100_000;
    let kurtosis = |sampler: &MvSampler, rng: &mut rand_chacha::ChaCha8Rng| {
        let vals: Vec<f64> = (0..draws).map(|_| sampler.sample(rng)[0]).collect();
        let mean = vals.iter().sum::<f64>() / draws as f64;
        let m2 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws as f64;
        let m4 = vals.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / draws as f64;
        m4 / (m2 * m2)
    };
    let k_normal = kurtosis(&normal, &mut rng);
    let k_t2 = kurtosis(&t2, &mut rng);
    assert!((k_normal - 3.0).abs() < 0.3, "normal kurtosis {k_normal}");
    assert!(k_t2 > 6.0, "t2 kurtosis {k_t2} shows no heavy tail");
}
