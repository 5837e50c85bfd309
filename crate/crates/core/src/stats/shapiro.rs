//! Shapiro-Wilk normality test, W statistic only.
//!
//! Coefficients follow Royston's AS R94 scheme (Applied Statistics 44,
//! 1995): approximate normal scores at (i - 0.375)/(n + 0.25), polynomial
//! corrections for the two largest weights, and the remainder rescaled so
//! the weight vector has unit norm. Valid for 3..=5000 samples.

use serde::{Deserialize, Serialize};

use super::StatsError;

pub const MIN_SHAPIRO_SAMPLES: usize = 3;
pub const MAX_SHAPIRO_SAMPLES: usize = 5000;

/// Outcome of [`shapiro_wilk`]. `w_statistic` lies in (0, 1]; values near 1
/// are consistent with a normal sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub w_statistic: f64,
    pub sample_count: usize,
}

/// Computes the Shapiro-Wilk W statistic of `values`.
///
/// The input need not be sorted. Fails on sample sizes outside
/// [`MIN_SHAPIRO_SAMPLES`]..=[`MAX_SHAPIRO_SAMPLES`], on non-finite values,
/// and on samples with zero range.
pub fn shapiro_wilk(values: &[f64]) -> Result<NormalityReport, StatsError> {
    let n = values.len();
    if !(MIN_SHAPIRO_SAMPLES..=MAX_SHAPIRO_SAMPLES).contains(&n) {
        return Err(StatsError::SampleSizeOutOfRange {
            n,
            min: MIN_SHAPIRO_SAMPLES,
            max: MAX_SHAPIRO_SAMPLES,
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFiniteSample);
    }
    let mut x = values.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
    let range = x[n - 1] - x[0];
    if range <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok(NormalityReport { w_statistic: w_statistic(&x, range), sample_count: n })
}

// W as the squared correlation between the scaled order statistics and the
// coefficient vector. `x` is sorted ascending; values are divided by the
// range for numerical stability, which leaves W unchanged.
fn w_statistic(x: &[f64], range: f64) -> f64 {
    let n = x.len();
    let nf = n as f64;
    let a = coefficients(n);

    let mut sx = 0.0;
    for v in x {
        sx += v / range;
    }
    sx /= nf;

    // Full weight for position i is sign * a[min(i, n-1-i)], negative in the
    // lower half; only the first half is stored.
    let weight = |i: usize| -> f64 {
        let j = n - 1 - i;
        if i == j {
            0.0
        } else if i > j {
            a[j]
        } else {
            -a[i]
        }
    };

    let mut sa = 0.0;
    for i in 0..n {
        sa += weight(i);
    }
    sa /= nf;

    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (i, value) in x.iter().enumerate() {
        let asa = weight(i) - sa;
        let xsx = value / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }

    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    (1.0 - w1).clamp(f64::MIN_POSITIVE, 1.0)
}

// First-half coefficient magnitudes a[0] >= a[1] >= ... (a[0] pairs with the
// extreme order statistics).
fn coefficients(n: usize) -> Vec<f64> {
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];

    let nn2 = n / 2;
    let mut a = vec![0.0; nn2];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
        return a;
    }

    let an25 = n as f64 + 0.25;
    let mut summ2 = 0.0;
    for (i, ai) in a.iter_mut().enumerate() {
        *ai = normal_quantile((i as f64 + 1.0 - 0.375) / an25);
        summ2 += *ai * *ai;
    }
    summ2 *= 2.0;
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / (n as f64).sqrt();

    let a1 = poly(&C1, rsn) - a[0] / ssumm2;
    let (start, fac) = if n > 5 {
        let a2 = poly(&C2, rsn) - a[1] / ssumm2;
        let fac = ((summ2 - 2.0 * a[0] * a[0] - 2.0 * a[1] * a[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        a[1] = a2;
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * a[0] * a[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    a[0] = a1;
    for ai in a.iter_mut().skip(start) {
        *ai = -*ai / fac;
    }
    a
}

// c[0] + c[1]*x + ... evaluated by Horner's rule.
fn poly(c: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for &coeff in c.iter().skip(1).rev() {
        acc = (acc + coeff) * x;
    }
    c[0] + acc
}

// Acklam's rational approximation to the standard normal quantile,
// |relative error| < 1.15e-9 over (0, 1).
fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -39.696_830_286_653_76,
        220.946_098_424_520_5,
        -275.928_510_446_968_7,
        138.357_751_867_269,
        -30.664_798_066_147_16,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -54.476_098_798_224_06,
        161.585_836_858_040_9,
        -155.698_979_859_886_6,
        66.801_311_887_719_72,
        -13.280_681_552_885_72,
    ];
    const C: [f64; 6] = [
        -0.007_784_894_002_430_293,
        -0.322_396_458_041_136_5,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        0.007_784_695_709_041_462,
        0.322_467_129_070_039_8,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w_of(values: &[f64]) -> f64 {
        shapiro_wilk(values).unwrap().w_statistic
    }

    fn sequence(n: usize) -> Vec<f64> {
        (1..=n).map(|v| v as f64).collect()
    }

    // Expected values computed with scipy.stats.shapiro.
    #[test]
    fn matches_reference_on_integer_sequences() {
        assert!((w_of(&sequence(3)) - 1.0).abs() < 1e-6);
        assert!((w_of(&sequence(5)) - 0.986762).abs() < 1e-3);
        assert!((w_of(&sequence(10)) - 0.970165).abs() < 1e-3);
        assert!((w_of(&sequence(20)) - 0.960375).abs() < 1e-3);
        assert!((w_of(&sequence(50)) - 0.955583).abs() < 1e-3);
    }

    #[test]
    fn two_point_sample_scores_low() {
        let mut values = vec![0.0; 25];
        values.extend(vec![1000.0; 25]);
        let w = w_of(&values);
        // scipy reports 0.636824 for this sample
        assert!(w < 0.8, "W = {w}");
        assert!((w - 0.636824).abs() < 5e-3, "W = {w}");
    }

    #[test]
    fn seeded_normal_draws_score_high() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(10_000.0, 250.0).unwrap();
        let values: Vec<f64> = (0..50).map(|_| normal.sample(&mut rng)).collect();
        assert!(w_of(&values) >= 0.95);
    }

    #[test]
    fn input_order_is_irrelevant() {
        let sorted = sequence(20);
        let mut reversed = sorted.clone();
        reversed.reverse();
        assert_eq!(w_of(&sorted), w_of(&reversed));
    }

    #[test]
    fn rejects_out_of_range_sizes() {
        assert_eq!(
            shapiro_wilk(&[1.0, 2.0]).unwrap_err(),
            StatsError::SampleSizeOutOfRange { n: 2, min: 3, max: 5000 }
        );
        let big = vec![0.0; 5001];
        assert!(matches!(
            shapiro_wilk(&big).unwrap_err(),
            StatsError::SampleSizeOutOfRange { n: 5001, .. }
        ));
    }

    #[test]
    fn rejects_zero_variance() {
        assert_eq!(shapiro_wilk(&[5.0, 5.0, 5.0, 5.0]).unwrap_err(), StatsError::ZeroVariance);
    }

    #[test]
    fn rejects_non_finite_values() {
        assert_eq!(shapiro_wilk(&[1.0, f64::NAN, 3.0]).unwrap_err(), StatsError::NonFiniteSample);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn spread_values() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0e9..1.0e9f64, 3..200).prop_filter(
            "needs nonzero range",
            |v| {
                let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                max - min > 1e-3
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn w_stays_in_unit_interval(values in spread_values()) {
            let w = shapiro_wilk(&values).unwrap().w_statistic;
            prop_assert!(w > 0.0 && w <= 1.0);
        }

        // W is invariant under positive affine maps of the data.
        #[test]
        fn affine_invariance(values in spread_values(), scale in 0.001..1000.0f64, shift in -1.0e6..1.0e6f64) {
            let w = shapiro_wilk(&values).unwrap().w_statistic;
            let mapped: Vec<f64> = values.iter().map(|v| v * scale + shift).collect();
            let w_mapped = shapiro_wilk(&mapped).unwrap().w_statistic;
            prop_assert!((w - w_mapped).abs() <= 1e-9, "W {w} vs {w_mapped}");
        }
    }

    // On repeated seeded normal samples, W is almost always high.
    #[test]
    fn normal_samples_rarely_score_low() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let normal = Normal::new(1.0e6, 5.0e4).unwrap();
        let mut high = 0;
        for seed in 0..100u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..50).map(|_| normal.sample(&mut rng)).collect();
            if shapiro_wilk(&values).unwrap().w_statistic >= 0.9 {
                high += 1;
            }
        }
        assert!(high >= 95, "only {high} of 100 seeds scored W >= 0.9");
    }
}
