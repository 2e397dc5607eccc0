//! Closed-form and Monte Carlo prices used as references.
//!
//! All routines here work in `f64` regardless of the scalar type of the solver.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use std::f64::consts::{PI, SQRT_2};

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-x / SQRT_2)
}

const GL6: ([f64; 3], [f64; 3]) = (
    [0.171_324_492_379_170_5, 0.360_761_573_048_138_4, 0.467_913_934_572_690_4],
    [-0.932_469_514_203_152_2, -0.661_209_386_466_264_7, -0.238_619_186_083_197_0],
);

const GL12: ([f64; 6], [f64; 6]) = (
    [
        0.047_175_336_386_511_77,
        0.106_939_325_995_318_3,
        0.160_078_328_543_346_4,
        0.203_167_426_723_065_9,
        0.233_492_536_538_354_7,
        0.249_147_045_813_402_9,
    ],
    [
        -0.981_560_634_246_719_1,
        -0.904_117_256_370_475_0,
        -0.769_902_674_194_305_0,
        -0.587_317_954_286_617_1,
        -0.367_831_498_998_180_2,
        -0.125_233_408_511_469_2,
    ],
);

const GL20: ([f64; 10], [f64; 10]) = (
    [
        0.017_614_007_139_152_12,
        0.040_601_429_800_386_94,
        0.062_672_048_334_109_06,
        0.083_276_741_576_704_75,
        0.101_930_119_817_240_4,
        0.118_194_531_961_518_4,
        0.131_688_638_449_176_6,
        0.142_096_109_318_382_1,
        0.149_172_986_472_603_7,
        0.152_753_387_130_725_9,
    ],
    [
        -0.993_128_599_185_094_9,
        -0.963_971_927_277_913_8,
        -0.912_234_428_251_325_9,
        -0.839_116_971_822_218_8,
        -0.746_331_906_460_150_8,
        -0.636_053_680_726_515_0,
        -0.510_867_001_950_827_1,
        -0.373_706_088_715_419_6,
        -0.227_785_851_141_645_1,
        -0.076_526_521_133_497_33,
    ],
);

/// Upper orthant probability `P(X > h, Y > k)` (Genz's BVND algorithm).
fn upper_orthant(h: f64, k: f64, r: f64) -> f64 {
    let (w, x): (&[f64], &[f64]) = if r.abs() < 0.3 {
        (&GL6.0, &GL6.1)
    } else if r.abs() < 0.75 {
        (&GL12.0, &GL12.1)
    } else {
        (&GL20.0, &GL20.1)
    };
    let two_pi = 2.0 * PI;
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        if r.abs() > 0.0 {
            let hs = (h * h + k * k) / 2.0;
            let asr = r.asin();
            for (wi, xi) in w.iter().zip(x) {
                for sign in [-1.0, 1.0] {
                    let sn = (asr * (sign * xi + 1.0) / 2.0).sin();
                    bvn += wi * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn *= asr / (2.0 * two_pi);
        }
        return bvn + norm_cdf(-h) * norm_cdf(-k);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let asr = -(bs / a_s + hk) / 2.0;
        if asr > -100.0 {
            bvn = a * asr.exp() * (1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        }
        if -hk < 100.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp() * two_pi.sqrt() * norm_cdf(-b / a) * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (wi, xi) in w.iter().zip(x) {
            for sign in [-1.0, 1.0] {
                let xs = (a * (sign * xi + 1.0)).powi(2);
                let rs = (1.0 - xs).sqrt();
                let asr = -(bs / xs + hk) / 2.0;
                if asr > -100.0 {
                    bvn += a
                        * wi
                        * asr.exp()
                        * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / two_pi;
    }
    if r > 0.0 {
        bvn + norm_cdf(-h.max(k))
    } else {
        bvn = -bvn;
        if k > h {
            if h < 0.0 {
                bvn += norm_cdf(k) - norm_cdf(h);
            } else {
                bvn += norm_cdf(-h) - norm_cdf(-k);
            }
        }
        bvn
    }
}

/// Bivariate standard normal CDF `M(a, b; ρ) = P(X ≤ a, Y ≤ b)` with `corr(X, Y) = ρ`.
///
/// Infinite limits are allowed.
pub fn bivariate_cdf(a: f64, b: f64, rho: f64) -> f64 {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return 0.0;
    }
    if a == f64::INFINITY {
        return norm_cdf(b);
    }
    if b == f64::INFINITY {
        return norm_cdf(a);
    }
    let rho = rho.clamp(-1.0, 1.0);
    upper_orthant(-a, -b, rho).clamp(0.0, 1.0)
}

/// Black-Scholes call with cost of carry `b` (`b = r` for a non-dividend asset).
pub fn black_scholes_call(s: f64, k: f64, t: f64, r: f64, b: f64, sigma: f64) -> f64 {
    let carry = ((b - r) * t).exp();
    if s <= 0.0 {
        return 0.0;
    }
    if t <= 0.0 {
        return (s - k).max(0.0);
    }
    if k <= 0.0 {
        return s * carry - k * (-r * t).exp();
    }
    let vol = sigma * t.sqrt();
    if vol <= 0.0 {
        return (s * carry - k * (-r * t).exp()).max(0.0);
    }
    let d1 = ((s / k).ln() + (b + 0.5 * sigma * sigma) * t) / vol;
    let d2 = d1 - vol;
    s * carry * norm_cdf(d1) - k * (-r * t).exp() * norm_cdf(d2)
}

/// Inputs of the two-asset call on the maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticInputs {
    pub s1: f64,
    pub s2: f64,
    pub strike: f64,
    pub maturity: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub rate: f64,
    /// Cost of carry of each asset (equal to `rate` without dividends).
    pub carry1: f64,
    pub carry2: f64,
}

impl AnalyticInputs {
    #[allow(clippy::too_many_arguments)]
    pub fn new(s1: f64, s2: f64, strike: f64, maturity: f64, sigma1: f64, sigma2: f64, rho: f64, rate: f64) -> Self {
        Self { s1, s2, strike, maturity, sigma1, sigma2, rho, rate, carry1: rate, carry2: rate }
    }
}

/// Closed-form price of a European call on the maximum of two assets.
pub fn analytic_price(p: &AnalyticInputs) -> f64 {
    let AnalyticInputs { s1, s2, strike, maturity: t, sigma1, sigma2, rho, rate: r, carry1: b1, carry2: b2 } = *p;
    if t <= 0.0 {
        return (s1.max(s2) - strike).max(0.0);
    }
    if s1 <= 0.0 {
        return black_scholes_call(s2, strike, t, r, b2, sigma2);
    }
    if s2 <= 0.0 {
        return black_scholes_call(s1, strike, t, r, b1, sigma1);
    }
    let sq = t.sqrt();
    let sigma = (sigma1 * sigma1 + sigma2 * sigma2 - 2.0 * rho * sigma1 * sigma2).max(0.0).sqrt();
    if sigma < 1e-12 {
        // perfectly co-moving assets: a single-asset call on the larger one
        let (s, b, v) = if s1 >= s2 { (s1, b1, sigma1) } else { (s2, b2, sigma2) };
        return black_scholes_call(s, strike, t, r, b, v);
    }
    let d = ((s1 / s2).ln() + (b1 - b2 + 0.5 * sigma * sigma) * t) / (sigma * sq);
    let (y1, y2) = if strike > 0.0 {
        (
            ((s1 / strike).ln() + (b1 + 0.5 * sigma1 * sigma1) * t) / (sigma1 * sq),
            ((s2 / strike).ln() + (b2 + 0.5 * sigma2 * sigma2) * t) / (sigma2 * sq),
        )
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let rho1 = (sigma1 - rho * sigma2) / sigma;
    let rho2 = (sigma2 - rho * sigma1) / sigma;
    let first = s1 * ((b1 - r) * t).exp() * bivariate_cdf(y1, d, rho1);
    let second = s2 * ((b2 - r) * t).exp() * bivariate_cdf(y2, -d + sigma * sq, rho2);
    let third = if strike > 0.0 {
        strike * (-r * t).exp() * (1.0 - bivariate_cdf(-y1 + sigma1 * sq, -y2 + sigma2 * sq, rho))
    } else {
        0.0
    };
    first + second - third
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
    pub paths: u64,
}

const MC_BLOCK: u64 = 1 << 16;

/// Monte Carlo price of the call on the maximum from exact terminal sampling.
///
/// Paths are split into fixed blocks, each drawing from its own ChaCha stream, so
/// the result depends only on `seed` and `paths`, not on the thread count.
pub fn mc_price(p: &AnalyticInputs, paths: u64, seed: u64) -> McEstimate {
    let t = p.maturity;
    let sq = t.sqrt();
    let drift1 = (p.carry1 - 0.5 * p.sigma1 * p.sigma1) * t;
    let drift2 = (p.carry2 - 0.5 * p.sigma2 * p.sigma2) * t;
    let orth = (1.0 - p.rho * p.rho).max(0.0).sqrt();
    let disc = (-p.rate * t).exp();
    let blocks = paths.div_ceil(MC_BLOCK);
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block);
            let count = MC_BLOCK.min(paths - block * MC_BLOCK);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..count {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                let w2 = p.rho * z1 + orth * z2;
                let a = p.s1 * (drift1 + p.sigma1 * sq * z1).exp();
                let b = p.s2 * (drift2 + p.sigma2 * sq * w2).exp();
                let v = disc * (a.max(b) - p.strike).max(0.0);
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = sums.iter().fold((0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1));
    let n = paths as f64;
    let mean = sum / n;
    let var = ((sum_sq / n - mean * mean) * n / (n - 1.0).max(1.0)).max(0.0);
    McEstimate { price: mean, std_error: (var / n).sqrt(), paths }
}
