//! Log-space combinatorics: factorials, binomials and restricted integer
//! partitions.

use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigUint;
use num_traits::{One, Zero};

const LN_FACTORIAL_TABLE: usize = 1 << 17;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..LN_FACTORIAL_TABLE)
            .map(|n| libm::lgamma(n as f64 + 1.0))
            .collect()
    })
}

/// `ln n!`.
#[inline]
pub fn ln_factorial(n: u64) -> f64 {
    let table = ln_factorial_table();
    match table.get(n as usize) {
        Some(&v) => v,
        None => libm::lgamma(n as f64 + 1.0),
    }
}

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `ln ((n, m))` with the multiset coefficient taken as `C(n + m + 1, m)`.
pub fn ln_multiset(n: u64, m: u64) -> f64 {
    ln_binomial(n + m + 1, m)
}

/// Memoised exact table of `q(n, m)`, the number of partitions of `n` into
/// at most `m` parts.
///
/// Row `n` stores `q(n, 0..=n)`; larger `m` saturate at `q(n, n)`.
#[derive(Debug, Default)]
pub struct ExactPartitions {
    rows: Vec<Vec<BigUint>>,
}

impl ExactPartitions {
    pub fn new() -> Self {
        Self::default()
    }

    fn extend_to(&mut self, n: usize) {
        while self.rows.len() <= n {
            let k = self.rows.len();
            let mut row = Vec::with_capacity(k + 1);
            row.push(if k == 0 {
                BigUint::one()
            } else {
                BigUint::zero()
            });
            for m in 1..=k {
                let rest = k - m;
                let with_part = self.rows[rest][m.min(rest)].clone();
                let value = &row[m - 1] + with_part;
                row.push(value);
            }
            self.rows.push(row);
        }
    }

    pub fn get(&mut self, n: usize, m: usize) -> BigUint {
        self.extend_to(n);
        self.rows[n][m.min(n)].clone()
    }
}

/// Exact `q(n, m)` from a process-wide memo table.
pub fn restricted_partitions(n: usize, m: usize) -> BigUint {
    static MEMO: OnceLock<Mutex<ExactPartitions>> = OnceLock::new();
    MEMO.get_or_init(|| Mutex::new(ExactPartitions::new()))
        .lock()
        .expect("partition memo poisoned")
        .get(n, m)
}

/// Default size limit of the tabulated `ln q(n, m)`.
pub const DEFAULT_PARTITION_CAP: usize = 2000;

/// `ln q(n, m)` evaluator: tabulated for `n <= cap`, asymptotic beyond.
///
/// Beyond the cap, `m < n^(1/4)` uses `ln C(n-1, m-1) - ln m!`; larger `m`
/// use the Szekeres saddle-point formula, which reduces to the
/// Hardy-Ramanujan estimate of the unrestricted count as `m -> n`.
#[derive(Debug)]
pub struct LnPartitions {
    cap: usize,
    table: Vec<f64>,
}

impl LnPartitions {
    pub fn with_cap(cap: usize) -> Self {
        // linear-space recurrence; q(cap, cap) stays far below f64::MAX for cap < 70_000
        let mut linear: Vec<f64> = Vec::with_capacity((cap + 1) * (cap + 2) / 2);
        let idx = |n: usize, m: usize| n * (n + 1) / 2 + m;
        for n in 0..=cap {
            linear.push(if n == 0 { 1.0 } else { 0.0 });
            for m in 1..=n {
                let rest = n - m;
                let v = linear[idx(n, m - 1)] + linear[idx(rest, m.min(rest))];
                linear.push(v);
            }
        }
        let table = linear.into_iter().map(f64::ln).collect();
        LnPartitions { cap, table }
    }

    /// Process-wide evaluator with [`DEFAULT_PARTITION_CAP`].
    pub fn shared() -> Arc<LnPartitions> {
        static SHARED: OnceLock<Arc<LnPartitions>> = OnceLock::new();
        SHARED
            .get_or_init(|| Arc::new(LnPartitions::with_cap(DEFAULT_PARTITION_CAP)))
            .clone()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    #[inline]
    pub fn ln_q(&self, n: u64, m: u64) -> f64 {
        let m = m.min(n);
        if n == 0 {
            return 0.0;
        }
        if m == 0 {
            return f64::NEG_INFINITY;
        }
        if (n as usize) <= self.cap {
            let (n, m) = (n as usize, m as usize);
            return self.table[n * (n + 1) / 2 + m];
        }
        ln_q_asymptotic(n, m)
    }
}

/// Dilogarithm `Li2(z)` for `z` in `[0, 1]`.
pub(crate) fn dilog(z: f64) -> f64 {
    const PI2_6: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
    if z >= 1.0 {
        return PI2_6;
    }
    if z > 0.5 {
        return PI2_6 - z.ln() * (-z).ln_1p() - dilog(1.0 - z);
    }
    let mut sum = 0.0;
    let mut power = z;
    for k in 1..=60 {
        let term = power / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
        power *= z;
    }
    sum
}

/// Solves `v^2 = u^2 Li2(1 - e^-v)` for `v > 0`.
fn saddle_point(u: f64) -> f64 {
    let f = |v: f64| v * v - u * u * dilog(-(-v).exp_m1());
    let (mut lo, mut hi) = (0.0f64, (u * u).max(u * 1.3).max(1.0));
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut v = if u > 1.0 {
        u * 1.282_549_830_161_864
    } else {
        u * u
    };
    v = v.clamp(lo + f64::EPSILON, hi);
    for _ in 0..100 {
        let fv = f(v);
        if fv < 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        let slope = 2.0 * v - u * u * v / v.exp_m1();
        let mut next = v - fv / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - v).abs() <= 1e-13 * v {
            return next;
        }
        v = next;
    }
    v
}

/// Asymptotic `ln q(n, m)` for large `n`.
pub fn ln_q_asymptotic(n: u64, m: u64) -> f64 {
    let m = m.min(n);
    let nf = n as f64;
    if (m as f64) < nf.powf(0.25) {
        return ln_binomial(n - 1, m - 1) - ln_factorial(m);
    }
    let u = m as f64 / nf.sqrt();
    let v = saddle_point(u);
    let em = (-v).exp();
    let ln_f = v.ln()
        - 0.5 * (-em * (1.0 + 0.5 * u * u)).ln_1p()
        - 1.5 * std::f64::consts::LN_2
        - u.ln()
        - std::f64::consts::PI.ln();
    let g = 2.0 * v / u - u * (-em).ln_1p();
    ln_f - nf.ln() + nf.sqrt() * g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_count(n: usize, max_parts: usize, max_part: usize) -> u64 {
        // partitions of n into at most `max_parts` parts, each <= max_part
        if n == 0 {
            return 1;
        }
        if max_parts == 0 {
            return 0;
        }
        (1..=max_part.min(n))
            .map(|p| brute_force_count(n - p, max_parts - 1, p))
            .sum()
    }

    #[test]
    fn small_values() {
        assert_eq!(restricted_partitions(4, 2), BigUint::from(3u32));
        assert_eq!(restricted_partitions(6, 3), BigUint::from(7u32));
        for n in 0..20 {
            assert_eq!(restricted_partitions(n, 1), BigUint::one());
        }
        assert_eq!(restricted_partitions(0, 0), BigUint::one());
        assert_eq!(restricted_partitions(3, 0), BigUint::zero());
    }

    #[test]
    fn matches_enumeration() {
        for n in 0..=25 {
            for m in 0..=n + 2 {
                assert_eq!(
                    restricted_partitions(n, m),
                    BigUint::from(brute_force_count(n, m, n)),
                    "q({n},{m})"
                );
            }
        }
    }

    #[test]
    fn table_matches_exact() {
        let lnq = LnPartitions::with_cap(120);
        for n in [1usize, 7, 50, 120] {
            for m in 1..=n {
                let exact = restricted_partitions(n, m);
                let want = exact.to_string().parse::<f64>().unwrap().ln();
                let got = lnq.ln_q(n as u64, m as u64);
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "q({n},{m})"
                );
            }
        }
    }

    #[test]
    fn asymptotic_is_close_for_large_n() {
        let lnq = LnPartitions::with_cap(3000);
        for m in [2u64, 3, 5, 8, 10, 20, 30, 45, 60, 100, 200, 400, 1000, 3000] {
            let exact = lnq.ln_q(3000, m);
            let approx = ln_q_asymptotic(3000, m);
            assert!(
                (exact - approx).abs() < 0.1,
                "q(3000,{m}) exact {exact} approx {approx}"
            );
        }
    }

    #[test]
    fn dilog_values() {
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert_eq!(dilog(0.0), 0.0);
        assert!((dilog(1.0) - pi2_6).abs() < 1e-15);
        let half = pi2_6 / 2.0 - std::f64::consts::LN_2.powi(2) / 2.0;
        assert!((dilog(0.5) - half).abs() < 1e-14);
        assert!((dilog(0.9) - 1.299_714_723_004_958_8).abs() < 1e-13);
    }

    #[test]
    fn ln_factorial_values() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-13);
        let big = LN_FACTORIAL_TABLE as u64 + 10;
        let direct = libm::lgamma(big as f64 + 1.0);
        assert_eq!(ln_factorial(big), direct);
        assert!((ln_binomial(10, 3) - 120f64.ln()).abs() < 1e-12);
    }
}
