//! Closed-form and exact reference values used by the integration tests.
//! Nothing here calls into the library's estimators.
#![allow(dead_code)]

use trapclock::dynamics::FiniteChain;

pub type Matrix = Vec<Vec<f64>>;

pub fn identity(n: usize) -> Matrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b[0].len();
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for (k, bk) in b.iter().enumerate() {
            let aik = a[i][k];
            for j in 0..m {
                out[i][j] += aik * bk[j];
            }
        }
    }
    out
}

/// Jump matrix built straight from the rates, independent of
/// `FiniteChain::jump_matrix`.
pub fn transition_matrix(chain: &FiniteChain) -> Matrix {
    let n = chain.len();
    let mut p = vec![vec![0.0; n]; n];
    for (x, row) in p.iter_mut().enumerate() {
        let total: f64 = chain.rates(x).iter().map(|r| r.1).sum();
        for &(y, r) in chain.rates(x) {
            row[y] += r / total;
        }
    }
    p
}

/// Mean of the exponential mark at `x` in discrete time: `weight / λ̃(x)`.
pub fn mark_mean(chain: &FiniteChain, x: usize) -> f64 {
    chain.weight(x) / chain.rates(x).iter().map(|r| r.1).sum::<f64>()
}

/// `P(m1 E1 + m2 E2 > v)` for independent unit exponentials.
pub fn hypo_tail(m1: f64, m2: f64, v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    if (m1 - m2).abs() <= 1e-12 * m1.max(m2) {
        let m = 0.5 * (m1 + m2);
        return (-v / m).exp() * (1.0 + v / m);
    }
    (m1 * (-v / m1).exp() - m2 * (-v / m2).exp()) / (m1 - m2)
}

/// `E[Z; Z <= eps]` for `Z = m1 E1 + m2 E2`.
pub fn hypo_truncated_mean(m1: f64, m2: f64, eps: f64) -> f64 {
    let upper_tail_integral = if (m1 - m2).abs() <= 1e-12 * m1.max(m2) {
        let m = 0.5 * (m1 + m2);
        (-eps / m).exp() * (2.0 * m + eps)
    } else {
        (m1 * m1 * (-eps / m1).exp() - m2 * m2 * (-eps / m2).exp()) / (m1 - m2)
    };
    (m1 + m2) - (eps * hypo_tail(m1, m2, eps) + upper_tail_integral)
}

/// Exact block functionals of a discrete-time finite chain with two-step
/// blocks started from `x0`.
pub struct BlockOracle {
    pub pi: Vec<f64>,
    pub nu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub m: Vec<f64>,
}

pub fn block_oracle(chain: &FiniteChain, x0: usize, k_n: u64, c_n: f64, us: &[f64], eps: &[f64]) -> BlockOracle {
    let n = chain.len();
    let p = transition_matrix(chain);
    let p2 = mat_mul(&p, &p);
    // occupation of the skeleton at steps 2k, k = 1..k_n-1
    let mut occ = vec![0.0; n];
    let mut row = identity(n)[x0].clone();
    for _ in 1..k_n {
        row = (0..n).map(|j| (0..n).map(|i| row[i] * p2[i][j]).sum()).collect();
        for j in 0..n {
            occ[j] += row[j];
        }
    }
    let means: Vec<f64> = (0..n).map(|x| mark_mean(chain, x)).collect();
    // per-start block statistics, summing over the two-step paths y -> y1 -> y2
    let block = |y: usize, f: &dyn Fn(f64, f64) -> f64| -> f64 {
        let mut acc = 0.0;
        for y1 in 0..n {
            for y2 in 0..n {
                let w = p[y][y1] * p[y1][y2];
                if w > 0.0 {
                    acc += w * f(means[y1], means[y2]);
                }
            }
        }
        acc
    };
    let nu = us
        .iter()
        .map(|&u| (0..n).map(|y| occ[y] * block(y, &|a, b| hypo_tail(a, b, u * c_n))).sum())
        .collect();
    let sigma = us
        .iter()
        .map(|&u| {
            (0..n)
                .map(|y| occ[y] * block(y, &|a, b| hypo_tail(a, b, u * c_n)).powi(2))
                .sum()
        })
        .collect();
    let m = eps
        .iter()
        .map(|&e| {
            (0..n)
                .map(|y| occ[y] * block(y, &|a, b| hypo_truncated_mean(a, b, e * c_n)) / c_n)
                .sum()
        })
        .collect();
    BlockOracle {
        pi: occ.iter().map(|o| o / k_n as f64).collect(),
        nu,
        sigma,
        m,
    }
}

/// `P(L_a(t) > l)` for the time `L_a(t)` spent in state `a` during `[0, t]`
/// by a two-state chain started in `a`, with exit rates `q_ab`, `q_ba`.
///
/// Completed `a`-sojourns form a Poisson process in `a`-occupation time, each
/// followed by an `Exp(q_ba)` visit to `b`, so
/// `P(L_a > l) = Σ_k Pois(k; q_ab l) P(Gamma(k, q_ba) < t - l)`.
pub fn two_state_occupation_tail(q_ab: f64, q_ba: f64, t: f64, l: f64) -> f64 {
    if l < 0.0 {
        return 1.0;
    }
    if l >= t {
        return 0.0;
    }
    let mu = q_ab * l;
    let x = q_ba * (t - l);
    let mut total = 0.0;
    let mut pois = (-mu).exp();
    // Poisson CDF of the b-side count, P(Gamma(k, q_ba) < x) = P(N(x) >= k)
    let mut term = (-x).exp();
    let mut below = 0.0;
    for k in 0..400u32 {
        let gamma_cdf = if k == 0 { 1.0 } else { 1.0 - below };
        total += pois * gamma_cdf;
        below += term;
        term *= x / f64::from(k + 1);
        pois *= mu / f64::from(k + 1);
        if pois < 1e-300 && f64::from(k) > mu {
            break;
        }
    }
    total
}

/// `e^(-x) I_0(x)` by its power series, summed in log space so that large
/// `x` neither overflows nor underflows.
pub fn scaled_bessel_i0(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let lq = 2.0 * (0.5 * x).ln();
    let terms = (2.0 * x) as usize + 60;
    let mut logs = Vec::with_capacity(terms);
    let mut lt = -x;
    logs.push(lt);
    for k in 1..terms {
        let kf = k as f64;
        lt += lq - 2.0 * kf.ln();
        logs.push(lt);
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top.exp() * logs.iter().map(|l| (l - top).exp()).sum::<f64>()
}

/// `P(J(t) = 0)` for the rate-`2d` simple random walk on `Z^d`.
pub fn srw_return_probability(d: usize, t: f64) -> f64 {
    scaled_bessel_i0(2.0 * t).powi(d as i32)
}

/// `(2/π) arcsin(√u)`.
pub fn arcsine_half(u: f64) -> f64 {
    2.0 / std::f64::consts::PI * u.sqrt().asin()
}

/// `(sin απ/π) ∫_0^u x^(α-1) (1-x)^(-α) dx` by composite Gauss-Legendre on
/// the substitution `x = w^(1/α)`, which removes the left singularity.
pub fn arcsine_quadrature(alpha: f64, u: f64) -> f64 {
    const NODES: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.236_926_885_056_189,
        0.478_628_670_499_366,
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
    ];
    // ∫ x^(α-1)(1-x)^(-α) dx = (1/α) ∫_0^{u^α} (1 - w^(1/α))^(-α) dw
    let top = u.powf(alpha);
    let panels = 4000;
    let h = top / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (z, w) in NODES.iter().zip(WEIGHTS) {
            let wv = mid + 0.5 * h * z;
            acc += w * 0.5 * h * (1.0 - wv.powf(1.0 / alpha)).powf(-alpha);
        }
    }
    (alpha * std::f64::consts::PI).sin() / std::f64::consts::PI * acc / alpha
}
