//! Standard synthetic multi-fidelity benchmarks, posed as maximization.
//!
//! Each benchmark pairs its target `f` with a cheap variant `f_low`. A
//! fidelity with bias bound `ζ` observes the convex blend
//! `(1 − w)·f + w·f_low` with `w = min(1, ζ / M)`, where `M` upper-bounds
//! `|f − f_low|` on the domain. The blend therefore stays within `ζ` of `f`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::MultiFidelityFunction;
use crate::partition::Bounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkName {
    Currin,
    Branin,
    Hartmann3,
    Hartmann6,
    Borehole,
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 5] = [
        BenchmarkName::Currin,
        BenchmarkName::Branin,
        BenchmarkName::Hartmann3,
        BenchmarkName::Hartmann6,
        BenchmarkName::Borehole,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkName::Currin => "currin",
            BenchmarkName::Branin => "branin",
            BenchmarkName::Hartmann3 => "hartmann3",
            BenchmarkName::Hartmann6 => "hartmann6",
            BenchmarkName::Borehole => "borehole",
        }
    }
}

impl fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BenchmarkName::ALL
            .into_iter()
            .find(|b| b.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownBenchmark(s.to_owned()))
    }
}

type Objective = fn(&[f64]) -> f64;

/// Box, target, cheap variant, optimum and maximizer.
type Definition = (&'static [(f64, f64)], Objective, Objective, f64, Vec<f64>);

#[derive(Debug, Clone)]
pub struct Benchmark {
    name: BenchmarkName,
    domain: Bounds,
    high: Objective,
    low: Objective,
    optimum: f64,
    argmax: Vec<f64>,
    gap: f64,
}

fn currin_raw(x1: f64, x2: f64) -> f64 {
    let factor = 1.0 - (-1.0 / (2.0 * x2)).exp();
    let num = 2300.0 * x1.powi(3) + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0;
    let den = 100.0 * x1.powi(3) + 500.0 * x1 * x1 + 4.0 * x1 + 20.0;
    factor * num / den
}

fn currin(x: &[f64]) -> f64 {
    currin_raw(x[0], x[1])
}

fn currin_low(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    let lo = (b - 0.05).max(0.0);
    0.25 * (currin_raw(a + 0.05, b + 0.05)
        + currin_raw(a + 0.05, lo)
        + currin_raw(a - 0.05, b + 0.05)
        + currin_raw(a - 0.05, lo))
}

fn branin_with(x: &[f64], b: f64, c: f64, t: f64) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let inner = x2 - b * x1 * x1 + c * x1 - 6.0;
    -(inner * inner + 10.0 * (1.0 - t) * x1.cos() + 10.0)
}

fn branin(x: &[f64]) -> f64 {
    branin_with(x, 5.1 / (4.0 * PI * PI), 5.0 / PI, 1.0 / (8.0 * PI))
}

fn branin_low(x: &[f64]) -> f64 {
    branin_with(
        x,
        5.1 / (4.0 * PI * PI) - 0.01,
        5.0 / PI - 0.1,
        1.0 / (8.0 * PI) + 0.05,
    )
}

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];

const HARTMANN3_A: [[f64; 3]; 4] = [
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
];

const HARTMANN3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];

const HARTMANN6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];

const HARTMANN6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

fn hartmann<const D: usize>(x: &[f64], a: &[[f64; D]; 4], p: &[[f64; D]; 4], shift: f64) -> f64 {
    (0..4)
        .map(|i| {
            let s: f64 = (0..D).map(|j| a[i][j] * (x[j] - p[i][j]).powi(2)).sum();
            (HARTMANN_ALPHA[i] - shift) * (-s).exp()
        })
        .sum()
}

fn hartmann3(x: &[f64]) -> f64 {
    hartmann(x, &HARTMANN3_A, &HARTMANN3_P, 0.0)
}

fn hartmann3_low(x: &[f64]) -> f64 {
    hartmann(x, &HARTMANN3_A, &HARTMANN3_P, 0.1)
}

fn hartmann6(x: &[f64]) -> f64 {
    hartmann(x, &HARTMANN6_A, &HARTMANN6_P, 0.0)
}

fn hartmann6_low(x: &[f64]) -> f64 {
    hartmann(x, &HARTMANN6_A, &HARTMANN6_P, 0.1)
}

fn borehole_with(x: &[f64], scale: f64, offset: f64) -> f64 {
    let [rw, r, tu, hu, tl, hl, l, kw] = [x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]];
    let lr = (r / rw).ln();
    scale * tu * (hu - hl) / (lr * (offset + 2.0 * l * tu / (lr * rw * rw * kw) + tu / tl))
}

fn borehole(x: &[f64]) -> f64 {
    borehole_with(x, 2.0 * PI, 1.0)
}

fn borehole_low(x: &[f64]) -> f64 {
    borehole_with(x, 5.0, 1.5)
}

/// Radical inverse of `index` in `base`.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut v = 0.0;
    while index > 0 {
        v += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    v
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// `n` points of the Halton sequence scaled into `domain`.
pub fn halton_points(domain: &Bounds, n: usize) -> Vec<Vec<f64>> {
    (1..=n as u64)
        .map(|i| {
            (0..domain.dim())
                .map(|k| {
                    let (lo, hi) = (domain.lower()[k], domain.upper()[k]);
                    lo + (hi - lo) * radical_inverse(i, PRIMES[k])
                })
                .collect()
        })
        .collect()
}

/// Coordinate pattern search maximizing `g` inside `domain`.
fn refine(domain: &Bounds, start: Vec<f64>, g: impl Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let mut x = start;
    let mut best = g(&x);
    let mut step: Vec<f64> = (0..domain.dim())
        .map(|k| 0.05 * (domain.upper()[k] - domain.lower()[k]))
        .collect();
    for _ in 0..40 {
        let mut improved = false;
        for k in 0..domain.dim() {
            for sign in [-1.0, 1.0] {
                let mut y = x.clone();
                y[k] = (y[k] + sign * step[k]).clamp(domain.lower()[k], domain.upper()[k]);
                let v = g(&y);
                if v > best {
                    best = v;
                    x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s /= 2.0);
        }
    }
    (x, best)
}

/// Upper estimate of `sup |f − f_low|`: Halton grid, local refinement of the
/// largest gaps, then a 10% margin.
fn calibrate(domain: &Bounds, high: Objective, low: Objective) -> f64 {
    let gap = |x: &[f64]| (high(x) - low(x)).abs();
    let mut scored: Vec<(f64, Vec<f64>)> = halton_points(domain, 4096 * domain.dim())
        .into_iter()
        .map(|x| (gap(&x), x))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut corners = Vec::new();
    for mask in 0..(1u32 << domain.dim()) {
        corners.push(
            (0..domain.dim())
                .map(|k| {
                    if mask >> k & 1 == 1 {
                        domain.upper()[k]
                    } else {
                        domain.lower()[k]
                    }
                })
                .collect::<Vec<_>>(),
        );
    }
    let top = scored.iter().take(16).map(|s| s.1.clone()).chain(corners);
    let best = top
        .map(|x| refine(domain, x, gap).1)
        .fold(scored[0].0, f64::max);
    1.1 * best
}

impl Benchmark {
    fn build(name: BenchmarkName) -> Benchmark {
        let (pairs, high, low, optimum, argmax): Definition = match name {
            BenchmarkName::Currin => (
                &[(0.0, 1.0), (0.0, 1.0)],
                currin,
                currin_low,
                13.798722044728327,
                vec![0.21666666666666667, 0.0],
            ),
            BenchmarkName::Branin => (
                &[(-5.0, 10.0), (0.0, 15.0)],
                branin,
                branin_low,
                -0.39788735772973816,
                vec![PI, 2.275],
            ),
            BenchmarkName::Hartmann3 => (
                &[(0.0, 1.0); 3],
                hartmann3,
                hartmann3_low,
                3.862779787332663,
                vec![0.11458889, 0.55564889, 0.85254699],
            ),
            BenchmarkName::Hartmann6 => (
                &[(0.0, 1.0); 6],
                hartmann6,
                hartmann6_low,
                3.322368011415515,
                vec![
                    0.20168951, 0.15001069, 0.47687398, 0.27533243, 0.31165162, 0.65730053,
                ],
            ),
            BenchmarkName::Borehole => (
                &[
                    (0.05, 0.15),
                    (100.0, 50000.0),
                    (63070.0, 115600.0),
                    (990.0, 1110.0),
                    (63.1, 116.0),
                    (700.0, 820.0),
                    (1120.0, 1680.0),
                    (9855.0, 12045.0),
                ],
                borehole,
                borehole_low,
                309.5755876604079,
                vec![0.15, 100.0, 115600.0, 1110.0, 116.0, 700.0, 1120.0, 12045.0],
            ),
        };
        let domain = Bounds::from_pairs(pairs).expect("benchmark boxes are valid");
        let gap = calibrate(&domain, high, low);
        Benchmark {
            name,
            domain,
            high,
            low,
            optimum,
            argmax,
            gap,
        }
    }

    pub fn name(&self) -> BenchmarkName {
        self.name
    }

    /// A known maximizer.
    pub fn argmax(&self) -> &[f64] {
        &self.argmax
    }

    /// The calibrated bound `M` on `|f − f_low|`.
    pub fn gap_bound(&self) -> f64 {
        self.gap
    }

    pub fn low(&self, x: &[f64]) -> f64 {
        (self.low)(x)
    }

    /// Blend weight for bias bound `ζ`.
    pub fn blend_weight(&self, bias: f64) -> f64 {
        if bias.is_nan() {
            1.0
        } else {
            (bias / self.gap).clamp(0.0, 1.0)
        }
    }
}

/// The named benchmark; the calibration runs once per process.
pub fn benchmark(name: BenchmarkName) -> &'static Benchmark {
    static CACHE: [OnceLock<Benchmark>; 5] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    let slot = BenchmarkName::ALL
        .iter()
        .position(|&b| b == name)
        .expect("every name has a slot");
    CACHE[slot].get_or_init(|| Benchmark::build(name))
}

pub fn benchmark_by_name(name: &str) -> Result<&'static Benchmark> {
    Ok(benchmark(name.parse()?))
}

impl MultiFidelityFunction for Benchmark {
    fn name(&self) -> &str {
        self.name.as_str()
    }
    fn domain(&self) -> &Bounds {
        &self.domain
    }
    fn target(&self, x: &[f64]) -> f64 {
        (self.high)(x)
    }
    fn approximation(&self, x: &[f64], _z: f64, bias: f64) -> f64 {
        let w = self.blend_weight(bias);
        if w == 0.0 {
            (self.high)(x)
        } else {
            (1.0 - w) * (self.high)(x) + w * (self.low)(x)
        }
    }
    fn optimum(&self) -> f64 {
        self.optimum
    }
}
