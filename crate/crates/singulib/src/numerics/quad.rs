//! Gauss–Legendre panels and a globally adaptive Gauss–Kronrod integrator.

use crate::error::Error;

/// 15-point Kronrod abscissae (positive half, descending) with the embedded
/// 7-point Gauss weights. Standard QUADPACK constants.
const XGK15: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WG7: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];
const WGK15: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// One Gauss–Kronrod 15(7) pass over `[a, b]`. Returns (value, error estimate).
pub fn qk15<F: FnMut(f64) -> Result<f64, Error>>(
    f: &mut F,
    a: f64,
    b: f64,
) -> Result<(f64, f64), Error> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut result_gauss = WG7[3] * fc;
    let mut result_kronrod = WGK15[7] * fc;
    for j in 0..7 {
        let x = half * XGK15[j];
        let f1 = f(center - x)?;
        let f2 = f(center + x)?;
        result_kronrod += WGK15[j] * (f1 + f2);
        if j % 2 == 1 {
            result_gauss += WG7[j / 2] * (f1 + f2);
        }
    }
    let value = result_kronrod * half;
    let err = ((result_kronrod - result_gauss) * half).abs();
    Ok((value, err))
}

/// Globally adaptive integration of `f` over `[a, b]`: repeatedly bisect the
/// interval with the worst Kronrod error estimate until the accumulated
/// estimate meets `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F: FnMut(f64) -> Result<f64, Error>>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult, Error> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    // Start from several panels so narrow features away from panel nodes are
    // still seen by at least one Kronrod pass.
    const INITIAL_PANELS: usize = 8;
    let mut segments = Vec::with_capacity(INITIAL_PANELS);
    for i in 0..INITIAL_PANELS {
        let pa = a + (b - a) * i as f64 / INITIAL_PANELS as f64;
        let pb = a + (b - a) * (i + 1) as f64 / INITIAL_PANELS as f64;
        let (v, e) = qk15(&mut f, pa, pb)?;
        segments.push(Segment { a: pa, b: pb, v, e });
    }
    let mut evals = 15 * INITIAL_PANELS;
    const MAX_SEGMENTS: usize = 4096;
    loop {
        let value: f64 = segments.iter().map(|s| s.v).sum();
        let error: f64 = segments.iter().map(|s| s.e).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(QuadResult {
                value,
                error,
                evaluations: evals,
            });
        }
        if segments.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature(format!(
                "no convergence after {MAX_SEGMENTS} segments (error {error:.3e} > tol)",
            )));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.e.total_cmp(&y.1.e))
            .map(|(i, _)| i)
            .unwrap();
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
            return Err(Error::Quadrature(
                "interval collapsed below f64 resolution".into(),
            ));
        }
        let (v1, e1) = qk15(&mut f, seg.a, mid)?;
        let (v2, e2) = qk15(&mut f, mid, seg.b)?;
        evals += 30;
        segments.push(Segment {
            a: seg.a,
            b: mid,
            v: v1,
            e: e1,
        });
        segments.push(Segment {
            a: mid,
            b: seg.b,
            v: v2,
            e: e2,
        });
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    v: f64,
    e: f64,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-style initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
