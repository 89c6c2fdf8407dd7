//! Fixed-step Runge–Kutta 8(7) one-step map using the 13-stage Prince–Dormand
//! tableau (RK8(7)13M). Only the eighth-order solution is propagated; the embedded
//! seventh-order weights are kept for error estimates in tests.

use crate::Vector;

const STAGES: usize = 13;

pub const C: [f64; STAGES] = [
    0.0,
    1.0 / 18.0,
    1.0 / 12.0,
    1.0 / 8.0,
    5.0 / 16.0,
    3.0 / 8.0,
    59.0 / 400.0,
    93.0 / 200.0,
    5_490_023_248.0 / 9_719_169_821.0,
    13.0 / 20.0,
    1_201_146_811.0 / 1_299_019_798.0,
    1.0,
    1.0,
];

/// Strictly lower-triangular stage matrix, stored row by row as (column, value).
const A: [&[(usize, f64)]; STAGES] = [
    &[],
    &[(0, 1.0 / 18.0)],
    &[(0, 1.0 / 48.0), (1, 1.0 / 16.0)],
    &[(0, 1.0 / 32.0), (2, 3.0 / 32.0)],
    &[(0, 5.0 / 16.0), (2, -75.0 / 64.0), (3, 75.0 / 64.0)],
    &[(0, 3.0 / 80.0), (3, 3.0 / 16.0), (4, 3.0 / 20.0)],
    &[
        (0, 29_443_841.0 / 614_563_906.0),
        (3, 77_736_538.0 / 692_538_347.0),
        (4, -28_693_883.0 / 1_125_000_000.0),
        (5, 23_124_283.0 / 1_800_000_000.0),
    ],
    &[
        (0, 16_016_141.0 / 946_692_911.0),
        (3, 61_564_180.0 / 158_732_637.0),
        (4, 22_789_713.0 / 633_445_777.0),
        (5, 545_815_736.0 / 2_771_057_229.0),
        (6, -180_193_667.0 / 1_043_307_555.0),
    ],
    &[
        (0, 39_632_708.0 / 573_591_083.0),
        (3, -433_636_366.0 / 683_701_615.0),
        (4, -421_739_975.0 / 2_616_292_301.0),
        (5, 100_302_831.0 / 723_423_059.0),
        (6, 790_204_164.0 / 839_813_087.0),
        (7, 800_635_310.0 / 3_783_071_287.0),
    ],
    &[
        (0, 246_121_993.0 / 1_340_847_787.0),
        (3, -37_695_042_795.0 / 15_268_766_246.0),
        (4, -309_121_744.0 / 1_061_227_803.0),
        (5, -12_992_083.0 / 490_766_935.0),
        (6, 6_005_943_493.0 / 2_108_947_869.0),
        (7, 393_006_217.0 / 1_396_673_457.0),
        (8, 123_872_331.0 / 1_001_029_789.0),
    ],
    &[
        (0, -1_028_468_189.0 / 846_180_014.0),
        (3, 8_478_235_783.0 / 508_512_852.0),
        (4, 1_311_729_495.0 / 1_432_422_823.0),
        (5, -10_304_129_995.0 / 1_701_304_382.0),
        (6, -48_777_925_059.0 / 3_047_939_560.0),
        (7, 15_336_726_248.0 / 1_032_824_649.0),
        (8, -45_442_868_181.0 / 3_398_467_696.0),
        (9, 3_065_993_473.0 / 597_172_653.0),
    ],
    &[
        (0, 185_892_177.0 / 718_116_043.0),
        (3, -3_185_094_517.0 / 667_107_341.0),
        (4, -477_755_414.0 / 1_098_053_517.0),
        (5, -703_635_378.0 / 230_739_211.0),
        (6, 5_731_566_787.0 / 1_027_545_527.0),
        (7, 5_232_866_602.0 / 850_066_563.0),
        (8, -4_093_664_535.0 / 808_688_257.0),
        (9, 3_962_137_247.0 / 1_805_957_418.0),
        (10, 65_686_358.0 / 487_910_083.0),
    ],
    &[
        (0, 403_863_854.0 / 491_063_109.0),
        (3, -5_068_492_393.0 / 434_740_067.0),
        (4, -411_421_997.0 / 543_043_805.0),
        (5, 652_783_627.0 / 914_296_604.0),
        (6, 11_173_962_825.0 / 925_320_556.0),
        (7, -13_158_990_841.0 / 6_184_727_034.0),
        (8, 3_936_647_629.0 / 1_978_049_680.0),
        (9, -160_528_059.0 / 685_178_525.0),
        (10, 248_638_103.0 / 1_413_531_060.0),
    ],
];

/// Eighth-order solution weights.
pub const B8: [f64; STAGES] = [
    14_005_451.0 / 335_480_064.0,
    0.0,
    0.0,
    0.0,
    0.0,
    -59_238_493.0 / 1_068_277_825.0,
    181_606_767.0 / 758_867_731.0,
    561_292_985.0 / 797_845_732.0,
    -1_041_891_430.0 / 1_371_343_529.0,
    760_417_239.0 / 1_151_165_299.0,
    118_820_643.0 / 751_138_087.0,
    -528_747_749.0 / 2_220_607_170.0,
    1.0 / 4.0,
];

/// Embedded seventh-order weights.
pub const B7: [f64; STAGES] = [
    13_451_932.0 / 455_176_623.0,
    0.0,
    0.0,
    0.0,
    0.0,
    -808_719_846.0 / 976_000_145.0,
    1_757_004_468.0 / 5_645_159_321.0,
    656_045_339.0 / 265_891_186.0,
    -3_867_574_721.0 / 1_518_517_206.0,
    465_885_868.0 / 322_736_535.0,
    53_011_238.0 / 667_516_719.0,
    2.0 / 45.0,
    0.0,
];

fn stages<F>(f: &F, t: f64, y: &Vector, h: f64) -> Vec<Vector>
where
    F: Fn(f64, &Vector) -> Vector,
{
    let mut k: Vec<Vector> = Vec::with_capacity(STAGES);
    for i in 0..STAGES {
        let mut yi = y.clone();
        for &(j, a) in A[i] {
            yi.axpy(h * a, &k[j], 1.0);
        }
        k.push(f(t + C[i] * h, &yi));
    }
    k
}

fn combine(y: &Vector, k: &[Vector], weights: &[f64; STAGES], h: f64) -> Vector {
    let mut out = y.clone();
    for (ki, &b) in k.iter().zip(weights) {
        if b != 0.0 {
            out.axpy(h * b, ki, 1.0);
        }
    }
    out
}

/// One eighth-order step of `y' = f(t, y)` from `t` to `t + h`.
pub fn rk87_step<F>(f: F, t: f64, y: &Vector, h: f64) -> Vector
where
    F: Fn(f64, &Vector) -> Vector,
{
    let k = stages(&f, t, y, h);
    combine(y, &k, &B8, h)
}

/// One step returning both the eighth- and seventh-order solutions.
pub fn rk87_step_pair<F>(f: F, t: f64, y: &Vector, h: f64) -> (Vector, Vector)
where
    F: Fn(f64, &Vector) -> Vector,
{
    let k = stages(&f, t, y, h);
    (combine(y, &k, &B8, h), combine(y, &k, &B7, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(h: f64, order8: bool) -> f64 {
        let f = |t: f64, y: &Vector| y * t.cos();
        let n = (4.0 / h).round() as usize;
        let mut y = Vector::from_element(1, 1.0);
        let mut t = 0.0;
        for _ in 0..n {
            let (y8, y7) = rk87_step_pair(f, t, &y, h);
            y = if order8 { y8 } else { y7 };
            t += h;
        }
        (y[0] - 4.0f64.sin().exp()).abs()
    }

    #[test]
    fn row_sums_match_nodes() {
        for (i, row) in A.iter().enumerate() {
            let s: f64 = row.iter().map(|(_, a)| a).sum();
            assert!((s - C[i]).abs() < 1e-14, "row {i}");
        }
        assert!((B8.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((B7.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eighth_order_convergence() {
        let e1 = solve(0.5, true);
        let e2 = solve(0.25, true);
        let observed = (e1 / e2).log2();
        assert!(observed > 7.0, "observed order {observed}");
    }

    #[test]
    fn seventh_order_convergence() {
        let e1 = solve(0.5, false);
        let e2 = solve(0.25, false);
        let observed = (e1 / e2).log2();
        assert!(observed > 6.5 && observed < 8.0, "observed order {observed}");
    }

    #[test]
    fn linear_dynamics_exact() {
        // y = (p, v), p' = v, v' = 0
        let f = |_t: f64, y: &Vector| Vector::from_vec(vec![y[1], 0.0]);
        let y = rk87_step(f, 0.0, &Vector::from_vec(vec![3.0, -0.7]), 2.5);
        assert!((y[0] - (3.0 - 0.7 * 2.5)).abs() < 1e-13);
        assert_eq!(y[1], -0.7);
    }
}
