//! Small numeric helpers shared by the solvers and the report builder.

/// Integer power by binary exponentiation.
///
/// Every probability expression in this crate raises a base in `[0, 1]` to a
/// test- or deploy-count exponent. Using a fixed sequence of IEEE
/// multiplications instead of `f64::powf` keeps results identical across
/// platforms and libm implementations, which the determinism guarantees rely
/// on.
pub fn pow_u64(base: f64, mut exp: u64) -> f64 {
    if exp == 0 {
        return 1.0;
    }
    let mut base = base;
    let mut acc = 1.0;
    loop {
        if exp & 1 == 1 {
            acc *= base;
        }
        exp >>= 1;
        if exp == 0 {
            break;
        }
        base *= base;
    }
    acc
}

/// True when `x` lies in the closed unit interval. NaN fails.
pub fn is_probability(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}
