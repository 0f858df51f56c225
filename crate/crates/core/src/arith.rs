//! Arithmetic over registers holding `0..=M`.

use std::sync::Arc;

use crate::error::Result;
use crate::terpret::{lift_cached, IndicatorTensor, IntDomain};

/// Largest register value.
pub const M: usize = 18;
/// Register domain size, `M + 1`.
pub const REGISTER_SIZE: usize = M + 1;
/// Operators in encoding order: `+`, `-`, `*`, `/`.
pub const OPERATORS: [char; 4] = ['+', '-', '*', '/'];

pub fn register_domain() -> IntDomain {
    IntDomain::new(REGISTER_SIZE).expect("nonzero")
}

pub fn operator_domain() -> IntDomain {
    IntDomain::new(OPERATORS.len()).expect("nonzero")
}

/// `a op b` modulo 19. Division is floor division; dividing by zero gives `M`.
///
/// # Panics
/// If `op` is not an operator code.
pub fn arith_apply(a: usize, b: usize, op: usize) -> usize {
    let n = REGISTER_SIZE;
    match op {
        0 => (a + b) % n,
        1 => (a % n + n - b % n) % n,
        2 => (a * b) % n,
        3 if b == 0 => M,
        3 => (a / b) % n,
        _ => panic!("operator code {op} out of range"),
    }
}

/// Indicator of [`arith_apply`] over `(a, b, op)`.
pub fn arith_indicator() -> Result<Arc<IndicatorTensor>> {
    let r = register_domain();
    lift_cached("arith_apply", |x| arith_apply(x[0], x[1], x[2]), &[r, r, operator_domain()], r)
}

/// `(a + b) mod 19`.
pub fn add_indicator() -> Result<Arc<IndicatorTensor>> {
    let r = register_domain();
    lift_cached("add_mod", |x| (x[0] + x[1]) % REGISTER_SIZE, &[r, r], r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(arith_apply(15, 7, 0), 3);
        assert_eq!(arith_apply(5, 0, 3), 18);
        assert_eq!(arith_apply(3, 7, 1), 15);
        assert_eq!(arith_apply(5, 2, 3), 2);
    }

    #[test]
    fn indicator_division_by_zero() {
        let i = arith_indicator().unwrap();
        assert_eq!(i.get(18, &[5, 0, 3]), 1.0);
    }
}
