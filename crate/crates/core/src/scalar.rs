//! Scalar abstraction shared by every filter.
//!
//! All filter steps are written against [`Scalar`] so that the same code path
//! runs on plain `f64` and on [`Counted`], which tallies arithmetic operations
//! in a thread-local counter. That counter is how per-iteration op counts are
//! measured: dynamically, on the production code, not by hand.

use std::cell::Cell;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Real number type the filters are generic over.
///
/// Comparisons, `abs` and finiteness checks are not arithmetic and are never
/// counted. Everything else (`+ - * /`, unary negation, `sqrt`, trig) is.
pub trait Scalar:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn asin(self) -> Self;
    fn acos(self) -> Self;
    fn atan2(self, x: Self) -> Self;
    fn abs(self) -> Self;

    #[inline]
    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    #[inline]
    fn one() -> Self {
        Self::from_f64(1.0)
    }

    #[inline]
    fn is_finite(self) -> bool {
        self.to_f64().is_finite()
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn asin(self) -> Self {
        f64::asin(self)
    }
    #[inline]
    fn acos(self) -> Self {
        f64::acos(self)
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

thread_local! {
    static OPS: Cell<u64> = const { Cell::new(0) };
}

#[inline]
fn tick() {
    OPS.with(|c| c.set(c.get() + 1));
}

/// Resets this thread's operation counter to zero.
pub fn reset_op_counter() {
    OPS.with(|c| c.set(0));
}

/// Number of counted operations on this thread since the last reset.
pub fn op_counter() -> u64 {
    OPS.with(|c| c.get())
}

/// `f64` wrapper that counts every arithmetic operation performed on it.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Counted(pub f64);

macro_rules! counted_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for Counted {
            type Output = Counted;
            #[inline]
            fn $method(self, rhs: Counted) -> Counted {
                tick();
                Counted(self.0 $op rhs.0)
            }
        }
    };
}

counted_binop!(Add, add, +);
counted_binop!(Sub, sub, -);
counted_binop!(Mul, mul, *);
counted_binop!(Div, div, /);

impl Neg for Counted {
    type Output = Counted;
    #[inline]
    fn neg(self) -> Counted {
        tick();
        Counted(-self.0)
    }
}

impl Scalar for Counted {
    fn from_f64(v: f64) -> Self {
        Counted(v)
    }
    fn to_f64(self) -> f64 {
        self.0
    }
    fn sqrt(self) -> Self {
        tick();
        Counted(self.0.sqrt())
    }
    fn sin(self) -> Self {
        tick();
        Counted(self.0.sin())
    }
    fn cos(self) -> Self {
        tick();
        Counted(self.0.cos())
    }
    fn asin(self) -> Self {
        tick();
        Counted(self.0.asin())
    }
    fn acos(self) -> Self {
        tick();
        Counted(self.0.acos())
    }
    fn atan2(self, x: Self) -> Self {
        tick();
        Counted(self.0.atan2(x.0))
    }
    fn abs(self) -> Self {
        Counted(self.0.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_each_operation_once() {
        reset_op_counter();
        let a = Counted(2.0);
        let b = Counted(3.0);
        let c = (a + b) * a - b / a;
        let _ = -c.sqrt();
        assert_eq!(op_counter(), 6);
    }

    #[test]
    fn comparisons_and_constants_are_free() {
        reset_op_counter();
        let a = Counted::from_f64(1.5);
        let _ = a < Counted::one();
        let _ = a.abs();
        let _ = a.is_finite();
        assert_eq!(op_counter(), 0);
    }
}
