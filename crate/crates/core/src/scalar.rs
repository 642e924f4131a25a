//! Scalar fields the operators are built over.
//!
//! Every numeric routine in the crate is written once against [`Scalar`]
//! and instantiated for real (`f32`, `f64`) and complex (`Complex32`,
//! `Complex64`) entries. Tolerances and parameters are passed as `f64` and
//! converted into the scalar's real type at the point of use.

use nalgebra::ComplexField;
use num_complex::{Complex, Complex32, Complex64};
use num_traits::{NumCast, ToPrimitive};
use serde::{Deserialize, Serialize};

/// Which field the entries of an operator live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarField {
    Real,
    Complex,
}

/// Entry type of an [`Operator`](crate::Operator).
pub trait Scalar: ComplexField<RealField: NumCast + Copy> + Copy {
    const FIELD: ScalarField;

    /// Converts a complex number into this field, or `None` when the
    /// imaginary part cannot be represented (real fields).
    fn from_complex(z: Complex64) -> Option<Self>;

    fn to_complex(self) -> Complex64;

    /// Complex field over the same real type.
    type Complexified: Scalar<RealField = Self::RealField>;

    /// The same value as an element of the complexification.
    fn lift(self) -> Self::Complexified;

    /// A real value given as `f64`.
    fn from_re(x: f64) -> Self {
        Self::from_real(real::<Self>(x))
    }
}

/// `f64` into the real type of `T`.
pub fn real<T: Scalar>(x: f64) -> T::RealField {
    <T::RealField as NumCast>::from(x).expect("f64 is representable")
}

/// Real type of `T` back into `f64`.
pub fn to_f64<T: Scalar>(x: T::RealField) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Tolerance used for real-valuedness of complex inputs entering a real field.
const REAL_FIELD_IMAG_TOL: f64 = 0.0;

macro_rules! impl_real {
    ($t:ty) => {
        impl Scalar for $t {
            const FIELD: ScalarField = ScalarField::Real;

            fn from_complex(z: Complex64) -> Option<Self> {
                if z.im.abs() > REAL_FIELD_IMAG_TOL {
                    None
                } else {
                    Some(z.re as $t)
                }
            }

            fn to_complex(self) -> Complex64 {
                Complex64::new(self as f64, 0.0)
            }

            type Complexified = Complex<$t>;

            fn lift(self) -> Complex<$t> {
                Complex::new(self, 0.0)
            }
        }
    };
}

macro_rules! impl_complex {
    ($c:ty, $t:ty) => {
        impl Scalar for $c {
            const FIELD: ScalarField = ScalarField::Complex;

            fn from_complex(z: Complex64) -> Option<Self> {
                Some(<$c>::new(z.re as $t, z.im as $t))
            }

            fn to_complex(self) -> Complex64 {
                Complex64::new(self.re as f64, self.im as f64)
            }

            type Complexified = $c;

            fn lift(self) -> $c {
                self
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);
impl_complex!(Complex32, f32);
impl_complex!(Complex64, f64);
