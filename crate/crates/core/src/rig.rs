//! The two commutative rigs every computation in this crate runs over.
//!
//! `Real` is the field of (64-bit floating point) reals. `Z2` is the field
//! with two elements, where addition is XOR and multiplication is AND. Both
//! share one interface so that primitives, the differentiation functor and
//! the optimisers are written once.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rig {
    Real,
    Z2,
}

impl fmt::Display for Rig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rig::Real => f.write_str("Real"),
            Rig::Z2 => f.write_str("Z2"),
        }
    }
}

/// A single element of one of the rigs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RigValue {
    Real(f64),
    Bit(bool),
}

impl RigValue {
    pub fn rig(self) -> Rig {
        match self {
            RigValue::Real(_) => Rig::Real,
            RigValue::Bit(_) => Rig::Z2,
        }
    }

    pub fn as_real(self) -> Option<f64> {
        match self {
            RigValue::Real(v) => Some(v),
            RigValue::Bit(_) => None,
        }
    }

    pub fn as_bit(self) -> Option<bool> {
        match self {
            RigValue::Bit(b) => Some(b),
            RigValue::Real(_) => None,
        }
    }
}

impl fmt::Display for RigValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RigValue::Real(v) => write!(f, "{v}"),
            RigValue::Bit(b) => write!(f, "{}", u8::from(*b)),
        }
    }
}

impl Rig {
    pub fn zero(self) -> RigValue {
        match self {
            Rig::Real => RigValue::Real(0.0),
            Rig::Z2 => RigValue::Bit(false),
        }
    }

    pub fn one(self) -> RigValue {
        match self {
            Rig::Real => RigValue::Real(1.0),
            Rig::Z2 => RigValue::Bit(true),
        }
    }

    fn check(self, op: &'static str, v: RigValue) -> Result<()> {
        if v.rig() == self {
            Ok(())
        } else {
            Err(Error::RigMismatch {
                op,
                left: self,
                right: v.rig(),
            })
        }
    }

    /// Monoid sum; XOR over Z2.
    pub fn add(self, a: RigValue, b: RigValue) -> Result<RigValue> {
        self.check("rig_add", a)?;
        self.check("rig_add", b)?;
        Ok(match (a, b) {
            (RigValue::Real(x), RigValue::Real(y)) => RigValue::Real(x + y),
            (RigValue::Bit(x), RigValue::Bit(y)) => RigValue::Bit(x ^ y),
            _ => unreachable!(),
        })
    }

    /// Rig product; AND over Z2.
    pub fn mul(self, a: RigValue, b: RigValue) -> Result<RigValue> {
        self.check("rig_mul", a)?;
        self.check("rig_mul", b)?;
        Ok(match (a, b) {
            (RigValue::Real(x), RigValue::Real(y)) => RigValue::Real(x * y),
            (RigValue::Bit(x), RigValue::Bit(y)) => RigValue::Bit(x & y),
            _ => unreachable!(),
        })
    }

    /// Additive inverse. Every element of Z2 is its own inverse, so this is
    /// the identity there.
    pub fn neg(self, a: RigValue) -> Result<RigValue> {
        self.check("rig_neg", a)?;
        Ok(match a {
            RigValue::Real(x) => RigValue::Real(-x),
            bit => bit,
        })
    }
}
