//! Dense row-major tensors over a [`Rig`].
//!
//! No views, strides or broadcasting: operands of pointwise operations must
//! have identical shapes. Rank is capped at 3.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rig::{Rig, RigValue};

pub const MAX_RANK: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Shape(Arc<[usize]>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Self {
        Shape(dims.into().into())
    }

    pub fn scalar() -> Self {
        Shape(Arc::from([]))
    }

    pub fn vector(n: usize) -> Self {
        Shape(Arc::from([n]))
    }

    pub fn matrix(rows: usize, cols: usize) -> Self {
        Shape(Arc::from([rows, cols]))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }
}

impl From<&[usize]> for Shape {
    fn from(d: &[usize]) -> Self {
        Shape(d.into())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "x")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Data {
    Real(Arc<Vec<f64>>),
    Bits(Arc<Vec<bool>>),
}

impl Data {
    fn real(v: Vec<f64>) -> Data {
        Data::Real(Arc::new(v))
    }

    fn bits(v: Vec<bool>) -> Data {
        Data::Bits(Arc::new(v))
    }

    fn len(&self) -> usize {
        match self {
            Data::Real(v) => v.len(),
            Data::Bits(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Data,
}

fn check_rank(shape: &Shape) -> Result<()> {
    if shape.rank() > MAX_RANK {
        return Err(Error::shape(
            "tensor",
            format!("rank {} exceeds the maximum of {MAX_RANK}", shape.rank()),
        ));
    }
    Ok(())
}

impl Tensor {
    pub fn zeros(rig: Rig, shape: Shape) -> Tensor {
        let n = shape.numel();
        let data = match rig {
            Rig::Real => Data::real(vec![0.0; n]),
            Rig::Z2 => Data::bits(vec![false; n]),
        };
        Tensor { shape, data }
    }

    pub fn ones(rig: Rig, shape: Shape) -> Tensor {
        let n = shape.numel();
        let data = match rig {
            Rig::Real => Data::real(vec![1.0; n]),
            Rig::Z2 => Data::bits(vec![true; n]),
        };
        Tensor { shape, data }
    }

    pub fn from_reals(shape: Shape, data: Vec<f64>) -> Result<Tensor> {
        check_rank(&shape)?;
        if data.len() != shape.numel() {
            return Err(Error::shape(
                "from_reals",
                format!("{} values for shape {shape}", data.len()),
            ));
        }
        Ok(Tensor {
            shape,
            data: Data::real(data),
        })
    }

    pub fn from_bits(shape: Shape, data: Vec<bool>) -> Result<Tensor> {
        check_rank(&shape)?;
        if data.len() != shape.numel() {
            return Err(Error::shape(
                "from_bits",
                format!("{} values for shape {shape}", data.len()),
            ));
        }
        Ok(Tensor {
            shape,
            data: Data::bits(data),
        })
    }

    /// Builds a tensor from values that must all belong to `rig`.
    pub fn from_values(rig: Rig, shape: Shape, values: &[RigValue]) -> Result<Tensor> {
        for v in values {
            if v.rig() != rig {
                return Err(Error::RigMismatch {
                    op: "from_values",
                    left: rig,
                    right: v.rig(),
                });
            }
        }
        match rig {
            Rig::Real => {
                Tensor::from_reals(shape, values.iter().map(|v| v.as_real().unwrap()).collect())
            }
            Rig::Z2 => {
                Tensor::from_bits(shape, values.iter().map(|v| v.as_bit().unwrap()).collect())
            }
        }
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor {
            shape: Shape::scalar(),
            data: Data::real(vec![v]),
        }
    }

    pub fn bit(b: bool) -> Tensor {
        Tensor {
            shape: Shape::scalar(),
            data: Data::bits(vec![b]),
        }
    }

    pub fn vector(v: Vec<f64>) -> Tensor {
        Tensor {
            shape: Shape::vector(v.len()),
            data: Data::real(v),
        }
    }

    pub fn bit_vector(v: Vec<bool>) -> Tensor {
        Tensor {
            shape: Shape::vector(v.len()),
            data: Data::bits(v),
        }
    }

    pub fn matrix(rows: usize, cols: usize, v: Vec<f64>) -> Result<Tensor> {
        Tensor::from_reals(Shape::matrix(rows, cols), v)
    }

    pub fn identity(rig: Rig, n: usize) -> Tensor {
        let mut t = Tensor::zeros(rig, Shape::matrix(n, n));
        for i in 0..n {
            t.set(i * n + i, rig.one());
        }
        t
    }

    pub fn rig(&self) -> Rig {
        match self.data {
            Data::Real(_) => Rig::Real,
            Data::Bits(_) => Rig::Z2,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> RigValue {
        match &self.data {
            Data::Real(v) => RigValue::Real(v[i]),
            Data::Bits(v) => RigValue::Bit(v[i]),
        }
    }

    fn set(&mut self, i: usize, value: RigValue) {
        match (&mut self.data, value) {
            (Data::Real(v), RigValue::Real(x)) => Arc::make_mut(v)[i] = x,
            (Data::Bits(v), RigValue::Bit(b)) => Arc::make_mut(v)[i] = b,
            _ => panic!("rig mismatch in Tensor::set"),
        }
    }

    pub fn values(&self) -> Vec<RigValue> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    pub fn reals(&self) -> Option<&[f64]> {
        match &self.data {
            Data::Real(v) => Some(v),
            Data::Bits(_) => None,
        }
    }

    pub fn bits(&self) -> Option<&[bool]> {
        match &self.data {
            Data::Bits(v) => Some(v),
            Data::Real(_) => None,
        }
    }

    /// The real entries, or a rig-support error naming `op`.
    pub fn real_data(&self, op: &str) -> Result<&[f64]> {
        self.reals().ok_or_else(|| Error::RigSupport {
            prim: op.to_string(),
            rig: Rig::Z2,
        })
    }

    pub fn reshape(&self, shape: Shape) -> Result<Tensor> {
        check_rank(&shape)?;
        if shape.numel() != self.len() {
            return Err(Error::shape(
                "reshape",
                format!("{} cannot be reshaped to {shape}", self.shape),
            ));
        }
        Ok(Tensor {
            shape,
            data: self.data.clone(),
        })
    }

    fn same_layout(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.rig() != other.rig() {
            return Err(Error::RigMismatch {
                op,
                left: self.rig(),
                right: other.rig(),
            });
        }
        if self.shape != other.shape {
            return Err(Error::shape(
                op,
                format!("{} vs {}", self.shape, other.shape),
            ));
        }
        Ok(())
    }

    fn zip(
        &self,
        other: &Tensor,
        op: &'static str,
        real: impl Fn(f64, f64) -> f64,
        bit: impl Fn(bool, bool) -> bool,
    ) -> Result<Tensor> {
        self.same_layout(other, op)?;
        let data = match (&self.data, &other.data) {
            (Data::Real(a), Data::Real(b)) => {
                Data::real(a.iter().zip(b.iter()).map(|(&x, &y)| real(x, y)).collect())
            }
            (Data::Bits(a), Data::Bits(b)) => {
                Data::bits(a.iter().zip(b.iter()).map(|(&x, &y)| bit(x, y)).collect())
            }
            _ => unreachable!(),
        };
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Pointwise rig sum.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "add", |x, y| x + y, |x, y| x ^ y)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "sub", |x, y| x - y, |x, y| x ^ y)
    }

    /// Pointwise rig product.
    pub fn hadamard(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "hadamard", |x, y| x * y, |x, y| x & y)
    }

    pub fn neg(&self) -> Tensor {
        match &self.data {
            Data::Real(v) => Tensor {
                shape: self.shape.clone(),
                data: Data::real(v.iter().map(|x| -x).collect()),
            },
            Data::Bits(_) => self.clone(),
        }
    }

    pub fn scale(&self, c: RigValue) -> Result<Tensor> {
        let data = match (&self.data, c) {
            (Data::Real(v), RigValue::Real(c)) => Data::real(v.iter().map(|x| c * x).collect()),
            (Data::Bits(v), RigValue::Bit(c)) => Data::bits(v.iter().map(|&x| c & x).collect()),
            _ => {
                return Err(Error::RigMismatch {
                    op: "scale",
                    left: self.rig(),
                    right: c.rig(),
                })
            }
        };
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Real-only pointwise map.
    pub fn map_real(&self, op: &str, f: impl Fn(f64) -> f64) -> Result<Tensor> {
        let v = self.real_data(op)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: Data::real(v.iter().map(|&x| f(x)).collect()),
        })
    }

    /// Real-only pointwise binary map.
    pub fn zip_real(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        self.real_data(op)?;
        self.zip(other, op, f, |_, _| unreachable!())
    }

    /// Rig sum of every entry.
    pub fn sum_all(&self) -> RigValue {
        match &self.data {
            Data::Real(v) => RigValue::Real(v.iter().sum()),
            Data::Bits(v) => RigValue::Bit(v.iter().fold(false, |a, &b| a ^ b)),
        }
    }

    /// Full contraction of two same-shape tensors.
    pub fn dot(&self, other: &Tensor) -> Result<RigValue> {
        Ok(self.hadamard(other)?.sum_all())
    }

    fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match *self.shape.dims() {
            [m, n] => Ok((m, n)),
            _ => Err(Error::shape(
                op,
                format!("expected a matrix, got {}", self.shape),
            )),
        }
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2("matmul")?;
        let (k2, n) = other.dims2("matmul")?;
        if self.rig() != other.rig() {
            return Err(Error::RigMismatch {
                op: "matmul",
                left: self.rig(),
                right: other.rig(),
            });
        }
        if k != k2 {
            return Err(Error::shape(
                "matmul",
                format!("{} x {}", self.shape, other.shape),
            ));
        }
        let data = match (&self.data, &other.data) {
            (Data::Real(a), Data::Real(b)) => {
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    for l in 0..k {
                        let ail = a[i * k + l];
                        for j in 0..n {
                            out[i * n + j] += ail * b[l * n + j];
                        }
                    }
                }
                Data::real(out)
            }
            (Data::Bits(a), Data::Bits(b)) => {
                let mut out = vec![false; m * n];
                for i in 0..m {
                    for l in 0..k {
                        if a[i * k + l] {
                            for j in 0..n {
                                out[i * n + j] ^= b[l * n + j];
                            }
                        }
                    }
                }
                Data::bits(out)
            }
            _ => unreachable!(),
        };
        Ok(Tensor {
            shape: Shape::matrix(m, n),
            data,
        })
    }

    pub fn outer(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape.rank() != 1 || other.shape.rank() != 1 {
            return Err(Error::shape(
                "outer",
                format!("expected vectors, got {} and {}", self.shape, other.shape),
            ));
        }
        let (m, n) = (self.len(), other.len());
        self.reshape(Shape::matrix(m, 1))?
            .matmul(&other.reshape(Shape::matrix(1, n))?)
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (m, n) = self.dims2("transpose")?;
        let mut out = Tensor::zeros(self.rig(), Shape::matrix(n, m));
        for i in 0..m {
            for j in 0..n {
                out.set(j * m + i, self.get(i * n + j));
            }
        }
        Ok(out)
    }

    /// Concatenation along the leading axis.
    pub fn concat(&self, other: &Tensor) -> Result<Tensor> {
        if self.rig() != other.rig() {
            return Err(Error::RigMismatch {
                op: "concat",
                left: self.rig(),
                right: other.rig(),
            });
        }
        let (a, b) = (self.shape.dims(), other.shape.dims());
        if a.is_empty() || a.len() != b.len() || a[1..] != b[1..] {
            return Err(Error::shape(
                "concat",
                format!("{} and {}", self.shape, other.shape),
            ));
        }
        let mut dims = a.to_vec();
        dims[0] += b[0];
        let data = match (&self.data, &other.data) {
            (Data::Real(x), Data::Real(y)) => Data::real([x.as_slice(), y].concat()),
            (Data::Bits(x), Data::Bits(y)) => Data::bits([x.as_slice(), y].concat()),
            _ => unreachable!(),
        };
        Ok(Tensor {
            shape: Shape(dims.into()),
            data,
        })
    }

    /// Inverse of [`Tensor::concat`]: splits the leading axis at `at`.
    pub fn split(&self, at: usize) -> Result<(Tensor, Tensor)> {
        let dims = self.shape.dims();
        if dims.is_empty() || at > dims[0] {
            return Err(Error::shape(
                "split",
                format!("cannot split {} at {at}", self.shape),
            ));
        }
        let stride: usize = dims[1..].iter().product();
        let cut = at * stride;
        let mut left = dims.to_vec();
        left[0] = at;
        let mut right = dims.to_vec();
        right[0] = dims[0] - at;
        let (l, r) = match &self.data {
            Data::Real(v) => (Data::real(v[..cut].to_vec()), Data::real(v[cut..].to_vec())),
            Data::Bits(v) => (Data::bits(v[..cut].to_vec()), Data::bits(v[cut..].to_vec())),
        };
        Ok((
            Tensor {
                shape: Shape(left.into()),
                data: l,
            },
            Tensor {
                shape: Shape(right.into()),
                data: r,
            },
        ))
    }

    /// Largest absolute entrywise difference; bits compare as 0/1.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        if self.shape != other.shape || self.rig() != other.rig() {
            return f64::INFINITY;
        }
        match (&self.data, &other.data) {
            (Data::Real(a), Data::Real(b)) => a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
            (Data::Bits(a), Data::Bits(b)) => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            _ => unreachable!(),
        }
    }
}

impl fmt::Display for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}(", self.rig(), self.shape)?;
        for i in 0..self.len() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", self.get(i))?;
        }
        write!(f, ")")
    }
}
