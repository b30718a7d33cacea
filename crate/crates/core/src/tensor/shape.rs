use std::fmt;

use crate::error::{Axis, Error, Result};

/// Extents of a rank-4 NCHW tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub const fn scalar() -> Self {
        Shape::new(1, 1, 1, 1)
    }

    pub const fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    /// Elements in one spatial plane.
    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    pub const fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn from_dims(d: [usize; 4]) -> Self {
        Shape::new(d[0], d[1], d[2], d[3])
    }

    /// Row-major strides.
    pub const fn strides(&self) -> [usize; 4] {
        [self.c * self.h * self.w, self.h * self.w, self.w, 1]
    }

    #[inline]
    pub const fn index(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.c + c) * self.h + h) * self.w + w
    }

    pub(crate) fn axis(i: usize) -> Axis {
        match i {
            0 => Axis::Batch,
            1 => Axis::Channel,
            2 => Axis::Height,
            _ => Axis::Width,
        }
    }

    /// Errors unless both shapes are equal, naming the first axis that differs.
    pub(crate) fn expect_eq(&self, other: &Shape, what: &str) -> Result<()> {
        for (i, (a, b)) in self.dims().iter().zip(other.dims()).enumerate() {
            if *a != b {
                return Err(Error::dim(
                    Shape::axis(i),
                    format!("{what}: {self} vs {other}"),
                ));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}
