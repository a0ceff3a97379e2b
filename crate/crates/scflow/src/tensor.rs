use crate::error::{Error, Result};

/// Dense `(n, c, h, w)` block of `f32`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl Tensor4 {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Tensor4 {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != n * c * h * w {
            return Err(Error::Shape(format!(
                "data length {} does not match ({n}, {c}, {h}, {w})",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite tensor value".into()));
        }
        Ok(Tensor4 { n, c, h, w, data })
    }

    pub fn from_fn(n: usize, c: usize, h: usize, w: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(n * c * h * w);
        for b in 0..n {
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f(b, ch, y, x));
                    }
                }
            }
        }
        Tensor4 { n, c, h, w, data }
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        ((b * self.c + c) * self.h + y) * self.w + x
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(b, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, y: usize, x: usize, v: f32) {
        let i = self.index(b, c, y, x);
        self.data[i] = v;
    }

    /// The `(c, h, w)` slab of batch item `b`.
    pub fn item(&self, b: usize) -> &[f32] {
        let len = self.c * self.h * self.w;
        &self.data[b * len..(b + 1) * len]
    }

    pub fn item_mut(&mut self, b: usize) -> &mut [f32] {
        let len = self.c * self.h * self.w;
        &mut self.data[b * len..(b + 1) * len]
    }

    /// Splits channels into `[0, at)` and `[at, c)`.
    pub fn split_channels(&self, at: usize) -> (Tensor4, Tensor4) {
        assert!(at <= self.c);
        let plane = self.h * self.w;
        let mut a = Tensor4::zeros(self.n, at, self.h, self.w);
        let mut b = Tensor4::zeros(self.n, self.c - at, self.h, self.w);
        for i in 0..self.n {
            let src = self.item(i);
            a.item_mut(i).copy_from_slice(&src[..at * plane]);
            b.item_mut(i).copy_from_slice(&src[at * plane..]);
        }
        (a, b)
    }

    pub fn concat_channels(a: &Tensor4, b: &Tensor4) -> Result<Tensor4> {
        if (a.n, a.h, a.w) != (b.n, b.h, b.w) {
            return Err(Error::Shape(format!(
                "cannot concatenate {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        let mut out = Tensor4::zeros(a.n, a.c + b.c, a.h, a.w);
        let split = a.c * a.h * a.w;
        for i in 0..a.n {
            let dst = out.item_mut(i);
            dst[..split].copy_from_slice(a.item(i));
            dst[split..].copy_from_slice(b.item(i));
        }
        Ok(out)
    }

    pub fn add(&self, other: &Tensor4) -> Result<Tensor4> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "cannot add {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Tensor4 { data, ..*self })
    }

    pub fn scale(&self, k: f32) -> Tensor4 {
        Tensor4 {
            data: self.data.iter().map(|v| v * k).collect(),
            ..*self
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f32 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    /// Reflect-pads (no edge repeat, periodic for large pads) on the bottom
    /// and right.
    pub fn pad_reflect(&self, bottom: usize, right: usize) -> Tensor4 {
        let (h, w) = (self.h + bottom, self.w + right);
        let mut out = Tensor4::zeros(self.n, self.c, h, w);
        for b in 0..self.n {
            for c in 0..self.c {
                for y in 0..h {
                    let sy = reflect(y, self.h);
                    for x in 0..w {
                        out.set(b, c, y, x, self.get(b, c, sy, reflect(x, self.w)));
                    }
                }
            }
        }
        out
    }

    /// Keeps the top-left `h x w` window.
    pub fn crop(&self, h: usize, w: usize) -> Tensor4 {
        assert!(h <= self.h && w <= self.w);
        Tensor4::from_fn(self.n, self.c, h, w, |b, c, y, x| self.get(b, c, y, x))
    }
}

fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m >= n {
        period - m
    } else {
        m
    }
}
