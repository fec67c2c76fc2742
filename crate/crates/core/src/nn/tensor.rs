use super::Real;

/// Dense batch of feature maps in NCHW order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: vec![T::zero(); n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * c * h * w, "tensor data length mismatch");
        Self { n, c, h, w, data }
    }

    pub fn full(n: usize, c: usize, h: usize, w: usize, v: T) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: vec![v; n * c * h * w],
        }
    }

    #[inline]
    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Elements of one sample.
    #[inline]
    pub fn sample_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let s = self.sample_len();
        &self.data[i * s..(i + 1) * s]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [T] {
        let s = self.sample_len();
        &mut self.data[i * s..(i + 1) * s]
    }

    /// Copy of sample `i` as a batch of one.
    pub fn slice_sample(&self, i: usize) -> Self {
        Self::from_vec(1, self.c, self.h, self.w, self.sample(i).to_vec())
    }

    /// Stack equally shaped single-sample tensors along the batch axis.
    pub fn stack(items: &[Self]) -> Self {
        assert!(!items.is_empty(), "cannot stack zero tensors");
        let [_, c, h, w] = items[0].shape();
        let mut data = Vec::with_capacity(items.iter().map(|t| t.len()).sum());
        let mut n = 0;
        for t in items {
            assert_eq!([t.c, t.h, t.w], [c, h, w], "stack: shape mismatch");
            data.extend_from_slice(&t.data);
            n += t.n;
        }
        Self::from_vec(n, c, h, w, data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            n: self.n,
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}
