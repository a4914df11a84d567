//! Dense row-major tensors and the plain (non-recording) kernels behind
//! every tape operation. The kernels are also used directly by fast
//! inference paths that do not need gradients.

use std::error::Error;
use std::fmt;

use crate::scalar::Real;

/// Error type for shape and domain violations in the tensor core.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NumError {
    /// Input shapes do not conform to the operation's arity or
    /// broadcasting rules.
    ShapeMismatch { op: &'static str, detail: String },
    /// An operation that requires finite inputs saw a NaN or infinity.
    NonFinite { op: &'static str },
    /// A structurally invalid argument (bad axis, empty input, ...).
    InvalidArgument { op: &'static str, detail: String },
}

impl fmt::Display for NumError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumError::ShapeMismatch { op, detail } => {
                write!(f, "shape mismatch in `{op}`: {detail}")
            }
            NumError::NonFinite { op } => write!(f, "non-finite input to `{op}`"),
            NumError::InvalidArgument { op, detail } => {
                write!(f, "invalid argument to `{op}`: {detail}")
            }
        }
    }
}

impl Error for NumError {}

pub type Result<T> = std::result::Result<T, NumError>;

/// Dense row-major tensor. Value-like: cloning copies the data, and
/// instances can move freely between threads.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(NumError::ShapeMismatch {
                op: "tensor_new",
                detail: format!("shape {shape:?} holds {numel} values, got {}", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![T::ZERO; numel],
        }
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    /// Rank-0-like scalar, stored as shape `[1]`.
    pub fn scalar(value: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// Rank-1 tensor from a value slice.
    pub fn from_vec(data: Vec<T>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// Rank-2 tensor from row-major data.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Size of the trailing dimension (1 for true scalars).
    pub fn last_dim(&self) -> usize {
        *self.shape.last().unwrap_or(&1)
    }

    /// Number of rows when the tensor is viewed as `[rows, last_dim]`.
    pub fn leading(&self) -> usize {
        if self.shape.is_empty() {
            1
        } else {
            self.shape[..self.shape.len() - 1].iter().product()
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Lossy precision conversion between scalar families.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

fn check_2d<'a, T: Real>(op: &'static str, t: &'a Tensor<T>) -> Result<(usize, usize)> {
    if t.rank() != 2 {
        return Err(NumError::ShapeMismatch {
            op,
            detail: format!("expected rank-2 tensor, got shape {:?}", t.shape()),
        });
    }
    Ok((t.shape[0], t.shape[1]))
}

/// Broadcast relationship between a primary operand and a secondary
/// one, as permitted by the core: exact shape, scalar, or a row vector
/// applied across the leading dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Broadcast {
    Same,
    Scalar,
    Row,
}

pub fn broadcast_kind<T: Real>(
    op: &'static str,
    a: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<Broadcast> {
    if a.shape == b.shape {
        Ok(Broadcast::Same)
    } else if b.is_scalar() {
        Ok(Broadcast::Scalar)
    } else if b.rank() == 1 && a.last_dim() == b.len() {
        Ok(Broadcast::Row)
    } else {
        Err(NumError::ShapeMismatch {
            op,
            detail: format!("cannot combine shapes {:?} and {:?}", a.shape(), b.shape()),
        })
    }
}

pub fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, ka) = check_2d("matmul", a)?;
    let (kb, n) = check_2d("matmul", b)?;
    if ka != kb {
        return Err(NumError::ShapeMismatch {
            op: "matmul",
            detail: format!("inner dims differ: {:?} x {:?}", a.shape(), b.shape()),
        });
    }
    let mut out = vec![T::ZERO; m * n];
    // ikj ordering keeps both the B row and the C row contiguous.
    for i in 0..m {
        let a_row = &a.data[i * ka..(i + 1) * ka];
        let c_row = &mut out[i * n..(i + 1) * n];
        for (k, &av) in a_row.iter().enumerate() {
            if av == T::ZERO {
                continue;
            }
            let b_row = &b.data[k * n..(k + 1) * n];
            for (c, &bv) in c_row.iter_mut().zip(b_row.iter()) {
                *c += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

pub fn add<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_broadcast("add", a, b, |x, y| x + y)
}

pub fn sub<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_broadcast("sub", a, b, |x, y| x - y)
}

pub fn elementwise_mul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_broadcast("elementwise_mul", a, b, |x, y| x * y)
}

fn zip_broadcast<T: Real>(
    op: &'static str,
    a: &Tensor<T>,
    b: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Result<Tensor<T>> {
    let kind = broadcast_kind(op, a, b)?;
    let mut out = a.data.clone();
    match kind {
        Broadcast::Same => {
            for (o, &bv) in out.iter_mut().zip(b.data.iter()) {
                *o = f(*o, bv);
            }
        }
        Broadcast::Scalar => {
            let bv = b.data[0];
            for o in out.iter_mut() {
                *o = f(*o, bv);
            }
        }
        Broadcast::Row => {
            let n = b.len();
            for (row, o) in out.chunks_mut(n).enumerate() {
                let _ = row;
                for (ov, &bv) in o.iter_mut().zip(b.data.iter()) {
                    *ov = f(*ov, bv);
                }
            }
        }
    }
    Tensor::new(a.shape.clone(), out)
}

/// Reduce a gradient of `a`'s shape down to `b`'s shape according to
/// the broadcast that produced it.
pub fn reduce_to_broadcast<T: Real>(grad: &Tensor<T>, b_shape: &[usize], kind: Broadcast) -> Tensor<T> {
    match kind {
        Broadcast::Same => grad.clone(),
        Broadcast::Scalar => {
            let mut s = T::ZERO;
            for &g in grad.data() {
                s += g;
            }
            Tensor {
                shape: b_shape.to_vec(),
                data: vec![s],
            }
        }
        Broadcast::Row => {
            let n = *b_shape.last().unwrap();
            let mut out = vec![T::ZERO; n];
            for chunk in grad.data().chunks(n) {
                for (o, &g) in out.iter_mut().zip(chunk.iter()) {
                    *o += g;
                }
            }
            Tensor {
                shape: b_shape.to_vec(),
                data: out,
            }
        }
    }
}

pub fn sigmoid<T: Real>(a: &Tensor<T>) -> Tensor<T> {
    a.map(|v| T::ONE / (T::ONE + (-v).exp()))
}

pub fn tanh<T: Real>(a: &Tensor<T>) -> Tensor<T> {
    a.map(|v| v.tanh())
}

pub fn relu<T: Real>(a: &Tensor<T>) -> Tensor<T> {
    a.map(|v| v.maximum(T::ZERO))
}

pub fn log<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    if !a.all_finite() {
        return Err(NumError::NonFinite { op: "log" });
    }
    Ok(a.map(|v| v.ln()))
}

pub fn exp<T: Real>(a: &Tensor<T>) -> Tensor<T> {
    a.map(|v| v.exp())
}

/// Numerically stable softmax over the trailing dimension.
pub fn softmax_last_dim<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    if !a.all_finite() {
        return Err(NumError::NonFinite { op: "softmax_last_dim" });
    }
    let n = a.last_dim();
    if n == 0 {
        return Err(NumError::InvalidArgument {
            op: "softmax_last_dim",
            detail: "empty trailing dimension".into(),
        });
    }
    let mut out = a.data.clone();
    for row in out.chunks_mut(n) {
        let mut max = row[0];
        for &v in row.iter() {
            max = max.maximum(v);
        }
        let mut sum = T::ZERO;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    Tensor::new(a.shape.clone(), out)
}

pub fn concat_last_dim<T: Real>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    if parts.is_empty() {
        return Err(NumError::InvalidArgument {
            op: "concat_last_dim",
            detail: "no inputs".into(),
        });
    }
    let leading = parts[0].leading();
    let lead_shape = &parts[0].shape[..parts[0].rank().saturating_sub(1)];
    let mut total = 0;
    for p in parts {
        if p.leading() != leading || &p.shape[..p.rank().saturating_sub(1)] != lead_shape {
            return Err(NumError::ShapeMismatch {
                op: "concat_last_dim",
                detail: format!(
                    "leading dims differ: {:?} vs {:?}",
                    parts[0].shape(),
                    p.shape()
                ),
            });
        }
        total += p.last_dim();
    }
    let mut data = Vec::with_capacity(leading * total);
    for row in 0..leading {
        for p in parts {
            let n = p.last_dim();
            data.extend_from_slice(&p.data[row * n..(row + 1) * n]);
        }
    }
    let mut shape = lead_shape.to_vec();
    shape.push(total);
    Tensor::new(shape, data)
}

pub fn slice_last_dim<T: Real>(a: &Tensor<T>, start: usize, len: usize) -> Result<Tensor<T>> {
    let n = a.last_dim();
    if start + len > n || len == 0 {
        return Err(NumError::InvalidArgument {
            op: "slice",
            detail: format!("range {start}..{} out of trailing dim {n}", start + len),
        });
    }
    let leading = a.leading();
    let mut data = Vec::with_capacity(leading * len);
    for row in 0..leading {
        data.extend_from_slice(&a.data[row * n + start..row * n + start + len]);
    }
    let mut shape = a.shape[..a.rank() - 1].to_vec();
    shape.push(len);
    Tensor::new(shape, data)
}

/// Scatter a sliced gradient back into the source shape.
pub fn unslice_last_dim<T: Real>(
    grad: &Tensor<T>,
    src_shape: &[usize],
    start: usize,
) -> Tensor<T> {
    let n = *src_shape.last().unwrap();
    let len = grad.last_dim();
    let leading = grad.leading();
    let mut data = vec![T::ZERO; leading * n];
    for row in 0..leading {
        data[row * n + start..row * n + start + len]
            .copy_from_slice(&grad.data[row * len..(row + 1) * len]);
    }
    Tensor {
        shape: src_shape.to_vec(),
        data,
    }
}

pub fn transpose<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, n) = check_2d("transpose", a)?;
    let mut out = vec![T::ZERO; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a.data[i * n + j];
        }
    }
    Tensor::new(vec![n, m], out)
}

pub fn sum_all<T: Real>(a: &Tensor<T>) -> Tensor<T> {
    let mut s = T::ZERO;
    for &v in a.data() {
        s += v;
    }
    Tensor::scalar(s)
}

pub fn mean_all<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    if a.is_empty() {
        return Err(NumError::InvalidArgument {
            op: "mean_all",
            detail: "empty tensor".into(),
        });
    }
    let mut s = T::ZERO;
    for &v in a.data() {
        s += v;
    }
    Ok(Tensor::scalar(s / T::from_f64(a.len() as f64)))
}

pub fn scale<T: Real>(a: &Tensor<T>, c: T) -> Tensor<T> {
    a.map(|v| v * c)
}
