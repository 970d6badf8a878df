use std::fmt;

use serde::{Deserialize, Serialize};

use super::TrainError;

/// Dense row-major matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TrainError> {
        if data.len() != rows * cols {
            return Err(TrainError::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, TrainError> {
        if x.len() != self.cols {
            return Err(TrainError::Shape(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok(matvec(&self.data, self.rows, self.cols, x))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, TrainError> {
        if self.cols != other.rows {
            return Err(TrainError::Shape(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn add_scaled(&self, other: &Matrix, scale: f64) -> Result<Matrix, TrainError> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(TrainError::Shape(format!(
                "{}x{} plus {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }
}

/// `y = M x` for a row-major `rows x cols` slice.
pub(crate) fn matvec(m: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|r| m[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// `y = Mᵀ x` for a row-major `rows x cols` slice.
pub(crate) fn matvec_t(m: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; cols];
    for r in 0..rows {
        let xr = x[r];
        for (yc, a) in y.iter_mut().zip(&m[r * cols..(r + 1) * cols]) {
            *yc += a * xr;
        }
    }
    y
}

/// `M += scale · u vᵀ`.
pub(crate) fn add_outer(m: &mut [f64], cols: usize, u: &[f64], v: &[f64], scale: f64) {
    for (r, ur) in u.iter().enumerate() {
        let s = scale * ur;
        for (mc, vc) in m[r * cols..(r + 1) * cols].iter_mut().zip(v) {
            *mc += s * vc;
        }
    }
}

/// Parameter groups that can be frozen independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    /// Embedding-side weights (`W1`, `b1`).
    Input,
    /// Output projection (`W2`, `b2`).
    Output,
    /// Low-rank adapter on the output projection.
    Adapter,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 3] = [ParamGroup::Input, ParamGroup::Output, ParamGroup::Adapter];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Input => "input",
            ParamGroup::Output => "output",
            ParamGroup::Adapter => "adapter",
        }
    }
}

impl fmt::Display for ParamGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A named, shaped block of parameters (or of their gradients).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub group: ParamGroup,
    pub is_bias: bool,
    pub shape: (usize, usize),
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: &str, group: ParamGroup, is_bias: bool, shape: (usize, usize)) -> Self {
        Tensor {
            name: name.to_owned(),
            group,
            is_bias,
            shape,
            data: vec![0.0; shape.0 * shape.1],
        }
    }

    pub fn with_data(mut self, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), self.shape.0 * self.shape.1, "tensor {}", self.name);
        self.data = data;
        self
    }
}

/// Ordered collection of tensors; gradients share the layout of the
/// parameters they belong to.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    pub tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new(tensors: Vec<Tensor>) -> Self {
        ParamSet { tensors }
    }

    /// Single ungrouped vector, handy for optimizer arithmetic in isolation.
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len();
        ParamSet::new(vec![
            Tensor::new("values", ParamGroup::Output, false, (1, n)).with_data(values)
        ])
    }

    pub fn zeros_like(&self) -> Self {
        ParamSet {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    data: vec![0.0; t.data.len()],
                    ..t.clone()
                })
                .collect(),
        }
    }

    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.shape == b.shape && a.data.len() == b.data.len())
    }

    pub fn check_layout(&self, other: &ParamSet) -> Result<(), TrainError> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(TrainError::Shape("parameter layouts differ".into()))
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.tensors.iter().flat_map(|t| t.data.iter().copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.tensors.iter_mut().flat_map(|t| t.data.iter_mut())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.values().collect()
    }

    pub fn all_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    pub fn l2_norm(&self) -> f64 {
        self.values().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.values_mut().for_each(|x| *x *= s);
    }

    pub fn add_assign(&mut self, other: &ParamSet) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }

    pub fn zero_group(&mut self, group: ParamGroup) {
        for t in self.tensors.iter_mut().filter(|t| t.group == group) {
            t.data.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }
}
