use nalgebra::DMatrix;
use rand::Rng;

/// A learnable tensor with its gradient accumulator and momentum buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: DMatrix<f64>,
    pub grad: DMatrix<f64>,
    pub velocity: DMatrix<f64>,
    /// Whether weight decay applies.
    pub decay: bool,
}

impl Param {
    pub fn new(value: DMatrix<f64>, decay: bool) -> Self {
        let (r, c) = value.shape();
        Self {
            value,
            grad: DMatrix::zeros(r, c),
            velocity: DMatrix::zeros(r, c),
            decay,
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn fan_in_uniform<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        fan_in: usize,
        decay: bool,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let value = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound));
        Self::new(value, decay)
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// `y = x W + b` with `W: D_in x D_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Param,
    /// `1 x D_out`
    pub bias: Param,
}

impl DenseLayer {
    pub fn new<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        let weight = Param::fan_in_uniform(d_in, d_out, d_in, true, rng);
        let bias = Param::fan_in_uniform(1, d_out, d_in, false, rng);
        Self { weight, bias }
    }

    pub fn from_parts(weight: DMatrix<f64>, bias: DMatrix<f64>) -> Self {
        Self {
            weight: Param::new(weight, true),
            bias: Param::new(bias, false),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x * &self.weight.value;
        for (j, mut col) in z.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.bias.value[(0, j)]);
        }
        z
    }

    /// Accumulate parameter gradients and return the gradient w.r.t. `x`.
    pub fn backward(&mut self, x: &DMatrix<f64>, grad_out: &DMatrix<f64>) -> DMatrix<f64> {
        self.weight.grad.gemm_tr(1.0, x, grad_out, 1.0);
        for (j, col) in grad_out.column_iter().enumerate() {
            self.bias.grad[(0, j)] += col.sum();
        }
        grad_out * self.weight.value.transpose()
    }
}
