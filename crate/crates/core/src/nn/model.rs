use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Initial value of every bias coordinate. Non-zero so multiplicative updates can move it.
pub const BIAS_INIT: f64 = 0.01;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows<const N: usize>(rows: &[[f64; N]]) -> Self {
        Self {
            rows: rows.len(),
            cols: N,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    #[default]
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Fan-dependent factor of the initialization standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XavierForm {
    /// gain·sqrt(2 / (fan_in·fan_out))
    #[default]
    Product,
    /// gain·sqrt(2 / (fan_in + fan_out)), the usual Glorot normal.
    Sum,
}

pub fn xavier_std(fan_in: usize, fan_out: usize, gain: f64, form: XavierForm) -> Result<f64> {
    if fan_in == 0 {
        return Err(Error::InvalidDimension(fan_in));
    }
    if fan_out == 0 {
        return Err(Error::InvalidDimension(fan_out));
    }
    if !(gain.is_finite() && gain > 0.0) {
        return Err(Error::InvalidConfig(format!("gain must be positive, got {gain}")));
    }
    let fans = match form {
        XavierForm::Product => (fan_in * fan_out) as f64,
        XavierForm::Sum => (fan_in + fan_out) as f64,
    };
    Ok(gain * (2.0 / fans).sqrt())
}

/// Zero-mean normal weights, `fan_in × fan_out` row-major.
pub fn xavier_init<R: Rng + ?Sized>(
    fan_in: usize,
    fan_out: usize,
    gain: f64,
    form: XavierForm,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let std = xavier_std(fan_in, fan_out, gain, form)?;
    let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok((0..fan_in * fan_out).map(|_| normal.sample(rng)).collect())
}

/// Affine layer `z = x·W + b` with `W` stored `fan_in × fan_out` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(fan_in: usize, fan_out: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if fan_in == 0 || fan_out == 0 {
            return Err(Error::InvalidDimension(fan_in.min(fan_out)));
        }
        if weights.len() != fan_in * fan_out {
            return Err(Error::DimensionMismatch {
                expected: fan_in * fan_out,
                found: weights.len(),
            });
        }
        if bias.len() != fan_out {
            return Err(Error::DimensionMismatch {
                expected: fan_out,
                found: bias.len(),
            });
        }
        Ok(Self {
            fan_in,
            fan_out,
            weights,
            bias,
        })
    }

    fn affine(&self, x: &Matrix) -> Matrix {
        let mut z = Matrix::zeros(x.rows, self.fan_out);
        for r in 0..x.rows {
            let out = z.row_mut(r);
            out.copy_from_slice(&self.bias);
            for (i, &xi) in x.row(r).iter().enumerate() {
                let w = &self.weights[i * self.fan_out..(i + 1) * self.fan_out];
                for (o, &wij) in out.iter_mut().zip(w) {
                    *o += xi * wij;
                }
            }
        }
        z
    }
}

/// Intermediate values of one forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    /// Affine outputs per layer; the last one holds the logits.
    pre: Vec<Matrix>,
    /// Hidden activations, one per hidden layer.
    post: Vec<Matrix>,
    generation: u64,
}

impl ForwardCache {
    pub fn logits(&self) -> &Matrix {
        self.pre.last().expect("at least one layer")
    }
}

/// Per-tensor gradients in the order of [`Mlp::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.tensors.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Feed-forward classifier ending in a softmax over the last layer's outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    activations: Vec<Activation>,
    /// Bumped on every mutable access so stale caches can be detected.
    generation: u64,
}

impl Mlp {
    /// `activations` has one entry per hidden layer, i.e. `layers.len() - 1`.
    pub fn new(layers: Vec<Dense>, activations: Vec<Activation>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if activations.len() + 1 != layers.len() {
            return Err(Error::DimensionMismatch {
                expected: layers.len() - 1,
                found: activations.len(),
            });
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out != pair[1].fan_in {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].fan_out,
                    found: pair[1].fan_in,
                });
            }
        }
        Ok(Self {
            layers,
            activations,
            generation: 0,
        })
    }

    /// Xavier-initialized network with layer widths `sizes` (input first, classes last).
    pub fn xavier<R: Rng + ?Sized>(
        sizes: &[usize],
        activation: Activation,
        gain: f64,
        form: XavierForm,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidDimension(sizes.len()));
        }
        let layers = sizes
            .windows(2)
            .map(|w| Dense::new(w[0], w[1], xavier_init(w[0], w[1], gain, form, rng)?, vec![BIAS_INIT; w[1]]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers, vec![activation; sizes.len() - 2])
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn classes(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out
    }

    /// Parameter tensors: weights then bias, layer by layer.
    pub fn tensors(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.layers.iter().flat_map(|l| [&l.weights, &l.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.generation += 1;
        self.layers.iter_mut().flat_map(|l| [&mut l.weights, &mut l.bias])
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().map(Vec::len).sum()
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardCache> {
        if x.cols != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.cols,
            });
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.activations.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let input = if l == 0 { x } else { &post[l - 1] };
            let z = layer.affine(input);
            if let Some(&act) = self.activations.get(l) {
                let mut a = z.clone();
                a.data.iter_mut().for_each(|v| *v = act.apply(*v));
                post.push(a);
            }
            pre.push(z);
        }
        Ok(ForwardCache {
            input: x.clone(),
            pre,
            post,
            generation: self.generation,
        })
    }

    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        let mut cache = self.forward(x)?;
        Ok(cache.pre.pop().expect("at least one layer"))
    }

    /// Gradients of the mean cross-entropy over the cached batch.
    pub fn backward(&self, cache: &ForwardCache, labels: &[usize]) -> Result<Gradients> {
        if cache.generation != self.generation || cache.pre.len() != self.layers.len() {
            return Err(Error::StaleCache(format!(
                "cache from generation {}, model at {}",
                cache.generation, self.generation
            )));
        }
        let logits = cache.logits();
        check_labels(logits, labels)?;
        let n = logits.rows as f64;

        // d(mean CE)/d(logits) = (softmax − onehot) / n
        let mut dz = logits.clone();
        for (r, &y) in labels.iter().enumerate() {
            let row = dz.row_mut(r);
            softmax_in_place(row);
            row[y] -= 1.0;
            row.iter_mut().for_each(|v| *v /= n);
        }

        let mut tensors = vec![Vec::new(); 2 * self.layers.len()];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = if l == 0 { &cache.input } else { &cache.post[l - 1] };

            let mut dw = vec![0.0; layer.fan_in * layer.fan_out];
            let mut db = vec![0.0; layer.fan_out];
            for r in 0..dz.rows {
                let d = dz.row(r);
                for (b, &dj) in db.iter_mut().zip(d) {
                    *b += dj;
                }
                for (i, &xi) in input.row(r).iter().enumerate() {
                    for (w, &dj) in dw[i * layer.fan_out..(i + 1) * layer.fan_out].iter_mut().zip(d) {
                        *w += xi * dj;
                    }
                }
            }

            if l > 0 {
                let act = self.activations[l - 1];
                let z_prev = &cache.pre[l - 1];
                let mut da = Matrix::zeros(dz.rows, layer.fan_in);
                for r in 0..dz.rows {
                    let d = dz.row(r);
                    for (i, slot) in da.row_mut(r).iter_mut().enumerate() {
                        let w = &layer.weights[i * layer.fan_out..(i + 1) * layer.fan_out];
                        let back: f64 = w.iter().zip(d).map(|(wij, dj)| wij * dj).sum();
                        *slot = back * act.derivative(z_prev.row(r)[i], input.row(r)[i]);
                    }
                }
                dz = da;
            }
            tensors[2 * l] = dw;
            tensors[2 * l + 1] = db;
        }
        Ok(Gradients { tensors })
    }

    /// Mean cross-entropy and class predictions (argmax, lowest index on ties).
    pub fn evaluate(&self, x: &Matrix, labels: &[usize]) -> Result<(f64, Vec<usize>)> {
        let logits = self.logits(x)?;
        let loss = cross_entropy(&logits, labels)?;
        let preds = (0..logits.rows).map(|r| argmax(logits.row(r))).collect();
        Ok((loss, preds))
    }
}

fn check_labels(logits: &Matrix, labels: &[usize]) -> Result<()> {
    if labels.len() != logits.rows {
        return Err(Error::DimensionMismatch {
            expected: logits.rows,
            found: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= logits.cols) {
        return Err(Error::InvalidConfig(format!(
            "label {bad} out of range for {} classes",
            logits.cols
        )));
    }
    Ok(())
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn softmax_in_place(row: &mut [f64]) {
    let lse = log_sum_exp(row);
    row.iter_mut().for_each(|v| *v = (*v - lse).exp());
}

/// Mean softmax cross-entropy, computed through a shifted log-sum-exp.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    check_labels(logits, labels)?;
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(r, &y)| {
            let row = logits.row(r);
            log_sum_exp(row) - row[y]
        })
        .sum();
    Ok(total / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::trial_rng;

    fn sample_std(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    #[test]
    fn xavier_product_form_std() {
        let mut rng = trial_rng(7, 0);
        let w: Vec<f64> = (0..6250)
            .flat_map(|_| xavier_init(4, 4, 1.0, XavierForm::Product, &mut rng).unwrap())
            .collect();
        assert_eq!(w.len(), 100_000);
        let expected = (2.0f64 / 16.0).sqrt();
        assert!((expected - 0.3536).abs() < 1e-4);
        assert!((sample_std(&w) / expected - 1.0).abs() < 0.02, "{}", sample_std(&w));
    }

    #[test]
    fn xavier_sum_form_and_scaling() {
        assert!((xavier_std(4, 4, 1.0, XavierForm::Sum).unwrap() - 0.5).abs() < 1e-15);
        let a = xavier_init(10, 10, 1.0, XavierForm::Product, &mut trial_rng(3, 0)).unwrap();
        let b = xavier_init(10, 10, 2.0, XavierForm::Product, &mut trial_rng(3, 0)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x - y).abs() <= 1e-15 * y.abs().max(1.0));
        }
    }

    #[test]
    fn xavier_vanishing_gain() {
        let mut rng = trial_rng(1, 0);
        let w = xavier_init(100, 100, 1e-12, XavierForm::Product, &mut rng).unwrap();
        assert!(sample_std(&w) <= 1e-11);
    }

    #[test]
    fn xavier_rejects_bad_arguments() {
        let mut rng = trial_rng(0, 0);
        assert!(xavier_init(0, 3, 1.0, XavierForm::Product, &mut rng).is_err());
        assert!(xavier_init(3, 0, 1.0, XavierForm::Product, &mut rng).is_err());
        assert!(xavier_init(3, 3, 0.0, XavierForm::Product, &mut rng).is_err());
    }

    #[test]
    fn biases_start_at_constant() {
        let m = Mlp::xavier(&[2, 8, 2], Activation::Tanh, 1.0, XavierForm::Product, &mut trial_rng(0, 0)).unwrap();
        assert!(m.layers().iter().all(|l| l.bias.iter().all(|&b| b == BIAS_INIT)));
        assert_eq!(m.parameter_count(), 2 * 8 + 8 + 8 * 2 + 2);
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = Mlp::new(
            vec![
                Dense::new(2, 3, vec![0.0; 6], vec![0.0; 3]).unwrap(),
                Dense::new(3, 2, vec![0.0; 6], vec![0.0; 2]).unwrap(),
            ],
            vec![Activation::Relu],
        )
        .unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0], [3.0, 4.0]]);
        let logits = m.logits(&x).unwrap();
        for r in 0..2 {
            let mut row = logits.row(r).to_vec();
            softmax_in_place(&mut row);
            assert_eq!(row, vec![0.5, 0.5]);
        }
        assert!((cross_entropy(&logits, &[0, 1]).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn identity_layer() {
        let m = Mlp::new(vec![Dense::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2]).unwrap()], vec![]).unwrap();
        let logits = m.logits(&Matrix::from_rows(&[[1.0, 2.0]])).unwrap();
        assert_eq!(logits.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn hand_computed_chain() {
        // hidden: [2,1]·[[1,2],[3,4]] + [0.5,−1] = [5.5, 7], ReLU keeps it
        // output: [5.5,7]·[[1,−1],[0.5,2]] + [0,1] = [9, 9.5]
        let m = Mlp::new(
            vec![
                Dense::new(2, 2, vec![1.0, 2.0, 3.0, 4.0], vec![0.5, -1.0]).unwrap(),
                Dense::new(2, 2, vec![1.0, -1.0, 0.5, 2.0], vec![0.0, 1.0]).unwrap(),
            ],
            vec![Activation::Relu],
        )
        .unwrap();
        let logits = m.logits(&Matrix::from_rows(&[[2.0, 1.0]])).unwrap();
        assert_eq!(logits.row(0), &[9.0, 9.5]);
    }

    #[test]
    fn dimension_checks() {
        let l1 = Dense::new(2, 3, vec![0.0; 6], vec![0.0; 3]).unwrap();
        let l2 = Dense::new(4, 2, vec![0.0; 8], vec![0.0; 2]).unwrap();
        assert!(Mlp::new(vec![l1.clone(), l2], vec![Activation::Tanh]).is_err());
        assert!(Dense::new(2, 3, vec![0.0; 5], vec![0.0; 3]).is_err());
        let m = Mlp::new(vec![l1], vec![]).unwrap();
        assert!(m.forward(&Matrix::from_rows(&[[1.0, 2.0, 3.0]])).is_err());
    }

    #[test]
    fn stale_cache_rejected() {
        let mut m =
            Mlp::xavier(&[2, 4, 2], Activation::Relu, 1.0, XavierForm::Product, &mut trial_rng(0, 0)).unwrap();
        let cache = m.forward(&Matrix::from_rows(&[[0.1, 0.2]])).unwrap();
        assert!(m.backward(&cache, &[0]).is_ok());
        assert!(m.backward(&cache, &[0, 1]).is_err());
        m.tensors_mut().next().unwrap()[0] += 1.0;
        assert!(matches!(m.backward(&cache, &[0]), Err(Error::StaleCache(_))));
    }

    #[test]
    fn cross_entropy_is_finite_for_extreme_logits() {
        let logits = Matrix::from_rows(&[[1e300, -1e300], [-1e300, 1e300], [800.0, 0.0]]);
        let loss = cross_entropy(&logits, &[0, 0, 1]).unwrap();
        assert!(loss.is_finite());
    }
}
