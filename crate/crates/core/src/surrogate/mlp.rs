//! Fully connected ReLU network trained with Adam on a mean-square loss.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mpe, Interpolator, MinMax, SurrogateError};

/// Smallest dataset accepted by [`train`].
pub const MIN_ROWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Fraction of rows used for training; the rest is held out.
    pub train_fraction: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![64, 64, 64],
            epochs: 5000,
            learning_rate: 1e-4,
            batch_size: 256,
            train_fraction: 0.8,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        let bad = |m: &str| Err(SurrogateError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train fraction must lie in (0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub n_train: usize,
    pub n_test: usize,
    pub epochs: usize,
    /// Mean-square loss on normalized outputs after the last epoch.
    pub final_loss: f64,
    pub train_mpe: Vec<f64>,
    pub test_mpe: Vec<f64>,
}

/// Trained network with its input and output scalings.
///
/// `weights[l]` has shape `(fan_in, fan_out)`; hidden layers use ReLU and
/// the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    x_norm: MinMax,
    y_norm: MinMax,
    /// Output columns that were constant in the training data; these are
    /// returned as is instead of the network's estimate.
    constant_outputs: Vec<Option<f64>>,
}

struct Gradients {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

impl Mlp {
    /// Network with He-uniform weights and zero biases.
    pub fn new(sizes: &[usize], x_norm: MinMax, y_norm: MinMax, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let limit = (6.0 / w[0] as f64).sqrt();
            weights.push(Array2::from_shape_fn((w[0], w[1]), |_| {
                rng.gen_range(-limit..limit)
            }));
            biases.push(Array1::zeros(w[1]));
        }
        let n_out = *sizes.last().expect("non-empty sizes");
        Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
            x_norm,
            y_norm,
            constant_outputs: vec![None; n_out],
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_scaling(&self) -> &MinMax {
        &self.x_norm
    }

    pub fn output_scaling(&self) -> &MinMax {
        &self.y_norm
    }

    fn layers(&self) -> usize {
        self.weights.len()
    }

    /// Forward pass on normalized inputs, keeping every layer's activation.
    fn forward_all(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers() + 1);
        acts.push(x.to_owned());
        for l in 0..self.layers() {
            let mut z = acts[l].dot(&self.weights[l]);
            z += &self.biases[l];
            if l + 1 < self.layers() {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward_all(x).pop().expect("at least one layer")
    }

    /// Mean-square loss and its gradient for normalized data.
    fn backprop(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> (f64, Gradients) {
        let acts = self.forward_all(x);
        let n = x.nrows() as f64;
        let n_out = y.ncols() as f64;
        let mut delta = &acts[self.layers()] - &y;
        let loss = delta.iter().map(|d| d * d).sum::<f64>() / (n * n_out);
        delta *= 2.0 / (n * n_out);
        let mut gw = vec![Array2::zeros((0, 0)); self.layers()];
        let mut gb = vec![Array1::zeros(0); self.layers()];
        for l in (0..self.layers()).rev() {
            gw[l] = acts[l].t().dot(&delta);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l].t());
                back.zip_mut_with(&acts[l], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = back;
            }
        }
        (
            loss,
            Gradients {
                weights: gw,
                biases: gb,
            },
        )
    }

    /// All weights and biases, layer by layer (weights row-major, then bias).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in 0..self.layers() {
            out.extend(self.weights[l].iter());
            out.extend(self.biases[l].iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        let mut k = 0;
        for l in 0..self.layers() {
            for v in self.weights[l].iter_mut().chain(self.biases[l].iter_mut()) {
                *v = params[k];
                k += 1;
            }
        }
        assert_eq!(k, params.len(), "parameter vector length");
    }

    /// Loss and flat gradient for already normalized rows, in the order of
    /// [`Mlp::flat_params`].
    pub fn loss_and_gradient(&self, x: &Array2<f64>, y: &Array2<f64>) -> (f64, Vec<f64>) {
        let (loss, g) = self.backprop(x.view(), y.view());
        let mut flat = Vec::new();
        for l in 0..self.layers() {
            flat.extend(g.weights[l].iter());
            flat.extend(g.biases[l].iter());
        }
        (loss, flat)
    }

    /// Mean-square loss for already normalized rows.
    pub fn loss(&self, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
        let p = self.forward(x.view());
        let n = (y.nrows() * y.ncols()) as f64;
        (&p - y).iter().map(|d| d * d).sum::<f64>() / n
    }

    fn normalized_matrix(rows: &[Vec<f64>], scale: &MinMax) -> Array2<f64> {
        let d = scale.min.len();
        let mut m = Array2::zeros((rows.len(), d));
        for (i, r) in rows.iter().enumerate() {
            for (k, v) in scale.normalize(r).into_iter().enumerate() {
                m[[i, k]] = v;
            }
        }
        m
    }

    pub fn to_document(&self) -> MlpDocument {
        MlpDocument {
            schema_version: MLP_SCHEMA_VERSION,
            sizes: self.sizes.clone(),
            activation: "relu".into(),
            weights: self
                .weights
                .iter()
                .map(|w| w.outer_iter().map(|r| r.to_vec()).collect())
                .collect(),
            biases: self.biases.iter().map(|b| b.to_vec()).collect(),
            input_scaling: self.x_norm.clone(),
            output_scaling: self.y_norm.clone(),
            constant_outputs: self.constant_outputs.clone(),
        }
    }

    pub fn from_document(doc: MlpDocument) -> Result<Self, SurrogateError> {
        let bad = |m: String| Err(SurrogateError::InvalidDocument(m));
        if doc.activation != "relu" {
            return bad(format!("unsupported activation {:?}", doc.activation));
        }
        if doc.sizes.len() < 2 || doc.sizes.contains(&0) {
            return bad("need at least an input and an output layer".into());
        }
        let layers = doc.sizes.len() - 1;
        if doc.weights.len() != layers || doc.biases.len() != layers {
            return bad("layer count does not match sizes".into());
        }
        if doc.input_scaling.min.len() != doc.sizes[0]
            || doc.input_scaling.max.len() != doc.sizes[0]
            || doc.output_scaling.min.len() != doc.sizes[layers]
            || doc.output_scaling.max.len() != doc.sizes[layers]
        {
            return bad("scaling vectors do not match layer sizes".into());
        }
        let constant_outputs = if doc.constant_outputs.is_empty() {
            vec![None; doc.sizes[layers]]
        } else if doc.constant_outputs.len() == doc.sizes[layers] {
            doc.constant_outputs
        } else {
            return bad("constant_outputs does not match the output size".into());
        };
        for s in [&doc.input_scaling, &doc.output_scaling] {
            if s.min.iter().zip(&s.max).any(|(a, b)| !(b > a)) {
                return bad("scaling requires max > min".into());
            }
        }
        let mut weights = Vec::with_capacity(layers);
        for (l, w) in doc.weights.iter().enumerate() {
            let (fi, fo) = (doc.sizes[l], doc.sizes[l + 1]);
            if w.len() != fi || w.iter().any(|r| r.len() != fo) {
                return bad(format!("layer {l} weights are not {fi}x{fo}"));
            }
            let flat: Vec<f64> = w.iter().flatten().copied().collect();
            weights.push(Array2::from_shape_vec((fi, fo), flat).expect("shape checked"));
        }
        let mut biases = Vec::with_capacity(layers);
        for (l, b) in doc.biases.iter().enumerate() {
            if b.len() != doc.sizes[l + 1] {
                return bad(format!("layer {l} bias has wrong length"));
            }
            biases.push(Array1::from(b.clone()));
        }
        Ok(Mlp {
            sizes: doc.sizes,
            weights,
            biases,
            x_norm: doc.input_scaling,
            y_norm: doc.output_scaling,
            constant_outputs,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, SurrogateError> {
        let doc: MlpDocument =
            serde_json::from_str(s).map_err(|e| SurrogateError::InvalidDocument(e.to_string()))?;
        Self::from_document(doc)
    }
}

impl Interpolator for Mlp {
    fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    fn n_outputs(&self) -> usize {
        *self.sizes.last().expect("non-empty sizes")
    }

    fn predict(&self, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.predict_inner(inputs, true)
    }
}

impl Mlp {
    fn predict_inner(&self, inputs: &[Vec<f64>], warn: bool) -> Vec<Vec<f64>> {
        if inputs.is_empty() {
            return Vec::new();
        }
        let x = Self::normalized_matrix(inputs, &self.x_norm);
        if warn && x.iter().any(|&v| !(-1e-9..=1.0 + 1e-9).contains(&v)) {
            log::warn!("surrogate asked to extrapolate outside its training range");
        }
        self.forward(x.view())
            .outer_iter()
            .map(|r| {
                let mut y = self
                    .y_norm
                    .denormalize(r.as_slice().expect("standard layout"));
                for (v, c) in y.iter_mut().zip(&self.constant_outputs) {
                    if let Some(c) = c {
                        *v = *c;
                    }
                }
                y
            })
            .collect()
    }
}

pub const MLP_SCHEMA_VERSION: u32 = 1;

/// JSON form of [`Mlp`]. `weights[l][i][j]` connects input `i` of layer
/// `l` to output `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpDocument {
    pub schema_version: u32,
    pub sizes: Vec<usize>,
    pub activation: String,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub input_scaling: MinMax,
    pub output_scaling: MinMax,
    #[serde(default)]
    pub constant_outputs: Vec<Option<f64>>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * grad[k];
            self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            params[k] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
        }
    }
}

fn check_rows(rows: &[Vec<f64>], width: usize) -> Result<(), SurrogateError> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(SurrogateError::ShapeMismatch {
                row: i,
                got: r.len(),
                expected: width,
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(SurrogateError::NonFinite(i));
        }
    }
    Ok(())
}

fn gather(m: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    m.select(Axis(0), idx)
}

/// Fits a network to `(inputs, outputs)` pairs.
///
/// Rows are shuffled once with the seed and split into training and test
/// parts; scalings are fitted on the training part. Every epoch visits the
/// training rows in a fresh seeded order in mini-batches.
pub fn train(
    inputs: &[Vec<f64>],
    outputs: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<(Mlp, TrainReport), SurrogateError> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(SurrogateError::EmptyInput);
    }
    if inputs.len() != outputs.len() {
        return Err(SurrogateError::ShapeMismatch {
            row: inputs.len().min(outputs.len()),
            got: outputs.len(),
            expected: inputs.len(),
        });
    }
    if inputs.len() < MIN_ROWS {
        return Err(SurrogateError::InsufficientData {
            needed: MIN_ROWS,
            got: inputs.len(),
        });
    }
    let n_in = inputs[0].len();
    let n_out = outputs[0].len();
    check_rows(inputs, n_in)?;
    check_rows(outputs, n_out)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.shuffle(&mut rng);
    let n_train =
        ((inputs.len() as f64 * cfg.train_fraction).round() as usize).clamp(1, inputs.len() - 1);
    let (train_idx, test_idx) = order.split_at(n_train);
    let pick = |rows: &[Vec<f64>], idx: &[usize]| -> Vec<Vec<f64>> {
        idx.iter().map(|&i| rows[i].clone()).collect()
    };
    let (xt, yt) = (pick(inputs, train_idx), pick(outputs, train_idx));
    let (xv, yv) = (pick(inputs, test_idx), pick(outputs, test_idx));

    let x_norm = MinMax::fit(&xt);
    let y_norm = MinMax::fit(&yt);
    let mut sizes = vec![n_in];
    sizes.extend(&cfg.hidden);
    sizes.push(n_out);
    let mut net = Mlp::new(&sizes, x_norm, y_norm, rng.gen());
    net.constant_outputs = (0..n_out)
        .map(|k| {
            let first = yt[0][k];
            yt.iter().all(|r| r[k] == first).then_some(first)
        })
        .collect();

    let xm = Mlp::normalized_matrix(&xt, &net.x_norm);
    let ym = Mlp::normalized_matrix(&yt, &net.y_norm);
    let mut params = net.flat_params();
    let mut adam = Adam {
        m: vec![0.0; params.len()],
        v: vec![0.0; params.len()],
        t: 0,
    };
    let mut rows: Vec<usize> = (0..n_train).collect();
    let mut final_loss = f64::NAN;
    for epoch in 0..cfg.epochs {
        rows.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in rows.chunks(cfg.batch_size) {
            let (bx, by) = (gather(&xm, chunk), gather(&ym, chunk));
            let (loss, grad) = net.loss_and_gradient(&bx, &by);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(SurrogateError::DivergedTraining { epoch, loss });
            }
            sum += loss * chunk.len() as f64;
            adam.step(&mut params, &grad, cfg);
            net.set_flat_params(&params);
        }
        final_loss = sum / n_train as f64;
        if epoch % 500 == 0 {
            log::debug!("epoch {epoch}: loss {final_loss:.3e}");
        }
    }
    if !final_loss.is_finite() {
        return Err(SurrogateError::DivergedTraining {
            epoch: cfg.epochs,
            loss: final_loss,
        });
    }

    let report = TrainReport {
        n_train,
        n_test: xv.len(),
        epochs: cfg.epochs,
        final_loss,
        train_mpe: mpe(&net.predict_inner(&xt, false), &yt)?,
        // held-out rows may sit slightly outside the training range
        test_mpe: mpe(&net.predict_inner(&xv, false), &yv)?,
    };
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sobol, Bounds};

    fn cube_points(sp: u32) -> Vec<Vec<f64>> {
        sobol(3, &Bounds::unit(3), sp).unwrap().inputs
    }

    fn quick(hidden: Vec<usize>, epochs: usize, lr: f64) -> TrainConfig {
        TrainConfig {
            hidden,
            epochs,
            learning_rate: lr,
            batch_size: 64,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let x_norm = MinMax {
            min: vec![0.0; 3],
            max: vec![1.0; 3],
        };
        let y_norm = MinMax {
            min: vec![0.0; 2],
            max: vec![1.0; 2],
        };
        let mut net = Mlp::new(&[3, 8, 8, 2], x_norm, y_norm, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_fn((16, 3), |_| rng.gen_range(0.0..1.0));
        let y = Array2::from_shape_fn((16, 2), |_| rng.gen_range(0.0..1.0));
        // nonzero biases so no unit sits exactly on the ReLU kink
        let mut p = net.flat_params();
        for v in p.iter_mut() {
            *v += rng.gen_range(-0.05..0.05);
        }
        net.set_flat_params(&p);
        let (_, grad) = net.loss_and_gradient(&x, &y);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for k in 0..p.len() {
            let mut q = p.clone();
            q[k] = p[k] + h;
            net.set_flat_params(&q);
            let up = net.loss(&x, &y);
            q[k] = p[k] - h;
            net.set_flat_params(&q);
            let down = net.loss(&x, &y);
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grad[k]).abs() / (fd.abs().max(grad[k].abs()).max(1e-7));
            worst = worst.max(rel);
        }
        assert!(worst <= 1e-4, "worst relative gradient error {worst:e}");
    }

    #[test]
    fn learns_identity_on_first_input() {
        let x = cube_points(12);
        let y: Vec<Vec<f64>> = x.iter().map(|r| vec![1.0 + r[0]]).collect();
        let (_, report) = train(&x, &y, &quick(vec![16, 16], 150, 3e-3)).unwrap();
        assert!(report.test_mpe[0] < 0.5, "{report:?}");
    }

    #[test]
    fn constant_target_is_reproduced() {
        let x = cube_points(8);
        let y: Vec<Vec<f64>> = x.iter().map(|_| vec![42.0]).collect();
        let (net, report) = train(&x, &y, &quick(vec![8], 20, 1e-3)).unwrap();
        assert!(report.test_mpe[0] < 1e-3, "{report:?}");
        for p in net.predict(&x) {
            assert!((p[0] - 42.0).abs() < 1e-3, "{p:?}");
        }
    }

    #[test]
    fn predictions_have_batch_shape_and_are_finite() {
        let x = cube_points(8);
        let y: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0] + r[1], r[2] * 2.0]).collect();
        let (net, _) = train(&x, &y, &quick(vec![8], 5, 1e-3)).unwrap();
        let q = cube_points(10);
        let p = net.predict(&q);
        assert_eq!(p.len(), 1024);
        assert!(p
            .iter()
            .all(|r| r.len() == 2 && r.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn training_is_deterministic() {
        let x = cube_points(8);
        let y: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0] * r[1] + 1.0]).collect();
        let cfg = quick(vec![8, 8], 10, 1e-3);
        let (a, ra) = train(&x, &y, &cfg).unwrap();
        let (b, rb) = train(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let x = cube_points(8);
        let y: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0] - r[2] + 3.0]).collect();
        let (net, _) = train(&x, &y, &quick(vec![8], 5, 1e-3)).unwrap();
        let back = Mlp::from_json(&net.to_json()).unwrap();
        assert_eq!(back.predict(&x), net.predict(&x));
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = cube_points(5);
        let y: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0]]).collect();
        assert!(matches!(
            train(&x, &y, &TrainConfig::default()),
            Err(SurrogateError::InsufficientData { .. })
        ));
        let x = cube_points(8);
        let mut y: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0]]).collect();
        y[3][0] = f64::NAN;
        assert!(matches!(
            train(&x, &y, &TrainConfig::default()),
            Err(SurrogateError::NonFinite(3))
        ));
        let cfg = TrainConfig {
            train_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&x, &y, &cfg),
            Err(SurrogateError::InvalidConfig(_))
        ));
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let x = cube_points(8);
        let y: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0] * 1e3]).collect();
        let cfg = TrainConfig {
            learning_rate: 1e300,
            ..quick(vec![8], 50, 1.0)
        };
        assert!(matches!(
            train(&x, &y, &cfg),
            Err(SurrogateError::DivergedTraining { .. })
        ));
    }
}
