#![allow(dead_code)]

use fedsketch::data::{generate_synthetic, SparseDataset, SyntheticSpec};
use fedsketch::model::MlpParams;

/// Small synthetic multi-class dataset.
pub fn synthetic(n: usize, d: usize, p: usize, seed: u64) -> SparseDataset {
    generate_synthetic(&SyntheticSpec {
        num_samples: n,
        dim: d,
        num_classes: p,
        zipf_exponent: 1.0,
        features_per_class: 4,
        noise_rate: 0.1,
        labels_per_sample: 1,
        seed,
    })
    .unwrap()
}

/// Dense reference forward pass: plain loops, f64 accumulation.
pub fn dense_forward<T: fedsketch::model::Real>(p: &MlpParams<T>, x: &[f64]) -> Vec<f64> {
    let [d, h1, h2, o] = p.dims();
    let t: Vec<Vec<f64>> = p
        .tensors()
        .iter()
        .map(|v| v.iter().map(|x| x.to_f64().unwrap()).collect())
        .collect();
    let layer = |input: &[f64], w: &[f64], b: &[f64], fan_in: usize, fan_out: usize, relu: bool| {
        (0..fan_out)
            .map(|j| {
                let z = b[j] + (0..fan_in).map(|i| input[i] * w[i * fan_out + j]).sum::<f64>();
                if relu {
                    z.max(0.0)
                } else {
                    z
                }
            })
            .collect::<Vec<f64>>()
    };
    let a1 = layer(x, &t[0], &t[1], d, h1, true);
    let a2 = layer(&a1, &t[2], &t[3], h1, h2, true);
    layer(&a2, &t[4], &t[5], h2, o, false)
}

/// Reference BCE mean over samples × outputs, computed densely.
pub fn dense_loss<T: fedsketch::model::Real>(p: &MlpParams<T>, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    let o = p.output_dim();
    let mut total = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        for (z, t) in dense_forward(p, x).iter().zip(y) {
            total += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
        }
    }
    total / (xs.len() * o) as f64
}
