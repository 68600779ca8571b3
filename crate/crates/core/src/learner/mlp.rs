//! Dense tanh network with a linear output layer.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out x n_in`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn new(n_in: usize, n_out: usize, gain: f64, rng: &mut impl Rng) -> Self {
        let std = gain / (n_in as f64).sqrt();
        let w = (0..n_in * n_out)
            .map(|_| std * Distribution::<f64>::sample(&StandardNormal, rng))
            .collect();
        Self {
            n_in,
            n_out,
            w,
            b: vec![0.0; n_out],
        }
    }

    fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            out.push(self.b[o] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    /// `acts[0]` is the input; `acts[k]` the output of layer `k - 1`
    /// (after tanh for hidden layers).
    acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    /// `sizes` lists layer widths from input to output. Hidden layers are
    /// scaled by `sqrt(2)`, the output layer by `out_gain`.
    pub fn new(sizes: &[usize], out_gain: f64, rng: &mut impl Rng) -> Self {
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|k| {
                let gain = if k + 1 == n { out_gain } else { 2f64.sqrt() };
                Layer::new(sizes[k], sizes[k + 1], gain, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    pub fn forward(&self, x: &[f64], cache: &mut MlpCache) {
        cache.acts.resize(self.layers.len() + 1, Vec::new());
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (head, tail) = cache.acts.split_at_mut(k + 1);
            let out = &mut tail[0];
            layer.forward(&head[k], out);
            if k < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut c = MlpCache::default();
        self.forward(x, &mut c);
        c.acts.pop().unwrap_or_default()
    }

    /// Accumulates `d(loss)/d(params)` into `grad` (laid out as in
    /// [`Mlp::params`]) given `d(loss)/d(output)`.
    pub fn backward(&self, cache: &MlpCache, d_out: &[f64], grad: &mut [f64]) {
        let mut delta = d_out.to_vec();
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.n_params();
        }
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let x = &cache.acts[k];
            let base = offsets[k];
            for o in 0..layer.n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let g = &mut grad[base + o * layer.n_in..base + (o + 1) * layer.n_in];
                g.iter_mut().zip(x).for_each(|(g, x)| *g += d * x);
                grad[base + layer.w.len() + o] += d;
            }
            if k == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.n_in];
            for o in 0..layer.n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
            }
            // through tanh: 1 - y^2
            prev.iter_mut().zip(x).for_each(|(p, y)| *p *= 1.0 - y * y);
            delta = prev;
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            v.extend_from_slice(&l.w);
            v.extend_from_slice(&l.b);
        }
        v
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut i = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&p[i..i + nw]);
            i += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&p[i..i + nb]);
            i += nb;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Mlp::new(&[4, 5, 3, 2], 1.0, &mut rng);
        let x = [0.3, -0.7, 0.1, 0.9];
        // loss = c . output
        let c = [0.8, -1.3];
        let loss = |n: &Mlp| n.eval(&x).iter().zip(&c).map(|(o, c)| o * c).sum::<f64>();
        let mut cache = MlpCache::default();
        net.forward(&x, &mut cache);
        let mut grad = vec![0.0; net.n_params()];
        net.backward(&cache, &c, &mut grad);

        let p0 = net.params();
        let h = 1e-6;
        for i in 0..p0.len() {
            let mut p = p0.clone();
            p[i] += h;
            net.set_params(&p);
            let up = loss(&net);
            p[i] -= 2.0 * h;
            net.set_params(&p);
            let down = loss(&net);
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
            assert!(rel < 1e-4 || (fd - grad[i]).abs() < 1e-9, "param {i}: fd {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::new(&[3, 4, 1], 0.01, &mut rng);
        let p: Vec<f64> = (0..net.n_params()).map(|i| i as f64 * 0.1).collect();
        net.set_params(&p);
        assert_eq!(net.params(), p);
    }
}
