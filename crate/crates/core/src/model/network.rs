use super::gemm::{gemm, View};
use super::{sigmoid, Gradients, ModelParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Activations kept from [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    stamp: u64,
    batch: usize,
    /// Input of each conv block, `[B, C_in, H, W]`.
    block_inputs: Vec<Vec<f64>>,
    /// Post-ReLU conv output of each block, `[B, C_out, H, W]`.
    activations: Vec<Vec<f64>>,
    /// For each pooled element, the winning index within its `H x W` plane.
    argmax: Vec<Vec<u32>>,
    /// Flattened output of the last block, `[B, F]`.
    flat: Vec<f64>,
    /// Post-ReLU hidden layer, `[B, fc_hidden]`.
    hidden: Vec<f64>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.batch
    }

    /// True when both caches took the same branch at every ReLU and every
    /// pooling window, i.e. the network is the same linear map around both.
    pub fn same_pattern(&self, other: &Self) -> bool {
        let on = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (*x > 0.0) == (*y > 0.0));
        self.batch == other.batch
            && self.argmax == other.argmax
            && on(&self.hidden, &other.hidden)
            && self
                .activations
                .iter()
                .zip(&other.activations)
                .all(|(a, b)| on(a, b))
    }
}

/// Unrolls 3x3 same-padded patches: `col[(c*9 + ky*3 + kx), y*w + x]`.
fn im2col(x: &[f64], channels: usize, h: usize, w: usize, col: &mut [f64]) {
    let hw = h * w;
    for c in 0..channels {
        let plane = &x[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((c * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            dst[0] = 0.0;
                            dst[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src[1..]);
                            dst[w - 1] = 0.0;
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates patch gradients back into `dx`.
fn col2im(col: &[f64], channels: usize, h: usize, w: usize, dx: &mut [f64]) {
    let hw = h * w;
    for c in 0..channels {
        let plane = &mut dx[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[((c * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => dst[..w - 1]
                            .iter_mut()
                            .zip(&src[1..])
                            .for_each(|(d, s)| *d += s),
                        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d += s),
                        _ => dst[1..]
                            .iter_mut()
                            .zip(&src[..w - 1])
                            .for_each(|(d, s)| *d += s),
                    }
                }
            }
        }
    }
}

/// 2x2 stride-2 max pooling of one `[C, H, W]` sample. Ties go to the
/// first element in row-major order.
fn max_pool(a: &[f64], channels: usize, h: usize, w: usize, out: &mut [f64], idx: &mut [u32]) {
    let (oh, ow) = (h / 2, w / 2);
    for c in 0..channels {
        let plane = &a[c * h * w..(c + 1) * h * w];
        for y in 0..oh {
            for x in 0..ow {
                let mut best = (2 * y) * w + 2 * x;
                for cand in [best + 1, best + w, best + w + 1] {
                    if plane[cand] > plane[best] {
                        best = cand;
                    }
                }
                let o = c * oh * ow + y * ow + x;
                out[o] = plane[best];
                idx[o] = best as u32;
            }
        }
    }
}

fn check_input(params: &ModelParams, input: &[f64], batch: usize) -> Result<()> {
    let cfg = params.config();
    if batch == 0 {
        return Err(Error::ShapeMismatch("empty batch".into()));
    }
    if input.len() != batch * cfg.input_len() {
        return Err(Error::ShapeMismatch(format!(
            "batch of {batch} needs {} values ({}x{}x{} each), got {}",
            batch * cfg.input_len(),
            cfg.input_channels,
            cfg.input_height,
            cfg.input_width,
            input.len()
        )));
    }
    if let Some(i) = input.iter().position(|v| !v.is_finite()) {
        return Err(Error::ShapeMismatch(format!("input value {i} is not finite")));
    }
    Ok(())
}

/// Runs a batch `[B, C_in, H, W]` (row-major, flattened) through the
/// network and returns raw logits `[B, num_classes]`.
pub fn forward(params: &ModelParams, input: &[f64], batch: usize) -> Result<(Matrix<f64>, ForwardCache)> {
    check_input(params, input, batch)?;
    let cfg = params.config();
    let mut block_inputs = Vec::with_capacity(cfg.conv_channels.len());
    let mut activations = Vec::with_capacity(cfg.conv_channels.len());
    let mut argmaxes = Vec::with_capacity(cfg.conv_channels.len());

    let mut x = input.to_vec();
    let (mut cin, mut h, mut w) = (cfg.input_channels, cfg.input_height, cfg.input_width);
    let mut col = Vec::new();
    for (block, &cout) in cfg.conv_channels.iter().enumerate() {
        let (weight, bias) = params.conv(block);
        let hw = h * w;
        let k = cin * 9;
        col.resize(k * hw, 0.0);
        let mut act = vec![0.0; batch * cout * hw];
        let (oh, ow) = (h / 2, w / 2);
        let mut pooled = vec![0.0; batch * cout * oh * ow];
        let mut idx = vec![0u32; batch * cout * oh * ow];
        for b in 0..batch {
            let xs = &x[b * cin * hw..(b + 1) * cin * hw];
            im2col(xs, cin, h, w, &mut col);
            let z = &mut act[b * cout * hw..(b + 1) * cout * hw];
            gemm(View::new(&weight.data, cout, k), View::new(&col, k, hw), 0.0, z);
            for (co, plane) in z.chunks_exact_mut(hw).enumerate() {
                let bv = bias.data[co];
                plane.iter_mut().for_each(|v| *v = (*v + bv).max(0.0));
            }
            let po = b * cout * oh * ow..(b + 1) * cout * oh * ow;
            max_pool(z, cout, h, w, &mut pooled[po.clone()], &mut idx[po]);
        }
        block_inputs.push(std::mem::replace(&mut x, pooled));
        activations.push(act);
        argmaxes.push(idx);
        cin = cout;
        h = oh;
        w = ow;
    }

    let flat = x;
    let f = cfg.flatten_size();
    let (w1, b1) = params.dense(0);
    let mut hidden = vec![0.0; batch * cfg.fc_hidden];
    gemm(
        View::new(&flat, batch, f),
        View::new(&w1.data, cfg.fc_hidden, f).t(),
        0.0,
        &mut hidden,
    );
    for row in hidden.chunks_exact_mut(cfg.fc_hidden) {
        row.iter_mut()
            .zip(&b1.data)
            .for_each(|(v, b)| *v = (*v + b).max(0.0));
    }

    let (w2, b2) = params.dense(1);
    let c = cfg.num_classes;
    let mut logits = vec![0.0; batch * c];
    gemm(
        View::new(&hidden, batch, cfg.fc_hidden),
        View::new(&w2.data, c, cfg.fc_hidden).t(),
        0.0,
        &mut logits,
    );
    for row in logits.chunks_exact_mut(c) {
        row.iter_mut().zip(&b2.data).for_each(|(v, b)| *v += b);
    }

    Ok((
        Matrix::from_vec(batch, c, logits),
        ForwardCache {
            stamp: params.stamp(),
            batch,
            block_inputs,
            activations,
            argmax: argmaxes,
            flat,
            hidden,
        },
    ))
}

/// Exact parameter gradients given `d_logits = dLoss/dLogits`.
///
/// ReLU uses subgradient 0 at 0; pooling routes to the recorded argmax.
pub fn backward(params: &ModelParams, cache: &ForwardCache, d_logits: &Matrix<f64>) -> Result<Gradients> {
    if cache.stamp != params.stamp() {
        return Err(Error::StaleCache);
    }
    let cfg = params.config();
    let batch = cache.batch;
    let c = cfg.num_classes;
    if d_logits.shape() != (batch, c) {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient {:?}, expected ({batch}, {c})",
            d_logits.shape()
        )));
    }
    let mut grads = Gradients::zeros_like(params);
    let n_blocks = cfg.conv_channels.len();
    let hd = cfg.fc_hidden;
    let f = cfg.flatten_size();
    let dl = d_logits.as_slice();

    // Output layer.
    let (w2, _) = params.dense(1);
    let fc2 = 2 * n_blocks + 2;
    gemm(
        View::new(dl, batch, c).t(),
        View::new(&cache.hidden, batch, hd),
        0.0,
        &mut grads.tensors[fc2].data,
    );
    for row in dl.chunks_exact(c) {
        grads.tensors[fc2 + 1]
            .data
            .iter_mut()
            .zip(row)
            .for_each(|(g, d)| *g += d);
    }
    let mut dh = vec![0.0; batch * hd];
    gemm(View::new(dl, batch, c), View::new(&w2.data, c, hd), 0.0, &mut dh);
    dh.iter_mut()
        .zip(&cache.hidden)
        .for_each(|(d, &a)| {
            if a <= 0.0 {
                *d = 0.0
            }
        });

    // Hidden layer.
    let (w1, _) = params.dense(0);
    let fc1 = 2 * n_blocks;
    gemm(
        View::new(&dh, batch, hd).t(),
        View::new(&cache.flat, batch, f),
        0.0,
        &mut grads.tensors[fc1].data,
    );
    for row in dh.chunks_exact(hd) {
        grads.tensors[fc1 + 1]
            .data
            .iter_mut()
            .zip(row)
            .for_each(|(g, d)| *g += d);
    }
    let mut d_out = vec![0.0; batch * f];
    gemm(View::new(&dh, batch, hd), View::new(&w1.data, hd, f), 0.0, &mut d_out);

    // Conv blocks, last to first. `d_out` is the gradient of the block's
    // pooled output.
    let mut col = Vec::new();
    let mut dcol = Vec::new();
    for block in (0..n_blocks).rev() {
        let cout = cfg.conv_channels[block];
        let cin = if block == 0 {
            cfg.input_channels
        } else {
            cfg.conv_channels[block - 1]
        };
        let h = cfg.input_height >> block;
        let w = cfg.input_width >> block;
        let hw = h * w;
        let (oh, ow) = (h / 2, w / 2);
        let k = cin * 9;
        let (weight, _) = params.conv(block);
        let act = &cache.activations[block];
        let idx = &cache.argmax[block];
        let xin = &cache.block_inputs[block];

        let mut dz = vec![0.0; batch * cout * hw];
        for (plane_no, (dp, ip)) in d_out
            .chunks_exact(oh * ow)
            .zip(idx.chunks_exact(oh * ow))
            .enumerate()
        {
            let base = plane_no * hw;
            for (&g, &i) in dp.iter().zip(ip) {
                let at = base + i as usize;
                if act[at] > 0.0 {
                    dz[at] += g;
                }
            }
        }

        let need_dx = block > 0;
        let mut dx = if need_dx { vec![0.0; batch * cin * hw] } else { Vec::new() };
        col.resize(k * hw, 0.0);
        if need_dx {
            dcol.resize(k * hw, 0.0);
        }
        let wi = 2 * block;
        for b in 0..batch {
            let dzs = &dz[b * cout * hw..(b + 1) * cout * hw];
            for (co, plane) in dzs.chunks_exact(hw).enumerate() {
                grads.tensors[wi + 1].data[co] += plane.iter().sum::<f64>();
            }
            im2col(&xin[b * cin * hw..(b + 1) * cin * hw], cin, h, w, &mut col);
            gemm(
                View::new(dzs, cout, hw),
                View::new(&col, k, hw).t(),
                1.0,
                &mut grads.tensors[wi].data,
            );
            if need_dx {
                gemm(
                    View::new(&weight.data, cout, k).t(),
                    View::new(dzs, cout, hw),
                    0.0,
                    &mut dcol,
                );
                col2im(&dcol, cin, h, w, &mut dx[b * cin * hw..(b + 1) * cin * hw]);
            }
        }
        d_out = dx;
    }
    Ok(grads)
}

/// Sigmoid of the forward logits.
pub fn predict_proba(params: &ModelParams, input: &[f64], batch: usize) -> Result<Matrix<f64>> {
    let (logits, _) = forward(params, input, batch)?;
    Ok(logits.map(|&x| sigmoid(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};

    fn tiny(classes: usize) -> ModelConfig {
        ModelConfig {
            input_channels: 1,
            input_height: 4,
            input_width: 4,
            conv_channels: vec![2],
            kernel_size: 3,
            fc_hidden: 4,
            num_classes: classes,
            weight_init_seed: 3,
        }
    }

    /// Same-padded 3x3 correlation by direct summation.
    fn conv_direct(x: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; h * w];
        for y in 0..h {
            for xx in 0..w {
                let mut s = 0.0;
                for ky in 0..3 {
                    for kx in 0..3 {
                        let sy = y as isize + ky as isize - 1;
                        let sx = xx as isize + kx as isize - 1;
                        if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                            s += x[sy as usize * w + sx as usize] * k[ky * 3 + kx];
                        }
                    }
                }
                out[y * w + xx] = s;
            }
        }
        out
    }

    #[test]
    fn im2col_matches_direct_convolution_on_5x5() {
        let x: Vec<f64> = (1..=25).map(f64::from).collect();
        let kernel = [0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0];
        let mut col = vec![0.0; 9 * 25];
        im2col(&x, 1, 5, 5, &mut col);
        let mut out = vec![0.0; 25];
        gemm(View::new(&kernel, 1, 9), View::new(&col, 9, 25), 0.0, &mut out);
        assert_eq!(out, conv_direct(&x, 5, 5, &kernel));
        // Hand values: corner (0,0) = 2 + 6 - 4*1 = 4, centre (2,2) = 0.
        assert_eq!(out[0], 4.0);
        assert_eq!(out[12], 0.0);
    }

    #[test]
    fn col2im_is_the_adjoint_of_im2col() {
        let (c, h, w) = (2, 4, 6);
        let x: Vec<f64> = (0..c * h * w).map(|i| (i as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..c * 9 * h * w).map(|i| (i as f64 * 0.3).cos()).collect();
        let mut col = vec![0.0; c * 9 * h * w];
        im2col(&x, c, h, w, &mut col);
        let mut back = vec![0.0; c * h * w];
        col2im(&y, c, h, w, &mut back);
        let lhs: f64 = col.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn pooling_picks_the_max_and_first_on_ties() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let (mut out, mut idx) = ([0.0], [0u32]);
        max_pool(&a, 1, 2, 2, &mut out, &mut idx);
        assert_eq!((out[0], idx[0]), (4.0, 3));
        max_pool(&[5.0, 5.0, 5.0, 5.0], 1, 2, 2, &mut out, &mut idx);
        assert_eq!(idx[0], 0);
    }

    #[test]
    fn zero_network_outputs_its_last_bias() {
        let cfg = tiny(3);
        let mut p = crate::model::ModelParams::zeros(&cfg).unwrap();
        let last = p.tensors().len() - 1;
        p.tensors_mut()[last].data = vec![0.5, -1.0, 2.0];
        let (logits, _) = forward(&p, &vec![0.0; 2 * 16], 2).unwrap();
        assert_eq!(logits.as_slice(), &[0.5, -1.0, 2.0, 0.5, -1.0, 2.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let p = init_params(&tiny(2)).unwrap();
        let x: Vec<f64> = (0..32).map(|i| (i as f64).cos()).collect();
        let (_, cache) = forward(&p, &x, 2).unwrap();
        let g = backward(&p, &cache, &Matrix::zeros(2, 2)).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut p = init_params(&tiny(2)).unwrap();
        let (_, cache) = forward(&p, &[0.1; 16], 1).unwrap();
        p.tensors_mut()[0].data[0] += 1.0;
        assert!(matches!(
            backward(&p, &cache, &Matrix::zeros(1, 2)),
            Err(Error::StaleCache)
        ));
        let q = init_params(&tiny(2)).unwrap();
        assert!(matches!(
            backward(&q, &cache, &Matrix::zeros(1, 2)),
            Err(Error::StaleCache)
        ));
    }

    #[test]
    fn wrong_input_length_is_shape_mismatch() {
        let p = init_params(&tiny(2)).unwrap();
        assert!(matches!(forward(&p, &[0.0; 15], 1), Err(Error::ShapeMismatch(_))));
        let (_, cache) = forward(&p, &[0.0; 16], 1).unwrap();
        assert!(matches!(
            backward(&p, &cache, &Matrix::zeros(1, 3)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn probabilities_follow_logit_order() {
        let p = init_params(&tiny(5)).unwrap();
        let x: Vec<f64> = (0..48).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let (logits, _) = forward(&p, &x, 3).unwrap();
        let probs = predict_proba(&p, &x, 3).unwrap();
        for b in 0..3 {
            let order = |row: &[f64]| {
                let mut ix: Vec<usize> = (0..row.len()).collect();
                ix.sort_by(|&i, &j| row[i].total_cmp(&row[j]));
                ix
            };
            assert_eq!(order(logits.row(b)), order(probs.row(b)));
            assert!(probs.row(b).iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }
}
