//! Forward and backward passes of the two-branch link classifier.
//!
//! Each branch maps a `30 × 3` window through four length-preserving
//! temporal convolutions (kernel 7 along time, applied to the `f`, `x` and
//! `y` columns with shared weights), a fusion convolution across the three
//! columns, and average pooling over time. The two 256-d branch features are
//! concatenated and classified by a two-layer MLP with a 2-way softmax.
//! Every convolution and the hidden layer are followed by a ReLU.

use super::scalar::{matmul, matmul_nt, matmul_tn, Scalar};
use super::weights::{
    AflinkWeights, BRANCH_TENSORS, CLASSES, FEATURE_DIM, FUSION_KERNEL, HIDDEN_DIM,
    TEMPORAL_CHANNELS, TEMPORAL_KERNEL, TEMPORAL_PADDING,
};
use super::window::{PairInput, WINDOW_LEN};
use crate::error::{Error, Result};

const COLUMNS: usize = 3;
const CLASSIFIER: usize = 2 * BRANCH_TENSORS;

struct ConvCache<T> {
    cols: Vec<T>,
    out: Vec<T>,
    cin: usize,
    cout: usize,
}

struct BranchCache<T> {
    convs: Vec<ConvCache<T>>,
    fusion_in: Vec<T>,
    fusion_out: Vec<T>,
}

struct Cache<T> {
    branches: [BranchCache<T>; 2],
    concat: Vec<T>,
    hidden: Vec<T>,
    logits: Vec<T>,
}

fn relu_inplace<T: Scalar>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

fn add_bias<T: Scalar>(out: &mut [T], bias: &[T]) {
    for row in out.chunks_exact_mut(bias.len()) {
        for (o, b) in row.iter_mut().zip(bias) {
            *o += *b;
        }
    }
}

fn column_sums<T: Scalar>(m: &[T], cols: usize, into: &mut [T]) {
    for row in m.chunks_exact(cols) {
        for (acc, v) in into.iter_mut().zip(row) {
            *acc += *v;
        }
    }
}

/// Zeroes gradient entries whose forward activation was clipped by ReLU.
fn relu_backward<T: Scalar>(grad: &mut [T], activation: &[T]) {
    for (g, a) in grad.iter_mut().zip(activation) {
        if *a <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Unrolls length-`WINDOW_LEN` sequences into temporal patches:
/// row `(seq, t)`, column block `d` holds `x[seq, t + d - pad]`.
fn im2col<T: Scalar>(x: &[T], sequences: usize, cin: usize) -> Vec<T> {
    let width = TEMPORAL_KERNEL * cin;
    let mut cols = vec![T::zero(); sequences * WINDOW_LEN * width];
    for seq in 0..sequences {
        for t in 0..WINDOW_LEN {
            let row = (seq * WINDOW_LEN + t) * width;
            for d in 0..TEMPORAL_KERNEL {
                let Some(src_t) = (t + d).checked_sub(TEMPORAL_PADDING) else {
                    continue;
                };
                if src_t >= WINDOW_LEN {
                    continue;
                }
                let src = (seq * WINDOW_LEN + src_t) * cin;
                cols[row + d * cin..row + (d + 1) * cin].copy_from_slice(&x[src..src + cin]);
            }
        }
    }
    cols
}

fn col2im<T: Scalar>(dcols: &[T], sequences: usize, cin: usize) -> Vec<T> {
    let width = TEMPORAL_KERNEL * cin;
    let mut dx = vec![T::zero(); sequences * WINDOW_LEN * cin];
    for seq in 0..sequences {
        for t in 0..WINDOW_LEN {
            let row = (seq * WINDOW_LEN + t) * width;
            for d in 0..TEMPORAL_KERNEL {
                let Some(dst_t) = (t + d).checked_sub(TEMPORAL_PADDING) else {
                    continue;
                };
                if dst_t >= WINDOW_LEN {
                    continue;
                }
                let dst = (seq * WINDOW_LEN + dst_t) * cin;
                for (o, g) in dx[dst..dst + cin]
                    .iter_mut()
                    .zip(&dcols[row + d * cin..row + (d + 1) * cin])
                {
                    *o += *g;
                }
            }
        }
    }
    dx
}

fn branch_forward<T: Scalar>(
    weights: &AflinkWeights<T>,
    branch: usize,
    input: Vec<T>,
    batch: usize,
) -> (BranchCache<T>, Vec<T>) {
    let base = branch * BRANCH_TENSORS;
    let sequences = batch * COLUMNS;
    let rows = sequences * WINDOW_LEN;
    let mut x = input;
    let mut cin = 1;
    let mut convs = Vec::with_capacity(TEMPORAL_CHANNELS.len());
    for (l, &cout) in TEMPORAL_CHANNELS.iter().enumerate() {
        let w = &weights.tensors[base + 2 * l].data;
        let b = &weights.tensors[base + 2 * l + 1].data;
        let cols = im2col(&x, sequences, cin);
        let mut out = vec![T::zero(); rows * cout];
        matmul(rows, TEMPORAL_KERNEL * cin, cout, &cols, w, &mut out, false);
        add_bias(&mut out, b);
        relu_inplace(&mut out);
        x = out.clone();
        convs.push(ConvCache {
            cols,
            out,
            cin,
            cout,
        });
        cin = cout;
    }

    // Gather the three columns of each time step side by side.
    let fusion_width = FUSION_KERNEL * FEATURE_DIM;
    let mut fusion_in = vec![T::zero(); batch * WINDOW_LEN * fusion_width];
    for s in 0..batch {
        for c in 0..COLUMNS {
            for t in 0..WINDOW_LEN {
                let src = ((s * COLUMNS + c) * WINDOW_LEN + t) * FEATURE_DIM;
                let dst = (s * WINDOW_LEN + t) * fusion_width + c * FEATURE_DIM;
                fusion_in[dst..dst + FEATURE_DIM].copy_from_slice(&x[src..src + FEATURE_DIM]);
            }
        }
    }
    let mut fusion_out = vec![T::zero(); batch * WINDOW_LEN * FEATURE_DIM];
    matmul(
        batch * WINDOW_LEN,
        fusion_width,
        FEATURE_DIM,
        &fusion_in,
        &weights.tensors[base + 8].data,
        &mut fusion_out,
        false,
    );
    add_bias(&mut fusion_out, &weights.tensors[base + 9].data);
    relu_inplace(&mut fusion_out);

    let inv = T::of(1.0 / WINDOW_LEN as f64);
    let mut pooled = vec![T::zero(); batch * FEATURE_DIM];
    for s in 0..batch {
        let acc = &mut pooled[s * FEATURE_DIM..(s + 1) * FEATURE_DIM];
        for t in 0..WINDOW_LEN {
            let row = &fusion_out[(s * WINDOW_LEN + t) * FEATURE_DIM..][..FEATURE_DIM];
            for (a, v) in acc.iter_mut().zip(row) {
                *a += *v;
            }
        }
        for a in acc.iter_mut() {
            *a = *a * inv;
        }
    }
    (
        BranchCache {
            convs,
            fusion_in,
            fusion_out,
        },
        pooled,
    )
}

fn forward_cached<T: Scalar>(weights: &AflinkWeights<T>, inputs: &[PairInput<T>]) -> Result<Cache<T>> {
    weights.validate()?;
    let batch = inputs.len();
    let n_in = COLUMNS * WINDOW_LEN;
    for (i, p) in inputs.iter().enumerate() {
        if p.earlier.len() != n_in || p.later.len() != n_in {
            return Err(Error::Domain(format!(
                "pair {i}: expected {n_in} values per window, got {} and {}",
                p.earlier.len(),
                p.later.len()
            )));
        }
    }
    let gather = |pick: fn(&PairInput<T>) -> &Vec<T>| -> Vec<T> {
        inputs.iter().flat_map(|p| pick(p).iter().copied()).collect()
    };
    let (cache0, pooled0) = branch_forward(weights, 0, gather(|p| &p.earlier), batch);
    let (cache1, pooled1) = branch_forward(weights, 1, gather(|p| &p.later), batch);

    let mut concat = vec![T::zero(); batch * 2 * FEATURE_DIM];
    for s in 0..batch {
        let row = &mut concat[s * 2 * FEATURE_DIM..(s + 1) * 2 * FEATURE_DIM];
        row[..FEATURE_DIM].copy_from_slice(&pooled0[s * FEATURE_DIM..(s + 1) * FEATURE_DIM]);
        row[FEATURE_DIM..].copy_from_slice(&pooled1[s * FEATURE_DIM..(s + 1) * FEATURE_DIM]);
    }
    let mut hidden = vec![T::zero(); batch * HIDDEN_DIM];
    matmul(
        batch,
        2 * FEATURE_DIM,
        HIDDEN_DIM,
        &concat,
        &weights.tensors[CLASSIFIER].data,
        &mut hidden,
        false,
    );
    add_bias(&mut hidden, &weights.tensors[CLASSIFIER + 1].data);
    relu_inplace(&mut hidden);
    let mut logits = vec![T::zero(); batch * CLASSES];
    matmul(
        batch,
        HIDDEN_DIM,
        CLASSES,
        &hidden,
        &weights.tensors[CLASSIFIER + 2].data,
        &mut logits,
        false,
    );
    add_bias(&mut logits, &weights.tensors[CLASSIFIER + 3].data);
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("link network produced a non-finite logit".into()));
    }
    Ok(Cache {
        branches: [cache0, cache1],
        concat,
        hidden,
        logits,
    })
}

/// `(log p(different), log p(same))` for one logit pair.
fn log_softmax<T: Scalar>(l: &[T]) -> [T; 2] {
    let m = l[0].max(l[1]);
    let lse = m + ((l[0] - m).exp() + (l[1] - m).exp()).ln();
    [l[0] - lse, l[1] - lse]
}

/// Probability that each pair belongs to the same identity.
pub fn forward_batch<T: Scalar>(weights: &AflinkWeights<T>, inputs: &[PairInput<T>]) -> Result<Vec<T>> {
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    let cache = forward_cached(weights, inputs)?;
    Ok(cache
        .logits
        .chunks_exact(CLASSES)
        .map(|l| log_softmax(l)[1].exp())
        .collect())
}

/// Link confidence of one tracklet pair.
pub fn forward<T: Scalar>(pair: &PairInput<T>, weights: &AflinkWeights<T>) -> Result<T> {
    Ok(forward_batch(weights, std::slice::from_ref(pair))?[0])
}

/// Cross-entropy summed over the batch.
pub fn batch_loss<T: Scalar>(
    weights: &AflinkWeights<T>,
    inputs: &[PairInput<T>],
    labels: &[bool],
) -> Result<T> {
    let cache = forward_cached(weights, inputs)?;
    Ok(cache
        .logits
        .chunks_exact(CLASSES)
        .zip(labels)
        .map(|(l, &y)| -log_softmax(l)[usize::from(y)])
        .sum())
}

fn branch_backward<T: Scalar>(
    weights: &AflinkWeights<T>,
    branch: usize,
    cache: &BranchCache<T>,
    dpooled: &[T],
    batch: usize,
    grads: &mut AflinkWeights<T>,
) {
    let base = branch * BRANCH_TENSORS;
    let sequences = batch * COLUMNS;
    let rows = sequences * WINDOW_LEN;
    let fusion_width = FUSION_KERNEL * FEATURE_DIM;

    let inv = T::of(1.0 / WINDOW_LEN as f64);
    let mut dfusion = vec![T::zero(); batch * WINDOW_LEN * FEATURE_DIM];
    for s in 0..batch {
        let g = &dpooled[s * FEATURE_DIM..(s + 1) * FEATURE_DIM];
        for t in 0..WINDOW_LEN {
            let row = &mut dfusion[(s * WINDOW_LEN + t) * FEATURE_DIM..][..FEATURE_DIM];
            for (d, v) in row.iter_mut().zip(g) {
                *d = *v * inv;
            }
        }
    }
    relu_backward(&mut dfusion, &cache.fusion_out);
    matmul_tn(
        fusion_width,
        batch * WINDOW_LEN,
        FEATURE_DIM,
        &cache.fusion_in,
        &dfusion,
        &mut grads.tensors[base + 8].data,
        true,
    );
    column_sums(&dfusion, FEATURE_DIM, &mut grads.tensors[base + 9].data);
    let mut dfusion_in = vec![T::zero(); batch * WINDOW_LEN * fusion_width];
    matmul_nt(
        batch * WINDOW_LEN,
        FEATURE_DIM,
        fusion_width,
        &dfusion,
        &weights.tensors[base + 8].data,
        &mut dfusion_in,
        false,
    );
    let mut dx = vec![T::zero(); rows * FEATURE_DIM];
    for s in 0..batch {
        for c in 0..COLUMNS {
            for t in 0..WINDOW_LEN {
                let dst = ((s * COLUMNS + c) * WINDOW_LEN + t) * FEATURE_DIM;
                let src = (s * WINDOW_LEN + t) * fusion_width + c * FEATURE_DIM;
                dx[dst..dst + FEATURE_DIM].copy_from_slice(&dfusion_in[src..src + FEATURE_DIM]);
            }
        }
    }

    for (l, conv) in cache.convs.iter().enumerate().rev() {
        let mut dy = dx;
        relu_backward(&mut dy, &conv.out);
        let width = TEMPORAL_KERNEL * conv.cin;
        matmul_tn(
            width,
            rows,
            conv.cout,
            &conv.cols,
            &dy,
            &mut grads.tensors[base + 2 * l].data,
            true,
        );
        column_sums(&dy, conv.cout, &mut grads.tensors[base + 2 * l + 1].data);
        if l == 0 {
            break;
        }
        let mut dcols = vec![T::zero(); rows * width];
        matmul_nt(
            rows,
            conv.cout,
            width,
            &dy,
            &weights.tensors[base + 2 * l].data,
            &mut dcols,
            false,
        );
        dx = col2im(&dcols, sequences, conv.cin);
    }
}

/// Accumulates `scale ·` the gradient of the summed cross-entropy into
/// `grads` and returns the unscaled summed loss.
pub fn accumulate_gradients<T: Scalar>(
    weights: &AflinkWeights<T>,
    inputs: &[PairInput<T>],
    labels: &[bool],
    scale: T,
    grads: &mut AflinkWeights<T>,
) -> Result<T> {
    if inputs.len() != labels.len() {
        return Err(Error::Domain(format!(
            "{} inputs but {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    if inputs.is_empty() {
        return Ok(T::zero());
    }
    grads.validate()?;
    let batch = inputs.len();
    let cache = forward_cached(weights, inputs)?;
    let mut loss = T::zero();
    let mut dlogits = vec![T::zero(); batch * CLASSES];
    for (s, (l, &y)) in cache.logits.chunks_exact(CLASSES).zip(labels).enumerate() {
        let logp = log_softmax(l);
        let target = usize::from(y);
        loss += -logp[target];
        for k in 0..CLASSES {
            let onehot = if k == target { T::one() } else { T::zero() };
            dlogits[s * CLASSES + k] = (logp[k].exp() - onehot) * scale;
        }
    }

    matmul_tn(
        HIDDEN_DIM,
        batch,
        CLASSES,
        &cache.hidden,
        &dlogits,
        &mut grads.tensors[CLASSIFIER + 2].data,
        true,
    );
    column_sums(&dlogits, CLASSES, &mut grads.tensors[CLASSIFIER + 3].data);
    let mut dhidden = vec![T::zero(); batch * HIDDEN_DIM];
    matmul_nt(
        batch,
        CLASSES,
        HIDDEN_DIM,
        &dlogits,
        &weights.tensors[CLASSIFIER + 2].data,
        &mut dhidden,
        false,
    );
    relu_backward(&mut dhidden, &cache.hidden);
    matmul_tn(
        2 * FEATURE_DIM,
        batch,
        HIDDEN_DIM,
        &cache.concat,
        &dhidden,
        &mut grads.tensors[CLASSIFIER].data,
        true,
    );
    column_sums(&dhidden, HIDDEN_DIM, &mut grads.tensors[CLASSIFIER + 1].data);
    let mut dconcat = vec![T::zero(); batch * 2 * FEATURE_DIM];
    matmul_nt(
        batch,
        HIDDEN_DIM,
        2 * FEATURE_DIM,
        &dhidden,
        &weights.tensors[CLASSIFIER].data,
        &mut dconcat,
        false,
    );
    for branch in 0..2 {
        let dpooled: Vec<T> = dconcat
            .chunks_exact(2 * FEATURE_DIM)
            .flat_map(|row| row[branch * FEATURE_DIM..(branch + 1) * FEATURE_DIM].iter().copied())
            .collect();
        branch_backward(weights, branch, &cache.branches[branch], &dpooled, batch, grads);
    }
    Ok(loss)
}

/// Loss and full gradient for a single labelled pair.
pub fn backward<T: Scalar>(
    pair: &PairInput<T>,
    label: bool,
    weights: &AflinkWeights<T>,
) -> Result<(T, AflinkWeights<T>)> {
    let mut grads = AflinkWeights::zeros();
    let loss = accumulate_gradients(weights, std::slice::from_ref(pair), &[label], T::one(), &mut grads)?;
    Ok((loss, grads))
}
