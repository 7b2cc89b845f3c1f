//! The CBOW negative-sampling objective for a single training example.
//!
//! With `h` the mean of the context words' input vectors, `u_w` the output
//! vector of word `w`, target `o` and negatives `n_1..n_k`:
//!
//! ```text
//! loss = -ln σ(u_o · h) - Σ_i ln σ(-u_{n_i} · h)
//! ```
//!
//! Vectors live in flat row-major tables of width `dim`.

/// One training example: context word ids (repeats allowed), the centre
/// word and the sampled negatives (repeats allowed).
#[derive(Debug, Clone, Copy)]
pub struct CbowExample<'a> {
    pub context: &'a [usize],
    pub target: usize,
    pub negatives: &'a [usize],
}

fn row(table: &[f64], dim: usize, i: usize) -> &[f64] {
    &table[i * dim..(i + 1) * dim]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Scratch space reused across steps.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    pub hidden: Vec<f64>,
    pub grad_hidden: Vec<f64>,
    /// (output row, dLoss/dScore) for the target then each negative.
    pub coeffs: Vec<(usize, f64)>,
}

/// Forward pass: fills `hidden`, `coeffs` and `grad_hidden` and returns the
/// loss. All coefficients are evaluated at the same parameter point.
pub(crate) fn forward(input: &[f64], output: &[f64], dim: usize, ex: &CbowExample<'_>, ws: &mut Workspace) -> f64 {
    assert!(!ex.context.is_empty(), "CBOW example needs a context");
    ws.hidden.clear();
    ws.hidden.resize(dim, 0.0);
    for &c in ex.context {
        for (h, x) in ws.hidden.iter_mut().zip(row(input, dim, c)) {
            *h += x;
        }
    }
    let scale = 1.0 / ex.context.len() as f64;
    ws.hidden.iter_mut().for_each(|h| *h *= scale);

    ws.coeffs.clear();
    ws.grad_hidden.clear();
    ws.grad_hidden.resize(dim, 0.0);
    let mut loss = 0.0;
    let labelled = std::iter::once((ex.target, 1.0)).chain(ex.negatives.iter().map(|&n| (n, 0.0)));
    for (word, label) in labelled {
        let u = row(output, dim, word);
        let score = dot(&ws.hidden, u);
        loss += if label > 0.0 { softplus(-score) } else { softplus(score) };
        let g = sigmoid(score) - label;
        for (gh, x) in ws.grad_hidden.iter_mut().zip(u) {
            *gh += g * x;
        }
        ws.coeffs.push((word, g));
    }
    loss
}

/// Loss of one example.
pub fn cbow_loss(input: &[f64], output: &[f64], dim: usize, ex: &CbowExample<'_>) -> f64 {
    forward(input, output, dim, ex, &mut Workspace::default())
}

/// Loss and dense gradients with respect to the whole input and output tables.
pub fn cbow_gradient(input: &[f64], output: &[f64], dim: usize, ex: &CbowExample<'_>) -> (f64, Vec<f64>, Vec<f64>) {
    let mut ws = Workspace::default();
    let loss = forward(input, output, dim, ex, &mut ws);
    let mut g_in = vec![0.0; input.len()];
    let mut g_out = vec![0.0; output.len()];
    for &(word, g) in &ws.coeffs {
        for (d, h) in g_out[word * dim..(word + 1) * dim].iter_mut().zip(&ws.hidden) {
            *d += g * h;
        }
    }
    let scale = 1.0 / ex.context.len() as f64;
    for &c in ex.context {
        for (d, gh) in g_in[c * dim..(c + 1) * dim].iter_mut().zip(&ws.grad_hidden) {
            *d += gh * scale;
        }
    }
    (loss, g_in, g_out)
}

/// One SGD step of size `lr` on the example; returns the loss before the
/// step. Equivalent to subtracting `lr` times [`cbow_gradient`].
pub(crate) fn sgd_step(
    input: &mut [f64],
    output: &mut [f64],
    dim: usize,
    ex: &CbowExample<'_>,
    lr: f64,
    ws: &mut Workspace,
) -> f64 {
    let loss = forward(input, output, dim, ex, ws);
    for &(word, g) in &ws.coeffs {
        let step = lr * g;
        for (u, h) in output[word * dim..(word + 1) * dim].iter_mut().zip(&ws.hidden) {
            *u -= step * h;
        }
    }
    let step = lr / ex.context.len() as f64;
    for &c in ex.context {
        for (v, gh) in input[c * dim..(c + 1) * dim].iter_mut().zip(&ws.grad_hidden) {
            *v -= step * gh;
        }
    }
    loss
}
