//! Enumeration of signed sums `Σ_a σ_a u_a` over `σ ∈ {±1}^K`.
//!
//! Only the `2^{K-1}` patterns with `σ_{K-1} = +1` are visited; the other
//! half are negations with identical norms. Patterns are walked in Gray-code
//! order and the running sum is refreshed from scratch periodically.

pub const MAX_OUTPUTS: usize = 24;
const REFRESH: u64 = 1024;

/// Sign pattern as a bit mask: bit `a` set means `σ_a = -1`.
pub type Pattern = u32;

pub fn sign(pattern: Pattern, a: usize) -> f64 {
    if pattern >> a & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

pub fn signed_sum(vectors: &[&[f64]], pattern: Pattern, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (a, u) in vectors.iter().enumerate() {
        let s = sign(pattern, a);
        for (o, x) in out.iter_mut().zip(u.iter()) {
            *o += s * x;
        }
    }
}

/// Calls `f(pattern, squared norm)` for every pattern with the last sign fixed to `+1`.
pub fn for_each_pattern(vectors: &[&[f64]], mut f: impl FnMut(Pattern, f64)) {
    let k = vectors.len();
    if k == 0 {
        f(0, 0.0);
        return;
    }
    assert!(k <= MAX_OUTPUTS, "sign enumeration limited to {MAX_OUTPUTS} vectors");
    let d = vectors[0].len();
    let free = k - 1;
    let mut w = vec![0.0; d];
    let mut pattern: Pattern = 0;
    signed_sum(vectors, pattern, &mut w);
    let total: u64 = 1 << free;
    for step in 0..total {
        if step > 0 {
            let bit = step.trailing_zeros() as usize;
            pattern ^= 1 << bit;
            if step % REFRESH == 0 {
                signed_sum(vectors, pattern, &mut w);
            } else {
                let s = 2.0 * sign(pattern, bit);
                for (o, x) in w.iter_mut().zip(vectors[bit].iter()) {
                    *o += s * x;
                }
            }
        }
        f(pattern, w.iter().map(|v| v * v).sum());
    }
}

/// `max_σ ‖Σ σ_a u_a‖₂` and a maximizing pattern (exact recomputation at the maximizer).
pub fn max_signed_norm(vectors: &[&[f64]]) -> (f64, Pattern) {
    let mut best = (f64::NEG_INFINITY, 0);
    for_each_pattern(vectors, |p, sq| {
        if sq > best.0 {
            best = (sq, p);
        }
    });
    let d = vectors.first().map_or(0, |v| v.len());
    let mut w = vec![0.0; d];
    signed_sum(vectors, best.1, &mut w);
    (w.iter().map(|v| v * v).sum::<f64>().sqrt(), best.1)
}
