//! Butterworth high-pass design as second-order sections and zero-phase
//! (forward-backward) filtering.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// One biquad, `a0` normalized to 1: `[b0, b1, b2, a1, a2]`.
pub type Section = [f64; 5];

/// Digital Butterworth high-pass of even `order`, designed by the bilinear
/// transform with the cutoff pre-warped so the -3 dB point lands exactly on
/// `cutoff`.
pub fn butterworth_highpass(order: usize, cutoff: f64, sample_rate: f64) -> Result<Vec<Section>> {
    if order == 0 || !order.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("filter order must be even and positive, got {order}")));
    }
    let nyquist = sample_rate / 2.0;
    if !(cutoff > 0.0) || cutoff >= nyquist {
        return Err(Error::InvalidArgument(format!(
            "cutoff {cutoff} Hz must lie in (0, {nyquist}) Hz"
        )));
    }
    let k = 2.0 * sample_rate;
    let wc = k * (PI * cutoff / sample_rate).tan();
    let sections = (1..=order / 2)
        .map(|i| {
            // Conjugate pole pair of the normalized low-pass prototype:
            // s² + a s + 1 with a = 2 sin((2i-1)π / 2N).
            let a = 2.0 * ((2 * i - 1) as f64 * PI / (2 * order) as f64).sin();
            // High-pass section s² / (s² + a wc s + wc²) through s = k (1 - z⁻¹)/(1 + z⁻¹).
            let d0 = k * k + a * wc * k + wc * wc;
            let d1 = 2.0 * (wc * wc - k * k);
            let d2 = k * k - a * wc * k + wc * wc;
            let g = k * k / d0;
            [g, -2.0 * g, g, d1 / d0, d2 / d0]
        })
        .collect();
    Ok(sections)
}

/// |H(e^{jω})| of a cascade at frequency `f`.
pub fn magnitude(sections: &[Section], f: f64, sample_rate: f64) -> f64 {
    let w = 2.0 * PI * f / sample_rate;
    let (c1, s1) = (w.cos(), -w.sin());
    let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
    sections
        .iter()
        .map(|&[b0, b1, b2, a1, a2]| {
            let nr = b0 + b1 * c1 + b2 * c2;
            let ni = b1 * s1 + b2 * s2;
            let dr = 1.0 + a1 * c1 + a2 * c2;
            let di = a1 * s1 + a2 * s2;
            ((nr * nr + ni * ni) / (dr * dr + di * di)).sqrt()
        })
        .product()
}

/// Steady-state section states for a unit step input.
fn step_initial_state(sections: &[Section]) -> Vec<[f64; 2]> {
    let mut gain_in = 1.0;
    sections
        .iter()
        .map(|&[b0, b1, b2, a1, a2]| {
            let g = (b0 + b1 + b2) / (1.0 + a1 + a2);
            let zi = [gain_in * (g - b0), gain_in * (b2 - a2 * g)];
            gain_in *= g;
            zi
        })
        .collect()
}

/// Direct-form II transposed cascade, in place.
fn run_cascade(sections: &[Section], state: &mut [[f64; 2]], x: &mut [f64]) {
    for (sec, z) in sections.iter().zip(state.iter_mut()) {
        let [b0, b1, b2, a1, a2] = *sec;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z[0];
            z[0] = b1 * input - a1 * y + z[1];
            z[1] = b2 * input - a2 * y;
            *v = y;
        }
    }
}

/// Default edge padding for a cascade of `n` sections.
pub fn default_padlen(n_sections: usize) -> usize {
    3 * (2 * n_sections + 1)
}

/// Forward-backward filtering with odd extension at both ends and
/// steady-state initial conditions, so constant inputs produce no edge
/// transient. The result has zero phase and squared magnitude response.
pub fn filtfilt(sections: &[Section], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = default_padlen(sections.len()).min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let zi = step_initial_state(sections);
    let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();

    let mut state = scaled(ext[0]);
    run_cascade(sections, &mut state, &mut ext);
    ext.reverse();
    let mut state = scaled(ext[0]);
    run_cascade(sections, &mut state, &mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}
