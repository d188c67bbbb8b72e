//! Reduction of a three-axis window to a single signal.

use nalgebra::{Matrix3, SymmetricEigen};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::{AxisTraceSet, ReducedTrace, ReductionMethod, WINDOW_LEN};

fn check_window(t: &AxisTraceSet) -> Result<()> {
    t.check()?;
    if t.len() != WINDOW_LEN {
        return Err(Error::Shape(format!(
            "reduction needs a {WINDOW_LEN}-sample window, got {}",
            t.len()
        )));
    }
    Ok(())
}

/// DFT321: per frequency bin the magnitude is the root-sum-square of the
/// three axis magnitudes and the phase is that of the axis sum. The spectrum
/// is made Hermitian before the inverse transform, so the output is real and
/// carries exactly the summed energy of the three axes.
pub fn dft321(t: &AxisTraceSet) -> Result<ReducedTrace> {
    check_window(t)?;
    let n = t.len();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let spectra: Vec<Vec<Complex64>> = t
        .axes()
        .iter()
        .map(|axis| {
            let mut buf: Vec<Complex64> = axis.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            forward.process(&mut buf);
            buf
        })
        .collect();

    let mut combined = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..=n / 2 {
        let magnitude = spectra.iter().map(|s| s[k].norm_sqr()).sum::<f64>().sqrt();
        let sum: Complex64 = spectra.iter().map(|s| s[k]).sum();
        let self_conjugate = k == 0 || 2 * k == n;
        let bin = if self_conjugate {
            // Real bin: keep only the sign of the summed component.
            Complex64::new(if sum.re < 0.0 { -magnitude } else { magnitude }, 0.0)
        } else {
            Complex64::from_polar(magnitude, sum.arg())
        };
        combined[k] = bin;
        if !self_conjugate {
            combined[n - k] = bin.conj();
        }
    }

    let inverse = planner.plan_fft_inverse(n);
    inverse.process(&mut combined);
    let scale = 1.0 / n as f64;
    ReducedTrace::new(combined.iter().map(|c| c.re * scale).collect(), ReductionMethod::Dft321)
}

/// Projection of the mean-removed window onto its first principal axis.
/// The axis sign is chosen so the output correlates positively with the input
/// axis of largest variance.
pub fn pca_reduce(t: &AxisTraceSet) -> Result<ReducedTrace> {
    check_window(t)?;
    let n = t.len();
    let axes = t.axes();
    let means: Vec<f64> = axes.iter().map(|a| a.iter().sum::<f64>() / n as f64).collect();
    let centered: Vec<Vec<f64>> = axes
        .iter()
        .zip(&means)
        .map(|(a, m)| a.iter().map(|v| v - m).collect())
        .collect();

    let cov = Matrix3::from_fn(|r, c| {
        centered[r].iter().zip(&centered[c]).map(|(a, b)| a * b).sum::<f64>() / (n - 1) as f64
    });
    let trace = cov.trace();
    if !(trace > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let eig = SymmetricEigen::new(cov);
    let (top, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("three eigenvalues");
    let mut axis = eig.eigenvectors.column(top).into_owned();
    let dominant = (0..3)
        .max_by(|&a, &b| cov[(a, a)].total_cmp(&cov[(b, b)]))
        .expect("three axes");
    if axis[dominant] < 0.0 {
        axis = -axis;
    }
    let samples = (0..n)
        .map(|i| (0..3).map(|r| centered[r][i] * axis[r]).sum())
        .collect();
    ReducedTrace::new(samples, ReductionMethod::Pca)
}

pub fn reduce(t: &AxisTraceSet, method: ReductionMethod) -> Result<ReducedTrace> {
    match method {
        ReductionMethod::Dft321 => dft321(t),
        ReductionMethod::Pca => pca_reduce(t),
    }
}
