//! Sampled mean-moment traces over one sequence period.

use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Mean magnetic moment sampled uniformly over one period.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrace {
    /// Sample times [s], uniform spacing starting at the period origin.
    pub times: Vec<f64>,
    /// Mean moment per sample [A m²].
    pub moments: Vec<Vec3>,
}

impl MomentTrace {
    pub fn new(times: Vec<f64>, moments: Vec<Vec3>) -> Result<Self> {
        if times.len() != moments.len() {
            return Err(Error::invalid("times and moments differ in length"));
        }
        if times.len() < 2 {
            return Err(Error::invalid("a trace needs at least two samples"));
        }
        Ok(Self { times, moments })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// Length of the period covered by the samples.
    pub fn period(&self) -> f64 {
        self.dt() * self.len() as f64
    }

    /// Normalized DFT coefficients per component,
    /// `m̂_k = (1/N) Σ_j m_j e^{-2πi jk/N}` for all N bins.
    pub fn spectrum(&self) -> [Vec<Complex64>; 3] {
        let n = self.len();
        let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
        std::array::from_fn(|c| {
            let mut buf: Vec<Complex64> = self
                .moments
                .iter()
                .map(|m| Complex64::new(m[c] / n as f64, 0.0))
                .collect();
            fft.process(&mut buf);
            buf
        })
    }

    /// Spectral time derivative. The Nyquist bin of an even-length trace is
    /// dropped so the result stays real.
    pub fn derivative(&self) -> Vec<Vec3> {
        let n = self.len();
        let w = 2.0 * std::f64::consts::PI / self.period();
        let spec = self.spectrum();
        let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
        let comps: Vec<Vec<f64>> = spec
            .into_iter()
            .map(|mut s| {
                for (k, v) in s.iter_mut().enumerate() {
                    let kk = if 2 * k < n {
                        k as f64
                    } else if 2 * k == n {
                        0.0
                    } else {
                        k as f64 - n as f64
                    };
                    *v *= Complex64::new(0.0, w * kk);
                }
                ifft.process(&mut s);
                s.iter().map(|v| v.re).collect()
            })
            .collect();
        (0..n)
            .map(|j| [comps[0][j], comps[1][j], comps[2][j]])
            .collect()
    }

    /// CSV with columns `t,m_x,m_y,m_z` (SI units).
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,m_x,m_y,m_z")?;
        for (t, m) in self.times.iter().zip(&self.moments) {
            writeln!(w, "{t:e},{:e},{:e},{:e}", m[0], m[1], m[2])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_trace(n: usize, period: f64, harmonic: f64) -> MomentTrace {
        let times: Vec<f64> = (0..n).map(|j| j as f64 * period / n as f64).collect();
        let w = 2.0 * std::f64::consts::PI * harmonic / period;
        let moments = times
            .iter()
            .map(|t| [(w * t).sin(), 0.5, (w * t).cos()])
            .collect();
        MomentTrace::new(times, moments).unwrap()
    }

    #[test]
    fn derivative_of_sinusoid() {
        let period = 4e-5;
        let tr = sine_trace(64, period, 3.0);
        let w = 2.0 * std::f64::consts::PI * 3.0 / period;
        for (t, d) in tr.times.iter().zip(tr.derivative()) {
            assert!((d[0] - w * (w * t).cos()).abs() < 1e-9 * w);
            assert!(d[1].abs() < 1e-9 * w);
            assert!((d[2] + w * (w * t).sin()).abs() < 1e-9 * w);
        }
    }

    #[test]
    fn spectrum_of_sinusoid() {
        let tr = sine_trace(32, 1.0, 2.0);
        let s = tr.spectrum();
        assert!((s[0][2] - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((s[1][0].re - 0.5).abs() < 1e-14);
        assert!((s[2][2].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn csv_header_and_rows() {
        let tr = sine_trace(4, 1.0, 1.0);
        let mut out = Vec::new();
        tr.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("t,m_x,m_y,m_z\n"));
    }
}
