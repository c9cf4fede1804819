use serde::{Deserialize, Serialize};

use super::basis::{Filter, WaveletBasis};
use crate::error::{Error, Result};

/// Signal extension used at the window edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Circular wrap. Coefficient arrays keep the signal length.
    #[default]
    Periodic,
    /// Half-sample mirror. The signal is mirrored to twice its length and
    /// transformed periodically, so coefficient arrays cover the mirrored
    /// signal.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Decimated,
    Undecimated,
}

/// Detail arrays `d_0..d_J` plus the level-J approximation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletDecomposition {
    pub details: Vec<Vec<f64>>,
    pub approximation: Vec<f64>,
    pub levels: usize,
    pub mode: Mode,
    pub boundary: Boundary,
    /// Length of the analysed signal before any boundary extension.
    pub signal_len: usize,
}

impl WaveletDecomposition {
    fn extended_len(&self) -> usize {
        extended_len(self.signal_len, self.boundary)
    }

    /// Structural consistency check used by both reconstructions.
    pub fn check_shape(&self) -> Result<()> {
        if self.details.len() != self.levels + 1 {
            return Err(Error::LevelMismatch(format!(
                "{} detail arrays for J = {}",
                self.details.len(),
                self.levels
            )));
        }
        let n = self.extended_len();
        match self.mode {
            Mode::Undecimated => {
                if let Some(bad) = self.details.iter().position(|d| d.len() != n) {
                    return Err(Error::LevelMismatch(format!(
                        "detail level {bad} has length {} (expected {n})",
                        self.details[bad].len()
                    )));
                }
                if self.approximation.len() != n {
                    return Err(Error::LevelMismatch(format!(
                        "approximation has length {} (expected {n})",
                        self.approximation.len()
                    )));
                }
            }
            Mode::Decimated => {
                let lens = decimated_lengths(n, self.levels);
                for (j, d) in self.details.iter().enumerate() {
                    if d.len() != lens[j + 1] {
                        return Err(Error::LevelMismatch(format!(
                            "detail level {j} has length {} (expected {})",
                            d.len(),
                            lens[j + 1]
                        )));
                    }
                }
                if self.approximation.len() != lens[self.levels + 1] {
                    return Err(Error::LevelMismatch(format!(
                        "approximation has length {} (expected {})",
                        self.approximation.len(),
                        lens[self.levels + 1]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Same layout, every coefficient mapped through `f(level, k, value)`;
    /// the approximation is passed with `level = None`.
    pub fn map(&self, mut f: impl FnMut(Option<usize>, usize, f64) -> f64) -> Self {
        let details = self
            .details
            .iter()
            .enumerate()
            .map(|(j, d)| {
                d.iter()
                    .enumerate()
                    .map(|(k, &v)| f(Some(j), k, v))
                    .collect()
            })
            .collect();
        let approximation = self
            .approximation
            .iter()
            .enumerate()
            .map(|(k, &v)| f(None, k, v))
            .collect();
        Self {
            details,
            approximation,
            ..self.clone()
        }
    }
}

/// Default depth `floor(log2 N) - 1`.
pub fn default_levels(n: usize) -> usize {
    if n < 4 {
        0
    } else {
        (usize::BITS - 1 - n.leading_zeros()) as usize - 1
    }
}

fn extended_len(n: usize, boundary: Boundary) -> usize {
    match boundary {
        Boundary::Periodic => n,
        Boundary::Symmetric => 2 * n,
    }
}

fn extend(signal: &[f64], boundary: Boundary) -> Vec<f64> {
    match boundary {
        Boundary::Periodic => signal.to_vec(),
        Boundary::Symmetric => signal
            .iter()
            .copied()
            .chain(signal.iter().rev().copied())
            .collect(),
    }
}

/// Lengths of the approximation fed into each decimated stage; entry `j + 1`
/// is the length produced by stage `j`.
fn decimated_lengths(n: usize, levels: usize) -> Vec<usize> {
    let mut lens = Vec::with_capacity(levels + 2);
    lens.push(n);
    for _ in 0..=levels {
        let last = *lens.last().unwrap();
        lens.push(last.div_ceil(2));
    }
    lens
}

fn check_input(signal: &[f64], levels: usize) -> Result<()> {
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if levels >= 31 {
        return Err(Error::TooShort {
            len: signal.len(),
            levels,
        });
    }
    Ok(())
}

#[inline]
fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

/// Periodic correlation with stride 2: `out[k] = sum_i f(i) x[2k + i]`.
fn analyze_decimated(x: &[f64], f: &Filter) -> Vec<f64> {
    let n = x.len();
    (0..n / 2)
        .map(|k| {
            f.iter()
                .map(|(i, c)| c * x[wrap(2 * k as i64 + i, n)])
                .sum()
        })
        .collect()
}

/// Transposed scatter of `analyze_decimated`, accumulated into `out`.
fn synthesize_decimated(coeffs: &[f64], f: &Filter, out: &mut [f64]) {
    let n = out.len();
    for (k, &c) in coeffs.iter().enumerate() {
        for (i, tap) in f.iter() {
            out[wrap(2 * k as i64 + i, n)] += tap * c;
        }
    }
}

/// Periodic correlation with the filter dilated by `step`:
/// `out[k] = sum_i f(i) x[k + step * i]`.
fn analyze_atrous(x: &[f64], f: &Filter, step: usize) -> Vec<f64> {
    let n = x.len();
    let offsets: Vec<(usize, f64)> = f
        .iter()
        .map(|(i, c)| (wrap(i * step as i64, n), c))
        .collect();
    (0..n)
        .map(|k| {
            offsets
                .iter()
                .map(|&(o, c)| {
                    let idx = k + o;
                    c * x[if idx >= n { idx - n } else { idx }]
                })
                .sum()
        })
        .collect()
}

/// Gather-form transpose of `analyze_atrous`, accumulated into `out`.
fn synthesize_atrous(coeffs: &[f64], f: &Filter, step: usize, scale: f64, out: &mut [f64]) {
    let n = coeffs.len();
    let offsets: Vec<(usize, f64)> = f
        .iter()
        .map(|(i, c)| (wrap(-(i * step as i64), n), scale * c))
        .collect();
    for (m, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for &(off, c) in &offsets {
            let idx = m + off;
            acc += c * coeffs[if idx >= n { idx - n } else { idx }];
        }
        *o += acc;
    }
}

/// Decimated (fast) wavelet transform, `J + 1` analysis stages.
///
/// Odd-length stages are padded by repeating their last sample; the
/// reconstruction trims the pad again.
pub fn dwt_decompose(
    signal: &[f64],
    basis: &WaveletBasis,
    levels: usize,
    boundary: Boundary,
) -> Result<WaveletDecomposition> {
    check_input(signal, levels)?;
    if signal.len() < 1 << (levels + 1) {
        return Err(Error::TooShort {
            len: signal.len(),
            levels,
        });
    }
    let mut approx = extend(signal, boundary);
    let mut details = Vec::with_capacity(levels + 1);
    for _ in 0..=levels {
        if approx.len() % 2 == 1 {
            approx.push(*approx.last().unwrap());
        }
        details.push(analyze_decimated(&approx, &basis.h1));
        approx = analyze_decimated(&approx, &basis.h0);
    }
    Ok(WaveletDecomposition {
        details,
        approximation: approx,
        levels,
        mode: Mode::Decimated,
        boundary,
        signal_len: signal.len(),
    })
}

pub fn dwt_reconstruct(decomp: &WaveletDecomposition, basis: &WaveletBasis) -> Result<Vec<f64>> {
    if decomp.mode != Mode::Decimated {
        return Err(Error::ModeMismatch);
    }
    decomp.check_shape()?;
    let lens = decimated_lengths(decomp.extended_len(), decomp.levels);
    let mut approx = decomp.approximation.clone();
    for j in (0..=decomp.levels).rev() {
        let padded = 2 * approx.len();
        let mut out = vec![0.0; padded];
        synthesize_decimated(&approx, &basis.g0, &mut out);
        synthesize_decimated(&decomp.details[j], &basis.g1, &mut out);
        out.truncate(lens[j]);
        approx = out;
    }
    approx.truncate(decomp.signal_len);
    Ok(approx)
}

/// Undecimated (a trous) wavelet transform, `J + 1` analysis stages; stage
/// `j` uses the base filters dilated by `2^j`.
///
/// With periodic extension the dilation may exceed the signal length; the
/// filters then wrap around the circle and the transform stays invertible.
pub fn uwt_decompose(
    signal: &[f64],
    basis: &WaveletBasis,
    levels: usize,
    boundary: Boundary,
) -> Result<WaveletDecomposition> {
    check_input(signal, levels)?;
    if signal.len() < 2 {
        return Err(Error::TooShort {
            len: signal.len(),
            levels,
        });
    }
    let mut approx = extend(signal, boundary);
    let mut details = Vec::with_capacity(levels + 1);
    for j in 0..=levels {
        let step = 1usize << j;
        details.push(analyze_atrous(&approx, &basis.h1, step));
        approx = analyze_atrous(&approx, &basis.h0, step);
    }
    Ok(WaveletDecomposition {
        details,
        approximation: approx,
        levels,
        mode: Mode::Undecimated,
        boundary,
        signal_len: signal.len(),
    })
}

/// Inverse of [`uwt_decompose`]: each stage averages the two redundant
/// polyphase branches (factor 1/2).
pub fn iuwt_reconstruct(decomp: &WaveletDecomposition, basis: &WaveletBasis) -> Result<Vec<f64>> {
    if decomp.mode != Mode::Undecimated {
        return Err(Error::ModeMismatch);
    }
    decomp.check_shape()?;
    let n = decomp.extended_len();
    let mut approx = decomp.approximation.clone();
    for j in (0..=decomp.levels).rev() {
        let step = 1usize << j;
        let mut out = vec![0.0; n];
        synthesize_atrous(&approx, &basis.g0, step, 0.5, &mut out);
        synthesize_atrous(&decomp.details[j], &basis.g1, step, 0.5, &mut out);
        approx = out;
    }
    approx.truncate(decomp.signal_len);
    Ok(approx)
}
