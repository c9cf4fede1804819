use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite impulse response with an explicit origin: `taps[i]` is the
/// coefficient at integer index `start + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub taps: Vec<f64>,
    pub start: i64,
}

impl Filter {
    pub fn new(taps: Vec<f64>, start: i64) -> Self {
        Self { taps, start }
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Coefficient at signed index `n`, zero outside the support.
    pub fn at(&self, n: i64) -> f64 {
        let i = n - self.start;
        if i < 0 || i >= self.taps.len() as i64 {
            0.0
        } else {
            self.taps[i as usize]
        }
    }

    /// Iterator over `(index, coefficient)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.taps
            .iter()
            .enumerate()
            .map(move |(i, &c)| (self.start + i as i64, c))
    }

    /// Alternating flip `out[n] = (-1)^n f[1 - n]`.
    pub fn alternating_flip(&self) -> Filter {
        let last = self.start + self.taps.len() as i64 - 1;
        let start = 1 - last;
        let taps = (0..self.taps.len() as i64)
            .map(|i| {
                let n = start + i;
                let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                sign * self.at(1 - n)
            })
            .collect();
        Filter { taps, start }
    }
}

/// Two-channel (bi)orthogonal filter bank.
///
/// Analysis filters `h0`/`h1` are applied as correlations
/// (`c[k] = sum_m h0(m - 2k) x[m]`); synthesis filters `g0`/`g1` are applied
/// as the transposed scatter. Highpass filters follow the alternating-flip
/// convention `h1(n) = (-1)^n g0(1 - n)` and `g1(n) = (-1)^n h0(1 - n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletBasis {
    pub name: String,
    pub h0: Filter,
    pub h1: Filter,
    pub g0: Filter,
    pub g1: Filter,
}

const SUM_TOL: f64 = 1e-12;

impl WaveletBasis {
    /// Builds a biorthogonal bank from its two lowpass filters; the
    /// highpass pair is derived by alternating flip.
    pub fn from_lowpass(name: &str, h0: Filter, g0: Filter) -> Result<Self> {
        let h1 = g0.alternating_flip();
        let g1 = h0.alternating_flip();
        let basis = Self {
            name: name.to_string(),
            h0,
            h1,
            g0,
            g1,
        };
        basis.validate()?;
        Ok(basis)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidBasis(self.name.clone(), reason));
        if self.h0.is_empty() || self.h1.is_empty() || self.g0.is_empty() || self.g1.is_empty() {
            return bad("empty filter".into());
        }
        let all = [&self.h0, &self.h1, &self.g0, &self.g1];
        if all.iter().any(|f| f.taps.iter().any(|c| !c.is_finite())) {
            return bad("non-finite tap".into());
        }
        let root2 = std::f64::consts::SQRT_2;
        if (self.h0.sum() - root2).abs() > SUM_TOL {
            return bad(format!(
                "lowpass taps sum to {} (expected sqrt 2)",
                self.h0.sum()
            ));
        }
        if self.h1.sum().abs() > SUM_TOL {
            return bad(format!(
                "highpass taps sum to {} (expected 0)",
                self.h1.sum()
            ));
        }
        Ok(())
    }

    pub fn haar() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_lowpass(
            "haar",
            Filter::new(vec![a, a], 0),
            Filter::new(vec![a, a], 0),
        )
        .expect("haar bank is valid")
    }

    /// Cohen-Daubechies-Feauveau biorthogonal 6.8 (symmetric, 17 analysis /
    /// 11 synthesis lowpass taps, both centred at index 0).
    pub fn bior6_8() -> Self {
        Self::from_lowpass(
            "bior6.8",
            Filter::new(BIOR68_ANALYSIS_LOWPASS.to_vec(), -8),
            Filter::new(BIOR68_SYNTHESIS_LOWPASS.to_vec(), -5),
        )
        .expect("bior6.8 bank is valid")
    }

    /// Looks a bank up by name (`haar`, `bior6.8`).
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "haar" | "db1" | "bior1.1" => Ok(Self::haar()),
            "bior6.8" | "bior68" => Ok(Self::bior6_8()),
            _ => Err(Error::UnknownBasis(name.to_string())),
        }
    }

    pub fn names() -> &'static [&'static str] {
        &["haar", "bior6.8"]
    }
}

/// Registry lookup by name.
pub fn basis_registry(name: &str) -> Result<WaveletBasis> {
    WaveletBasis::from_name(name)
}

const BIOR68_ANALYSIS_LOWPASS: [f64; 17] = [
    0.0019088317364812906,
    -0.0019142861290887667,
    -0.016990639867602342,
    0.01193456527972926,
    0.04973290349094079,
    -0.07726317316720414,
    -0.09405920349573646,
    0.4207962846098268,
    0.8259229974584023,
    0.4207962846098268,
    -0.09405920349573646,
    -0.07726317316720414,
    0.04973290349094079,
    0.01193456527972926,
    -0.016990639867602342,
    -0.0019142861290887667,
    0.0019088317364812906,
];

const BIOR68_SYNTHESIS_LOWPASS: [f64; 11] = [
    0.014426282505624435,
    0.014467504896790148,
    -0.07872200106262882,
    -0.04036797903033992,
    0.41784910915027457,
    0.7589077294536541,
    0.41784910915027457,
    -0.04036797903033992,
    -0.07872200106262882,
    0.014467504896790148,
    0.014426282505624435,
];
