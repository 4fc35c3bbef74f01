//! Dense complex channel matrices.

use num_complex::Complex64;
use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::error::{invalid, Result};

/// Where a matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Oracle,
    AnalyticDeterministic,
    AnalyticSampled,
}

/// Row-major `n_rx × n_tx` complex matrix; entry `(m, n)` couples Tx element n to Rx element m.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    n_rx: usize,
    n_tx: usize,
    data: Vec<Complex64>,
    pub provenance: Provenance,
}

impl ChannelMatrix {
    pub fn zeros(n_rx: usize, n_tx: usize, provenance: Provenance) -> Self {
        Self { n_rx, n_tx, data: vec![Complex64::new(0.0, 0.0); n_rx * n_tx], provenance }
    }

    pub fn from_fn(
        n_rx: usize,
        n_tx: usize,
        provenance: Provenance,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Self {
        let mut data = Vec::with_capacity(n_rx * n_tx);
        for m in 0..n_rx {
            for n in 0..n_tx {
                data.push(f(m, n));
            }
        }
        Self { n_rx, n_tx, data, provenance }
    }

    pub fn from_vec(n_rx: usize, n_tx: usize, data: Vec<Complex64>, provenance: Provenance) -> Result<Self> {
        if data.len() != n_rx * n_tx {
            return invalid(format!("expected {} entries, got {}", n_rx * n_tx, data.len()));
        }
        Ok(Self { n_rx, n_tx, data, provenance })
    }

    /// `(n_rx, n_tx)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.n_rx, self.n_tx)
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.data[m * self.n_tx + n]
    }

    pub fn set(&mut self, m: usize, n: usize, v: Complex64) {
        self.data[m * self.n_tx + n] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Row `m` (the channel seen by Rx element m).
    pub fn row(&self, m: usize) -> &[Complex64] {
        &self.data[m * self.n_tx..(m + 1) * self.n_tx]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n_tx, self.n_rx, self.provenance, |m, n| self.get(n, m))
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self { data: self.data.iter().map(|&v| v * s).collect(), ..self.clone() }
    }

    /// `self + s·other`; the result keeps `self`'s provenance.
    pub fn add_scaled(&mut self, other: &ChannelMatrix, s: Complex64) -> Result<()> {
        if other.shape() != self.shape() {
            return invalid("channel matrix shapes differ");
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &ChannelMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl Serialize for ChannelMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> =
            (0..self.n_rx).map(|m| self.row(m).iter().map(|c| [c.re, c.im]).collect()).collect();
        let mut st = s.serialize_struct("ChannelMatrix", 3)?;
        st.serialize_field("shape", &[self.n_rx, self.n_tx])?;
        st.serialize_field("provenance", &self.provenance)?;
        st.serialize_field("entries", &rows)?;
        st.end()
    }
}
