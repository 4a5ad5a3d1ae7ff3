//! Matrix JSON format.
//!
//! ```json
//! {"dim": 2, "complex": true, "data": [[1.0, 0.0], [0.5, 0.5], [0.5, -0.5], [2.0, 0.0]]}
//! ```
//!
//! `data` is row-major with `dim²` entries. Entries are `[re, im]` pairs or,
//! for real matrices, plain numbers.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CMatrix, HermitianMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixEntry {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub complex: bool,
    pub data: Vec<MatrixEntry>,
}

impl MatrixJson {
    /// Real storage is used only when every imaginary part is a positive zero,
    /// so that writing and re-reading is bit-exact.
    pub fn from_matrix(m: &CMatrix) -> Self {
        let n = m.nrows();
        let complex = m.iter().any(|z| z.im.to_bits() != 0);
        let data = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| {
                let z = m[(i, j)];
                if complex {
                    MatrixEntry::Complex([z.re, z.im])
                } else {
                    MatrixEntry::Real(z.re)
                }
            })
            .collect();
        MatrixJson {
            dim: n,
            complex,
            data,
        }
    }

    /// Converts to a dense matrix without checking hermiticity.
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::Parse("dim must be positive".into()));
        }
        if self.data.len() != n * n {
            return Err(Error::Parse(format!(
                "data has {} entries, expected dim² = {}",
                self.data.len(),
                n * n
            )));
        }
        let mut m = CMatrix::zeros(n, n);
        for (k, entry) in self.data.iter().enumerate() {
            let z = match *entry {
                MatrixEntry::Real(re) => Complex64::new(re, 0.0),
                MatrixEntry::Complex([re, im]) => {
                    if !self.complex && im != 0.0 {
                        return Err(Error::Parse(format!(
                            "entry {k} has imaginary part {im} but complex = false"
                        )));
                    }
                    Complex64::new(re, im)
                }
            };
            m[(k / n, k % n)] = z;
        }
        Ok(m)
    }

    pub fn to_hermitian(&self) -> Result<HermitianMatrix> {
        HermitianMatrix::new(self.to_matrix()?)
    }
}

impl From<&HermitianMatrix> for MatrixJson {
    fn from(h: &HermitianMatrix) -> Self {
        MatrixJson::from_matrix(h.matrix())
    }
}

impl From<HermitianMatrix> for MatrixJson {
    fn from(h: HermitianMatrix) -> Self {
        MatrixJson::from_matrix(h.matrix())
    }
}

impl TryFrom<MatrixJson> for HermitianMatrix {
    type Error = Error;

    fn try_from(json: MatrixJson) -> Result<Self> {
        json.to_hermitian()
    }
}

pub fn parse_matrix(text: &str) -> Result<HermitianMatrix> {
    let json: MatrixJson =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    json.to_hermitian()
}

pub fn matrix_to_string(m: &HermitianMatrix) -> String {
    serde_json::to_string(&MatrixJson::from(m)).expect("matrix JSON serializes")
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<HermitianMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(&text)
}

pub fn save_matrix(path: impl AsRef<Path>, m: &HermitianMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix_to_string(m) + "\n")
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
