//! Weyl matrix samples and their CSV representation.
//!
//! Format: optional `#` comment lines (`# leaves=<ids>` is required,
//! `# peeled_from=<hash> sheaf=<v>` is written after a peel), a header row
//! `k, re_rho, im_rho, i, j, re_M, im_M`, then one row per `(k, i, j)` in
//! k-major order. Indices are 0-based; floats use the shortest
//! representation that round-trips exactly.

use crate::graph::VertexId;
use nalgebra::DMatrix;
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use thiserror::Error;

pub const HEADER: &str = "k, re_rho, im_rho, i, j, re_M, im_M";

#[derive(Debug, Error)]
pub enum WeylFormatError {
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("missing `# leaves=` comment")]
    MissingLeaves,
    #[error("sample rows do not fill {k} matrices of size {m}")]
    Incomplete { k: usize, m: usize },
    #[error("rho^2 is real at sample {k}")]
    RealSpectralParameter { k: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeylSamples {
    pub rhos: Vec<Complex64>,
    /// Leaf vertices in matrix order.
    pub leaves: Vec<VertexId>,
    pub matrices: Vec<DMatrix<Complex64>>,
    /// Extra comment lines (without the leading `# `).
    pub provenance: Vec<String>,
}

impl WeylSamples {
    pub fn new(rhos: Vec<Complex64>, leaves: Vec<VertexId>, matrices: Vec<DMatrix<Complex64>>) -> Self {
        Self {
            rhos,
            leaves,
            matrices,
            provenance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rhos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhos.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.leaves.len()
    }

    /// Keeps the samples for which `keep(k)` holds.
    pub fn retain(&self, keep: impl Fn(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&k| keep(k)).collect();
        Self {
            rhos: idx.iter().map(|&k| self.rhos[k]).collect(),
            leaves: self.leaves.clone(),
            matrices: idx.iter().map(|&k| self.matrices[k].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let ids: Vec<String> = self.leaves.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "# leaves={}", ids.join(","));
        for p in &self.provenance {
            let _ = writeln!(out, "# {p}");
        }
        out.push_str(HEADER);
        out.push('\n');
        let m = self.dim();
        for (k, (rho, mat)) in self.rhos.iter().zip(&self.matrices).enumerate() {
            for i in 0..m {
                for j in 0..m {
                    let v = mat[(i, j)];
                    let _ = writeln!(out, "{k},{},{},{i},{j},{},{}", rho.re, rho.im, v.re, v.im);
                }
            }
        }
        out
    }

    /// SHA-256 of the CSV text, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv().as_bytes()))
    }

    pub fn from_csv(text: &str) -> Result<Self, WeylFormatError> {
        let mut leaves: Option<Vec<VertexId>> = None;
        let mut provenance = Vec::new();
        let mut rows: Vec<(usize, Complex64, usize, usize, Complex64)> = Vec::new();
        let mut seen_header = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = n + 1;
            let perr = |detail: String| WeylFormatError::Parse { line: lineno, detail };
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                let c = c.trim();
                if let Some(ids) = c.strip_prefix("leaves=") {
                    let parsed: Result<Vec<VertexId>, _> = ids
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| s.trim().parse::<VertexId>())
                        .collect();
                    leaves = Some(parsed.map_err(|e| perr(format!("bad leaf id: {e}")))?);
                } else {
                    provenance.push(c.to_string());
                }
                continue;
            }
            if !seen_header {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols != ["k", "re_rho", "im_rho", "i", "j", "re_M", "im_M"] {
                    return Err(perr(format!("unexpected header {line:?}")));
                }
                seen_header = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 7 {
                return Err(perr(format!("expected 7 fields, found {}", f.len())));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|e| perr(format!("{s:?}: {e}")));
            let flt = |s: &str| s.parse::<f64>().map_err(|e| perr(format!("{s:?}: {e}")));
            rows.push((
                int(f[0])?,
                Complex64::new(flt(f[1])?, flt(f[2])?),
                int(f[3])?,
                int(f[4])?,
                Complex64::new(flt(f[5])?, flt(f[6])?),
            ));
        }
        let leaves = leaves.ok_or(WeylFormatError::MissingLeaves)?;
        let m = leaves.len();
        let k_count = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        if m == 0 || rows.len() != k_count * m * m {
            return Err(WeylFormatError::Incomplete { k: k_count, m });
        }
        let mut rhos = vec![None; k_count];
        let mut matrices = vec![DMatrix::<Complex64>::zeros(m, m); k_count];
        let mut filled = vec![0usize; k_count];
        for (k, rho, i, j, v) in rows {
            if i >= m || j >= m {
                return Err(WeylFormatError::Incomplete { k: k_count, m });
            }
            rhos[k] = Some(rho);
            matrices[k][(i, j)] = v;
            filled[k] += 1;
        }
        if filled.iter().any(|&c| c != m * m) {
            return Err(WeylFormatError::Incomplete { k: k_count, m });
        }
        let rhos: Vec<Complex64> = rhos.into_iter().map(|r| r.unwrap_or_default()).collect();
        for (k, r) in rhos.iter().enumerate() {
            if (r * r).im == 0.0 {
                return Err(WeylFormatError::RealSpectralParameter { k });
            }
        }
        Ok(Self {
            rhos,
            leaves,
            matrices,
            provenance,
        })
    }
}
