//! The local dictionary: `p` square convolutional atoms of side `m`.

use crate::error::{Error, Result};

/// A set of `p` atoms, each an `m x m` kernel stored row major. The sparse
/// model translates every atom to all fully-inside placements of an image, so
/// the atoms themselves carry no spatial position.
///
/// Pursuit assumes unit ℓ2 norm per atom; construction does not enforce it
/// (files may hold anything), use [`LocalDictionary::max_norm_deviation`] or
/// the pursuit entry points, which validate.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDictionary {
    p: usize,
    m: usize,
    atoms: Vec<f64>, // p * m * m
}

impl LocalDictionary {
    pub fn from_atoms(p: usize, m: usize, atoms: Vec<f64>) -> Result<Self> {
        if p == 0 || m == 0 {
            return Err(Error::param("dictionary needs p >= 1 and m >= 1"));
        }
        if atoms.len() != p * m * m {
            return Err(Error::param(format!(
                "atom data length {} does not match p={} m={}",
                atoms.len(),
                p,
                m
            )));
        }
        if !atoms.iter().all(|v| v.is_finite()) {
            return Err(Error::param("dictionary contains non-finite values"));
        }
        Ok(LocalDictionary { p, m, atoms })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Row-major `m x m` kernel of atom `j`.
    pub fn atom(&self, j: usize) -> &[f64] {
        let n = self.m * self.m;
        &self.atoms[j * n..(j + 1) * n]
    }

    pub fn atom_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.m * self.m;
        &mut self.atoms[j * n..(j + 1) * n]
    }

    pub fn atoms_flat(&self) -> &[f64] {
        &self.atoms
    }

    pub fn atoms_flat_mut(&mut self) -> &mut [f64] {
        &mut self.atoms
    }

    /// Largest `| ‖atom‖₂ - 1 |` over all atoms.
    pub fn max_norm_deviation(&self) -> f64 {
        (0..self.p)
            .map(|j| {
                let n: f64 = self.atom(j).iter().map(|v| v * v).sum::<f64>().sqrt();
                (n - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Scales every atom to unit ℓ2 norm and returns the scale factor applied
    /// to each (new = old * factor). Zero atoms are left untouched and report
    /// a factor of 1.
    pub fn normalize_atoms(&mut self) -> Vec<f64> {
        let mut factors = Vec::with_capacity(self.p);
        for j in 0..self.p {
            let norm: f64 = self.atom(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in self.atom_mut(j) {
                    *v /= norm;
                }
                factors.push(1.0 / norm);
            } else {
                factors.push(1.0);
            }
        }
        factors
    }
}
