//! Alphabets and the deterministic error action of a noise-erasure channel.
//!
//! Symbols are plain `usize` values. The data symbols are `0..q` and the
//! erasure symbol is `q`. Dense vectors over the output/noise alphabet are
//! indexed `(0, 1, ..., q-1, e)`.

use serde::Serialize;

use crate::error::{NecError, Result};

/// A q-ary alphabet extended with one erasure symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Alphabet {
    q: usize,
}

impl Alphabet {
    pub fn new(q: usize) -> Result<Self> {
        if q < 2 {
            return Err(NecError::InvalidAlphabet(q));
        }
        Ok(Self { q })
    }

    /// Number of data symbols.
    pub fn q(&self) -> usize {
        self.q
    }

    /// The erasure symbol `e`, encoded as `q`.
    pub fn erasure(&self) -> usize {
        self.q
    }

    /// Size of the output (and noise) alphabet, `q + 1`.
    pub fn extended_len(&self) -> usize {
        self.q + 1
    }

    pub fn is_erasure(&self, s: usize) -> bool {
        s == self.q
    }

    pub fn check_input(&self, x: usize) -> Result<()> {
        if x < self.q {
            Ok(())
        } else {
            Err(NecError::InvalidSymbol { symbol: x, q: self.q })
        }
    }

    pub fn check_extended(&self, s: usize) -> Result<()> {
        if s <= self.q {
            Ok(())
        } else {
            Err(NecError::InvalidSymbol { symbol: s, q: self.q })
        }
    }
}

/// The map `h(x, z)` applied to non-erased noise, together with its inverse
/// `h_tilde(x, y)` recovering the noise from input and output.
///
/// Construction validates both invertibility conditions: every row
/// `h(x, .)` is a permutation, and every column `h_tilde(., y)` is a
/// permutation. There is no way to obtain an unvalidated value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChannelFunction {
    alphabet: Alphabet,
    h: Vec<usize>,
    h_tilde: Vec<usize>,
}

impl ChannelFunction {
    /// Modulo-q additive action `h(x, z) = (x + z) mod q`.
    pub fn mod_add(q: usize) -> Result<Self> {
        let alphabet = Alphabet::new(q)?;
        let table: Vec<Vec<usize>> = (0..q)
            .map(|x| (0..q).map(|z| (x + z) % q).collect())
            .collect();
        let cf = Self::from_table(&table)?;
        debug_assert_eq!(cf.alphabet, alphabet);
        Ok(cf)
    }

    /// Validates an explicit `q x q` table `table[x][z] = h(x, z)` and
    /// derives the inverse table.
    pub fn from_table(table: &[Vec<usize>]) -> Result<Self> {
        let q = table.len();
        let alphabet = Alphabet::new(q)?;
        for row in table {
            if row.len() != q {
                return Err(NecError::TableShape {
                    q,
                    rows: q,
                    cols: row.len(),
                });
            }
            for &v in row {
                alphabet.check_input(v)?;
            }
        }

        let mut h = vec![0; q * q];
        let mut h_tilde = vec![usize::MAX; q * q];
        for (x, row) in table.iter().enumerate() {
            for (z, &y) in row.iter().enumerate() {
                h[x * q + z] = y;
                if h_tilde[x * q + y] != usize::MAX {
                    return Err(NecError::NotInvertibleInNoise { x, output: y });
                }
                h_tilde[x * q + y] = z;
            }
        }

        for y in 0..q {
            let mut seen = vec![false; q];
            for x in 0..q {
                let z = h_tilde[x * q + y];
                if seen[z] {
                    return Err(NecError::NotInvertibleInInput { y, noise: z });
                }
                seen[z] = true;
            }
        }

        Ok(Self {
            alphabet,
            h,
            h_tilde,
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn q(&self) -> usize {
        self.alphabet.q
    }

    /// Raw `h(x, z)` for data symbols only.
    pub fn h(&self, x: usize, z: usize) -> usize {
        self.h[x * self.q() + z]
    }

    /// Raw `h_tilde(x, y)` for data symbols only.
    pub fn h_tilde(&self, x: usize, y: usize) -> usize {
        self.h_tilde[x * self.q() + y]
    }

    /// Channel output for input `x` and noise `z`; erasure noise always
    /// yields the erasure symbol.
    pub fn theta(&self, x: usize, z: usize) -> Result<usize> {
        self.alphabet.check_input(x)?;
        self.alphabet.check_extended(z)?;
        Ok(self.theta_unchecked(x, z))
    }

    /// Noise value consistent with input `x` and output `y`.
    pub fn recover_noise(&self, x: usize, y: usize) -> Result<usize> {
        self.alphabet.check_input(x)?;
        self.alphabet.check_extended(y)?;
        Ok(self.recover_noise_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn theta_unchecked(&self, x: usize, z: usize) -> usize {
        if z == self.q() {
            z
        } else {
            self.h(x, z)
        }
    }

    #[inline]
    pub(crate) fn recover_noise_unchecked(&self, x: usize, y: usize) -> usize {
        if y == self.q() {
            y
        } else {
            self.h_tilde(x, y)
        }
    }

    /// The `h` table as nested rows, for serialization.
    pub fn table(&self) -> Vec<Vec<usize>> {
        self.h.chunks(self.q()).map(|r| r.to_vec()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mod_add_values() {
        let c2 = ChannelFunction::mod_add(2).unwrap();
        assert_eq!(c2.h(1, 1), 0);
        assert_eq!(c2.h_tilde(1, 0), 1);
        let c3 = ChannelFunction::mod_add(3).unwrap();
        assert_eq!(c3.h(2, 2), 1);
    }

    #[test]
    fn rejects_small_alphabet() {
        assert_eq!(
            ChannelFunction::mod_add(1).unwrap_err(),
            NecError::InvalidAlphabet(1)
        );
        assert!(Alphabet::new(0).is_err());
    }

    #[test]
    fn table_validation() {
        assert!(ChannelFunction::from_table(&[vec![0, 1], vec![1, 0]]).is_ok());
        assert_eq!(
            ChannelFunction::from_table(&[vec![0, 0], vec![1, 0]]).unwrap_err(),
            NecError::NotInvertibleInNoise { x: 0, output: 0 }
        );
        // rows are permutations, but h_tilde(., 0) = (0, 0)
        assert_eq!(
            ChannelFunction::from_table(&[vec![0, 1], vec![0, 1]]).unwrap_err(),
            NecError::NotInvertibleInInput { y: 0, noise: 0 }
        );
        assert!(matches!(
            ChannelFunction::from_table(&[vec![0, 1], vec![1]]),
            Err(NecError::TableShape { .. })
        ));
        assert!(matches!(
            ChannelFunction::from_table(&[vec![0, 2], vec![1, 0]]),
            Err(NecError::InvalidSymbol { symbol: 2, q: 2 })
        ));
    }

    #[test]
    fn theta_and_recovery() {
        let c2 = ChannelFunction::mod_add(2).unwrap();
        let e = c2.alphabet().erasure();
        assert_eq!(c2.theta(1, e).unwrap(), e);
        assert_eq!(c2.theta(1, 1).unwrap(), 0);
        assert_eq!(c2.recover_noise(1, e).unwrap(), e);
        assert_eq!(c2.recover_noise(1, 0).unwrap(), 1);
        let c3 = ChannelFunction::mod_add(3).unwrap();
        assert_eq!(c3.theta(2, 2).unwrap(), 1);
        assert!(c3.theta(3, 0).is_err());
        assert!(c3.theta(0, 4).is_err());
        assert!(c3.recover_noise(0, 4).is_err());
    }

    #[test]
    fn exhaustive_round_trip() {
        for q in 2..=8 {
            let cf = ChannelFunction::mod_add(q).unwrap();
            for x in 0..q {
                for z in 0..=q {
                    let y = cf.theta(x, z).unwrap();
                    assert_eq!(cf.recover_noise(x, y).unwrap(), z);
                }
                for y in 0..q {
                    let z = cf.recover_noise(x, y).unwrap();
                    assert_eq!(cf.theta(x, z).unwrap(), y);
                }
            }
            for y in 0..q {
                let mut zs: Vec<_> = (0..q).map(|x| cf.recover_noise(x, y).unwrap()).collect();
                zs.sort_unstable();
                zs.dedup();
                assert_eq!(zs.len(), q);
            }
            assert_eq!(ChannelFunction::from_table(&cf.table()).unwrap(), cf);
        }
    }

    #[test]
    fn non_additive_latin_square() {
        // h(x, z) = (z - x) mod 3
        let t: Vec<Vec<usize>> = (0..3)
            .map(|x| (0..3).map(|z| (z + 3 - x) % 3).collect())
            .collect();
        let cf = ChannelFunction::from_table(&t).unwrap();
        for x in 0..3 {
            for z in 0..3 {
                assert_eq!(cf.recover_noise(x, cf.theta(x, z).unwrap()).unwrap(), z);
            }
        }
    }
}
