//! Symbol interleavers: matrix, block and convolutional.
//!
//! Matrix interleaving writes `rows x cols` symbols row by row and reads them
//! out column by column. Block interleaving is the same matrix with the
//! column read order scrambled by a fixed permutation. The convolutional
//! interleaver is the classic bank of `B` delay lines where branch `i`
//! holds `i * M` symbols and the commutator visits the branches
//! round-robin; its end-to-end delay is `M * B * (B - 1)` symbols.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Seed of the column permutation used by [`InterleaverSpec::Block`].
pub const BLOCK_PERMUTATION_SEED: u64 = 0x0b10_c4ed;

/// Default block dimensions when a name carries none: eight length-15
/// codewords deep.
pub const DEFAULT_BLOCK_ROWS: usize = 8;
pub const DEFAULT_BLOCK_COLS: usize = 15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterleaveError {
    #[error("length {len} is not a multiple of the {block}-symbol block")]
    LengthNotMultiple { len: usize, block: usize },
    #[error("sequence of {len} symbols is shorter than the {delay}-symbol interleaver delay")]
    TooShort { len: usize, delay: usize },
    #[error("invalid interleaver parameters: {0}")]
    InvalidSpec(String),
    #[error("burst [{start}, {end}) outside the {len}-symbol transmission")]
    OutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("unknown interleaver {0:?}")]
    UnknownName(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterleaverSpec {
    /// No interleaving.
    Identity,
    Block {
        rows: usize,
        cols: usize,
    },
    Matrix {
        rows: usize,
        cols: usize,
    },
    Convolutional {
        branches: usize,
        delay_step: usize,
    },
}

impl InterleaverSpec {
    pub fn validate(&self) -> Result<(), InterleaveError> {
        match *self {
            InterleaverSpec::Identity => Ok(()),
            InterleaverSpec::Block { rows, cols } | InterleaverSpec::Matrix { rows, cols } => {
                if rows == 0 || cols == 0 {
                    Err(InterleaveError::InvalidSpec(format!(
                        "{rows}x{cols} matrix"
                    )))
                } else {
                    Ok(())
                }
            }
            InterleaverSpec::Convolutional { branches, .. } => {
                if branches == 0 {
                    Err(InterleaveError::InvalidSpec("zero branches".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Symbols per permutation block; `None` for streaming interleavers.
    pub fn block_len(&self) -> Option<usize> {
        match *self {
            InterleaverSpec::Block { rows, cols } | InterleaverSpec::Matrix { rows, cols } => {
                Some(rows * cols)
            }
            _ => None,
        }
    }

    /// End-to-end delay in symbols added by interleave + deinterleave.
    pub fn delay(&self) -> usize {
        match *self {
            InterleaverSpec::Convolutional {
                branches,
                delay_step,
            } => delay_step * branches * (branches - 1),
            _ => 0,
        }
    }

    /// Length of the interleaved sequence for `len` input symbols.
    pub fn output_len(&self, len: usize) -> usize {
        len + self.delay()
    }

    /// Position permutation for one block: `out[i] = in[perm[i]]`.
    fn permutation(&self) -> Option<Vec<usize>> {
        match *self {
            InterleaverSpec::Matrix { rows, cols } => Some(
                (0..cols)
                    .flat_map(|c| (0..rows).map(move |r| r * cols + c))
                    .collect(),
            ),
            InterleaverSpec::Block { rows, cols } => {
                let mut order: Vec<usize> = (0..cols).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(BLOCK_PERMUTATION_SEED));
                Some(
                    order
                        .into_iter()
                        .flat_map(|c| (0..rows).map(move |r| r * cols + c))
                        .collect(),
                )
            }
            _ => None,
        }
    }
}

impl fmt::Display for InterleaverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            InterleaverSpec::Identity => write!(f, "none"),
            InterleaverSpec::Block { rows, cols } => write!(f, "block:{rows}x{cols}"),
            InterleaverSpec::Matrix { rows, cols } => write!(f, "matrix:{rows}x{cols}"),
            InterleaverSpec::Convolutional {
                branches,
                delay_step,
            } => {
                write!(f, "conv:{branches},{delay_step}")
            }
        }
    }
}

impl FromStr for InterleaverSpec {
    type Err = InterleaveError;

    /// Accepts `none`, `block`, `block:RxC`, `matrix:RxC` and `conv:B,M`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || InterleaveError::UnknownName(s.to_string());
        let dims = |p: &str| -> Result<(usize, usize), InterleaveError> {
            let (r, c) = p.split_once('x').ok_or_else(unknown)?;
            Ok((
                r.parse().map_err(|_| unknown())?,
                c.parse().map_err(|_| unknown())?,
            ))
        };
        let spec = match s.trim().split_once(':') {
            None => match s.trim() {
                "none" => InterleaverSpec::Identity,
                "block" => InterleaverSpec::Block {
                    rows: DEFAULT_BLOCK_ROWS,
                    cols: DEFAULT_BLOCK_COLS,
                },
                _ => return Err(unknown()),
            },
            Some(("block", p)) => {
                let (rows, cols) = dims(p)?;
                InterleaverSpec::Block { rows, cols }
            }
            Some(("matrix", p)) => {
                let (rows, cols) = dims(p)?;
                InterleaverSpec::Matrix { rows, cols }
            }
            Some(("conv", p)) => {
                let (b, m) = p.split_once(',').ok_or_else(unknown)?;
                InterleaverSpec::Convolutional {
                    branches: b.trim().parse().map_err(|_| unknown())?,
                    delay_step: m.trim().parse().map_err(|_| unknown())?,
                }
            }
            _ => return Err(unknown()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Streaming convolutional (de)interleaver state.
///
/// Each call to [`push`](Self::push) feeds one symbol to the current
/// branch and returns the symbol leaving it; branches are visited
/// round-robin.
#[derive(Debug, Clone)]
pub struct DelayLineBank<T> {
    lines: Vec<VecDeque<T>>,
    next: usize,
}

impl<T: Clone + Default> DelayLineBank<T> {
    /// Interleaver side: branch `i` delays by `i * delay_step` visits.
    pub fn interleaver(branches: usize, delay_step: usize) -> Self {
        Self::with_lengths((0..branches).map(|i| i * delay_step))
    }

    /// Deinterleaver side: branch `i` delays by `(B - 1 - i) * delay_step`.
    pub fn deinterleaver(branches: usize, delay_step: usize) -> Self {
        Self::with_lengths((0..branches).map(|i| (branches - 1 - i) * delay_step))
    }

    fn with_lengths(lengths: impl Iterator<Item = usize>) -> Self {
        let lines = lengths
            .map(|len| std::iter::repeat_n(T::default(), len).collect())
            .collect();
        DelayLineBank { lines, next: 0 }
    }

    pub fn push(&mut self, symbol: T) -> T {
        let branches = self.lines.len();
        let line = &mut self.lines[self.next];
        self.next = (self.next + 1) % branches;
        if line.is_empty() {
            return symbol;
        }
        line.push_back(symbol);
        line.pop_front().expect("non-empty delay line")
    }
}

fn check_block_len(spec: &InterleaverSpec, len: usize) -> Result<usize, InterleaveError> {
    let block = spec.block_len().expect("block interleaver");
    if !len.is_multiple_of(block) {
        return Err(InterleaveError::LengthNotMultiple { len, block });
    }
    Ok(block)
}

/// Interleaves `symbols`. Convolutional interleaving appends
/// [`InterleaverSpec::delay`] padding symbols (`T::default()`) so every
/// input symbol leaves the delay lines.
pub fn interleave<T: Clone + Default>(
    spec: &InterleaverSpec,
    symbols: &[T],
) -> Result<Vec<T>, InterleaveError> {
    spec.validate()?;
    match *spec {
        InterleaverSpec::Identity => Ok(symbols.to_vec()),
        InterleaverSpec::Block { .. } | InterleaverSpec::Matrix { .. } => {
            let block = check_block_len(spec, symbols.len())?;
            let perm = spec.permutation().expect("block permutation");
            Ok(symbols
                .chunks(block)
                .flat_map(|chunk| perm.iter().map(move |&p| chunk[p].clone()))
                .collect())
        }
        InterleaverSpec::Convolutional {
            branches,
            delay_step,
        } => {
            let mut bank = DelayLineBank::interleaver(branches, delay_step);
            let padding = std::iter::repeat_n(T::default(), spec.delay());
            Ok(symbols
                .iter()
                .cloned()
                .chain(padding)
                .map(|s| bank.push(s))
                .collect())
        }
    }
}

/// Exact inverse of [`interleave`]; for the convolutional case the leading
/// `delay` symbols of the deinterleaver output are dropped.
pub fn deinterleave<T: Clone + Default>(
    spec: &InterleaverSpec,
    symbols: &[T],
) -> Result<Vec<T>, InterleaveError> {
    spec.validate()?;
    match *spec {
        InterleaverSpec::Identity => Ok(symbols.to_vec()),
        InterleaverSpec::Block { .. } | InterleaverSpec::Matrix { .. } => {
            let block = check_block_len(spec, symbols.len())?;
            let perm = spec.permutation().expect("block permutation");
            let mut out = symbols.to_vec();
            for (dst, src) in out.chunks_mut(block).zip(symbols.chunks(block)) {
                for (i, &p) in perm.iter().enumerate() {
                    dst[p] = src[i].clone();
                }
            }
            Ok(out)
        }
        InterleaverSpec::Convolutional {
            branches,
            delay_step,
        } => {
            let delay = spec.delay();
            if symbols.len() < delay {
                return Err(InterleaveError::TooShort {
                    len: symbols.len(),
                    delay,
                });
            }
            let mut bank = DelayLineBank::deinterleaver(branches, delay_step);
            Ok(symbols
                .iter()
                .cloned()
                .map(|s| bank.push(s))
                .skip(delay)
                .collect())
        }
    }
}

/// Largest number of burst-corrupted symbols landing in one codeword after
/// deinterleaving.
///
/// `total_len` is the number of data symbols before interleaving; the burst
/// is placed on the transmitted (interleaved) stream, whose length includes
/// the convolutional flush. Burst symbols that fall on padding positions
/// corrupt no data.
pub fn burst_dispersal(
    spec: &InterleaverSpec,
    total_len: usize,
    burst_start: usize,
    burst_len: usize,
    codeword_len: usize,
) -> Result<usize, InterleaveError> {
    if codeword_len == 0 {
        return Err(InterleaveError::InvalidSpec("zero codeword length".into()));
    }
    let tx_len = spec.output_len(total_len);
    let end = burst_start + burst_len;
    if end > tx_len {
        return Err(InterleaveError::OutOfBounds {
            start: burst_start,
            end,
            len: tx_len,
        });
    }
    if let Some(block) = spec.block_len() {
        if !total_len.is_multiple_of(block) {
            return Err(InterleaveError::LengthNotMultiple {
                len: total_len,
                block,
            });
        }
    }
    let mut mask = vec![false; tx_len];
    mask[burst_start..end].iter_mut().for_each(|m| *m = true);
    let hits = deinterleave(spec, &mask)?;
    Ok(hits
        .chunks(codeword_len)
        .map(|c| c.iter().filter(|&&h| h).count())
        .max()
        .unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Closed-form position of input symbol `j` in the convolutional
    /// interleaver output.
    fn conv_position(j: usize, branches: usize, delay_step: usize) -> usize {
        j + (j % branches) * delay_step * branches
    }

    #[test]
    fn single_row_matrix_is_identity() {
        let spec = InterleaverSpec::Matrix { rows: 1, cols: 6 };
        let x: Vec<u16> = (0..12).collect();
        assert_eq!(interleave(&spec, &x).unwrap(), x);
    }

    #[test]
    fn two_by_three_matrix() {
        let spec = InterleaverSpec::Matrix { rows: 2, cols: 3 };
        let out = interleave(&spec, &['a', 'b', 'c', 'd', 'e', 'f']).unwrap();
        assert_eq!(out, vec!['a', 'd', 'b', 'e', 'c', 'f']);
    }

    #[test]
    fn matrix_rejects_partial_blocks() {
        let spec = InterleaverSpec::Matrix { rows: 3, cols: 4 };
        assert_eq!(
            interleave(&spec, &[0u8; 13]),
            Err(InterleaveError::LengthNotMultiple { len: 13, block: 12 })
        );
        assert!(deinterleave(&spec, &[0u8; 11]).is_err());
    }

    #[test]
    fn matrix_and_block_round_trip() {
        let x: Vec<u32> = (0..48).collect();
        for spec in [
            InterleaverSpec::Matrix { rows: 3, cols: 4 },
            InterleaverSpec::Block { rows: 4, cols: 4 },
        ] {
            let y = interleave(&spec, &x).unwrap();
            assert_ne!(y, x);
            assert_eq!(deinterleave(&spec, &y).unwrap(), x);
        }
    }

    #[test]
    fn block_reads_columns_in_scrambled_order() {
        let spec = InterleaverSpec::Block { rows: 2, cols: 15 };
        let matrix = InterleaverSpec::Matrix { rows: 2, cols: 15 };
        let x: Vec<u32> = (0..30).collect();
        let yb = interleave(&spec, &x).unwrap();
        let ym = interleave(&matrix, &x).unwrap();
        assert_ne!(yb, ym);
        // Each column still comes out whole, top to bottom.
        for pair in yb.chunks(2) {
            assert_eq!(pair[1], pair[0] + 15);
        }
    }

    #[test]
    fn convolutional_matches_position_formula() {
        let (b, m) = (3, 1);
        let spec = InterleaverSpec::Convolutional {
            branches: b,
            delay_step: m,
        };
        let x: Vec<i32> = (1..=12).collect();
        let y = interleave(&spec, &x).unwrap();
        assert_eq!(y.len(), 12 + 6);
        let mut expected = vec![0; y.len()];
        for (j, &v) in x.iter().enumerate() {
            expected[conv_position(j, b, m)] = v;
        }
        // Padding symbols are zero as well, so the full vectors agree.
        assert_eq!(y, expected);
    }

    #[test]
    fn convolutional_round_trip_trims_delay() {
        let spec = InterleaverSpec::Convolutional {
            branches: 2,
            delay_step: 2,
        };
        assert_eq!(spec.delay(), 4);
        let x: Vec<i32> = (1..=9).collect();
        let y = interleave(&spec, &x).unwrap();
        assert_eq!(y.len(), 13);
        assert_eq!(deinterleave(&spec, &y).unwrap(), x);
        assert_eq!(
            deinterleave(&spec, &[0; 3]),
            Err(InterleaveError::TooShort { len: 3, delay: 4 })
        );
    }

    #[test]
    fn conv_with_zero_step_is_identity() {
        let spec = InterleaverSpec::Convolutional {
            branches: 4,
            delay_step: 0,
        };
        let x: Vec<u8> = (0..10).collect();
        assert_eq!(interleave(&spec, &x).unwrap(), x);
    }

    #[test]
    fn streaming_bank_matches_batch() {
        let mut tx = DelayLineBank::interleaver(4, 2);
        let mut rx = DelayLineBank::deinterleaver(4, 2);
        let delay = 2 * 4 * 3;
        let out: Vec<u32> = (1..=100).map(|v| rx.push(tx.push(v))).collect();
        assert!(out[..delay].iter().all(|&v| v == 0));
        assert_eq!(
            out[delay..],
            (1..=(100 - delay as u32)).collect::<Vec<_>>()[..]
        );
    }

    #[test]
    fn names_round_trip() {
        for name in ["none", "block:8x15", "matrix:4x15", "conv:16,1"] {
            let spec: InterleaverSpec = name.parse().unwrap();
            assert_eq!(spec.to_string(), name);
        }
        assert_eq!(
            "block".parse::<InterleaverSpec>().unwrap().to_string(),
            "block:8x15"
        );
        assert!("matrix:0x4".parse::<InterleaverSpec>().is_err());
        assert!("spiral:3".parse::<InterleaverSpec>().is_err());
        assert!("conv:0,3".parse::<InterleaverSpec>().is_err());
    }

    #[test]
    fn single_symbol_burst_hits_one_codeword() {
        for spec in [
            InterleaverSpec::Identity,
            InterleaverSpec::Matrix { rows: 4, cols: 15 },
            InterleaverSpec::Block { rows: 4, cols: 15 },
            InterleaverSpec::Convolutional {
                branches: 5,
                delay_step: 3,
            },
        ] {
            // Position 0 always carries data (branch 0 has no delay).
            assert_eq!(burst_dispersal(&spec, 120, 0, 1, 15).unwrap(), 1, "{spec}");
            assert_eq!(burst_dispersal(&spec, 120, 60, 1, 15).unwrap(), 1, "{spec}");
        }
    }

    #[test]
    fn uninterleaved_burst_stays_together() {
        let spec = InterleaverSpec::Matrix { rows: 1, cols: 15 };
        assert_eq!(burst_dispersal(&spec, 60, 3, 5, 15).unwrap(), 5);
    }

    #[test]
    fn matrix_spreads_short_bursts() {
        let spec = InterleaverSpec::Matrix { rows: 8, cols: 15 };
        // Mask simulation done by hand: column c is transmitted at
        // positions 8c..8c+8, one symbol from each row.
        for start in (0..120).step_by(8) {
            for len in 1..=8 {
                assert_eq!(burst_dispersal(&spec, 240, start, len, 15).unwrap(), 1);
            }
        }
        assert_eq!(burst_dispersal(&spec, 240, 0, 16, 15).unwrap(), 2);
        assert!(matches!(
            burst_dispersal(&spec, 240, 230, 20, 15),
            Err(InterleaveError::OutOfBounds { .. })
        ));
    }

    fn any_spec() -> impl Strategy<Value = InterleaverSpec> {
        prop_oneof![
            Just(InterleaverSpec::Identity),
            (1usize..8, 1usize..8).prop_map(|(rows, cols)| InterleaverSpec::Matrix { rows, cols }),
            (1usize..8, 1usize..8).prop_map(|(rows, cols)| InterleaverSpec::Block { rows, cols }),
            (1usize..8, 0usize..5).prop_map(|(branches, delay_step)| {
                InterleaverSpec::Convolutional {
                    branches,
                    delay_step,
                }
            }),
        ]
    }

    proptest! {
        #[test]
        fn round_trip_any_spec(spec in any_spec(), blocks in 1usize..5, seed in any::<u64>()) {
            let len = spec.block_len().unwrap_or(7) * blocks;
            let x: Vec<u64> = (0..len as u64).map(|i| i.wrapping_mul(seed | 1)).collect();
            let y = interleave(&spec, &x).unwrap();
            prop_assert_eq!(y.len(), spec.output_len(len));
            prop_assert_eq!(deinterleave(&spec, &y).unwrap(), x);
        }

        #[test]
        fn positions_are_a_bijection(spec in any_spec(), blocks in 1usize..5) {
            // Tag each input with a distinct nonzero id; every id must come
            // out exactly once.
            let len = spec.block_len().unwrap_or(11) * blocks;
            let x: Vec<usize> = (1..=len).collect();
            let mut y: Vec<usize> = interleave(&spec, &x).unwrap().into_iter().filter(|&v| v != 0).collect();
            y.sort_unstable();
            prop_assert_eq!(y, x);
        }

        #[test]
        fn conv_matches_formula(b in 1usize..7, m in 0usize..4, len in 1usize..60) {
            let spec = InterleaverSpec::Convolutional { branches: b, delay_step: m };
            let x: Vec<usize> = (1..=len).collect();
            let y = interleave(&spec, &x).unwrap();
            for j in 0..len {
                prop_assert_eq!(y[conv_position(j, b, m)], x[j]);
            }
        }

        #[test]
        fn matrix_burst_bound(rows in 1usize..10, start in 0usize..100, len in 1usize..10) {
            let spec = InterleaverSpec::Matrix { rows, cols: 15 };
            let total = rows * 15 * 2;
            prop_assume!(start + len <= total);
            let worst = burst_dispersal(&spec, total, start, len, 15).unwrap();
            prop_assert!(worst <= len.div_ceil(rows));
        }
    }
}
