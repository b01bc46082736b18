//! Systematic block codes: Reed-Solomon over GF(2^s) and the binary
//! BCH(15, k) family.
//!
//! Both share one bounded-distance decoder. Binary BCH codes are subfield
//! subcodes of the Reed-Solomon code with the same consecutive roots
//! `alpha^1 .. alpha^2t`, so syndromes, Berlekamp-Massey with erasures,
//! Chien search and Forney's formula all run in GF(16) and the result is
//! checked to lie back in GF(2).
//!
//! Codeword layout: symbol `i` is the coefficient of `x^(n-1-i)`, so the
//! first `k` symbols are the data and the last `n-k` the parity.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::gf::{Element, Field, GfError, Poly};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FecError {
    #[error("unsupported BCH(15,k) correction capability t={0}; expected 1, 2, 3 or 7")]
    UnsupportedT(usize),
    #[error("invalid code parameters: {0}")]
    InvalidParameters(String),
    #[error("expected {expected} symbols, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("symbol {value} at position {position} is not a valid code symbol")]
    InvalidSymbol { position: usize, value: Element },
    #[error("erasure position {0} is out of range or repeated")]
    InvalidErasure(usize),
    #[error("received word is not decodable")]
    DecodeFailure,
    #[error("unknown code name {0:?}")]
    UnknownCode(String),
    #[error(transparent)]
    Field(#[from] GfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeKind {
    ReedSolomon,
    BinaryBch,
}

/// An `(n, k)` block code correcting `t` symbol errors.
#[derive(Debug, Clone)]
pub struct Code {
    kind: CodeKind,
    field: Field,
    n: usize,
    k: usize,
    t: usize,
    generator: Poly,
}

/// Binary generator of the narrow-sense BCH(15, k) code correcting `t`
/// errors, as a bitmask (octal 23, 721, 2467, 77777 for t = 1, 2, 3, 7).
pub fn bch_generator(t: usize) -> Result<u64, FecError> {
    if ![1, 2, 3, 7].contains(&t) {
        return Err(FecError::UnsupportedT(t));
    }
    let field = Field::new(4, 0o23)?;
    let n = field.group_order();
    // One minimal polynomial per cyclotomic coset that contains an odd
    // power alpha^1, alpha^3, ..., alpha^(2t-1).
    let mut seen = BTreeSet::new();
    let mut g = Poly::one();
    for i in (1..2 * t).step_by(2) {
        let coset = cyclotomic_coset(i, n);
        if !seen.insert(coset[0]) {
            continue;
        }
        let mut m = Poly::one();
        for &e in &coset {
            m = field.poly_mul(&m, &Poly::new(vec![field.alpha_pow(e as i64), 1]));
        }
        g = field.poly_mul(&g, &m);
    }
    Ok(g.to_binary()
        .expect("minimal polynomials have binary coefficients"))
}

/// Sorted exponents `{i * 2^j mod n}`.
fn cyclotomic_coset(i: usize, n: usize) -> Vec<usize> {
    let mut out = BTreeSet::new();
    let mut e = i % n;
    while out.insert(e) {
        e = (e * 2) % n;
    }
    out.into_iter().collect()
}

/// `prod_{i=1}^{n-k} (x - alpha^i)` for an RS code over `field`.
pub fn rs_generator(field: &Field, n: usize, k: usize) -> Result<Poly, FecError> {
    if n != field.group_order() {
        return Err(FecError::InvalidParameters(format!(
            "RS length must be 2^s - 1 = {}, got {n}",
            field.group_order()
        )));
    }
    if k == 0 || k >= n {
        return Err(FecError::InvalidParameters(format!(
            "need 1 <= k < n, got k={k}"
        )));
    }
    if !(n - k).is_multiple_of(2) {
        return Err(FecError::InvalidParameters(format!(
            "n - k = {} must be even",
            n - k
        )));
    }
    let mut g = Poly::one();
    for i in 1..=(n - k) {
        g = field.poly_mul(&g, &Poly::new(vec![field.alpha_pow(i as i64), 1]));
    }
    Ok(g)
}

impl Code {
    /// `RS(n, k)` over `field`; `n` must equal `2^s - 1`.
    pub fn reed_solomon(field: Field, n: usize, k: usize) -> Result<Self, FecError> {
        let generator = rs_generator(&field, n, k)?;
        Ok(Code {
            kind: CodeKind::ReedSolomon,
            field,
            n,
            k,
            t: (n - k) / 2,
            generator,
        })
    }

    /// Binary `BCH(15, k)` with designed correction capability `t`.
    pub fn bch15(t: usize) -> Result<Self, FecError> {
        let mask = bch_generator(t)?;
        let generator = Poly::from_binary(mask);
        let deg = generator.degree().unwrap_or(0);
        Ok(Code {
            kind: CodeKind::BinaryBch,
            field: Field::new(4, 0o23)?,
            n: 15,
            k: 15 - deg,
            t,
            generator,
        })
    }

    /// Parses names such as `rs-15-11` or `bch-15-7`.
    pub fn from_name(name: &str) -> Result<Self, FecError> {
        let unknown = || FecError::UnknownCode(name.to_string());
        let mut parts = name.trim().split('-');
        let family = parts.next().ok_or_else(unknown)?;
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(unknown)?;
        let k: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(unknown)?;
        if parts.next().is_some() {
            return Err(unknown());
        }
        match family {
            "rs" => {
                if !(n + 1).is_power_of_two() || n < 3 {
                    return Err(unknown());
                }
                let bits = (n + 1).trailing_zeros();
                Code::reed_solomon(Field::with_default_poly(bits)?, n, k)
            }
            "bch" if n == 15 => {
                let t = match k {
                    11 => 1,
                    7 => 2,
                    5 => 3,
                    1 => 7,
                    _ => return Err(unknown()),
                };
                Code::bch15(t)
            }
            _ => Err(unknown()),
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            CodeKind::ReedSolomon => format!("rs-{}-{}", self.n, self.k),
            CodeKind::BinaryBch => format!("bch-{}-{}", self.n, self.k),
        }
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn generator(&self) -> &Poly {
        &self.generator
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// Bits carried by one code symbol: `s` for RS, 1 for binary BCH.
    pub fn bits_per_symbol(&self) -> u32 {
        match self.kind {
            CodeKind::ReedSolomon => self.field.bits(),
            CodeKind::BinaryBch => 1,
        }
    }

    /// Number of consecutive generator roots used by the decoder.
    fn num_roots(&self) -> usize {
        2 * self.t
    }

    fn symbol_limit(&self) -> usize {
        1 << self.bits_per_symbol()
    }

    fn check_symbols(&self, symbols: &[Element]) -> Result<(), FecError> {
        let limit = self.symbol_limit();
        match symbols.iter().position(|&s| s as usize >= limit) {
            Some(position) => Err(FecError::InvalidSymbol {
                position,
                value: symbols[position],
            }),
            None => Ok(()),
        }
    }

    /// Systematic encoding: data followed by the remainder of
    /// `d(x) x^(n-k)` modulo the generator.
    pub fn encode(&self, data: &[Element]) -> Result<Vec<Element>, FecError> {
        if data.len() != self.k {
            return Err(FecError::LengthMismatch {
                expected: self.k,
                actual: data.len(),
            });
        }
        self.check_symbols(data)?;
        let parity_len = self.n - self.k;
        let g = self.generator.coeffs();
        // Synthetic division on the high-degree-first buffer. The generator
        // is monic so no scaling is needed.
        let mut buf = vec![0 as Element; self.n];
        buf[..self.k].copy_from_slice(data);
        for i in 0..self.k {
            let coef = buf[i];
            if coef == 0 {
                continue;
            }
            for j in 1..=parity_len {
                buf[i + j] ^= self.field.mul(g[parity_len - j], coef);
            }
        }
        buf[..self.k].copy_from_slice(data);
        Ok(buf)
    }

    /// `S_j = r(alpha^j)` for `j = 1..=2t`.
    pub fn syndromes(&self, word: &[Element]) -> Vec<Element> {
        let f = &self.field;
        (1..=self.num_roots())
            .map(|j| {
                let x = f.alpha_pow(j as i64);
                word.iter().fold(0, |acc, &c| f.mul(acc, x) ^ c)
            })
            .collect()
    }

    /// Bounded-distance errors-and-erasures decoding.
    ///
    /// Succeeds whenever `2 * errors + erasures <= 2t`. Returns the data
    /// symbols and the number of symbols that were changed.
    pub fn decode(
        &self,
        received: &[Element],
        erasures: &[usize],
    ) -> Result<(Vec<Element>, usize), FecError> {
        if received.len() != self.n {
            return Err(FecError::LengthMismatch {
                expected: self.n,
                actual: received.len(),
            });
        }
        self.check_symbols(received)?;
        let mut seen = BTreeSet::new();
        for &e in erasures {
            if e >= self.n || !seen.insert(e) {
                return Err(FecError::InvalidErasure(e));
            }
        }
        let nroots = self.num_roots();
        if erasures.len() > nroots {
            return Err(FecError::DecodeFailure);
        }
        let synd = self.syndromes(received);
        if synd.iter().all(|&s| s == 0) {
            return Ok((received[..self.k].to_vec(), 0));
        }

        let f = &self.field;
        let n = self.n as i64;
        let locator = |pos: usize| f.alpha_pow(n - 1 - pos as i64);

        // Erasure locator Gamma(x) = prod (1 + X_e x).
        let mut gamma = Poly::one();
        for &e in erasures {
            gamma = f.poly_mul(&gamma, &Poly::new(vec![1, locator(e)]));
        }

        let lambda = berlekamp_massey(f, &synd, gamma, erasures.len());
        let deg = lambda.degree().unwrap_or(0);
        let num_erasures = erasures.len();
        if deg < num_erasures || 2 * (deg - num_erasures) + num_erasures > nroots {
            return Err(FecError::DecodeFailure);
        }

        // Chien search over the n valid positions.
        let positions: Vec<usize> = (0..self.n)
            .filter(|&i| f.poly_eval(&lambda, f.alpha_pow(-(n - 1 - i as i64))) == 0)
            .collect();
        if positions.len() != deg {
            return Err(FecError::DecodeFailure);
        }

        // Forney with first consecutive root alpha^1: e = Omega(X^-1) / Lambda'(X^-1).
        let synd_poly = Poly::new(synd);
        let omega = truncate(&f.poly_mul(&synd_poly, &lambda), nroots);
        let dlambda = f.poly_derivative(&lambda);
        let mut corrected = received.to_vec();
        let mut changed = 0;
        for &pos in &positions {
            let xinv = f.alpha_pow(-(n - 1 - pos as i64));
            let den = f.poly_eval(&dlambda, xinv);
            if den == 0 {
                return Err(FecError::DecodeFailure);
            }
            let value = f.div(f.poly_eval(&omega, xinv), den)?;
            if value != 0 {
                corrected[pos] ^= value;
                changed += 1;
            }
        }
        if self.check_symbols(&corrected).is_err()
            || self.syndromes(&corrected).iter().any(|&s| s != 0)
        {
            return Err(FecError::DecodeFailure);
        }
        corrected.truncate(self.k);
        Ok((corrected, changed))
    }
}

fn truncate(p: &Poly, len: usize) -> Poly {
    Poly::new(p.coeffs().iter().take(len).copied().collect())
}

/// Berlekamp-Massey seeded with the erasure locator. Returns the errata
/// locator (errors and erasures combined).
fn berlekamp_massey(f: &Field, synd: &[Element], gamma: Poly, num_erasures: usize) -> Poly {
    let mut lambda = gamma.clone();
    let mut prev = gamma;
    let mut len = num_erasures;
    let mut shift = 1;
    for r in num_erasures..synd.len() {
        let delta = lambda
            .coeffs()
            .iter()
            .enumerate()
            .take_while(|&(i, _)| i <= r)
            .fold(0, |acc, (i, &c)| acc ^ f.mul(c, synd[r - i]));
        if delta == 0 {
            shift += 1;
            continue;
        }
        let update = f.poly_mul(&Poly::monomial(shift, delta), &prev);
        let next = f.poly_add(&lambda, &update);
        if 2 * len <= r + num_erasures {
            let inv = f.inv(delta).expect("nonzero discrepancy");
            prev = f.poly_scale(&lambda, inv);
            len = r + 1 + num_erasures - len;
            shift = 1;
        } else {
            shift += 1;
        }
        lambda = next;
    }
    lambda
}

/// Packs symbols into bits, most significant bit first.
pub fn symbols_to_bits(symbols: &[Element], bits_per_symbol: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(symbols.len() * bits_per_symbol as usize);
    for &s in symbols {
        for b in (0..bits_per_symbol).rev() {
            out.push(((s >> b) & 1) as u8);
        }
    }
    out
}

/// Inverse of [`symbols_to_bits`]. A trailing partial symbol is dropped.
pub fn bits_to_symbols(bits: &[u8], bits_per_symbol: u32) -> Vec<Element> {
    bits.chunks_exact(bits_per_symbol as usize)
        .map(|chunk| {
            chunk
                .iter()
                .fold(0, |acc, &b| (acc << 1) | (b & 1) as Element)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rs15_11() -> Code {
        Code::from_name("rs-15-11").unwrap()
    }

    #[test]
    fn table_generators() {
        assert_eq!(bch_generator(1).unwrap(), 0o23);
        assert_eq!(bch_generator(2).unwrap(), 0o721);
        assert_eq!(bch_generator(3).unwrap(), 0o2467);
        assert_eq!(bch_generator(7).unwrap(), 0o77777);
        assert_eq!(bch_generator(4), Err(FecError::UnsupportedT(4)));
        assert_eq!(bch_generator(0), Err(FecError::UnsupportedT(0)));
    }

    #[test]
    fn bch_generators_divide_x15_minus_1() {
        let x15 = (1u64 << 15) | 1;
        for (t, k) in [(1, 11), (2, 7), (3, 5), (7, 1)] {
            let g = bch_generator(t).unwrap();
            assert_eq!(crate::gf::binpoly_mod(x15, g).unwrap(), 0);
            let code = Code::bch15(t).unwrap();
            assert_eq!(code.k(), k);
            assert_eq!(code.generator().degree(), Some(15 - k));
        }
    }

    #[test]
    fn rs_generator_over_gf4() {
        // (x - a)(x - a^2) = x^2 + (a + a^2) x + a^3 = x^2 + x + 1 in GF(4).
        let f = Field::new(2, 0b111).unwrap();
        let g = rs_generator(&f, 3, 1).unwrap();
        assert_eq!(g, Poly::new(vec![1, 1, 1]));
    }

    #[test]
    fn rs_generator_rejects_bad_parameters() {
        let f = Field::with_default_poly(4).unwrap();
        assert!(matches!(
            rs_generator(&f, 15, 15),
            Err(FecError::InvalidParameters(_))
        ));
        assert!(matches!(
            rs_generator(&f, 14, 10),
            Err(FecError::InvalidParameters(_))
        ));
        assert!(matches!(
            rs_generator(&f, 15, 12),
            Err(FecError::InvalidParameters(_))
        ));
    }

    #[test]
    fn rs_generator_roots() {
        let code = rs15_11();
        let f = code.field();
        assert_eq!(code.generator().degree(), Some(4));
        for i in 1..=4 {
            assert_eq!(f.poly_eval(code.generator(), f.alpha_pow(i)), 0);
        }
        assert_ne!(f.poly_eval(code.generator(), f.alpha_pow(5)), 0);
    }

    #[test]
    fn bch_generator_roots() {
        for t in [1, 2, 3, 7] {
            let code = Code::bch15(t).unwrap();
            let f = code.field();
            for i in 1..=2 * t {
                assert_eq!(f.poly_eval(code.generator(), f.alpha_pow(i as i64)), 0);
            }
        }
    }

    #[test]
    fn zero_data_encodes_to_zero() {
        let code = rs15_11();
        assert_eq!(code.encode(&[0; 11]).unwrap(), vec![0; 15]);
    }

    #[test]
    fn encode_is_systematic_with_zero_syndromes() {
        let code = rs15_11();
        let f = code.field();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let data: Vec<u16> = (0..11).map(|_| rng.random_range(0..16)).collect();
            let cw = code.encode(&data).unwrap();
            assert_eq!(&cw[..11], &data[..]);
            // Direct evaluation with the layout convention, independent of
            // Code::syndromes.
            for j in 1..=4i64 {
                let mut s = 0;
                for (i, &c) in cw.iter().enumerate() {
                    s ^= f.mul(c, f.alpha_pow(j * (14 - i as i64)));
                }
                assert_eq!(s, 0);
            }
        }
    }

    #[test]
    fn encode_errors() {
        let code = rs15_11();
        assert_eq!(
            code.encode(&[1; 10]),
            Err(FecError::LengthMismatch {
                expected: 11,
                actual: 10
            })
        );
        let bch = Code::bch15(2).unwrap();
        assert_eq!(
            bch.encode(&[0, 0, 2, 0, 0, 0, 0]),
            Err(FecError::InvalidSymbol {
                position: 2,
                value: 2
            })
        );
    }

    #[test]
    fn clean_word_decodes_unchanged() {
        let code = rs15_11();
        let data: Vec<u16> = (1..=11).collect();
        let cw = code.encode(&data).unwrap();
        assert_eq!(code.decode(&cw, &[]).unwrap(), (data, 0));
    }

    #[test]
    fn every_double_error_is_corrected() {
        let code = rs15_11();
        let data: Vec<u16> = vec![3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5];
        let cw = code.encode(&data).unwrap();
        for p1 in 0..15 {
            for p2 in (p1 + 1)..15 {
                for e1 in 1..16u16 {
                    for e2 in 1..16u16 {
                        let mut r = cw.clone();
                        r[p1] ^= e1;
                        r[p2] ^= e2;
                        assert_eq!(code.decode(&r, &[]).unwrap(), (data.clone(), 2));
                    }
                }
            }
        }
    }

    #[test]
    fn four_erasures_are_filled() {
        let code = rs15_11();
        let data: Vec<u16> = vec![15, 0, 7, 7, 1, 2, 3, 4, 8, 9, 10];
        let cw = code.encode(&data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let mut pos: Vec<usize> = (0..15).collect();
            for i in 0..4 {
                let j = rng.random_range(i..15);
                pos.swap(i, j);
            }
            let erased = &pos[..4];
            let mut r = cw.clone();
            for &p in erased {
                r[p] = rng.random_range(0..16);
            }
            let (out, _) = code.decode(&r, erased).unwrap();
            assert_eq!(out, data);
        }
    }

    #[test]
    fn decode_argument_errors() {
        let code = rs15_11();
        let cw = code.encode(&[0; 11]).unwrap();
        assert!(matches!(
            code.decode(&cw[..14], &[]),
            Err(FecError::LengthMismatch { .. })
        ));
        assert_eq!(code.decode(&cw, &[3, 3]), Err(FecError::InvalidErasure(3)));
        assert_eq!(code.decode(&cw, &[15]), Err(FecError::InvalidErasure(15)));
        assert_eq!(
            code.decode(&cw, &[0, 1, 2, 3, 4]),
            Err(FecError::DecodeFailure)
        );
    }

    #[test]
    fn beyond_budget_is_never_silently_accepted_as_a_non_codeword() {
        // Five errors in RS(15,11) either fail or land on another codeword.
        let code = rs15_11();
        let data = vec![1u16; 11];
        let cw = code.encode(&data).unwrap();
        let mut r = cw.clone();
        for p in [0, 3, 6, 9, 12] {
            r[p] ^= 5;
        }
        match code.decode(&r, &[]) {
            Err(FecError::DecodeFailure) => {}
            Ok((d, _)) => {
                let re = code.encode(&d).unwrap();
                assert!(code.syndromes(&re).iter().all(|&s| s == 0));
            }
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bch_15_11_minimum_distance() {
        let code = Code::bch15(1).unwrap();
        let mut min_w = usize::MAX;
        for m in 1u32..(1 << 11) {
            let data: Vec<u16> = (0..11).map(|i| ((m >> i) & 1) as u16).collect();
            let w = code
                .encode(&data)
                .unwrap()
                .iter()
                .filter(|&&b| b != 0)
                .count();
            min_w = min_w.min(w);
        }
        assert_eq!(min_w, 3);
    }

    #[test]
    fn bch_decodes_errors_and_erasures() {
        let code = Code::bch15(3).unwrap();
        let data = vec![1, 0, 1, 1, 0];
        let cw = code.encode(&data).unwrap();
        // 2 errors + 2 erasures: 2*2 + 2 = 6 = 2t.
        let mut r = cw.clone();
        r[1] ^= 1;
        r[9] ^= 1;
        r[4] = 0;
        r[13] = 1;
        let (out, _) = code.decode(&r, &[4, 13]).unwrap();
        assert_eq!(out, data);
    }

    #[test]
    fn names() {
        assert_eq!(Code::from_name("bch-15-7").unwrap().t(), 2);
        assert_eq!(Code::from_name("rs-15-11").unwrap().name(), "rs-15-11");
        assert_eq!(Code::from_name("rs-255-223").unwrap().t(), 16);
        assert!(matches!(
            Code::from_name("rs-15-12"),
            Err(FecError::InvalidParameters(_))
        ));
        assert!(matches!(
            Code::from_name("ldpc-1-1"),
            Err(FecError::UnknownCode(_))
        ));
        assert!(matches!(
            Code::from_name("bch-15-9"),
            Err(FecError::UnknownCode(_))
        ));
    }

    #[test]
    fn bit_packing_is_msb_first() {
        assert_eq!(
            symbols_to_bits(&[0b1010, 0b0011], 4),
            vec![1, 0, 1, 0, 0, 0, 1, 1]
        );
        assert_eq!(
            bits_to_symbols(&[1, 0, 1, 0, 0, 0, 1, 1, 1], 4),
            vec![0b1010, 0b0011]
        );
    }
}
