//! Arithmetic over GF(2^s) and polynomials with coefficients in it.
//!
//! Elements are integers in `[0, 2^s)`; bit `i` is the coefficient of `x^i`
//! in the polynomial-basis representation. Addition is XOR, multiplication
//! goes through exp/log tables built once when the field is created.
//!
//! Binary polynomials (coefficients in GF(2)) are handled separately as
//! `u64` bitmasks by the `binpoly_*` helpers; they are used for generator
//! construction and LFSR feedback polynomials.

use thiserror::Error;

/// Field element. Always `< 2^s` for the field it belongs to.
pub type Element = u16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("symbol size {0} outside supported range 2..=16")]
    UnsupportedSymbolSize(u32),
    #[error("polynomial {poly:#o} does not have degree {bits}")]
    DegreeMismatch { bits: u32, poly: u32 },
    #[error("polynomial {poly:#o} is not primitive: generator order {order} < {expected}")]
    NonPrimitivePolynomial {
        poly: u32,
        order: u32,
        expected: u32,
    },
    #[error("division by zero")]
    DivisionByZero,
}

/// Primitive polynomials of minimal weight, indexed by degree.
/// Degree 4 is x^4 + x + 1 (octal 23).
const DEFAULT_PRIMITIVE: [u32; 17] = [
    0, 0, 0o7, 0o13, 0o23, 0o45, 0o103, 0o211, 0o435, 0o1021, 0o2011, 0o4005, 0o10123, 0o20033,
    0o42103, 0o100003, 0o210013,
];

/// Default primitive polynomial for `GF(2^bits)`, if `bits` is in 2..=16.
pub fn default_primitive_poly(bits: u32) -> Option<u32> {
    DEFAULT_PRIMITIVE
        .get(bits as usize)
        .copied()
        .filter(|&p| p != 0)
}

/// A finite field of characteristic two.
#[derive(Clone, PartialEq, Eq)]
pub struct Field {
    bits: u32,
    poly: u32,
    // exp has 2*(q-1) entries so that exp[log a + log b] needs no reduction.
    exp: Vec<Element>,
    log: Vec<u32>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("bits", &self.bits)
            .field("poly", &format_args!("{:#o}", self.poly))
            .finish()
    }
}

impl Field {
    /// Builds `GF(2^bits)` from a primitive polynomial given as a bitmask
    /// (bit `i` = coefficient of `x^i`).
    pub fn new(bits: u32, primitive_poly: u32) -> Result<Self, GfError> {
        if !(2..=16).contains(&bits) {
            return Err(GfError::UnsupportedSymbolSize(bits));
        }
        if binpoly_degree(primitive_poly as u64) != Some(bits) {
            return Err(GfError::DegreeMismatch {
                bits,
                poly: primitive_poly,
            });
        }
        let q = 1u32 << bits;
        let order = q - 1;
        let mut exp = vec![0 as Element; 2 * order as usize];
        let mut log = vec![0u32; q as usize];
        let mut x: u32 = 1;
        for i in 0..order {
            if i > 0 && x == 1 {
                return Err(GfError::NonPrimitivePolynomial {
                    poly: primitive_poly,
                    order: i,
                    expected: order,
                });
            }
            exp[i as usize] = x as Element;
            log[x as usize] = i;
            x <<= 1;
            if x & q != 0 {
                x ^= primitive_poly;
            }
        }
        if x != 1 {
            // The powers never returned to 1, so the polynomial is reducible.
            return Err(GfError::NonPrimitivePolynomial {
                poly: primitive_poly,
                order: 0,
                expected: order,
            });
        }
        for i in order..2 * order {
            exp[i as usize] = exp[(i - order) as usize];
        }
        Ok(Field {
            bits,
            poly: primitive_poly,
            exp,
            log,
        })
    }

    /// `GF(2^bits)` with the default primitive polynomial.
    pub fn with_default_poly(bits: u32) -> Result<Self, GfError> {
        let poly = default_primitive_poly(bits).ok_or(GfError::UnsupportedSymbolSize(bits))?;
        Self::new(bits, poly)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn primitive_poly(&self) -> u32 {
        self.poly
    }

    /// Number of elements, `2^s`.
    pub fn order(&self) -> usize {
        1usize << self.bits
    }

    /// Order of the multiplicative group, `2^s - 1`.
    pub fn group_order(&self) -> usize {
        self.order() - 1
    }

    pub fn contains(&self, a: Element) -> bool {
        (a as usize) < self.order()
    }

    #[inline]
    pub fn add(&self, a: Element, b: Element) -> Element {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: Element, b: Element) -> Element {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
    }

    pub fn inv(&self, a: Element) -> Result<Element, GfError> {
        if a == 0 {
            return Err(GfError::DivisionByZero);
        }
        let n = self.group_order() as u32;
        Ok(self.exp[((n - self.log[a as usize]) % n) as usize])
    }

    pub fn div(&self, a: Element, b: Element) -> Result<Element, GfError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// `alpha^e` for any integer exponent (negative allowed).
    pub fn alpha_pow(&self, e: i64) -> Element {
        let n = self.group_order() as i64;
        self.exp[e.rem_euclid(n) as usize]
    }

    /// Discrete log base alpha; `None` for zero.
    pub fn log(&self, a: Element) -> Option<u32> {
        (a != 0).then(|| self.log[a as usize])
    }

    pub fn pow(&self, a: Element, e: u64) -> Element {
        if e == 0 {
            return 1;
        }
        match self.log(a) {
            None => 0,
            Some(l) => {
                let n = self.group_order() as u64;
                self.exp[((l as u64 * (e % n)) % n) as usize]
            }
        }
    }

    /// Horner evaluation of `p` at `x`.
    pub fn poly_eval(&self, p: &Poly, x: Element) -> Element {
        p.coeffs
            .iter()
            .rev()
            .fold(0, |acc, &c| self.mul(acc, x) ^ c)
    }

    pub fn poly_add(&self, a: &Poly, b: &Poly) -> Poly {
        let len = a.coeffs.len().max(b.coeffs.len());
        let coeffs = (0..len).map(|i| a.coeff(i) ^ b.coeff(i)).collect();
        Poly::new(coeffs)
    }

    pub fn poly_scale(&self, p: &Poly, c: Element) -> Poly {
        Poly::new(p.coeffs.iter().map(|&a| self.mul(a, c)).collect())
    }

    pub fn poly_mul(&self, a: &Poly, b: &Poly) -> Poly {
        if a.is_zero() || b.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![0 as Element; a.coeffs.len() + b.coeffs.len() - 1];
        for (i, &x) in a.coeffs.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.coeffs.iter().enumerate() {
                out[i + j] ^= self.mul(x, y);
            }
        }
        Poly::new(out)
    }

    /// Quotient and remainder of `a / b`.
    pub fn poly_divrem(&self, a: &Poly, b: &Poly) -> Result<(Poly, Poly), GfError> {
        let db = b.degree().ok_or(GfError::DivisionByZero)?;
        let lead_inv = self.inv(b.coeffs[db])?;
        let mut rem = a.coeffs.clone();
        let Some(da) = a.degree() else {
            return Ok((Poly::zero(), Poly::zero()));
        };
        if da < db {
            return Ok((Poly::zero(), a.clone()));
        }
        let mut quot = vec![0 as Element; da - db + 1];
        for i in (db..=da).rev() {
            let c = rem[i];
            if c == 0 {
                continue;
            }
            let f = self.mul(c, lead_inv);
            quot[i - db] = f;
            for (j, &bj) in b.coeffs.iter().enumerate() {
                rem[i - db + j] ^= self.mul(f, bj);
            }
        }
        rem.truncate(db);
        Ok((Poly::new(quot), Poly::new(rem)))
    }

    pub fn poly_mod(&self, a: &Poly, b: &Poly) -> Result<Poly, GfError> {
        self.poly_divrem(a, b).map(|(_, r)| r)
    }

    /// Formal derivative. In characteristic two only odd-degree terms survive.
    pub fn poly_derivative(&self, p: &Poly) -> Poly {
        let coeffs = p
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| if i % 2 == 1 { c } else { 0 })
            .collect();
        Poly::new(coeffs)
    }
}

/// Polynomial over a `Field`, lowest-degree coefficient first.
///
/// Always normalised: the last coefficient is nonzero, and the zero
/// polynomial has no coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Poly {
    coeffs: Vec<Element>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Element>) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Poly { coeffs: vec![1] }
    }

    /// `x^n`.
    pub fn monomial(n: usize, c: Element) -> Self {
        let mut coeffs = vec![0; n + 1];
        coeffs[n] = c;
        Poly::new(coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[Element] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> Element {
        self.coeffs.get(i).copied().unwrap_or(0)
    }

    /// Interprets a binary polynomial bitmask as a polynomial with 0/1
    /// coefficients.
    pub fn from_binary(mask: u64) -> Self {
        Poly::new((0..64).map(|i| ((mask >> i) & 1) as Element).collect())
    }

    /// Inverse of `from_binary`; `None` if any coefficient is not 0 or 1.
    pub fn to_binary(&self) -> Option<u64> {
        let mut m = 0u64;
        for (i, &c) in self.coeffs.iter().enumerate() {
            match c {
                0 => {}
                1 if i < 64 => m |= 1 << i,
                _ => return None,
            }
        }
        Some(m)
    }
}

pub fn binpoly_degree(p: u64) -> Option<u32> {
    (p != 0).then(|| 63 - p.leading_zeros())
}

/// Carry-less product of two binary polynomials. Panics on overflow past
/// degree 63.
pub fn binpoly_mul(a: u64, b: u64) -> u64 {
    if let (Some(da), Some(db)) = (binpoly_degree(a), binpoly_degree(b)) {
        assert!(da + db < 64, "binary polynomial product overflows u64");
    }
    let mut out = 0u64;
    let mut b = b;
    let mut shift = 0;
    while b != 0 {
        if b & 1 != 0 {
            out ^= a << shift;
        }
        b >>= 1;
        shift += 1;
    }
    out
}

/// Quotient and remainder of binary polynomials.
pub fn binpoly_divrem(a: u64, b: u64) -> Result<(u64, u64), GfError> {
    let db = binpoly_degree(b).ok_or(GfError::DivisionByZero)?;
    let mut rem = a;
    let mut quot = 0u64;
    while let Some(dr) = binpoly_degree(rem) {
        if dr < db {
            break;
        }
        quot |= 1 << (dr - db);
        rem ^= b << (dr - db);
    }
    Ok((quot, rem))
}

pub fn binpoly_mod(a: u64, b: u64) -> Result<u64, GfError> {
    binpoly_divrem(a, b).map(|(_, r)| r)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Multiply two field elements as binary polynomials and reduce by the
    /// field polynomial, bit by bit. Independent of the exp/log tables.
    fn mul_oracle(a: u32, b: u32, poly: u32, bits: u32) -> u32 {
        let mut prod = 0u32;
        for i in 0..bits {
            if (b >> i) & 1 == 1 {
                prod ^= a << i;
            }
        }
        for d in (bits..2 * bits).rev() {
            if (prod >> d) & 1 == 1 {
                prod ^= poly << (d - bits);
            }
        }
        prod
    }

    fn oracle_pow(base: u32, e: u32, poly: u32, bits: u32) -> u32 {
        (0..e).fold(1, |acc, _| mul_oracle(acc, base, poly, bits))
    }

    #[test]
    fn octal_23_builds_gf16() {
        let f = Field::new(4, 0o23).unwrap();
        assert_eq!(f.order(), 16);
        assert_eq!(f.group_order(), 15);
        for a in 1..16u16 {
            assert_eq!(f.alpha_pow(f.log(a).unwrap() as i64), a);
        }
    }

    #[test]
    fn all_ones_quartic_is_rejected() {
        // x^4+x^3+x^2+x+1 divides x^5-1, so alpha has order 5.
        let err = Field::new(4, 0b11111).unwrap_err();
        assert_eq!(
            err,
            GfError::NonPrimitivePolynomial {
                poly: 0b11111,
                order: 5,
                expected: 15
            }
        );
        // Brute-force order check against the oracle.
        let order = (1..=15)
            .find(|&e| oracle_pow(2, e, 0b11111, 4) == 1)
            .unwrap();
        assert_eq!(order, 5);
    }

    #[test]
    fn reducible_polynomial_is_rejected() {
        // (x^2+x+1)^2 = x^4+x^2+1
        assert!(matches!(
            Field::new(4, 0b10101),
            Err(GfError::NonPrimitivePolynomial { .. })
        ));
    }

    #[test]
    fn gf4_cycles_through_three_elements() {
        let f = Field::new(2, 0b111).unwrap();
        assert_eq!(f.alpha_pow(0), 1);
        assert_eq!(f.alpha_pow(1), 2);
        assert_eq!(f.alpha_pow(2), 3);
        assert_eq!(f.alpha_pow(3), 1);
        assert_eq!(f.inv(2).unwrap(), 3);
    }

    #[test]
    fn bad_sizes_and_degrees() {
        assert_eq!(Field::new(1, 0b11), Err(GfError::UnsupportedSymbolSize(1)));
        assert_eq!(Field::new(17, 0), Err(GfError::UnsupportedSymbolSize(17)));
        assert_eq!(
            Field::new(4, 0b1011),
            Err(GfError::DegreeMismatch {
                bits: 4,
                poly: 0b1011
            })
        );
    }

    #[test]
    fn default_polynomials_are_primitive() {
        for bits in 2..=16 {
            let f = Field::with_default_poly(bits).unwrap();
            assert_eq!(f.alpha_pow(f.group_order() as i64), 1);
        }
    }

    #[test]
    fn add_identities() {
        let f = Field::with_default_poly(4).unwrap();
        for a in 0..16 {
            assert_eq!(f.add(a, 0), a);
            assert_eq!(f.add(a, a), 0);
        }
        assert_eq!(f.add(0b0011, 0b0101), 0b0110);
    }

    #[test]
    fn mul_identities_and_known_product() {
        let f = Field::new(4, 0o23).unwrap();
        for a in 0..16 {
            assert_eq!(f.mul(a, 1), a);
            assert_eq!(f.mul(a, 0), 0);
        }
        let a3 = oracle_pow(2, 3, 0o23, 4) as u16;
        let a5 = oracle_pow(2, 5, 0o23, 4) as u16;
        let a8 = oracle_pow(2, 8, 0o23, 4) as u16;
        assert_eq!(f.mul(a3, a5), a8);
    }

    #[test]
    fn inverse_examples() {
        let f = Field::new(4, 0o23).unwrap();
        assert_eq!(f.inv(1).unwrap(), 1);
        assert_eq!(f.inv(0), Err(GfError::DivisionByZero));
        let a3 = f.alpha_pow(3);
        let brute = (1..16u16)
            .find(|&x| mul_oracle(a3 as u32, x as u32, 0o23, 4) == 1)
            .unwrap();
        assert_eq!(f.inv(a3).unwrap(), brute);
        assert_eq!(brute, f.alpha_pow(12));
    }

    #[test]
    fn table_mul_matches_oracle_exhaustively() {
        for bits in 2..=4 {
            let f = Field::with_default_poly(bits).unwrap();
            let q = f.order() as u32;
            for a in 0..q {
                for b in 0..q {
                    assert_eq!(
                        f.mul(a as u16, b as u16) as u32,
                        mul_oracle(a, b, f.primitive_poly(), bits)
                    );
                }
            }
        }
    }

    #[test]
    fn distributive_exhaustive_small_fields() {
        for bits in 2..=4 {
            let f = Field::with_default_poly(bits).unwrap();
            let q = f.order() as u16;
            for a in 0..q {
                for b in 0..q {
                    for c in 0..q {
                        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    }
                }
            }
        }
    }

    #[test]
    fn multiplicative_group_is_cyclic() {
        for bits in 2..=10 {
            let f = Field::with_default_poly(bits).unwrap();
            let n = f.group_order() as u32;
            let mut x = 1u16;
            for m in 1..n {
                x = f.mul(x, 2);
                assert_ne!(x, 1, "alpha^{m} = 1 in GF(2^{bits})");
            }
            assert_eq!(f.mul(x, 2), 1);
        }
    }

    #[test]
    fn poly_basics() {
        let f = Field::with_default_poly(4).unwrap();
        let p = Poly::new(vec![3, 0, 7, 1]);
        assert_eq!(f.poly_eval(&Poly::zero(), 9), 0);
        assert_eq!(f.poly_mul(&p, &Poly::one()), p);
        assert_eq!(Poly::new(vec![1, 2, 0, 0]).degree(), Some(1));
        assert!(Poly::new(vec![0, 0]).is_zero());
        assert!(matches!(
            f.poly_mod(&p, &Poly::zero()),
            Err(GfError::DivisionByZero)
        ));
    }

    #[test]
    fn binary_long_division() {
        // (x^4+x+1) mod (x^2+x): schoolbook gives remainder 1, quotient x^2+x+1.
        let (q, r) = binpoly_divrem(0b10011, 0b110).unwrap();
        assert_eq!(r, 0b1);
        assert_eq!(q, 0b111);
        assert_eq!(binpoly_mul(q, 0b110) ^ r, 0b10011);
        assert_eq!(binpoly_divrem(5, 0), Err(GfError::DivisionByZero));
    }

    #[test]
    fn binary_poly_roundtrip_through_field_poly() {
        let p = Poly::from_binary(0o721);
        assert_eq!(p.to_binary(), Some(0o721));
        assert_eq!(Poly::new(vec![2]).to_binary(), None);
    }
}
