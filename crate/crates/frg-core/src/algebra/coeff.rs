//! Exact scalar coefficients for symbolic terms.
//!
//! Perturbative expansions mix rational combinatorial factors with powers of
//! the imaginary unit coming from exponential prefactors, so coefficients live
//! in Q(i): a pair of arbitrary-precision rationals (re + im*i). All arithmetic
//! is exact; nothing in the symbolic layer ever rounds.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg};

/// Exact Gaussian-rational scalar `re + im*i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coeff {
    pub re: BigRational,
    pub im: BigRational,
}

impl Coeff {
    pub fn zero() -> Self {
        Coeff { re: BigRational::zero(), im: BigRational::zero() }
    }

    pub fn one() -> Self {
        Coeff { re: BigRational::one(), im: BigRational::zero() }
    }

    pub fn i() -> Self {
        Coeff { re: BigRational::zero(), im: BigRational::one() }
    }

    pub fn from_int(n: i64) -> Self {
        Coeff { re: BigRational::from_integer(BigInt::from(n)), im: BigRational::zero() }
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "rational denominator must be non-zero");
        Coeff {
            re: BigRational::new(BigInt::from(num), BigInt::from(den)),
            im: BigRational::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    /// `i^n` for signed `n`, using the period-four cycle.
    pub fn i_pow(n: i64) -> Self {
        match n.rem_euclid(4) {
            0 => Coeff::one(),
            1 => Coeff::i(),
            2 => -Coeff::one(),
            _ => -Coeff::i(),
        }
    }

    /// `1/n!` as an exact rational; `n` is small in every truncated expansion.
    pub fn inv_factorial(n: u32) -> Self {
        let mut f = BigInt::one();
        for j in 2..=n {
            f *= BigInt::from(j);
        }
        Coeff { re: BigRational::new(BigInt::one(), f), im: BigRational::zero() }
    }

    fn fmt_rational(r: &BigRational) -> String {
        if r.denom().is_one() {
            format!("{}", r.numer())
        } else {
            format!("{}/{}", r.numer(), r.denom())
        }
    }

    /// Canonical string form: "p/q" for real values, "p/q+r/si" otherwise,
    /// with unit imaginary parts written plain "i". Used verbatim in the JSON
    /// serialization, so it must stay stable.
    pub fn to_display_string(&self) -> String {
        if self.im.is_zero() {
            return Self::fmt_rational(&self.re);
        }
        let mag = self.im.abs();
        let im_part =
            if mag.is_one() { "i".to_string() } else { format!("{}i", Self::fmt_rational(&mag)) };
        let im_signed = if self.im.is_negative() { format!("-{im_part}") } else { im_part };
        if self.re.is_zero() {
            im_signed
        } else if self.im.is_negative() {
            format!("{}{}", Self::fmt_rational(&self.re), im_signed)
        } else {
            format!("{}+{}", Self::fmt_rational(&self.re), im_signed)
        }
    }
}

impl std::str::FromStr for Coeff {
    type Err = String;

    /// Inverse of [`Coeff::to_display_string`].
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        fn rat(s: &str) -> Result<BigRational, String> {
            match s {
                "" | "+" => Ok(BigRational::one()),
                "-" => Ok(-BigRational::one()),
                _ => s.parse::<BigRational>().map_err(|e| format!("bad rational {s:?}: {e}")),
            }
        }
        let s = s.trim();
        if s.is_empty() {
            return Err("empty coefficient".into());
        }
        if let Some(body) = s.strip_suffix('i') {
            // Look for a separating sign that is not the leading sign and not
            // inside a fraction.
            let split = body
                .char_indices()
                .skip(1)
                .find(|&(idx, c)| (c == '+' || c == '-') && !body[..idx].ends_with('/'))
                .map(|(idx, _)| idx);
            return match split {
                Some(idx) => Ok(Coeff { re: rat(&body[..idx])?, im: rat(&body[idx..])? }),
                None => Ok(Coeff { re: BigRational::zero(), im: rat(body)? }),
            };
        }
        Ok(Coeff { re: rat(s)?, im: BigRational::zero() })
    }
}

impl fmt::Debug for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_display_string())
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_display_string())
    }
}

impl Add for Coeff {
    type Output = Coeff;
    fn add(self, rhs: Coeff) -> Coeff {
        Coeff { re: self.re + rhs.re, im: self.im + rhs.im }
    }
}

impl AddAssign for Coeff {
    fn add_assign(&mut self, rhs: Coeff) {
        self.re += rhs.re;
        self.im += rhs.im;
    }
}

impl Neg for Coeff {
    type Output = Coeff;
    fn neg(self) -> Coeff {
        Coeff { re: -self.re, im: -self.im }
    }
}

impl Mul for Coeff {
    type Output = Coeff;
    fn mul(self, rhs: Coeff) -> Coeff {
        &self * &rhs
    }
}

impl Mul for &Coeff {
    type Output = Coeff;
    fn mul(self, rhs: &Coeff) -> Coeff {
        Coeff {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
}

impl MulAssign<&Coeff> for Coeff {
    fn mul_assign(&mut self, rhs: &Coeff) {
        *self = &*self * rhs;
    }
}
