use rand::Rng;

use crate::error::{Error, Result};

/// The Mersenne prime 2^61 − 1, the default modulus of the family.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// One member of the multiply-mod-prime family
/// `h(x) = ((a·x + b) mod prime) mod range`.
///
/// For a prime larger than the key domain, drawing `a` uniformly from
/// `[1, prime)` and `b` from `[0, prime)` gives a 2-universal family: two
/// distinct keys collide with probability at most about `1/range`. The
/// residual bias of the final `mod range` is of order `range/prime` and is
/// negligible for the 2^61 − 1 modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HashFunctionSpec {
    a: u64,
    b: u64,
    prime: u64,
    range: u64,
}

impl HashFunctionSpec {
    /// Validate and build a spec. `prime` must pass a deterministic
    /// Miller–Rabin test.
    pub fn new(a: u64, b: u64, prime: u64, range: u64) -> Result<Self> {
        if range == 0 {
            return Err(Error::config("hash range must be positive"));
        }
        if !is_prime(prime) {
            return Err(Error::config(format!("hash modulus {prime} is not prime")));
        }
        if a == 0 || a >= prime {
            return Err(Error::config(format!("hash multiplier {a} not in (0, {prime})")));
        }
        if b >= prime {
            return Err(Error::config(format!("hash offset {b} not in [0, {prime})")));
        }
        Ok(HashFunctionSpec { a, b, prime, range })
    }

    /// Draw a random member with modulus 2^61 − 1.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, range: u64) -> Result<Self> {
        if range == 0 {
            return Err(Error::config("hash range must be positive"));
        }
        Ok(HashFunctionSpec {
            a: rng.gen_range(1..MERSENNE_61),
            b: rng.gen_range(0..MERSENNE_61),
            prime: MERSENNE_61,
            range,
        })
    }

    /// The identity map on `[0, range)` (a = 1, b = 0). Useful for building
    /// injective schemes.
    pub fn identity(range: u64) -> Result<Self> {
        Self::new(1, 0, MERSENNE_61, range)
    }

    #[inline]
    pub fn eval(&self, x: u64) -> u64 {
        let v = (self.a as u128 * x as u128 + self.b as u128) % self.prime as u128;
        v as u64 % self.range
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn range(&self) -> u64 {
        self.range
    }

    /// True when `prime` exceeds the key domain `[0, domain)`.
    pub fn covers_domain(&self, domain: u64) -> bool {
        self.prime > domain
    }
}

/// Deterministic primality test. Uses trial division below 2^32 and a
/// deterministic Miller–Rabin base set above it.
pub(crate) fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    let mulmod = |x: u64, y: u64| ((x as u128 * y as u128) % n as u128) as u64;
    let powmod = |mut base: u64, mut exp: u64| {
        let mut acc = 1u64;
        base %= n;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = mulmod(acc, base);
            }
            base = mulmod(base, base);
            exp >>= 1;
        }
        acc
    };
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn eval_stays_in_range() {
        let mut r = rng::stream(1, &[]);
        for range in [1u64, 2, 7, 250, 4000] {
            let h = HashFunctionSpec::random(&mut r, range).unwrap();
            for x in 0..2000 {
                assert!(h.eval(x) < range);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HashFunctionSpec::new(0, 0, 13, 4).is_err());
        assert!(HashFunctionSpec::new(13, 0, 13, 4).is_err());
        assert!(HashFunctionSpec::new(1, 13, 13, 4).is_err());
        assert!(HashFunctionSpec::new(1, 0, 12, 4).is_err());
        assert!(HashFunctionSpec::new(1, 0, 13, 0).is_err());
        assert!(HashFunctionSpec::new(3, 5, 13, 4).is_ok());
    }

    #[test]
    fn hand_evaluated() {
        // ((3·4 + 5) mod 13) mod 4 = (17 mod 13) mod 4 = 0
        let h = HashFunctionSpec::new(3, 5, 13, 4).unwrap();
        assert_eq!(h.eval(4), 0);
        assert_eq!(h.eval(1), 0); // 8 mod 4
        assert_eq!(h.eval(2), 3); // 11 mod 4
    }

    #[test]
    fn primality() {
        assert!(is_prime(MERSENNE_61));
        assert!(is_prime(131_101));
        assert!(!is_prime(131_073)); // 3 · 43691
        assert!(!is_prime((1u64 << 61) + 1));
        let small: Vec<u64> = (0..30).filter(|&n| is_prime(n)).collect();
        assert_eq!(small, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
    }

    #[test]
    fn identity_is_identity() {
        let h = HashFunctionSpec::identity(100).unwrap();
        assert!((0..100).all(|x| h.eval(x) == x));
    }
}
