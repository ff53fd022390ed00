use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// A real number stored as a sign and the natural log of its magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: i8,
    pub logmag: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog { sign: 0, logmag: f64::NEG_INFINITY };
    pub const ONE: SignedLog = SignedLog { sign: 1, logmag: 0.0 };

    pub fn new(sign: i8, logmag: f64) -> Self {
        if sign == 0 || logmag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            SignedLog { sign: sign.signum(), logmag }
        }
    }

    /// Positive number exp(logmag).
    pub fn from_log(logmag: f64) -> Self {
        Self::new(1, logmag)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            SignedLog { sign: if x > 0.0 { 1 } else { -1 }, logmag: x.abs().ln() }
        }
    }

    pub fn to_f64(self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.logmag.exp()
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn abs(self) -> Self {
        if self.sign == 0 {
            self
        } else {
            SignedLog { sign: 1, logmag: self.logmag }
        }
    }

    /// Multiply by exp(d).
    pub fn scale_log(self, d: f64) -> Self {
        if self.sign == 0 {
            self
        } else {
            SignedLog { sign: self.sign, logmag: self.logmag + d }
        }
    }

    pub fn recip(self) -> Self {
        SignedLog { sign: self.sign, logmag: -self.logmag }
    }

    /// exp(logmag - shift) with sign; the shift keeps the result in range.
    pub fn to_f64_shifted(self, shift: f64) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * (self.logmag - shift).exp()
        }
    }
}

impl Mul for SignedLog {
    type Output = SignedLog;
    fn mul(self, rhs: SignedLog) -> SignedLog {
        if self.sign == 0 || rhs.sign == 0 {
            SignedLog::ZERO
        } else {
            SignedLog { sign: self.sign * rhs.sign, logmag: self.logmag + rhs.logmag }
        }
    }
}

impl Div for SignedLog {
    type Output = SignedLog;
    fn div(self, rhs: SignedLog) -> SignedLog {
        if self.sign == 0 {
            SignedLog::ZERO
        } else if rhs.sign == 0 {
            SignedLog { sign: self.sign, logmag: f64::INFINITY }
        } else {
            SignedLog { sign: self.sign * rhs.sign, logmag: self.logmag - rhs.logmag }
        }
    }
}

impl Neg for SignedLog {
    type Output = SignedLog;
    fn neg(self) -> SignedLog {
        SignedLog { sign: -self.sign, logmag: self.logmag }
    }
}

impl Add for SignedLog {
    type Output = SignedLog;
    fn add(self, rhs: SignedLog) -> SignedLog {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        let (big, small) = if self.logmag >= rhs.logmag { (self, rhs) } else { (rhs, self) };
        let r = (small.logmag - big.logmag).exp();
        if big.sign == small.sign {
            SignedLog { sign: big.sign, logmag: big.logmag + r.ln_1p() }
        } else if r == 1.0 {
            SignedLog::ZERO
        } else {
            SignedLog { sign: big.sign, logmag: big.logmag + (-r).ln_1p() }
        }
    }
}

impl Sub for SignedLog {
    type Output = SignedLog;
    fn sub(self, rhs: SignedLog) -> SignedLog {
        self + (-rhs)
    }
}

impl PartialOrd for SignedLog {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let a = f64::from(self.sign);
        let b = f64::from(other.sign);
        if self.sign != other.sign {
            return a.partial_cmp(&b);
        }
        match self.sign {
            0 => Some(Ordering::Equal),
            1 => self.logmag.partial_cmp(&other.logmag),
            _ => other.logmag.partial_cmp(&self.logmag),
        }
    }
}

/// Neumaier compensated sum.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Accumulates signed-log terms and sums them after factoring out the largest.
#[derive(Debug, Clone, Default)]
pub struct LogSum {
    terms: Vec<SignedLog>,
}

impl LogSum {
    pub fn new() -> Self {
        LogSum { terms: Vec::new() }
    }

    pub fn with_capacity(n: usize) -> Self {
        LogSum { terms: Vec::with_capacity(n) }
    }

    pub fn push(&mut self, t: SignedLog) {
        if t.sign != 0 {
            self.terms.push(t);
        }
    }

    /// Largest term magnitude (log), or -inf when empty.
    pub fn max_log(&self) -> f64 {
        self.terms.iter().map(|t| t.logmag).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Log of the sum of absolute values.
    pub fn abs_log(&self) -> f64 {
        let m = self.max_log();
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + self.terms.iter().map(|t| (t.logmag - m).exp()).sum::<f64>().ln()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn sum(&self) -> SignedLog {
        let m = self.max_log();
        if m == f64::NEG_INFINITY {
            return SignedLog::ZERO;
        }
        let s = neumaier_sum(self.terms.iter().map(|t| t.to_f64_shifted(m)));
        SignedLog::from_f64(s).scale_log(m)
    }
}
