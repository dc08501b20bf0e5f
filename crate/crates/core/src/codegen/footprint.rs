use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model_ir::NetworkGraph;

pub const SUPPORTED_PARAM_BITS: [u32; 3] = [8, 16, 32];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("flash size must be a positive number of bits")]
    FlashBits,
    #[error("gamma must lie in (0, 1], got {0}")]
    Gamma(String),
    #[error("bits per parameter must be 8, 16 or 32, got {0}")]
    BitsPerParam(u32),
}

/// Fraction of flash available for parameters, held as an exact rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Gamma {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Gamma {
    pub const ONE: Gamma = Gamma { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Self, DomainError> {
        if den == 0 || num == 0 || num > den {
            return Err(DomainError::Gamma(format!("{num}/{den}")));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn numerator(self) -> u64 {
        self.num
    }

    pub fn denominator(self) -> u64 {
        self.den
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Accepts `a/b` or a plain decimal such as `0.75`; decimals are read exactly.
impl FromStr for Gamma {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DomainError::Gamma(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return Gamma::new(n, d).map_err(|_| bad());
        }
        let (int_part, frac_part) = s.split_once('.').unwrap_or((s, ""));
        let digits_ok = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if (int_part.is_empty() && frac_part.is_empty()) || !digits_ok(int_part) || !digits_ok(frac_part) {
            return Err(bad());
        }
        let frac_part = frac_part.trim_end_matches('0');
        if frac_part.len() > 18 {
            return Err(bad());
        }
        let den = 10u64.pow(frac_part.len() as u32);
        let int: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| bad())?
        };
        let frac: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| bad())?
        };
        let num = int.checked_mul(den).and_then(|v| v.checked_add(frac)).ok_or_else(bad)?;
        Gamma::new(num, den).map_err(|_| bad())
    }
}

/// floor(gamma * flash_bits / bits_per_param), in exact integer arithmetic.
pub fn max_params(flash_bits: u64, gamma: Gamma, bits_per_param: u32) -> u64 {
    let num = gamma.num as u128 * flash_bits as u128;
    let den = gamma.den as u128 * bits_per_param as u128;
    (num / den) as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FootprintReport {
    pub param_count: u64,
    pub bits_per_param: u32,
    pub flash_bits: u64,
    pub gamma: Gamma,
    pub max_params: u64,
    /// Bytes of flash the parameters occupy at `bits_per_param`.
    pub weight_bytes: u64,
    /// Bytes of RAM for the per-layer static float buffers.
    pub buffer_bytes: u64,
    pub fits: bool,
}

impl fmt::Display for FootprintReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "parameters      {}", self.param_count)?;
        writeln!(f, "bits/parameter  {}", self.bits_per_param)?;
        writeln!(f, "flash bits      {}", self.flash_bits)?;
        writeln!(f, "gamma           {}", self.gamma)?;
        writeln!(f, "max parameters  {}", self.max_params)?;
        writeln!(f, "weight bytes    {}", self.weight_bytes)?;
        writeln!(f, "buffer bytes    {}", self.buffer_bytes)?;
        write!(f, "verdict         {}", if self.fits { "fits" } else { "does not fit" })
    }
}

/// Checks the parameter budget of `graph` against a flash size.
pub fn footprint(
    graph: &NetworkGraph,
    flash_bits: u64,
    gamma: Gamma,
    bits_per_param: u32,
) -> Result<FootprintReport, DomainError> {
    let param_count = graph.param_count() as u64;
    let buffer_floats: usize = graph.shapes().iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    plan(param_count, buffer_floats as u64 * 4, flash_bits, gamma, bits_per_param)
}

/// Footprint verdict for a bare parameter count.
pub fn plan(
    param_count: u64,
    buffer_bytes: u64,
    flash_bits: u64,
    gamma: Gamma,
    bits_per_param: u32,
) -> Result<FootprintReport, DomainError> {
    if flash_bits == 0 {
        return Err(DomainError::FlashBits);
    }
    if !SUPPORTED_PARAM_BITS.contains(&bits_per_param) {
        return Err(DomainError::BitsPerParam(bits_per_param));
    }
    let max_params = max_params(flash_bits, gamma, bits_per_param);
    Ok(FootprintReport {
        param_count,
        bits_per_param,
        flash_bits,
        gamma,
        max_params,
        weight_bytes: param_count * (bits_per_param as u64 / 8),
        buffer_bytes,
        fits: param_count <= max_params,
    })
}
