use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which of the two inputs a share or generator row belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    A,
    B,
}

/// Scheme tag byte used in share headers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum SchemeTag {
    MatDot = 1,
    Gasp = 2,
}

impl SchemeTag {
    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            1 => Ok(SchemeTag::MatDot),
            2 => Ok(SchemeTag::Gasp),
            other => Err(Error::Malformed(format!("unknown scheme tag {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeTag::MatDot => "matdot",
            SchemeTag::Gasp => "gasp",
        }
    }
}

/// Inner-product partition code: `K = 2p + 2X − 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatDotParams {
    pub p: usize,
    pub x: usize,
    pub n_servers: usize,
}

/// Outer-product partition code: `K = 2mn + 2X − 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GaspParams {
    pub m: usize,
    pub n: usize,
    pub x: usize,
    pub n_servers: usize,
}

impl MatDotParams {
    pub fn new(p: usize, x: usize, n_servers: usize) -> Result<Self> {
        let params = Self { p, x, n_servers };
        params.validate()?;
        Ok(params)
    }

    /// Uses exactly the recovery threshold as the server count.
    pub fn minimal(p: usize, x: usize) -> Result<Self> {
        Self::new(p, x, 2 * p + 2 * x - 1)
    }

    pub fn recovery_threshold(&self) -> usize {
        2 * self.p + 2 * self.x - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidParams("p must be >= 1".into()));
        }
        if self.x == 0 {
            return Err(Error::InvalidParams("collusion tolerance X must be >= 1".into()));
        }
        let k = self.recovery_threshold();
        if self.n_servers < k {
            return Err(Error::InvalidParams(format!(
                "N = {} is below the recovery threshold K = {k}",
                self.n_servers
            )));
        }
        Ok(())
    }
}

impl GaspParams {
    pub fn new(m: usize, n: usize, x: usize, n_servers: usize) -> Result<Self> {
        let params = Self { m, n, x, n_servers };
        params.validate()?;
        Ok(params)
    }

    pub fn minimal(m: usize, n: usize, x: usize) -> Result<Self> {
        Self::new(m, n, x, 2 * m * n + 2 * x - 1)
    }

    pub fn recovery_threshold(&self) -> usize {
        2 * self.m * self.n + 2 * self.x - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidParams("m and n must be >= 1".into()));
        }
        if self.x == 0 {
            return Err(Error::InvalidParams("collusion tolerance X must be >= 1".into()));
        }
        let k = self.recovery_threshold();
        if self.n_servers < k {
            return Err(Error::InvalidParams(format!(
                "N = {} is below the recovery threshold K = {k}",
                self.n_servers
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum SchemeParams {
    MatDot(MatDotParams),
    Gasp(GaspParams),
}

impl From<MatDotParams> for SchemeParams {
    fn from(p: MatDotParams) -> Self {
        SchemeParams::MatDot(p)
    }
}

impl From<GaspParams> for SchemeParams {
    fn from(p: GaspParams) -> Self {
        SchemeParams::Gasp(p)
    }
}

impl SchemeParams {
    pub fn tag(&self) -> SchemeTag {
        match self {
            SchemeParams::MatDot(_) => SchemeTag::MatDot,
            SchemeParams::Gasp(_) => SchemeTag::Gasp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SchemeParams::MatDot(p) => p.validate(),
            SchemeParams::Gasp(p) => p.validate(),
        }
    }

    pub fn recovery_threshold(&self) -> usize {
        match self {
            SchemeParams::MatDot(p) => p.recovery_threshold(),
            SchemeParams::Gasp(p) => p.recovery_threshold(),
        }
    }

    pub fn n_servers(&self) -> usize {
        match self {
            SchemeParams::MatDot(p) => p.n_servers,
            SchemeParams::Gasp(p) => p.n_servers,
        }
    }

    pub fn x(&self) -> usize {
        match self {
            SchemeParams::MatDot(p) => p.x,
            SchemeParams::Gasp(p) => p.x,
        }
    }

    /// Same scheme with a different server count.
    pub fn with_servers(&self, n_servers: usize) -> Result<Self> {
        let out = match *self {
            SchemeParams::MatDot(p) => SchemeParams::MatDot(MatDotParams { n_servers, ..p }),
            SchemeParams::Gasp(p) => SchemeParams::Gasp(GaspParams { n_servers, ..p }),
        };
        out.validate()?;
        Ok(out)
    }

    /// `p` for MatDot, `mn` for GASP: the number of data blocks multiplied.
    pub fn p_or_mn(&self) -> usize {
        match self {
            SchemeParams::MatDot(p) => p.p,
            SchemeParams::Gasp(p) => p.m * p.n,
        }
    }

    /// Exponents of the data terms in the encoding polynomial of `side`, in
    /// block order.
    pub fn data_exponents(&self, side: Side) -> Vec<usize> {
        match (self, side) {
            (SchemeParams::MatDot(p), Side::A) => (0..p.p).collect(),
            (SchemeParams::MatDot(p), Side::B) => (0..p.p).map(|j| p.p - 1 - j).collect(),
            (SchemeParams::Gasp(p), Side::A) => (0..p.m).collect(),
            (SchemeParams::Gasp(p), Side::B) => (0..p.n).map(|j| p.m * j).collect(),
        }
    }

    /// Exponents of the mask terms; identical for both sides.
    pub fn noise_exponents(&self) -> Vec<usize> {
        let offset = self.p_or_mn();
        (0..self.x()).map(|k| offset + k).collect()
    }

    /// Number of entries in one encoded block of `side` for inputs of shape
    /// `t×s` and `s×r`.
    pub fn block_elements(&self, side: Side, (t, s, r): (usize, usize, usize)) -> usize {
        match (self, side) {
            (SchemeParams::MatDot(p), Side::A) => t * s / p.p,
            (SchemeParams::MatDot(p), Side::B) => s * r / p.p,
            (SchemeParams::Gasp(p), Side::A) => t * s / p.m,
            (SchemeParams::Gasp(p), Side::B) => s * r / p.n,
        }
    }

    /// Checks that `t×s` and `s×r` inputs can be partitioned.
    pub fn check_dims(&self, (t, s, r): (usize, usize, usize)) -> Result<()> {
        match self {
            SchemeParams::MatDot(p) => {
                if s % p.p != 0 {
                    return Err(Error::NotDivisible { dim: "s", size: s, parts: p.p });
                }
            }
            SchemeParams::Gasp(p) => {
                if t % p.m != 0 {
                    return Err(Error::NotDivisible { dim: "t", size: t, parts: p.m });
                }
                if r % p.n != 0 {
                    return Err(Error::NotDivisible { dim: "r", size: r, parts: p.n });
                }
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match self {
            SchemeParams::MatDot(p) => format!("matdot(p={}, X={}, N={})", p.p, p.x, p.n_servers),
            SchemeParams::Gasp(p) => {
                format!("gasp(m={}, n={}, X={}, N={})", p.m, p.n, p.x, p.n_servers)
            }
        }
    }
}
