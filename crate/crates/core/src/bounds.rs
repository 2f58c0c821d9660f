//! Closed-form lower bounds on the coherence of `n` unit vectors in `C^m`
//! (or `R^m`), and the composite bound that picks the applicable ones.

use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Field {
    Real,
    Complex,
}

/// Which bound is active in a [`BoundReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Regime {
    /// `n <= m`: an orthonormal subset reaches zero coherence.
    Orthobasis,
    Welch,
    Orthoplex,
    Levenshtein,
    Mukkavilli,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Orthobasis => "orthobasis",
            Regime::Welch => "welch",
            Regime::Orthoplex => "orthoplex",
            Regime::Levenshtein => "levenshtein",
            Regime::Mukkavilli => "mukkavilli",
        }
    }
}

/// Size band of the piecewise composite bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Band {
    /// `n <= m`
    Orthobasis,
    /// `m < n <= m^2`
    Welch,
    /// `m^2 < n <= 2(m^2 - 1)`
    Middle,
    /// `n > 2(m^2 - 1)`
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundReport {
    pub m: usize,
    pub n: usize,
    pub value: f64,
    pub regime: Regime,
    pub band: Band,
    pub welch: f64,
    pub orthoplex: f64,
    pub levenshtein: f64,
    pub mukkavilli: f64,
}

/// Welch (simplex) bound; zero for `n <= m`.
pub fn welch_bound(m: usize, n: usize) -> f64 {
    if n <= m {
        return 0.0;
    }
    let (m, n) = (m as f64, n as f64);
    math::sqrt((n - m) / (m * (n - 1.0)))
}

pub fn orthoplex_bound(m: usize) -> f64 {
    1.0 / math::sqrt(m as f64)
}

/// Kabatiansky-Levenshtein bound, clamped to zero where vacuous.
pub fn levenshtein_bound(m: usize, n: usize, field: Field) -> f64 {
    if n <= m {
        return 0.0;
    }
    let (m, n) = (m as f64, n as f64);
    let radicand = match field {
        Field::Complex => (2.0 * n - m * m - m) / ((m + 1.0) * (n - m)),
        Field::Real => (3.0 * n - m * m - 2.0 * m) / ((m + 2.0) * (n - m)),
    };
    if radicand <= 0.0 {
        0.0
    } else {
        math::sqrt(radicand)
    }
}

/// `max(0, 1 - 2 n^{-1/(m-1)})`; zero for `m < 2`.
pub fn mukkavilli_bound(m: usize, n: usize) -> f64 {
    if m < 2 || n == 0 {
        return 0.0;
    }
    let value = 1.0 - 2.0 * math::powf(n as f64, -1.0 / (m as f64 - 1.0));
    value.max(0.0)
}

/// Whether `n` is small enough for an equiangular system to exist, the
/// necessary condition for reaching the Welch bound.
pub fn welch_applicable(m: usize, n: usize, field: Field) -> bool {
    match field {
        Field::Real => n <= m * (m + 1) / 2,
        Field::Complex => n <= m * m,
    }
}

/// Whether `n` lies in the range where the orthoplex bound can be met.
pub fn orthoplex_applicable(m: usize, n: usize, field: Field) -> bool {
    match field {
        Field::Real => n > m * (m + 1) / 2 && n <= (m + 1) * (m + 2),
        Field::Complex => n > m * m && n + 2 <= 2 * m * m,
    }
}

/// Composite lower bound for complex codes.
pub fn composite_bound_complex(m: usize, n: usize) -> BoundReport {
    let welch = welch_bound(m, n);
    let orthoplex = orthoplex_bound(m);
    let levenshtein = levenshtein_bound(m, n, Field::Complex);
    let mukkavilli = mukkavilli_bound(m, n);
    let mut report = BoundReport {
        m,
        n,
        value: 0.0,
        regime: Regime::Orthobasis,
        band: Band::Orthobasis,
        welch,
        orthoplex,
        levenshtein,
        mukkavilli,
    };
    if n <= m {
        return report;
    }
    if n <= m * m {
        report.band = Band::Welch;
        report.regime = Regime::Welch;
        report.value = welch;
        return report;
    }
    let candidates: &[(Regime, f64)] = if n + 2 <= 2 * m * m {
        report.band = Band::Middle;
        &[(Regime::Orthoplex, orthoplex), (Regime::Levenshtein, levenshtein), (Regime::Mukkavilli, mukkavilli)]
    } else {
        report.band = Band::Large;
        &[(Regime::Levenshtein, levenshtein), (Regime::Mukkavilli, mukkavilli)]
    };
    // first maximum wins ties
    let (regime, value) = candidates
        .iter()
        .copied()
        .fold((candidates[0].0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
    report.regime = regime;
    report.value = value;
    report
}

/// RIP constant `(k - 1) mu` of order `k` implied by coherence `mu`.
pub fn rip_constant_from_coherence(k: usize, mu: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("RIP order must be at least 1"));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidConfig("coherence must lie in [0, 1]"));
    }
    if k as f64 * mu >= 1.0 {
        return Err(Error::OrderTooLarge { k, mu });
    }
    Ok((k as f64 - 1.0) * mu)
}
