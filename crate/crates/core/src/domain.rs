//! Discrete value domains, priors, virtual values and reserve prices.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{ParseRationalError, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("a domain needs at least two ticks, got {0}")]
    TooFewTicks(usize),
    #[error("the lowest tick must be 0, got {0}")]
    LowestNotZero(Rational),
    #[error("ticks must be strictly increasing (position {0})")]
    NotIncreasing(usize),
    #[error("tick {0} lies outside [0, 1]")]
    OutOfRange(Rational),
    #[error("{0} is not a tick of the domain")]
    NotATick(Rational),
    #[error("{0} is the top tick and has no successor")]
    NoSuccessor(Rational),
    #[error("pmf has {got} entries but the domain has {expected} ticks")]
    PmfLength { expected: usize, got: usize },
    #[error("negative probability at tick index {0}")]
    NegativeProbability(usize),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(Rational),
    #[error("zero density at tick index {0}; the virtual value is undefined there")]
    ZeroDensity(usize),
    #[error("tick index {0} out of bounds")]
    IndexOutOfBounds(usize),
    #[error(transparent)]
    Parse(#[from] ParseRationalError),
    #[error("malformed domain document: {0}")]
    Json(String),
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

/// A finite, normalized value space `0 = θ¹ < θ² < … < θᵀ ≤ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValueDomain {
    ticks: Vec<Rational>,
}

impl ValueDomain {
    pub fn new(ticks: Vec<Rational>) -> Result<Self, DomainError> {
        if ticks.len() < 2 {
            return Err(DomainError::TooFewTicks(ticks.len()));
        }
        if !ticks[0].is_zero() {
            return Err(DomainError::LowestNotZero(ticks[0].clone()));
        }
        for (i, pair) in ticks.windows(2).enumerate() {
            if pair[0] >= pair[1] {
                return Err(DomainError::NotIncreasing(i + 1));
            }
        }
        let one = Rational::one();
        if let Some(bad) = ticks.iter().find(|t| t.is_negative() || **t > one) {
            return Err(DomainError::OutOfRange(bad.clone()));
        }
        Ok(ValueDomain { ticks })
    }

    /// Evenly spaced grid `{0, 1/(T-1), …, 1}` with `T` ticks.
    pub fn grid(num_ticks: usize) -> Result<Self, DomainError> {
        if num_ticks < 2 {
            return Err(DomainError::TooFewTicks(num_ticks));
        }
        let last = (num_ticks - 1) as i64;
        ValueDomain::new((0..=last).map(|i| Rational::new(i, last)).collect())
    }

    pub fn ticks(&self) -> &[Rational] {
        &self.ticks
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn value(&self, index: usize) -> &Rational {
        &self.ticks[index]
    }

    pub fn top(&self) -> &Rational {
        self.ticks.last().expect("domain has at least two ticks")
    }

    pub fn index_of(&self, v: &Rational) -> Option<usize> {
        self.ticks.binary_search(v).ok()
    }

    pub fn contains(&self, v: &Rational) -> bool {
        self.index_of(v).is_some()
    }

    /// Largest gap between adjacent ticks.
    pub fn tick(&self) -> Rational {
        self.ticks
            .windows(2)
            .map(|w| &w[1] - &w[0])
            .max()
            .expect("domain has at least two ticks")
    }

    pub fn next_tick(&self, v: &Rational) -> Result<Rational, DomainError> {
        let i = self
            .index_of(v)
            .ok_or_else(|| DomainError::NotATick(v.clone()))?;
        self.ticks
            .get(i + 1)
            .cloned()
            .ok_or_else(|| DomainError::NoSuccessor(v.clone()))
    }
}

/// A prior over the ticks of a [`ValueDomain`] with exact probabilities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscreteDistribution {
    domain: ValueDomain,
    pmf: Vec<Rational>,
}

impl DiscreteDistribution {
    pub fn new(domain: ValueDomain, pmf: Vec<Rational>) -> Result<Self, DomainError> {
        if pmf.len() != domain.len() {
            return Err(DomainError::PmfLength {
                expected: domain.len(),
                got: pmf.len(),
            });
        }
        if let Some(i) = pmf.iter().position(Rational::is_negative) {
            return Err(DomainError::NegativeProbability(i));
        }
        let total: Rational = pmf.iter().sum();
        if total != Rational::one() {
            return Err(DomainError::NotNormalized(total));
        }
        Ok(DiscreteDistribution { domain, pmf })
    }

    pub fn uniform(domain: ValueDomain) -> Self {
        let n = domain.len() as i64;
        let pmf = vec![Rational::new(1, n); domain.len()];
        DiscreteDistribution { domain, pmf }
    }

    pub fn domain(&self) -> &ValueDomain {
        &self.domain
    }

    pub fn pmf(&self) -> &[Rational] {
        &self.pmf
    }

    pub fn density(&self, i: usize) -> &Rational {
        &self.pmf[i]
    }

    /// `F(θⁱ) = Σ_{j ≤ i} f(θʲ)`.
    pub fn cdf(&self, i: usize) -> Rational {
        self.pmf[..=i].iter().sum()
    }

    /// Myerson virtual value with the forward gap; the top tick maps to itself.
    pub fn virtual_value(&self, i: usize) -> Result<Rational, DomainError> {
        let last = self.domain.len() - 1;
        if i > last {
            return Err(DomainError::IndexOutOfBounds(i));
        }
        if i == last {
            return Ok(self.domain.top().clone());
        }
        let f = &self.pmf[i];
        if f.is_zero() {
            return Err(DomainError::ZeroDensity(i));
        }
        let theta = self.domain.value(i);
        let gap = self.domain.value(i + 1) - theta;
        let tail = Rational::one() - self.cdf(i);
        Ok(theta - &(tail / f * gap))
    }

    pub fn virtual_values(&self) -> Result<Vec<Rational>, DomainError> {
        (0..self.domain.len())
            .map(|i| self.virtual_value(i))
            .collect()
    }

    pub fn is_regular(&self) -> Result<bool, DomainError> {
        let phi = self.virtual_values()?;
        Ok(phi.windows(2).all(|w| w[0] < w[1]))
    }

    /// Index of the smallest tick with a nonnegative virtual value.
    ///
    /// Zero-density ticks are skipped as long as the tick eventually returned
    /// carries positive density.
    pub fn reserve_index(&self) -> Result<usize, DomainError> {
        let last = self.domain.len() - 1;
        let mut first_skipped = None;
        for i in 0..=last {
            let phi = match self.virtual_value(i) {
                Ok(phi) => phi,
                Err(DomainError::ZeroDensity(j)) => {
                    first_skipped.get_or_insert(j);
                    continue;
                }
                Err(e) => return Err(e),
            };
            if !phi.is_negative() {
                if let Some(j) = first_skipped {
                    if self.pmf[i].is_zero() {
                        return Err(DomainError::ZeroDensity(j));
                    }
                }
                return Ok(i);
            }
        }
        unreachable!("the top tick always has a nonnegative virtual value")
    }

    pub fn reserve(&self) -> Result<Rational, DomainError> {
        Ok(self.domain.value(self.reserve_index()?).clone())
    }
}

#[derive(Debug, Deserialize)]
struct DomainDoc {
    ticks: Vec<String>,
    #[serde(default)]
    pmf: Option<Vec<String>>,
}

/// Parses `{"ticks": [...], "pmf": [...]}`. A missing pmf means uniform.
pub fn parse_document(json: &str) -> Result<DiscreteDistribution, DomainError> {
    let doc: DomainDoc =
        serde_json::from_str(json).map_err(|e| DomainError::Json(e.to_string()))?;
    let ticks = doc
        .ticks
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<Rational>, _>>()?;
    let domain = ValueDomain::new(ticks)?;
    match doc.pmf {
        None => Ok(DiscreteDistribution::uniform(domain)),
        Some(pmf) => {
            let pmf = pmf
                .iter()
                .map(|s| s.parse())
                .collect::<Result<Vec<Rational>, _>>()?;
            DiscreteDistribution::new(domain, pmf)
        }
    }
}

pub fn load_document(path: &Path) -> Result<DiscreteDistribution, DomainError> {
    let text = std::fs::read_to_string(path).map_err(|e| DomainError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_document(&text)
}

/// Serializes a distribution into the same document shape [`parse_document`] reads.
pub fn to_document(dist: &DiscreteDistribution) -> String {
    let doc = serde_json::json!({
        "ticks": dist.domain().ticks().iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        "pmf": dist.pmf().iter().map(|p| p.to_string()).collect::<Vec<_>>(),
    });
    doc.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn dom(ticks: &[&str]) -> ValueDomain {
        ValueDomain::new(ticks.iter().map(|s| rat(s)).collect()).unwrap()
    }

    fn dist(ticks: &[&str], pmf: &[&str]) -> DiscreteDistribution {
        DiscreteDistribution::new(dom(ticks), pmf.iter().map(|s| rat(s)).collect()).unwrap()
    }

    #[test]
    fn tick_is_max_gap() {
        assert_eq!(dom(&["0", "0.1", "0.25", "1.0"]).tick(), rat("0.75"));
        assert_eq!(dom(&["0", "0.5", "1.0"]).tick(), rat("0.5"));
        assert_eq!(dom(&["0", "1"]).tick(), rat("1"));
    }

    #[test]
    fn next_tick_cases() {
        let g = ValueDomain::grid(11).unwrap();
        assert_eq!(g.next_tick(&rat("0.3")).unwrap(), rat("0.4"));
        let d = dom(&["0", "0.5", "1.0"]);
        assert_eq!(d.next_tick(&rat("0.5")).unwrap(), rat("1"));
        assert_eq!(
            d.next_tick(&rat("1.0")),
            Err(DomainError::NoSuccessor(rat("1")))
        );
        assert_eq!(
            d.next_tick(&rat("0.3")),
            Err(DomainError::NotATick(rat("0.3")))
        );
    }

    #[test]
    fn rejects_invalid_domains() {
        assert!(matches!(
            ValueDomain::new(vec![rat("0")]),
            Err(DomainError::TooFewTicks(1))
        ));
        assert!(matches!(
            ValueDomain::new(vec![rat("0.1"), rat("1")]),
            Err(DomainError::LowestNotZero(_))
        ));
        assert!(matches!(
            ValueDomain::new(vec![rat("0"), rat("0.5"), rat("0.5")]),
            Err(DomainError::NotIncreasing(2))
        ));
        assert!(matches!(
            ValueDomain::new(vec![rat("0"), rat("1.5")]),
            Err(DomainError::OutOfRange(_))
        ));
    }

    #[test]
    fn rejects_invalid_pmf() {
        let d = dom(&["0", "1"]);
        assert!(matches!(
            DiscreteDistribution::new(d.clone(), vec![rat("1")]),
            Err(DomainError::PmfLength { .. })
        ));
        assert!(matches!(
            DiscreteDistribution::new(d.clone(), vec![rat("0.5"), rat("0.4")]),
            Err(DomainError::NotNormalized(_))
        ));
        assert!(matches!(
            DiscreteDistribution::new(d, vec![rat("1.5"), rat("-0.5")]),
            Err(DomainError::NegativeProbability(1))
        ));
    }

    #[test]
    fn virtual_values_uniform_three_ticks() {
        let u = DiscreteDistribution::uniform(dom(&["0", "0.5", "1.0"]));
        assert_eq!(u.virtual_value(0).unwrap(), rat("-1"));
        assert_eq!(u.virtual_value(1).unwrap(), rat("0"));
        assert_eq!(u.virtual_value(2).unwrap(), rat("1"));
        assert!(u.is_regular().unwrap());
        assert_eq!(u.reserve().unwrap(), rat("0.5"));
    }

    #[test]
    fn skewed_low_mass_is_regular() {
        // φ = (0 - 0.02/0.98 * 0.5, 0.5 - 0.01/0.01 * 0.5, 1) = (-1/98, 0, 1)
        let d = dist(&["0", "0.5", "1.0"], &["0.98", "0.01", "0.01"]);
        assert_eq!(
            d.virtual_values().unwrap(),
            vec![rat("-1/98"), rat("0"), rat("1")]
        );
        assert!(d.is_regular().unwrap());
        assert_eq!(d.reserve().unwrap(), rat("0.5"));
    }

    #[test]
    fn zero_density_errors_and_reserve_skips() {
        let point = dist(&["0", "1.0"], &["0", "1"]);
        assert_eq!(point.virtual_value(0), Err(DomainError::ZeroDensity(0)));
        assert_eq!(point.is_regular(), Err(DomainError::ZeroDensity(0)));
        assert_eq!(point.reserve().unwrap(), rat("1"));
        // the middle tick is skipped; the top tick carries mass
        let d = dist(&["0", "0.5", "1"], &["0.5", "0", "0.5"]);
        assert_eq!(d.virtual_value(0).unwrap(), rat("-0.5"));
        assert_eq!(d.reserve(), Ok(rat("1")));
        let head = dist(&["0", "0.5", "1"], &["1", "0", "0"]);
        // φ(0) = 0 - 0/1 * 0.5 = 0
        assert_eq!(head.reserve(), Ok(rat("0")));
    }

    #[test]
    fn uniform_two_ticks_reserve_is_top() {
        let u = DiscreteDistribution::uniform(dom(&["0", "1.0"]));
        assert_eq!(u.virtual_value(0).unwrap(), rat("-1"));
        assert_eq!(u.reserve().unwrap(), rat("1"));
    }

    #[test]
    fn document_parsing() {
        let d = parse_document(r#"{"ticks": ["0", "1/2", "1.0"], "pmf": ["0.5", "1/4", "0.25"]}"#)
            .unwrap();
        assert_eq!(d.domain().ticks()[1], rat("1/2"));
        assert_eq!(d.pmf()[0], rat("1/2"));
        let back = parse_document(&to_document(&d)).unwrap();
        assert_eq!(back, d);
        let u = parse_document(r#"{"ticks": ["0", "1"]}"#).unwrap();
        assert_eq!(u.pmf(), &[rat("1/2"), rat("1/2")]);
        assert!(parse_document(r#"{"ticks": ["0", "x"]}"#).is_err());
        assert!(parse_document("not json").is_err());
    }
}
