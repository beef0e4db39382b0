//! Parsing of estimator specs like `ece`, `ece bins=100` or
//! `tce_p p=2 bins=15 equal_mass debias`.

use calibra::estimators::{Bandwidth, EstimatorParams};
use calibra::{EstimatorConfig, Error, Result};

pub fn parse_estimator(spec: &str) -> Result<EstimatorConfig> {
    let mut words = spec.split_whitespace();
    let name = words.next().ok_or_else(|| Error::Config("empty estimator spec".into()))?;
    let mut params = EstimatorParams::default();
    for w in words {
        let (key, value) = match w.split_once('=') {
            Some((k, v)) => (k, Some(v)),
            None => (w, None),
        };
        let need = || value.ok_or_else(|| Error::Config(format!("'{key}' needs a value in '{spec}'")));
        match key {
            "bins" => params.bins = Some(number(key, need()?, spec)?),
            "p" => params.p = Some(number(key, need()?, spec)?),
            "nu" => params.nu = Some(number(key, need()?, spec)?),
            "bandwidth" => params.bandwidth = Some(need()?.parse::<Bandwidth>()?),
            "equal_mass" if value.is_none() => params.equal_mass = true,
            "debias" if value.is_none() => params.debias = true,
            _ => return Err(Error::Config(format!("unknown estimator option '{w}' in '{spec}'"))),
        }
    }
    EstimatorConfig::from_parts(name, &params)
}

fn number<T: std::str::FromStr>(key: &str, value: &str, spec: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value '{value}' for '{key}' in '{spec}'")))
}

/// Expands `roster` to the standard roster; otherwise one spec per entry.
pub fn parse_estimators(specs: &[String]) -> Result<Vec<EstimatorConfig>> {
    if specs.is_empty() {
        return Ok(EstimatorConfig::standard_roster());
    }
    let mut out = Vec::new();
    for s in specs {
        if s.trim() == "roster" {
            out.extend(EstimatorConfig::standard_roster());
        } else {
            out.push(parse_estimator(s)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use calibra::estimators::BinningScheme;

    #[test]
    fn specs() {
        assert_eq!(
            parse_estimator("ece bins=100").unwrap(),
            EstimatorConfig::Ece { binning: BinningScheme::equal_width(100).unwrap() }
        );
        assert_eq!(
            parse_estimator("tce_p equal_mass debias").unwrap(),
            EstimatorConfig::TceP { p: 2.0, binning: BinningScheme::equal_mass(15).unwrap(), debias: true }
        );
        assert!(parse_estimator("ece nu=1").is_err());
        assert!(parse_estimator("ece bins=x").is_err());
        assert!(parse_estimator("ece colour").is_err());
        assert_eq!(parse_estimators(&[]).unwrap().len(), EstimatorConfig::standard_roster().len());
    }
}
