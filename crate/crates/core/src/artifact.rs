//! Gain artifact: the observer gain and its certificate as JSON.
//!
//! Every float is stored as a 17-significant-digit decimal string, which
//! parses back to the identical `f64`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cr3bp::{ParameterBox, Rho};
use crate::numkernel::Matrix;
use crate::synthesis::{Method, ObserverGain};

pub const FORMAT: &str = "lftnav-gain/1";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("malformed gain artifact: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Gain, certificate, certified box and the hash of the config it was made for.
#[derive(Debug, Clone, PartialEq)]
pub struct GainArtifact {
    pub gain: ObserverGain<f64>,
    pub bounds: ParameterBox<f64>,
    pub config_hash: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RhoRepr {
    sigma: String,
    psi: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Repr {
    format: String,
    method: String,
    config_hash: String,
    box_sigma: [String; 2],
    box_psi: [String; 2],
    gamma: String,
    gamma_lo: String,
    gamma_lo_certified: bool,
    synthesis_gamma: String,
    l: Vec<Vec<String>>,
    p: Vec<Vec<String>>,
    lambda: Vec<String>,
    grid: Vec<RhoRepr>,
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse(s: &str) -> Result<f64, ArtifactError> {
    s.parse::<f64>().map_err(|_| ArtifactError::Parse(format!("not a number: {s:?}")))
}

fn rows(m: &Matrix<f64>) -> Vec<Vec<String>> {
    (0..m.nrows()).map(|i| m.row_slice(i).iter().map(|&v| fmt_f64(v)).collect()).collect()
}

fn matrix(rows: &[Vec<String>], n: usize, what: &str) -> Result<Matrix<f64>, ArtifactError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(ArtifactError::Parse(format!("{what} must be {n}×{n}")));
    }
    let mut data = Vec::with_capacity(n * n);
    for r in rows {
        for v in r {
            data.push(parse(v)?);
        }
    }
    Ok(Matrix::from_row_slice(n, n, &data))
}

impl GainArtifact {
    pub fn to_json(&self) -> String {
        let g = &self.gain;
        let repr = Repr {
            format: FORMAT.into(),
            method: g.method.as_str().into(),
            config_hash: self.config_hash.clone(),
            box_sigma: [fmt_f64(self.bounds.sigma_min), fmt_f64(self.bounds.sigma_max)],
            box_psi: [fmt_f64(self.bounds.psi_min), fmt_f64(self.bounds.psi_max)],
            gamma: fmt_f64(g.gamma),
            gamma_lo: fmt_f64(g.gamma_lo),
            gamma_lo_certified: g.gamma_lo_certified,
            synthesis_gamma: fmt_f64(g.synthesis_gamma),
            l: rows(&g.l),
            p: rows(&g.p),
            lambda: g.lambda.iter().map(|&v| fmt_f64(v)).collect(),
            grid: g.grid.iter().map(|r| RhoRepr { sigma: fmt_f64(r.sigma), psi: fmt_f64(r.psi) }).collect(),
        };
        let mut s = serde_json::to_string_pretty(&repr).expect("artifact serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, ArtifactError> {
        let r: Repr = serde_json::from_str(s)?;
        if r.format != FORMAT {
            return Err(ArtifactError::Parse(format!("unsupported format {:?}", r.format)));
        }
        let method = match r.method.as_str() {
            "hinf" => Method::Hinf,
            "dk-scaled" => Method::DkScaled,
            other => return Err(ArtifactError::Parse(format!("unknown method {other:?}"))),
        };
        let bounds = ParameterBox::new(parse(&r.box_sigma[0])?, parse(&r.box_sigma[1])?, parse(&r.box_psi[0])?, parse(&r.box_psi[1])?)
            .map_err(|e| ArtifactError::Parse(e.to_string()))?;
        let lambda = r.lambda.iter().map(|v| parse(v)).collect::<Result<Vec<_>, _>>()?;
        let grid = r
            .grid
            .iter()
            .map(|p| Ok(Rho::new(parse(&p.sigma)?, parse(&p.psi)?)))
            .collect::<Result<Vec<_>, ArtifactError>>()?;
        let gain = ObserverGain {
            l: matrix(&r.l, 4, "L")?,
            gamma: parse(&r.gamma)?,
            gamma_lo: parse(&r.gamma_lo)?,
            gamma_lo_certified: r.gamma_lo_certified,
            p: matrix(&r.p, 4, "P")?,
            lambda,
            grid,
            method,
            synthesis_gamma: parse(&r.synthesis_gamma)?,
        };
        if gain.lambda.len() != crate::plant::NW {
            return Err(ArtifactError::Parse("lambda must have one entry per exogenous input".into()));
        }
        Ok(Self { gain, bounds, config_hash: r.config_hash })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for &v in &[0.1, 1.0 / 3.0, -2.0e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.012151355442736387] {
            assert_eq!(parse(&fmt_f64(v)).unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(GainArtifact::from_json(r#"{"format": "lftnav-gain/1", "extra": 1}"#).is_err());
    }
}
