//! Radial profile data: sampled nodes of the solution and its derivative,
//! tagged by construction segment, plus CSV export.

use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    InnerConstructed,
    OuterShot,
}

impl Segment {
    pub fn name(&self) -> &'static str {
        match self {
            Segment::InnerConstructed => "inner_constructed",
            Segment::OuterShot => "outer_shot",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProfileNode {
    pub r: f64,
    pub rho: f64,
    pub u: f64,
    pub u_prime: f64,
    /// Transformed approximate solution at this node (inner segment only;
    /// equals `u` on the outer segment where no correction applies).
    pub phi: f64,
    pub eta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    pub segment: Segment,
}

/// Assembled radial profile: strictly increasing radii, optional Dirichlet
/// radius when the outer segment reached the boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialProfile {
    pub nodes: Vec<ProfileNode>,
    /// Matching radius between the constructed and shot segments.
    pub r0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dirichlet_radius: Option<f64>,
}

impl RadialProfile {
    pub fn new(nodes: Vec<ProfileNode>, r0: f64, dirichlet_radius: Option<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InsufficientNodes {
                need: 2,
                have: nodes.len(),
            });
        }
        for pair in nodes.windows(2) {
            if pair[1].r <= pair[0].r {
                return Err(Error::Other(format!(
                    "profile radii not strictly increasing near r = {}",
                    pair[0].r
                )));
            }
        }
        Ok(RadialProfile {
            nodes,
            r0,
            dirichlet_radius,
        })
    }

    pub fn segment_nodes(&self, seg: Segment) -> impl Iterator<Item = &ProfileNode> {
        self.nodes.iter().filter(move |n| n.segment == seg)
    }

    /// Write the fixed-column CSV (RFC 4180, CRLF, '.' decimal separator):
    /// `r, rho, u, u_prime, phi, eta, residual, segment`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(out);
        w.write_record(["r", "rho", "u", "u_prime", "phi", "eta", "residual", "segment"])
            .map_err(|e| Error::Other(format!("csv: {e}")))?;
        for n in &self.nodes {
            w.write_record([
                format!("{:.17e}", n.r),
                format!("{:.17e}", n.rho),
                format!("{:.17e}", n.u),
                format!("{:.17e}", n.u_prime),
                format!("{:.17e}", n.phi),
                format!("{:.17e}", n.eta),
                n.residual.map(|x| format!("{x:.17e}")).unwrap_or_default(),
                n.segment.name().to_string(),
            ])
            .map_err(|e| Error::Other(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| Error::Other(format!("csv: {e}")))?;
        Ok(())
    }
}
