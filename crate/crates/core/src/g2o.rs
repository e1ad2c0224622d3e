//! Reading and writing pose graphs in the g2o text format.
//!
//! Supported records (one per line, whitespace-separated):
//!
//! ```text
//! VERTEX_SE2 id x y theta
//! VERTEX_SE3:QUAT id x y z qx qy qz qw
//! EDGE_SE2 i j dx dy dtheta I11 I12 I13 I22 I23 I33
//! EDGE_SE3:QUAT i j dx dy dz qx qy qz qw I11 ... I66   (21 upper-triangular entries)
//! ```
//!
//! Information matrices are the row-major upper triangle. Quaternions are
//! Hamilton `(qx, qy, qz, qw)`. Vertex ids need not be contiguous; EDGE
//! records referencing unseen ids create vertices implicitly, and VERTEX
//! records are retained only as optional initial estimates.
//!
//! Anisotropic information matrices are collapsed to the isotropic weights of
//! the measurement model by averaging block diagonals: `τ` is the mean of the
//! translational diagonal and `κ` is half the mean of the rotational diagonal
//! (see [`tau_from_information`] and [`kappa_from_information`]).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;

use crate::error::Error;
use crate::graph::{MeasurementGraph, RelativePoseMeasurement};
use crate::pose::{quaternion_to_rotation, rot2, rot2_angle, rotation_to_quaternion, Pose};
use crate::Result;

/// Isotropic translational precision from the d×d translational information
/// block: the mean of its diagonal.
pub fn tau_from_information(tt_diag: &[f64]) -> f64 {
    tt_diag.iter().sum::<f64>() / tt_diag.len() as f64
}

/// Isotropic rotational concentration from the rotational information block
/// diagonal: half the mean. The factor 1/2 matches the curvature of the
/// Langevin angle log-density `2κ cos θ` at its mode against a Gaussian with
/// information `w`, giving `w = 2κ`.
pub fn kappa_from_information(rr_diag: &[f64]) -> f64 {
    0.5 * rr_diag.iter().sum::<f64>() / rr_diag.len() as f64
}

/// Parses a g2o file into a measurement graph.
pub fn parse_g2o(path: impl AsRef<Path>) -> Result<MeasurementGraph> {
    let content = fs::read_to_string(path.as_ref())?;
    parse_g2o_str(&content)
}

pub fn parse_g2o_str(content: &str) -> Result<MeasurementGraph> {
    let mut id_map: HashMap<i64, usize> = HashMap::new();
    let mut external_ids: Vec<i64> = Vec::new();
    let mut guesses: Vec<Option<Pose>> = Vec::new();
    let mut edges: Vec<RelativePoseMeasurement> = Vec::new();
    let mut dim: Option<usize> = None;

    let mut intern = |id: i64, external_ids: &mut Vec<i64>, guesses: &mut Vec<Option<Pose>>| {
        *id_map.entry(id).or_insert_with(|| {
            external_ids.push(id);
            guesses.push(None);
            external_ids.len() - 1
        })
    };

    for (idx, raw) in content.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut tok = Tokens::new(line, lineno);
        let tag = tok.next_str()?;
        match tag {
            "VERTEX_SE2" => {
                set_dim(&mut dim, 2, lineno)?;
                let id = tok.next_i64()?;
                let x = tok.next_f64()?;
                let y = tok.next_f64()?;
                let theta = tok.next_f64()?;
                tok.finish()?;
                let v = intern(id, &mut external_ids, &mut guesses);
                guesses[v] = Some(Pose {
                    t: DVector::from_column_slice(&[x, y]),
                    r: rot2(theta),
                });
            }
            "VERTEX_SE3:QUAT" => {
                set_dim(&mut dim, 3, lineno)?;
                let id = tok.next_i64()?;
                let t: Vec<f64> = (0..3).map(|_| tok.next_f64()).collect::<Result<_>>()?;
                let q: Vec<f64> = (0..4).map(|_| tok.next_f64()).collect::<Result<_>>()?;
                tok.finish()?;
                let r = quaternion_to_rotation(q[0], q[1], q[2], q[3]).map_err(|e| Error::Parse {
                    line: lineno,
                    msg: e.to_string(),
                })?;
                let v = intern(id, &mut external_ids, &mut guesses);
                guesses[v] = Some(Pose {
                    t: DVector::from_vec(t),
                    r,
                });
            }
            "EDGE_SE2" => {
                set_dim(&mut dim, 2, lineno)?;
                let i = tok.next_i64()?;
                let j = tok.next_i64()?;
                let dx = tok.next_f64()?;
                let dy = tok.next_f64()?;
                let dtheta = tok.next_f64()?;
                let info: Vec<f64> = (0..6).map(|_| tok.next_f64()).collect::<Result<_>>()?;
                tok.finish()?;
                // upper triangle order: I11 I12 I13 I22 I23 I33
                let tau = tau_from_information(&[info[0], info[3]]);
                let kappa = kappa_from_information(&[info[5]]);
                let tail = intern(i, &mut external_ids, &mut guesses);
                let head = intern(j, &mut external_ids, &mut guesses);
                edges.push(
                    RelativePoseMeasurement::new(
                        tail,
                        head,
                        DVector::from_column_slice(&[dx, dy]),
                        rot2(dtheta),
                        tau,
                        kappa,
                    )
                    .map_err(|e| Error::Parse {
                        line: lineno,
                        msg: e.to_string(),
                    })?,
                );
            }
            "EDGE_SE3:QUAT" => {
                set_dim(&mut dim, 3, lineno)?;
                let i = tok.next_i64()?;
                let j = tok.next_i64()?;
                let t: Vec<f64> = (0..3).map(|_| tok.next_f64()).collect::<Result<_>>()?;
                let q: Vec<f64> = (0..4).map(|_| tok.next_f64()).collect::<Result<_>>()?;
                let info: Vec<f64> = (0..21).map(|_| tok.next_f64()).collect::<Result<_>>()?;
                tok.finish()?;
                let r = quaternion_to_rotation(q[0], q[1], q[2], q[3]).map_err(|e| Error::Parse {
                    line: lineno,
                    msg: e.to_string(),
                })?;
                // row-major upper triangle of a 6x6: diagonal at offsets 0, 6, 11, 15, 18, 20
                let tau = tau_from_information(&[info[0], info[6], info[11]]);
                let kappa = kappa_from_information(&[info[15], info[18], info[20]]);
                let tail = intern(i, &mut external_ids, &mut guesses);
                let head = intern(j, &mut external_ids, &mut guesses);
                edges.push(
                    RelativePoseMeasurement::new(tail, head, DVector::from_vec(t), r, tau, kappa)
                        .map_err(|e| Error::Parse {
                            line: lineno,
                            msg: e.to_string(),
                        })?,
                );
            }
            other => return Err(Error::UnsupportedTag(other.to_string())),
        }
    }

    MeasurementGraph::with_metadata(external_ids.len(), edges, external_ids, guesses)
}

fn set_dim(dim: &mut Option<usize>, d: usize, line: usize) -> Result<()> {
    match dim {
        None => {
            *dim = Some(d);
            Ok(())
        }
        Some(existing) if *existing == d => Ok(()),
        Some(existing) => Err(Error::Parse {
            line,
            msg: format!("mixed dimensions: file has SE{existing} and SE{d} records"),
        }),
    }
}

struct Tokens<'a> {
    iter: std::str::SplitWhitespace<'a>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn new(line_str: &'a str, line: usize) -> Self {
        Tokens {
            iter: line_str.split_whitespace(),
            line,
        }
    }

    fn next_str(&mut self) -> Result<&'a str> {
        self.iter.next().ok_or(Error::Parse {
            line: self.line,
            msg: "unexpected end of line".into(),
        })
    }

    fn next_i64(&mut self) -> Result<i64> {
        let s = self.next_str()?;
        s.parse().map_err(|_| Error::Parse {
            line: self.line,
            msg: format!("expected integer, found `{s}`"),
        })
    }

    fn next_f64(&mut self) -> Result<f64> {
        let s = self.next_str()?;
        s.parse().map_err(|_| Error::Parse {
            line: self.line,
            msg: format!("expected number, found `{s}`"),
        })
    }

    fn finish(&mut self) -> Result<()> {
        match self.iter.next() {
            None => Ok(()),
            Some(extra) => Err(Error::Parse {
                line: self.line,
                msg: format!("trailing token `{extra}`"),
            }),
        }
    }
}

/// Writes a measurement graph (and optionally ground-truth poses as VERTEX
/// records) in the g2o format. The written information matrices are the
/// isotropic ones implied by each edge's `(τ, κ)`, so a parse round-trip
/// reproduces the weights exactly. Floats use Rust's shortest round-trip
/// formatting.
pub fn write_g2o(
    g: &MeasurementGraph,
    ground_truth: Option<&[Pose]>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = String::new();
    let d = g.dim();
    if let Some(poses) = ground_truth {
        for (v, p) in poses.iter().enumerate() {
            let id = g.external_ids().get(v).copied().unwrap_or(v as i64);
            if d == 2 {
                writeln!(out, "VERTEX_SE2 {id} {} {} {}", p.t[0], p.t[1], rot2_angle(&p.r))
                    .expect("string write");
            } else {
                let [qx, qy, qz, qw] = rotation_to_quaternion(&p.r);
                writeln!(
                    out,
                    "VERTEX_SE3:QUAT {id} {} {} {} {qx} {qy} {qz} {qw}",
                    p.t[0], p.t[1], p.t[2]
                )
                .expect("string write");
            }
        }
    }
    for e in g.edges() {
        let i = g.external_ids()[e.tail];
        let j = g.external_ids()[e.head];
        if d == 2 {
            let theta = rot2_angle(&e.rotation);
            // info = diag(τ, τ, 2κ), upper triangle row-major
            writeln!(
                out,
                "EDGE_SE2 {i} {j} {} {} {theta} {} 0 0 {} 0 {}",
                e.translation[0],
                e.translation[1],
                e.tau,
                e.tau,
                2.0 * e.kappa
            )
            .expect("string write");
        } else {
            let [qx, qy, qz, qw] = rotation_to_quaternion(&e.rotation);
            let mut line = format!(
                "EDGE_SE3:QUAT {i} {j} {} {} {} {qx} {qy} {qz} {qw}",
                e.translation[0], e.translation[1], e.translation[2]
            );
            // info = diag(τ, τ, τ, 2κ, 2κ, 2κ), upper triangle row-major
            let diag = [e.tau, e.tau, e.tau, 2.0 * e.kappa, 2.0 * e.kappa, 2.0 * e.kappa];
            for r in 0..6 {
                for c in r..6 {
                    if r == c {
                        line.push_str(&format!(" {}", diag[r]));
                    } else {
                        line.push_str(" 0");
                    }
                }
            }
            writeln!(out, "{line}").expect("string write");
        }
    }
    fs::write(path.as_ref(), out)?;
    Ok(())
}
