//! Plain-text network export.
//!
//! Node table: a `# ell <l> dimension <d>` header, then `i x_1 .. x_d E class`.
//! Edge list: `i j c_ij`. Reals are written with 17 significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Edge, Node, NodeClass, StripeNetwork};
use crate::error::{Error, Result};

pub fn write_network(net: &StripeNetwork, nodes_path: &Path, edges_path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(nodes_path)?);
    writeln!(w, "# ell {:.16e} dimension {}", net.ell, net.dimension)?;
    for (k, n) in net.nodes.iter().enumerate() {
        write!(w, "{k}")?;
        for x in &n.position {
            write!(w, " {x:.16e}")?;
        }
        writeln!(w, " {:.16e} {}", n.mark, n.class.label())?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(edges_path)?);
    for e in &net.edges {
        writeln!(w, "{} {} {:.16e}", e.i, e.j, e.weight)?;
    }
    w.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse(format!("malformed field on line {line}")))
}

pub fn read_network(nodes_path: &Path, edges_path: &Path) -> Result<StripeNetwork> {
    let mut ell = None;
    let mut dimension = None;
    let mut nodes = Vec::new();
    for (ln, line) in BufReader::new(File::open(nodes_path)?).lines().enumerate() {
        let line = line?;
        let mut tok = line.split_whitespace();
        if line.starts_with('#') {
            tok.next();
            while let Some(key) = tok.next() {
                match key {
                    "ell" => ell = Some(parse::<f64>(tok.next(), ln + 1)?),
                    "dimension" => dimension = Some(parse::<usize>(tok.next(), ln + 1)?),
                    _ => {}
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let d = dimension.ok_or_else(|| Error::Parse("node table lacks its header".into()))?;
        let index: usize = parse(tok.next(), ln + 1)?;
        if index != nodes.len() {
            return Err(Error::Parse(format!("node index {index} out of sequence")));
        }
        let position = (0..d).map(|_| parse::<f64>(tok.next(), ln + 1)).collect::<Result<Vec<_>>>()?;
        let mark = parse(tok.next(), ln + 1)?;
        let class = tok
            .next()
            .and_then(NodeClass::parse)
            .ok_or_else(|| Error::Parse(format!("bad node class on line {}", ln + 1)))?;
        nodes.push(Node { position, mark, class });
    }
    let mut edges = Vec::new();
    for (ln, line) in BufReader::new(File::open(edges_path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        edges.push(Edge {
            i: parse(tok.next(), ln + 1)?,
            j: parse(tok.next(), ln + 1)?,
            weight: parse(tok.next(), ln + 1)?,
        });
    }
    let ell = ell.ok_or_else(|| Error::Parse("node table lacks ell".into()))?;
    StripeNetwork::from_parts(nodes, edges, ell, dimension.unwrap_or(1))
}
