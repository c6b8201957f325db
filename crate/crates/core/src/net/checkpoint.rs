//! Plain-text parameter checkpoints.
//!
//! Layout, one token group per line:
//!
//! ```text
//! fta-net-checkpoint 1
//! layers <L>
//! layer <i> <rows> <cols>
//! weights <v_0> <v_1> ... <v_{rows*cols-1}>     (row-major, rows = inputs)
//! bias <b_0> ... <b_{cols-1}>
//! ...repeated for every layer...
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a checkpoint
//! written and read on the same platform restores parameters bit for bit.
//! Only parameters are stored; the architecture comes from the network the
//! checkpoint is loaded into, and shapes must agree.

use std::io::{BufRead, Write};

use super::DenseNet;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAGIC: &str = "fta-net-checkpoint 1";

fn io_err(e: std::io::Error) -> Error {
    Error::Checkpoint(e.to_string())
}

pub fn write<W: Write>(net: &DenseNet, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC}").map_err(io_err)?;
    writeln!(out, "layers {}", net.layers().len()).map_err(io_err)?;
    for (i, layer) in net.layers().iter().enumerate() {
        let (rows, cols) = layer.weights().shape();
        writeln!(out, "layer {i} {rows} {cols}").map_err(io_err)?;
        write!(out, "weights").map_err(io_err)?;
        for v in layer.weights().as_slice() {
            write!(out, " {v:?}").map_err(io_err)?;
        }
        writeln!(out).map_err(io_err)?;
        write!(out, "bias").map_err(io_err)?;
        for v in layer.bias() {
            write!(out, " {v:?}").map_err(io_err)?;
        }
        writeln!(out).map_err(io_err)?;
    }
    Ok(())
}

/// Loads parameters into `net`, which must have the checkpoint's shapes.
pub fn read_into<R: BufRead>(net: &mut DenseNet, input: R) -> Result<()> {
    let mut lines = input.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("unexpected end of file, wanted {what}")))?
            .map_err(io_err)
    };
    if next("header")?.trim() != MAGIC {
        return Err(Error::Checkpoint("missing checkpoint header".into()));
    }
    let count: usize = field(&next("layer count")?, "layers")?
        .first()
        .ok_or_else(|| Error::Checkpoint("missing layer count".into()))?
        .parse()
        .map_err(|e| Error::Checkpoint(format!("bad layer count: {e}")))?;
    if count != net.layers().len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {count} layers, network has {}",
            net.layers().len()
        )));
    }
    for i in 0..count {
        let dims: Vec<usize> = field(&next("layer header")?, "layer")?
            .iter()
            .map(|t| t.parse().map_err(|e| Error::Checkpoint(format!("bad layer header: {e}"))))
            .collect::<Result<_>>()?;
        let [idx, rows, cols] = dims[..] else {
            return Err(Error::Checkpoint("layer header needs index, rows, cols".into()));
        };
        if idx != i {
            return Err(Error::Checkpoint(format!("expected layer {i}, found {idx}")));
        }
        let weights = parse_values(&next("weights")?, "weights")?;
        let bias = parse_values(&next("bias")?, "bias")?;
        let w = Matrix::from_vec(rows, cols, weights)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        net.set_layer_params(i, w, bias)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
    }
    Ok(())
}

fn field<'a>(line: &'a str, key: &str) -> Result<Vec<&'a str>> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(key) {
        return Err(Error::Checkpoint(format!("expected a `{key}` line")));
    }
    Ok(tokens.collect())
}

fn parse_values(line: &str, key: &str) -> Result<Vec<f64>> {
    field(line, key)?
        .into_iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::Checkpoint(format!("bad value `{t}`: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, LayerSpec};

    fn net(seed: u64) -> DenseNet {
        DenseNet::new(
            vec![
                LayerSpec::new(2, 5, Activation::Relu),
                LayerSpec::new(5, 3, Activation::Linear),
            ],
            seed,
        )
        .unwrap()
    }

    #[test]
    fn restores_parameters_exactly() {
        let src = net(1);
        let mut buf = Vec::new();
        write(&src, &mut buf).unwrap();
        let mut dst = net(2);
        read_into(&mut dst, buf.as_slice()).unwrap();
        assert_eq!(src.layers(), dst.layers());
    }

    #[test]
    fn rejects_wrong_shapes() {
        let mut buf = Vec::new();
        write(&net(1), &mut buf).unwrap();
        let mut other = DenseNet::new(vec![LayerSpec::new(2, 3, Activation::Linear)], 0).unwrap();
        assert!(read_into(&mut other, buf.as_slice()).is_err());
        assert!(read_into(&mut net(0), "garbage\n".as_bytes()).is_err());
    }
}
