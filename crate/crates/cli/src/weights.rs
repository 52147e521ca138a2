//! Binary weight dump.
//!
//! Layout, all integers u32 and all floats f64, little-endian:
//! `FCRW`, version, N, d, q, activation name length, activation name bytes,
//! then W₁..W_N each as rows, cols and the row-major entries.

use std::io::{self, Read, Write};

use anyhow::{bail, ensure, Context, Result};
use fcresnet_admm::linalg::Matrix;
use fcresnet_admm::model::{Activation, NetworkShape};

const MAGIC: &[u8; 4] = b"FCRW";
const VERSION: u32 = 1;

fn put_u32(out: &mut impl Write, v: usize) -> io::Result<()> {
    let v = u32::try_from(v).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "dimension exceeds u32"))?;
    out.write_all(&v.to_le_bytes())
}

fn get_u32(input: &mut impl Read) -> io::Result<usize> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

pub fn write_weights(mut out: impl Write, shape: &NetworkShape, weights: &[Matrix]) -> Result<()> {
    shape.check_weights(weights)?;
    let act = shape.activations.first().map_or("identity", |a| a.name());
    ensure!(shape.activations.iter().all(|a| a.name() == act), "weight dump needs one activation for all layers");
    out.write_all(MAGIC)?;
    put_u32(&mut out, VERSION as usize)?;
    for v in [shape.n_layers, shape.d, shape.q, act.len()] {
        put_u32(&mut out, v)?;
    }
    out.write_all(act.as_bytes())?;
    for w in weights {
        put_u32(&mut out, w.rows())?;
        put_u32(&mut out, w.cols())?;
        for x in w.as_slice() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_weights(mut input: impl Read) -> Result<(NetworkShape, Vec<Matrix>)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).context("reading header")?;
    ensure!(&magic == MAGIC, "not a weight dump (bad magic)");
    let version = get_u32(&mut input)?;
    ensure!(version == VERSION as usize, "unsupported weight dump version {version}");
    let n_layers = get_u32(&mut input)?;
    let d = get_u32(&mut input)?;
    let q = get_u32(&mut input)?;
    let name_len = get_u32(&mut input)?;
    ensure!(name_len <= 64, "activation name too long");
    let mut name = vec![0u8; name_len];
    input.read_exact(&mut name)?;
    let act: Activation = String::from_utf8(name)?.parse()?;
    let shape = NetworkShape::uniform(n_layers, d, q, act)?;
    let mut weights = Vec::with_capacity(n_layers);
    for i in 1..=n_layers {
        let (rows, cols) = (get_u32(&mut input)?, get_u32(&mut input)?);
        if (rows, cols) != shape.weight_shape(i) {
            bail!("W_{i} is {rows}x{cols}, expected {:?}", shape.weight_shape(i));
        }
        let mut data = vec![0.0; rows * cols];
        let mut b = [0u8; 8];
        for x in &mut data {
            input.read_exact(&mut b).with_context(|| format!("truncated W_{i}"))?;
            *x = f64::from_le_bytes(b);
        }
        weights.push(Matrix::from_vec(rows, cols, data)?);
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    ensure!(rest.is_empty(), "{} trailing bytes after W_{n_layers}", rest.len());
    Ok((shape, weights))
}
