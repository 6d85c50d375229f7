//! Binary array snapshot.
//!
//! Layout (little-endian): magic, `u32` version, `u8` bits per cell, five
//! `u32` geometry fields (chips, blocks/chip, wordlines/block, page bytes,
//! spare bytes), one `u32` PEC per block, one `u8` programmed flag per
//! wordline, the programmed plane and the current plane (one byte per
//! cell each), then per wordline a `u32` length and the out-of-band bytes.

use std::io::{Read, Write};

use super::{FlashArray, Geometry};
use crate::error::{Error, Result};
use crate::gray::{CellState, CellType};

pub const DUMP_MAGIC: [u8; 8] = *b"STARNAND";
pub const DUMP_VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn dim(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::BadDump(format!("{what} does not fit in u32")))
}

pub fn write_dump<W: Write>(array: &FlashArray, mut w: W) -> Result<()> {
    let g = array.geometry();
    let (programmed, current, pec, flags, oob) = array.raw_parts();
    w.write_all(&DUMP_MAGIC)?;
    put_u32(&mut w, DUMP_VERSION)?;
    w.write_all(&[array.cell_type().bits_per_cell() as u8])?;
    for (v, name) in [
        (g.chips, "chips"),
        (g.blocks_per_chip, "blocks"),
        (g.wordlines_per_block, "wordlines"),
        (g.page_bytes, "page bytes"),
        (g.spare_bytes, "spare bytes"),
    ] {
        put_u32(&mut w, dim(v, name)?)?;
    }
    for &p in pec {
        put_u32(&mut w, p)?;
    }
    let flag_bytes: Vec<u8> = flags.iter().map(|&f| u8::from(f)).collect();
    w.write_all(&flag_bytes)?;
    for plane in [programmed, current] {
        let bytes: Vec<u8> = plane.iter().map(|s| s.raw()).collect();
        w.write_all(&bytes)?;
    }
    for o in oob {
        put_u32(&mut w, dim(o.len(), "metadata length")?)?;
        w.write_all(o)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dump<R: Read>(mut r: R) -> Result<FlashArray> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if magic != DUMP_MAGIC {
        return Err(Error::BadDump("wrong magic".into()));
    }
    let version = get_u32(&mut r)?;
    if version != DUMP_VERSION {
        return Err(Error::BadDump(format!("unsupported version {version}")));
    }
    let mut m = [0u8; 1];
    r.read_exact(&mut m)?;
    let cell = CellType::from_bits(m[0] as usize)?;
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = get_u32(&mut r)? as usize;
    }
    let geometry = Geometry {
        chips: dims[0],
        blocks_per_chip: dims[1],
        wordlines_per_block: dims[2],
        page_bytes: dims[3],
        spare_bytes: dims[4],
    };
    geometry.validate()?;
    let pec = (0..geometry.blocks()).map(|_| get_u32(&mut r)).collect::<Result<Vec<_>>>()?;
    let mut flags = vec![0u8; geometry.wordlines()];
    r.read_exact(&mut flags)?;
    let states = cell.states() as u8;
    let mut plane = || -> Result<Vec<CellState>> {
        let mut buf = vec![0u8; geometry.total_cells()];
        r.read_exact(&mut buf)?;
        if let Some(&bad) = buf.iter().find(|&&b| b >= states) {
            return Err(Error::BadDump(format!("cell state {bad} out of range")));
        }
        Ok(buf.into_iter().map(CellState::from_raw).collect())
    };
    let programmed = plane()?;
    let current = plane()?;
    let mut oob = Vec::with_capacity(geometry.wordlines());
    for _ in 0..geometry.wordlines() {
        let len = get_u32(&mut r)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        oob.push(buf);
    }
    Ok(FlashArray::from_raw_parts(
        geometry,
        cell,
        programmed,
        current,
        pec,
        flags.into_iter().map(|f| f != 0).collect(),
        oob,
    ))
}
