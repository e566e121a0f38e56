//! Binary serialization of [`Fst`].
//!
//! Layout: magic `ITNF`, version u16, both symbol tables (count, then
//! length-prefixed UTF-8 strings in id order), states (count, per-state arc
//! count, arcs as ilabel u32 / olabel u32 / weight f32 / next u32), finals
//! (count, then (state u32, weight f32) pairs). All integers little-endian.
//! The start state is state 0 by construction.

use super::{Arc, Fst, SharedTable, SymbolTable};
use crate::{Error, Result};
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"ITNF";
const VERSION: u16 = 1;

impl Fst {
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        debug_assert_eq!(self.start(), 0, "serialized machines start at state 0");
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        write_table(w, self.isyms())?;
        write_table(w, self.osyms())?;
        w.write_all(&(self.num_states() as u32).to_le_bytes())?;
        for s in 0..self.num_states() {
            let arcs = self.arcs(s);
            w.write_all(&(arcs.len() as u32).to_le_bytes())?;
            for a in arcs {
                w.write_all(&a.ilabel.to_le_bytes())?;
                w.write_all(&a.olabel.to_le_bytes())?;
                w.write_all(&a.weight.to_le_bytes())?;
                w.write_all(&(a.nextstate as u32).to_le_bytes())?;
            }
        }
        let finals: Vec<_> = self.finals().collect();
        w.write_all(&(finals.len() as u32).to_le_bytes())?;
        for (s, wt) in finals {
            w.write_all(&(s as u32).to_le_bytes())?;
            w.write_all(&wt.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Fst> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad FST magic".into()));
        }
        if read_u16(r)? != VERSION {
            return Err(Error::Format("unsupported FST version".into()));
        }
        let isyms = read_table(r)?;
        let osyms = read_table(r)?;
        let num_states = read_u32(r)? as usize;
        let mut fst = Fst::new(isyms, osyms);
        for _ in 1..num_states {
            fst.add_state();
        }
        for s in 0..num_states {
            let num_arcs = read_u32(r)? as usize;
            for _ in 0..num_arcs {
                let ilabel = read_u32(r)?;
                let olabel = read_u32(r)?;
                let weight = read_f32(r)?;
                let next = read_u32(r)? as usize;
                if next >= num_states {
                    return Err(Error::Format("arc target out of range".into()));
                }
                fst.add_arc(s, Arc::new(ilabel, olabel, weight, next));
            }
        }
        let num_finals = read_u32(r)? as usize;
        for _ in 0..num_finals {
            let s = read_u32(r)? as usize;
            let w = read_f32(r)?;
            if s >= num_states {
                return Err(Error::Format("final state out of range".into()));
            }
            fst.set_final(s, w);
        }
        Ok(fst)
    }
}

fn write_table(w: &mut impl Write, t: &SymbolTable) -> std::io::Result<()> {
    w.write_all(&(t.len() as u32).to_le_bytes())?;
    for sym in t.symbols() {
        w.write_all(&(sym.len() as u32).to_le_bytes())?;
        w.write_all(sym.as_bytes())?;
    }
    Ok(())
}

fn read_table(r: &mut impl Read) -> Result<SharedTable> {
    let count = read_u32(r)? as usize;
    let mut t = SymbolTable::default();
    for _ in 0..count {
        let len = read_u32(r)? as usize;
        let mut buf = vec![0u8; len];
        read_exact(r, &mut buf)?;
        let sym = String::from_utf8(buf).map_err(|_| Error::Format("non-UTF-8 symbol".into()))?;
        t.add(&sym);
    }
    if t.symbol(0) != Some(super::EPS_SYM) {
        return Err(Error::Format("symbol table does not reserve epsilon at 0".into()));
    }
    Ok(std::sync::Arc::new(t))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Format("truncated FST file".into()))
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact(r, &mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32(r: &mut impl Read) -> Result<f32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(f32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fst::{compile_linear, SymbolTable};

    #[test]
    fn round_trip_is_bit_exact() {
        let mut t = SymbolTable::core();
        t.add("four");
        t.add("thirty");
        let t = std::sync::Arc::new(t);
        let mut f = compile_linear(&["four", "thirty"], &t);
        f.set_final(1, 0.25);

        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        let g = Fst::read_from(&mut buf.as_slice()).unwrap();
        let mut buf2 = Vec::new();
        g.write_to(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
        assert_eq!(f.num_states(), g.num_states());
    }

    #[test]
    fn truncated_file_is_format_error() {
        let mut t = SymbolTable::core();
        t.add("x");
        let t = std::sync::Arc::new(t);
        let f = compile_linear(&["x"], &t);
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(
            Fst::read_from(&mut buf.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"NOPE\x01\x00".to_vec();
        assert!(Fst::read_from(&mut buf.as_slice()).is_err());
    }
}
