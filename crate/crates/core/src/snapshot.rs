//! Binary snapshot files and a plotting-friendly CSV export.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "WAPF"                magic
//! u32                   format version (1)
//! u32                   dim
//! u32 x dim             cells per axis
//! f64                   epsilon
//! f64                   time
//! u32                   species count
//! u32                   flags: bit 0 energy present, bit 1 open box
//! f64 x dim             origin (low corner)
//! per species: rho, momentum per axis, [energy]; each n_cells f64, x fastest
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{DomainSpec, FluidState, SpeciesFields, Topology};

const MAGIC: &[u8; 4] = b"WAPF";
pub const FORMAT_VERSION: u32 = 1;
const FLAG_ENERGY: u32 = 1;
const FLAG_OPEN_BOX: u32 = 2;

/// A state together with the grid it lives on.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub domain: DomainSpec,
    pub state: FluidState,
}

impl Snapshot {
    pub fn new(domain: DomainSpec, state: FluidState) -> Self {
        Self { domain, state }
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }
}

pub fn encode(snap: &Snapshot, out: &mut impl Write) -> Result<()> {
    let d = &snap.domain;
    snap.state.check_shape(d)?;
    let energy = snap.state.species.first().is_some_and(|s| s.energy.is_some());
    if snap.state.species.iter().any(|s| s.energy.is_some() != energy) {
        return Err(Error::Format(
            "energy must be present in every species or in none".into(),
        ));
    }
    let u32le = |v: usize| (v as u32).to_le_bytes();
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&u32le(d.dim()))?;
    for &n in d.cells() {
        out.write_all(&u32le(n))?;
    }
    out.write_all(&d.epsilon().to_le_bytes())?;
    out.write_all(&snap.state.time.to_le_bytes())?;
    out.write_all(&u32le(snap.state.species.len()))?;
    let mut flags = 0;
    if energy {
        flags |= FLAG_ENERGY;
    }
    if d.topology() == Topology::OpenBox {
        flags |= FLAG_OPEN_BOX;
    }
    out.write_all(&flags.to_le_bytes())?;
    for &o in d.origin() {
        out.write_all(&o.to_le_bytes())?;
    }
    for sp in &snap.state.species {
        for arr in sp.arrays() {
            let mut buf = Vec::with_capacity(arr.len() * 8);
            for v in arr {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            out.write_all(&buf)?;
        }
    }
    Ok(())
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes(&mut self, buf: &mut [u8], section: &str) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => {
                Error::Format(format!("file truncated in section '{section}'"))
            }
            _ => Error::Io(e),
        })
    }

    fn u32(&mut self, section: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.bytes(&mut b, section)?;
        Ok(u32::from_le_bytes(b))
    }

    fn f64(&mut self, section: &str) -> Result<f64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b, section)?;
        Ok(f64::from_le_bytes(b))
    }

    fn array(&mut self, n: usize, section: &str) -> Result<Vec<f64>> {
        let mut buf = vec![0u8; n * 8];
        self.bytes(&mut buf, section)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}

pub fn decode(input: impl Read) -> Result<Snapshot> {
    let mut r = Cursor { inner: input };
    let mut magic = [0u8; 4];
    r.bytes(&mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes, not a snapshot file".into()));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let dim = r.u32("dim")? as usize;
    if !(1..=3).contains(&dim) {
        return Err(Error::Format(format!("invalid dimension {dim}")));
    }
    let cells = (0..dim)
        .map(|_| r.u32("cells").map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let epsilon = r.f64("epsilon")?;
    let time = r.f64("time")?;
    let n_species = r.u32("species count")? as usize;
    let flags = r.u32("flags")?;
    let origin = (0..dim).map(|_| r.f64("origin")).collect::<Result<Vec<_>>>()?;
    let topology = if flags & FLAG_OPEN_BOX != 0 {
        Topology::OpenBox
    } else {
        Topology::Torus
    };
    let domain = DomainSpec::new(&cells, epsilon, topology)
        .map_err(|e| Error::Format(format!("invalid grid header: {e}")))?
        .with_origin(&origin);
    let n = domain.n_cells();
    let mut species = Vec::with_capacity(n_species);
    for s in 0..n_species {
        let rho = r.array(n, &format!("species {s} density"))?;
        let mom = (0..dim)
            .map(|a| r.array(n, &format!("species {s} momentum axis {a}")))
            .collect::<Result<Vec<_>>>()?;
        let energy = if flags & FLAG_ENERGY != 0 {
            Some(r.array(n, &format!("species {s} energy"))?)
        } else {
            None
        };
        species.push(SpeciesFields { rho, mom, energy });
    }
    let mut extra = [0u8; 1];
    if r.inner.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after the last species".into()));
    }
    Ok(Snapshot {
        domain,
        state: FluidState { species, time },
    })
}

pub fn write_snapshot(snap: &Snapshot, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode(snap, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<Snapshot> {
    decode(BufReader::new(File::open(path)?))
}

/// One row per cell: center coordinates followed by every species' fields.
pub fn export_csv(snap: &Snapshot, out: impl Write) -> Result<()> {
    const AXES: [&str; 3] = ["x", "y", "z"];
    let d = &snap.domain;
    let dim = d.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = AXES[..dim].iter().map(|s| s.to_string()).collect();
    for (s, sp) in snap.state.species.iter().enumerate() {
        header.push(format!("rho_{s}"));
        for a in AXES.iter().take(dim) {
            header.push(format!("mom_{a}_{s}"));
        }
        if sp.energy.is_some() {
            header.push(format!("energy_{s}"));
        }
    }
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for c in 0..d.n_cells() {
        row.clear();
        let x = d.center(c);
        row.extend(x[..dim].iter().map(|v| v.to_string()));
        for sp in &snap.state.species {
            row.extend(sp.arrays().map(|a| a[c].to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
