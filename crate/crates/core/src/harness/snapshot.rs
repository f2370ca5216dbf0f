//! Binary field dump: magic "FSCN", u32 version, grid descriptor, chart
//! slope and time, then named little-endian f64 fields.

use crate::dynamics::{FlowState, Model};
use crate::error::{ConfigError, FscnError};
use crate::field::Ops;
use crate::grid::GridParams;
use ndarray::{Array1, Array2};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"FSCN";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub d_h: usize,
    pub n_y: usize,
    pub n_z: usize,
    pub length: f64,
    pub z_max: f64,
    pub stretch: f64,
    pub slope: f64,
    pub t: f64,
    pub fields: Vec<(String, Vec<f64>)>,
}

fn bad(msg: impl Into<String>) -> FscnError {
    FscnError::Format(msg.into())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FscnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad("truncated snapshot"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FscnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FscnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, FscnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl Snapshot {
    pub fn from_state(m: &Model, s: &FlowState) -> Snapshot {
        let g = &m.ops.grid;
        let flat = |f: &Array2<f64>| f.iter().copied().collect::<Vec<_>>();
        let mut fields = vec![("rho".to_string(), flat(&s.rho))];
        let names: &[&str] = if g.d_h == 2 { &["v1", "v2", "v3"] } else { &["v1", "v3"] };
        for (n, vc) in names.iter().zip(&s.v) {
            fields.push((n.to_string(), flat(vc)));
        }
        fields.push(("h".to_string(), s.h.to_vec()));
        Snapshot {
            d_h: g.d_h,
            n_y: g.n_y,
            n_z: g.n_z,
            length: g.length,
            z_max: g.z_max,
            stretch: g.stretch,
            slope: m.a,
            t: s.t,
            fields,
        }
    }

    pub fn grid_params(&self) -> GridParams {
        GridParams {
            d_h: self.d_h,
            length: self.length,
            n_y: self.n_y,
            n_z: self.n_z,
            z_max: self.z_max,
            stretch: Some(self.stretch),
        }
    }

    pub fn field(&self, name: &str) -> Option<&[f64]> {
        self.fields.iter().find(|f| f.0 == name).map(|f| f.1.as_slice())
    }

    /// State on `ops`, which must have the snapshot's shape.
    pub fn to_state(&self, ops: &Ops) -> Result<FlowState, FscnError> {
        let g = &ops.grid;
        if (g.d_h, g.n_y, g.n_z) != (self.d_h, self.n_y, self.n_z) {
            return Err(ConfigError::single(format!(
                "initial.path: snapshot grid (d_h {}, n_y {}, n_z {}) differs from the configured grid (d_h {}, n_y {}, n_z {})",
                self.d_h, self.n_y, self.n_z, g.d_h, g.n_y, g.n_z
            ))
            .into());
        }
        let shape = (ops.nz(), ops.nh());
        let vol = |name: &str| -> Result<Array2<f64>, FscnError> {
            let f = self.field(name).ok_or_else(|| bad(format!("missing field {name}")))?;
            Array2::from_shape_vec(shape, f.to_vec()).map_err(|_| bad(format!("field {name} has wrong length")))
        };
        let names: &[&str] = if g.d_h == 2 { &["v1", "v2", "v3"] } else { &["v1", "v3"] };
        let h = self.field("h").ok_or_else(|| bad("missing field h"))?;
        if h.len() != ops.nh() {
            return Err(bad("field h has wrong length"));
        }
        Ok(FlowState {
            t: self.t,
            rho: vol("rho")?,
            v: names.iter().map(|n| vol(n)).collect::<Result<_, _>>()?,
            h: Array1::from(h.to_vec()),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        for x in [VERSION, self.d_h as u32, self.n_y as u32, self.n_z as u32] {
            b.extend_from_slice(&x.to_le_bytes());
        }
        for x in [self.length, self.z_max, self.stretch, self.slope, self.t] {
            b.extend_from_slice(&x.to_le_bytes());
        }
        b.extend_from_slice(&(self.fields.len() as u32).to_le_bytes());
        for (name, data) in &self.fields {
            b.extend_from_slice(&(name.len() as u32).to_le_bytes());
            b.extend_from_slice(name.as_bytes());
            b.extend_from_slice(&(data.len() as u64).to_le_bytes());
            for x in data {
                b.extend_from_slice(&x.to_le_bytes());
            }
        }
        b
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Snapshot, FscnError> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(bad("not an FSCN snapshot (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(bad(format!("unsupported snapshot version {version}")));
        }
        let (d_h, n_y, n_z) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let (length, z_max, stretch, slope, t) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        let count = r.u32()?;
        let mut fields = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?).map_err(|_| bad("field name is not UTF-8"))?.to_string();
            let n = r.u64()? as usize;
            if n > (buf.len() - r.pos) / 8 {
                return Err(bad("truncated snapshot"));
            }
            let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
            fields.push((name, data));
        }
        if r.pos != buf.len() {
            return Err(bad("trailing bytes after snapshot"));
        }
        Ok(Snapshot {
            d_h,
            n_y,
            n_z,
            length,
            z_max,
            stretch,
            slope,
            t,
            fields,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), FscnError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Snapshot, FscnError> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    /// Human-readable summary, one line per item.
    pub fn describe(&self) -> String {
        let mut out = format!(
            "FSCN v{VERSION}\nd_h {}  n_y {}  n_z {}\nlength {}  z_max {}  stretch {}  slope {}\nt {}\n",
            self.d_h, self.n_y, self.n_z, self.length, self.z_max, self.stretch, self.slope, self.t
        );
        for (name, data) in &self.fields {
            let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            out += &format!("{name:<4} {:>8} values  min {lo:.6e}  max {hi:.6e}\n", data.len());
        }
        out
    }
}
