//! Snapshot files.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `SOHSNAP\0` |
//! | 4     | format version (`u32`) |
//! | 4     | kind: 1 single fluid, 2 two fluid (`u32`) |
//! | 16    | `nx`, `ny` (`u64`) |
//! | 40    | time, `dx`, `dy`, x origin, y origin (`f64`) |
//! | 32    | SHA-256 digest of the model parameters |
//! | 4     | number of fields (`u32`) |
//! | rest  | fields one after another, `nx * ny` values each, row-major |
//!
//! Single-fluid fields are `rho, q1, q2`. Two-fluid fields are
//! `rho+, rho-, q+1, q+2, q-1, q-2, w+1, w+2, w-1, w-2`.
//!
//! The text mirror has `#` header lines followed by one row per cell:
//! `i j x y` and the fields in the same order, floats printed with 17
//! significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};
use sha2::{Digest, Sha256};
use soh_core::twofluid::{Species, TwoFluidState};
use soh_core::{FieldState, Grid, ModelParams};
use thiserror::Error;

pub const MAGIC: [u8; 8] = *b"SOHSNAP\0";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 16 + 40 + 32 + 4;

pub const SINGLE_FIELDS: [&str; 3] = ["rho", "q1", "q2"];
pub const TWO_FLUID_FIELDS: [&str; 10] = [
    "rho_plus", "rho_minus", "q_plus_1", "q_plus_2", "q_minus_1", "q_minus_2", "w_plus_1", "w_plus_2", "w_minus_1",
    "w_minus_2",
];

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a snapshot file (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot version {found} (this build reads version {expected})")]
    Version { found: u32, expected: u32 },
    #[error("unknown snapshot kind {0}")]
    Kind(u32),
    #[error("truncated snapshot: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("snapshot has {found} trailing bytes")]
    Trailing { found: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    SingleFluid = 1,
    TwoFluid = 2,
}

impl SnapshotKind {
    pub fn field_names(self) -> &'static [&'static str] {
        match self {
            SnapshotKind::SingleFluid => &SINGLE_FIELDS,
            SnapshotKind::TwoFluid => &TWO_FLUID_FIELDS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotData {
    Single(FieldState),
    TwoFluid(TwoFluidState),
}

impl SnapshotData {
    pub fn kind(&self) -> SnapshotKind {
        match self {
            SnapshotData::Single(_) => SnapshotKind::SingleFluid,
            SnapshotData::TwoFluid(_) => SnapshotKind::TwoFluid,
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            SnapshotData::Single(s) => s.time,
            SnapshotData::TwoFluid(s) => s.time,
        }
    }

    pub fn fields(&self) -> Vec<&[f64]> {
        match self {
            SnapshotData::Single(s) => vec![&s.rho, &s.q1, &s.q2],
            SnapshotData::TwoFluid(s) => {
                let (p, m) = (&s.plus, &s.minus);
                vec![&p.rho, &m.rho, &p.q1, &p.q2, &m.q1, &m.q2, &p.w1, &p.w2, &m.w1, &m.w2]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    /// Coordinates of the lower-left corner of the grid.
    pub origin: (f64, f64),
    pub params_digest: [u8; 32],
    pub data: SnapshotData,
}

impl Snapshot {
    pub fn new(grid: &Grid, origin: (f64, f64), params: &ModelParams, data: SnapshotData) -> Self {
        Self {
            nx: grid.nx,
            ny: grid.ny,
            dx: grid.dx,
            dy: grid.dy,
            origin,
            params_digest: params_digest(params),
            data,
        }
    }

    pub fn time(&self) -> f64 {
        self.data.time()
    }

    pub fn digest_hex(&self) -> String {
        self.params_digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Errors unless the snapshot was taken on `grid`.
    pub fn check_grid(&self, grid: &Grid) -> Result<(), SnapshotError> {
        if (self.nx, self.ny) != (grid.nx, grid.ny) {
            return Err(SnapshotError::Dimension(format!(
                "snapshot is {} x {}, grid is {} x {}",
                self.nx, self.ny, grid.nx, grid.ny
            )));
        }
        if self.dx.to_bits() != grid.dx.to_bits() || self.dy.to_bits() != grid.dy.to_bits() {
            return Err(SnapshotError::Dimension(format!(
                "snapshot spacing {} x {}, grid spacing {} x {}",
                self.dx, self.dy, grid.dx, grid.dy
            )));
        }
        Ok(())
    }
}

/// SHA-256 over the exact bit patterns of all parameters.
pub fn params_digest(p: &ModelParams) -> [u8; 32] {
    let mut h = Sha256::new();
    for v in [
        p.c,
        p.lambda,
        p.epsilon,
        p.beta,
        p.gamma,
        p.rho_star,
        p.kappa,
        p.dt,
        p.dx,
        p.dy,
        p.t_end,
        p.congestion_tol,
    ] {
        h.update(v.to_le_bytes());
    }
    h.update([p.use_background as u8]);
    h.update(p.seed.to_le_bytes());
    h.finalize().into()
}

pub fn encode(snap: &Snapshot) -> Vec<u8> {
    let fields = snap.data.fields();
    let n = snap.nx * snap.ny;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * fields.len());
    out.extend_from_slice(&MAGIC);
    out.write_u32::<LittleEndian>(VERSION).unwrap();
    out.write_u32::<LittleEndian>(snap.data.kind() as u32).unwrap();
    out.write_u64::<LittleEndian>(snap.nx as u64).unwrap();
    out.write_u64::<LittleEndian>(snap.ny as u64).unwrap();
    for v in [snap.time(), snap.dx, snap.dy, snap.origin.0, snap.origin.1] {
        out.write_f64::<LittleEndian>(v).unwrap();
    }
    out.extend_from_slice(&snap.params_digest);
    out.write_u32::<LittleEndian>(fields.len() as u32).unwrap();
    for f in fields {
        for &v in f {
            out.write_f64::<LittleEndian>(v).unwrap();
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Snapshot, SnapshotError> {
    if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    if bytes.len() < 12 {
        return Err(SnapshotError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = LittleEndian::read_u32(&bytes[8..12]);
    if version != VERSION {
        return Err(SnapshotError::Version {
            found: version,
            expected: VERSION,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(SnapshotError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let kind = match LittleEndian::read_u32(&bytes[12..16]) {
        1 => SnapshotKind::SingleFluid,
        2 => SnapshotKind::TwoFluid,
        k => return Err(SnapshotError::Kind(k)),
    };
    let nx = LittleEndian::read_u64(&bytes[16..24]);
    let ny = LittleEndian::read_u64(&bytes[24..32]);
    let f = |i: usize| LittleEndian::read_f64(&bytes[32 + 8 * i..40 + 8 * i]);
    let (time, dx, dy, ox, oy) = (f(0), f(1), f(2), f(3), f(4));
    let mut digest = [0u8; 32];
    digest.copy_from_slice(&bytes[72..104]);
    let count = LittleEndian::read_u32(&bytes[104..108]) as usize;
    let names = kind.field_names();
    if count != names.len() {
        return Err(SnapshotError::Dimension(format!(
            "{kind:?} snapshots have {} fields, header says {count}",
            names.len()
        )));
    }
    let n = nx
        .checked_mul(ny)
        .filter(|&n| n > 0)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| SnapshotError::Dimension(format!("invalid grid {nx} x {ny}")))?;
    let expected = n
        .checked_mul(8 * count)
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| SnapshotError::Dimension(format!("grid {nx} x {ny} is too large")))?;
    if bytes.len() < expected {
        return Err(SnapshotError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(SnapshotError::Trailing {
            found: bytes.len() - expected,
        });
    }
    let mut fields: Vec<Vec<f64>> = (0..count)
        .map(|m| {
            let start = HEADER_LEN + 8 * n * m;
            let mut v = vec![0.0; n];
            LittleEndian::read_f64_into(&bytes[start..start + 8 * n], &mut v);
            v
        })
        .collect();
    let mut take = || fields.remove(0);
    let data = match kind {
        SnapshotKind::SingleFluid => SnapshotData::Single(FieldState {
            rho: take(),
            q1: take(),
            q2: take(),
            time,
        }),
        SnapshotKind::TwoFluid => {
            let (rp, rm, qp1, qp2, qm1, qm2) = (take(), take(), take(), take(), take(), take());
            let (wp1, wp2, wm1, wm2) = (take(), take(), take(), take());
            SnapshotData::TwoFluid(TwoFluidState {
                plus: Species {
                    rho: rp,
                    q1: qp1,
                    q2: qp2,
                    w1: wp1,
                    w2: wp2,
                },
                minus: Species {
                    rho: rm,
                    q1: qm1,
                    q2: qm2,
                    w1: wm1,
                    w2: wm2,
                },
                time,
            })
        }
    };
    Ok(Snapshot {
        nx: nx as usize,
        ny: ny as usize,
        dx,
        dy,
        origin: (ox, oy),
        params_digest: digest,
        data,
    })
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<(), SnapshotError> {
    fs::write(path, encode(snap))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, SnapshotError> {
    decode(&fs::read(path)?)
}

/// Plain-text mirror of a snapshot, one cell per row.
pub fn write_text_mirror(path: &Path, snap: &Snapshot) -> Result<(), SnapshotError> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    let names = snap.data.kind().field_names();
    writeln!(
        w,
        "# soh snapshot v{VERSION} kind={:?} nx={} ny={} time={:.17e} dx={:.17e} dy={:.17e} x0={:.17e} y0={:.17e} params={}",
        snap.data.kind(),
        snap.nx,
        snap.ny,
        snap.time(),
        snap.dx,
        snap.dy,
        snap.origin.0,
        snap.origin.1,
        snap.digest_hex()
    )?;
    writeln!(w, "# columns: i j x y {}", names.join(" "))?;
    let fields = snap.data.fields();
    for j in 0..snap.ny {
        for i in 0..snap.nx {
            let k = j * snap.nx + i;
            let x = snap.origin.0 + (i as f64 + 0.5) * snap.dx;
            let y = snap.origin.1 + (j as f64 + 0.5) * snap.dy;
            write!(w, "{i}\t{j}\t{x:.17e}\t{y:.17e}")?;
            for f in &fields {
                write!(w, "\t{:.17e}", f[k])?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use soh_core::grid::make_grid;

    fn sample() -> Snapshot {
        let g = make_grid(6, 5, 0.1, 0.2).unwrap();
        let mut s = FieldState::uniform(&g, 0.7, (0.1, -0.2));
        s.rho[3] = 1.0 / 3.0;
        s.time = 0.125;
        Snapshot::new(&g, (-0.5, 0.0), &ModelParams::default(), SnapshotData::Single(s))
    }

    #[test]
    fn encode_decode_identity() {
        let snap = sample();
        let bytes = encode(&snap);
        assert_eq!(bytes.len(), HEADER_LEN + 8 * 30 * 3);
        assert_eq!(decode(&bytes).unwrap(), snap);
    }

    #[test]
    fn header_errors() {
        let bytes = encode(&sample());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(SnapshotError::BadMagic)));
        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert!(matches!(decode(&v2), Err(SnapshotError::Version { found: 2, expected: 1 })));
        assert!(matches!(
            decode(&bytes[..bytes.len() - 1]),
            Err(SnapshotError::Truncated { .. })
        ));
        assert!(matches!(decode(&bytes[..40]), Err(SnapshotError::Truncated { .. })));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode(&long), Err(SnapshotError::Trailing { found: 1 })));
        let mut kind = bytes;
        kind[12] = 7;
        assert!(matches!(decode(&kind), Err(SnapshotError::Kind(7))));
    }

    #[test]
    fn digest_tracks_parameters() {
        let p = ModelParams::default();
        assert_eq!(params_digest(&p), params_digest(&p.clone()));
        let q = ModelParams {
            epsilon: 1e-5,
            ..p.clone()
        };
        assert_ne!(params_digest(&p), params_digest(&q));
    }
}
