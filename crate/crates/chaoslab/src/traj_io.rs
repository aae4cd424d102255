//! Binary trajectory files and CSV marginal export.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic        8 bytes  "CHLBTRJ\0"
//! version      u32      1
//! n_particles  u64
//! dim          u32
//! dt           f64
//! diffusion    f64
//! seed         u64
//! record_every u64
//! n_snapshots  u64
//! increments   u64      number of increment steps (0 when absent)
//! kernel_len   u32, then kernel name bytes (UTF-8)
//! snapshots    n_snapshots x (time f64, step u64, N*d f64)
//! increments   steps x N*d f64
//! ```

use std::io::{self, Read, Write};

use chaoslab_core::TrajectoryBlock;

pub const MAGIC: [u8; 8] = *b"CHLBTRJ\0";
pub const VERSION: u32 = 1;

/// Run metadata stored next to the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryHeader {
    pub diffusion: f64,
    pub seed: u64,
    pub kernel: String,
}

#[derive(Debug, thiserror::Error)]
pub enum TrajError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("not a trajectory file (bad magic)")]
    Magic,
    #[error("unsupported trajectory format version {0}")]
    Version(u32),
    #[error("corrupt trajectory file: {0}")]
    Corrupt(&'static str),
}

pub fn write_trajectory<W: Write>(w: &mut W, traj: &TrajectoryBlock, header: &TrajectoryHeader) -> io::Result<()> {
    let mut buf = Vec::with_capacity(64 + 8 * (traj.snapshots.len() + 2 * traj.len()));
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(traj.n_particles as u64).to_le_bytes());
    buf.extend_from_slice(&(traj.dim as u32).to_le_bytes());
    buf.extend_from_slice(&traj.dt.to_le_bytes());
    buf.extend_from_slice(&header.diffusion.to_le_bytes());
    buf.extend_from_slice(&header.seed.to_le_bytes());
    buf.extend_from_slice(&traj.record_every.to_le_bytes());
    buf.extend_from_slice(&(traj.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(traj.n_increment_steps() as u64).to_le_bytes());
    let name = header.kernel.as_bytes();
    buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
    buf.extend_from_slice(name);
    for k in 0..traj.len() {
        buf.extend_from_slice(&traj.times[k].to_le_bytes());
        buf.extend_from_slice(&traj.step_indices[k].to_le_bytes());
        for x in traj.snapshot(k) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    if let Some(inc) = &traj.increments {
        for x in inc {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.write_all(&buf)
}

struct Cursor<'a> {
    data: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], TrajError> {
        let end = self.at.checked_add(n).ok_or(TrajError::Corrupt("length overflow"))?;
        let s = self.data.get(self.at..end).ok_or(TrajError::Corrupt("truncated"))?;
        self.at = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, TrajError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, TrajError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64, TrajError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize, out: &mut Vec<f64>) -> Result<(), TrajError> {
        let bytes = self.take(n.checked_mul(8).ok_or(TrajError::Corrupt("length overflow"))?)?;
        out.extend(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))));
        Ok(())
    }
}

pub fn read_trajectory<R: Read>(r: &mut R) -> Result<(TrajectoryBlock, TrajectoryHeader), TrajError> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let mut c = Cursor { data: &data, at: 0 };
    if c.take(8)? != MAGIC {
        return Err(TrajError::Magic);
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(TrajError::Version(version));
    }
    let n = c.u64()? as usize;
    let dim = c.u32()? as usize;
    let dt = c.f64()?;
    let diffusion = c.f64()?;
    let seed = c.u64()?;
    let record_every = c.u64()?;
    let n_snap = c.u64()? as usize;
    let n_inc = c.u64()? as usize;
    let name_len = c.u32()? as usize;
    let kernel = String::from_utf8(c.take(name_len)?.to_vec()).map_err(|_| TrajError::Corrupt("kernel name"))?;
    let row = n.checked_mul(dim).ok_or(TrajError::Corrupt("length overflow"))?;
    let mut times = Vec::with_capacity(n_snap.min(1 << 20));
    let mut steps = Vec::with_capacity(n_snap.min(1 << 20));
    let mut snapshots = Vec::new();
    for _ in 0..n_snap {
        times.push(c.f64()?);
        steps.push(c.u64()?);
        c.f64s(row, &mut snapshots)?;
    }
    let increments = if n_inc > 0 {
        let mut v = Vec::new();
        c.f64s(n_inc.checked_mul(row).ok_or(TrajError::Corrupt("length overflow"))?, &mut v)?;
        Some(v)
    } else {
        None
    };
    if c.at != data.len() {
        return Err(TrajError::Corrupt("trailing bytes"));
    }
    Ok((
        TrajectoryBlock {
            n_particles: n,
            dim,
            dt,
            record_every,
            times,
            step_indices: steps,
            snapshots,
            increments,
        },
        TrajectoryHeader { diffusion, seed, kernel },
    ))
}

/// Writes `time, particle, x0, .., x{d-1}` rows for the first `particles`
/// particles of every snapshot. Returns the number of data rows.
pub fn write_marginals_csv<W: Write>(w: W, traj: &TrajectoryBlock, particles: usize) -> csv::Result<usize> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["time".to_string(), "particle".to_string()];
    header.extend((0..traj.dim).map(|j| format!("x{j}")));
    out.write_record(&header)?;
    let keep = particles.min(traj.n_particles);
    let mut rows = 0;
    for k in 0..traj.len() {
        for i in 0..keep {
            let mut rec = vec![format!("{:?}", traj.times[k]), i.to_string()];
            rec.extend(traj.position(k, i).iter().map(|x| format!("{x:?}")));
            out.write_record(&rec)?;
            rows += 1;
        }
    }
    out.flush()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(increments: bool) -> TrajectoryBlock {
        TrajectoryBlock {
            n_particles: 2,
            dim: 2,
            dt: 0.5,
            record_every: 1,
            times: vec![0.0, 0.5],
            step_indices: vec![0, 1],
            snapshots: vec![1.0, 2.0, 3.0, 4.0, -1.0, 0.25, f64::MIN_POSITIVE, 1e300],
            increments: increments.then(|| vec![0.1, 0.2, 0.3, 0.4]),
        }
    }

    #[test]
    fn round_trip_with_and_without_increments() {
        let h = TrajectoryHeader {
            diffusion: 2f64.sqrt(),
            seed: 42,
            kernel: "linear-ou".into(),
        };
        for inc in [false, true] {
            let mut bytes = Vec::new();
            write_trajectory(&mut bytes, &block(inc), &h).unwrap();
            assert_eq!(&bytes[..8], b"CHLBTRJ\0");
            let (b, h2) = read_trajectory(&mut bytes.as_slice()).unwrap();
            assert_eq!(b, block(inc));
            assert_eq!(h2, h);
        }
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let h = TrajectoryHeader { diffusion: 1.0, seed: 0, kernel: "zero".into() };
        let mut bytes = Vec::new();
        write_trajectory(&mut bytes, &block(false), &h).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_trajectory(&mut bad.as_slice()), Err(TrajError::Magic)));
        let mut bad = bytes.clone();
        bad[8] = 2;
        assert!(matches!(read_trajectory(&mut bad.as_slice()), Err(TrajError::Version(2))));
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(read_trajectory(&mut &cut[..]), Err(TrajError::Corrupt(_))));
    }

    #[test]
    fn csv_marginals_have_fixed_header() {
        let mut out = Vec::new();
        let rows = write_marginals_csv(&mut out, &block(false), 1).unwrap();
        assert_eq!(rows, 2);
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "time,particle,x0,x1");
        assert_eq!(text.lines().nth(2).unwrap(), "0.5,0,-1.0,0.25");
    }
}
