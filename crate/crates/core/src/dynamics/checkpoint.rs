//! Binary trajectory checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "STROBOSQ" | version u32 | reserved u32
//! n_records u64 | n_steps u64 | samples_per_period u64 | n_max u64
//! dt, total_time, duty, omega_m, phase, larmor, kappa, zeta2, gamma_ex  (f64)
//! per record: seed u64 | n_steps x [t, x_A, p_A, x_out, p_out] f64 | x_A(T), p_A(T) f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::grid::TimeGrid;
use super::trajectory::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::params::InteractionRates;
use crate::strobe::StroboConfig;

const MAGIC: &[u8; 8] = b"STROBOSQ";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub rates: InteractionRates,
    pub strobo: StroboConfig,
    pub grid: TimeGrid,
    pub records: Vec<TrajectoryRecord>,
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode(&mut w, ck).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    decode(&mut r).map_err(|e| match e {
        DecodeError::Io(e) => Error::io(path, e),
        DecodeError::Format(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
    })
}

fn encode(w: &mut impl Write, ck: &Checkpoint) -> std::io::Result<()> {
    let n = ck.grid.n_steps;
    for rec in &ck.records {
        if rec.times.len() != n || rec.atom_series.len() != n || rec.light_out_series.len() != n {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("record {} does not have {n} steps", rec.seed),
            ));
        }
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for v in [
        ck.records.len() as u64,
        n as u64,
        ck.grid.samples_per_period as u64,
        ck.strobo.n_max as u64,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [
        ck.grid.dt,
        ck.grid.total_time,
        ck.strobo.duty,
        ck.strobo.omega_m,
        ck.strobo.phase,
        ck.rates.larmor,
        ck.rates.kappa,
        ck.rates.zeta2,
        ck.rates.gamma_ex,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for rec in &ck.records {
        w.write_all(&rec.seed.to_le_bytes())?;
        for k in 0..n {
            let a = rec.atom_series[k];
            let o = rec.light_out_series[k];
            for v in [rec.times[k], a[0], a[1], o[0], o[1]] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.write_all(&rec.final_state[0].to_le_bytes())?;
        w.write_all(&rec.final_state[1].to_le_bytes())?;
    }
    Ok(())
}

enum DecodeError {
    Io(std::io::Error),
    Format(String),
}

impl From<std::io::Error> for DecodeError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            DecodeError::Format("truncated file".into())
        } else {
            DecodeError::Io(e)
        }
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

fn decode(r: &mut impl Read) -> std::result::Result<Checkpoint, DecodeError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DecodeError::Format("not a trajectory checkpoint".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(DecodeError::Format(format!("unsupported version {version}")));
    }
    read_u32(r)?;
    let n_records = read_u64(r)? as usize;
    let n_steps = read_u64(r)? as usize;
    let samples_per_period = read_u64(r)? as usize;
    let n_max = read_u64(r)? as usize;
    let mut h = [0.0; 9];
    for v in &mut h {
        *v = read_f64(r)?;
    }
    let [dt, total_time, duty, omega_m, phase, larmor, kappa, zeta2, gamma_ex] = h;

    let mut records = Vec::with_capacity(n_records.min(1 << 16));
    for _ in 0..n_records {
        let seed = read_u64(r)?;
        let mut times = Vec::with_capacity(n_steps);
        let mut atom_series = Vec::with_capacity(n_steps);
        let mut light_out_series = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            times.push(read_f64(r)?);
            atom_series.push([read_f64(r)?, read_f64(r)?]);
            light_out_series.push([read_f64(r)?, read_f64(r)?]);
        }
        let final_state = [read_f64(r)?, read_f64(r)?];
        records.push(TrajectoryRecord {
            seed,
            times,
            atom_series,
            light_out_series,
            final_state,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(DecodeError::Format("trailing bytes".into()));
    }
    Ok(Checkpoint {
        rates: InteractionRates {
            kappa,
            zeta2,
            gamma_ex,
            larmor,
        },
        strobo: StroboConfig {
            duty,
            omega_m,
            phase,
            n_max,
        },
        grid: TimeGrid {
            dt,
            total_time,
            n_steps,
            samples_per_period,
        },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{SimulationOptions, Simulator};
    use std::f64::consts::TAU;

    #[test]
    fn round_trip_is_bit_exact() {
        let larmor = TAU * 500e3;
        let rates = InteractionRates::from_reduced(0.1, larmor / 100.0, 0.8, 0.08, larmor).unwrap();
        let strobo = StroboConfig::locked(0.08, larmor).unwrap();
        let grid = TimeGrid::auto(&strobo, larmor, 0.2 / rates.gamma_total(0.08)).unwrap();
        let sim = Simulator::new(&rates, &strobo, &grid, SimulationOptions::default()).unwrap();
        let ck = Checkpoint {
            rates,
            strobo,
            grid,
            records: vec![sim.record(1), sim.record(2)],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ckpt");
        write_checkpoint(&path, &ck).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back, ck);

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Checkpoint(_))));
    }
}
