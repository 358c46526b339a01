use std::collections::BTreeMap;
use std::io::{BufRead, BufWriter, Read, Write};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::lti::{Channel, Injection};

pub const BINARY_MAGIC: &[u8; 8] = b"BLIMSIG1";

/// Sampled loop signals sharing one time base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalBundle {
    pub dt: f64,
    pub channels: BTreeMap<Channel, Vec<f64>>,
    pub seed: u64,
    pub burn_in_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injection: Option<Injection>,
}

impl SignalBundle {
    pub fn new(dt: f64, channels: BTreeMap<Channel, Vec<f64>>, seed: u64, burn_in_samples: usize) -> Result<Self, SimError> {
        if dt.is_nan() || dt <= 0.0 {
            return Err(SimError::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let mut lens = channels.values().map(Vec::len);
        if let Some(n) = lens.next() {
            if lens.any(|m| m != n) {
                return Err(SimError::InvalidParameter("channels differ in length".into()));
            }
            if n < 2 * burn_in_samples {
                return Err(SimError::InvalidParameter(format!(
                    "{n} samples is less than twice the burn-in {burn_in_samples}"
                )));
            }
        }
        Ok(SignalBundle {
            dt,
            channels,
            seed,
            burn_in_samples,
            injection: None,
        })
    }

    pub fn len(&self) -> usize {
        self.channels.values().next().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, ch: Channel) -> Result<&[f64], SimError> {
        self.channels
            .get(&ch)
            .map(Vec::as_slice)
            .ok_or(SimError::MissingChannel(ch.name()))
    }

    /// Samples after the burn-in.
    pub fn steady(&self, ch: Channel) -> Result<&[f64], SimError> {
        Ok(&self.channel(ch)?[self.burn_in_samples..])
    }

    /// CSV with a `t` column followed by the present channels in `u, v, w, y, d, e` order.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(w);
        let present: Vec<(&Channel, &Vec<f64>)> = Channel::ALL
            .iter()
            .filter_map(|c| self.channels.get_key_value(c))
            .collect();
        write!(w, "t")?;
        for (c, _) in &present {
            write!(w, ",{}", c.name())?;
        }
        writeln!(w)?;
        for k in 0..self.len() {
            write!(w, "{}", k as f64 * self.dt)?;
            for (_, v) in &present {
                write!(w, ",{}", v[k])?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, SimError> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| SimError::Format("empty CSV".into()))??;
        let names: Vec<&str> = header.trim().split(',').collect();
        if names.first() != Some(&"t") {
            return Err(SimError::Format("first CSV column must be t".into()));
        }
        let chans: Vec<Channel> = names[1..]
            .iter()
            .map(|n| Channel::parse(n).ok_or_else(|| SimError::Format(format!("unknown channel {n}"))))
            .collect::<Result<_, _>>()?;
        let mut t = Vec::new();
        let mut data: Vec<Vec<f64>> = vec![Vec::new(); chans.len()];
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64, SimError> {
                s.ok_or_else(|| SimError::Format("short CSV row".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| SimError::Format(e.to_string()))
            };
            t.push(parse(fields.next())?);
            for col in data.iter_mut() {
                col.push(parse(fields.next())?);
            }
        }
        let dt = if t.len() >= 2 { t[1] - t[0] } else { 1.0 };
        let channels = chans.into_iter().zip(data).collect();
        SignalBundle::new(dt, channels, 0, 0)
    }

    /// Binary block: magic, `u64` count, `f64` dt, then all six channels in
    /// `u, v, w, y, d, e` order; absent channels are written as NaN.
    pub fn write_binary<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(w);
        let n = self.len();
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        for c in Channel::ALL {
            match self.channels.get(&c) {
                Some(v) => {
                    for x in v {
                        w.write_all(&x.to_le_bytes())?;
                    }
                }
                None => {
                    for _ in 0..n {
                        w.write_all(&f64::NAN.to_le_bytes())?;
                    }
                }
            }
        }
        w.flush()
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, SimError> {
        let mut head = [0u8; 24];
        r.read_exact(&mut head)?;
        if &head[..8] != BINARY_MAGIC {
            return Err(SimError::Format("bad magic".into()));
        }
        let n = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
        let dt = f64::from_le_bytes(head[16..24].try_into().unwrap());
        let mut channels = BTreeMap::new();
        let mut buf = vec![0u8; n * 8];
        for c in Channel::ALL {
            r.read_exact(&mut buf)?;
            let v: Vec<f64> = buf.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
            if !v.iter().all(|x| x.is_nan()) || n == 0 {
                channels.insert(c, v);
            }
        }
        SignalBundle::new(dt, channels, 0, 0)
    }
}
