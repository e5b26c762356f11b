//! Little-endian binary network records.
//!
//! ```text
//! "FCNN" | u32 version | f64 output_scale | u32 n_layers
//! per layer: u32 in | u32 out | u8 activation (0 relu, 1 tanh, 2 identity)
//!            | f64 weights[out * in] (row-major) | f64 biases[out]
//! u8 has_adam
//! if 1: f64 lr | f64 beta1 | f64 beta2 | f64 eps | u64 step_count
//!       | first moments | second moments (parameter order as above)
//! ```

use ndarray::{Array1, Array2};

use super::{Activation, AdamConfig, AdamState, DenseNet, Gradients, Layer, NnError};

pub const NET_FORMAT_VERSION: u32 = 1;
const NET_MAGIC: &[u8; 4] = b"FCNN";

#[derive(Debug, Default, Clone)]
pub struct CheckpointWriter {
    buf: Vec<u8>,
}

impl CheckpointWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    /// Length-prefixed UTF-8.
    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug, Clone)]
pub struct CheckpointReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> CheckpointReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            NnError::Checkpoint(format!("truncated at byte {} (wanted {n} more)", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().expect("8 bytes")))
    }

    pub fn str(&mut self) -> Result<String, NnError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.bytes(n)?.to_vec()).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn is_at_end(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn write_params(w: &mut CheckpointWriter, g: &Gradients) {
    for (dw, db) in g.dw.iter().zip(&g.db) {
        dw.iter().chain(db.iter()).for_each(|&v| w.f64(v));
    }
}

fn read_params(r: &mut CheckpointReader, like: &DenseNet) -> Result<Gradients, NnError> {
    let mut g = Gradients::zeros_like(like);
    for (dw, db) in g.dw.iter_mut().zip(g.db.iter_mut()) {
        for v in dw.iter_mut().chain(db.iter_mut()) {
            *v = r.f64()?;
        }
    }
    Ok(g)
}

pub fn write_net(w: &mut CheckpointWriter, net: &DenseNet, adam: Option<&AdamState>) {
    w.bytes(NET_MAGIC);
    w.u32(NET_FORMAT_VERSION);
    w.f64(net.output_scale);
    w.u32(net.layers.len() as u32);
    for l in &net.layers {
        w.u32(l.n_in() as u32);
        w.u32(l.n_out() as u32);
        w.u8(l.activation.code());
        l.w.iter().chain(l.b.iter()).for_each(|&v| w.f64(v));
    }
    match adam {
        None => w.u8(0),
        Some(a) => {
            w.u8(1);
            let c = a.config;
            for v in [c.learning_rate, c.beta1, c.beta2, c.epsilon] {
                w.f64(v);
            }
            w.u64(a.step_count);
            write_params(w, &a.m);
            write_params(w, &a.v);
        }
    }
}

pub fn read_net(r: &mut CheckpointReader) -> Result<(DenseNet, Option<AdamState>), NnError> {
    if r.bytes(4)? != NET_MAGIC {
        return Err(NnError::Checkpoint("bad network magic".into()));
    }
    let version = r.u32()?;
    if version != NET_FORMAT_VERSION {
        return Err(NnError::Checkpoint(format!(
            "network format version {version}, this build reads {NET_FORMAT_VERSION}"
        )));
    }
    let output_scale = r.f64()?;
    let n = r.u32()? as usize;
    if n == 0 {
        return Err(NnError::Checkpoint("network has no layers".into()));
    }
    let mut layers = Vec::with_capacity(n);
    for i in 0..n {
        let n_in = r.u32()? as usize;
        let n_out = r.u32()? as usize;
        if let Some(prev) = layers.last().map(Layer::n_out) {
            if prev != n_in {
                return Err(NnError::Checkpoint(format!("layer {i} expects {n_in} inputs, previous gives {prev}")));
            }
        }
        let code = r.u8()?;
        let activation =
            Activation::from_code(code).ok_or_else(|| NnError::Checkpoint(format!("unknown activation code {code}")))?;
        let mut w = Array2::zeros((n_out, n_in));
        for v in w.iter_mut() {
            *v = r.f64()?;
        }
        let mut b = Array1::zeros(n_out);
        for v in b.iter_mut() {
            *v = r.f64()?;
        }
        layers.push(Layer { w, b, activation });
    }
    let net = DenseNet { layers, output_scale };
    let adam = match r.u8()? {
        0 => None,
        1 => {
            let config = AdamConfig {
                learning_rate: r.f64()?,
                beta1: r.f64()?,
                beta2: r.f64()?,
                epsilon: r.f64()?,
            };
            let step_count = r.u64()?;
            let m = read_params(r, &net)?;
            let v = read_params(r, &net)?;
            Some(AdamState {
                config,
                m,
                v,
                step_count,
            })
        }
        f => return Err(NnError::Checkpoint(format!("bad optimizer flag {f}"))),
    };
    Ok((net, adam))
}
