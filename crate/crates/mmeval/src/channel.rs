//! Channel tensor, evaluation parameters, antenna-subset selection, and the
//! portable CTF1 channel file format.
//!
//! A [`ChannelTensor`] holds complex channel coefficients indexed by
//! (user `k`, antenna port `m`, subcarrier `l`) together with carrier and
//! bandwidth metadata. Tensors are immutable after construction; every
//! operation on them is a pure function, safe for concurrent reads.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magic bytes that open every CTF1 channel file.
pub const CTF1_MAGIC: [u8; 8] = *b"CTF1\n\0\0\0";

/// Relative tolerance for the normalized-energy invariants.
pub const NORM_TOL: f64 = 1e-9;

/// Physical array the ports belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArrayKind {
    /// Uniform linear array (physically large, omnidirectional elements).
    #[serde(rename = "ULA")]
    Ula,
    /// Uniform cylindrical array (compact, directional patch elements).
    #[serde(rename = "UCA")]
    Uca,
    /// No geometry information attached.
    #[serde(rename = "GENERIC")]
    Generic,
}

/// Normalization state of a tensor.
///
/// `Norm1` equalizes per-user average energy; `Norm2` equalizes the global
/// average energy while preserving inter-user imbalance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormState {
    #[serde(rename = "RAW")]
    Raw,
    #[serde(rename = "NORM1")]
    Norm1,
    #[serde(rename = "NORM2")]
    Norm2,
}

impl std::fmt::Display for NormState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NormState::Raw => "RAW",
            NormState::Norm1 => "NORM1",
            NormState::Norm2 => "NORM2",
        };
        f.write_str(s)
    }
}

/// Complex channel coefficients for K users, A antenna ports and N
/// subcarriers, stored with the subcarrier index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    coeffs: Vec<Complex64>,
    users: usize,
    ports: usize,
    subcarriers: usize,
    carrier_hz: f64,
    bandwidth_hz: f64,
    array_kind: ArrayKind,
    norm_state: NormState,
}

impl ChannelTensor {
    /// Builds a tensor from a coefficient vector in (k, m, l) order with the
    /// subcarrier index l fastest. Verifies dimensions, finiteness, and the
    /// energy invariant implied by `norm_state`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        coeffs: Vec<Complex64>,
        users: usize,
        ports: usize,
        subcarriers: usize,
        carrier_hz: f64,
        bandwidth_hz: f64,
        array_kind: ArrayKind,
        norm_state: NormState,
    ) -> Result<Self> {
        if users == 0 || ports == 0 || subcarriers == 0 {
            return Err(Error::InvalidParam(
                "tensor dimensions must all be at least 1".into(),
            ));
        }
        let expected = users
            .checked_mul(ports)
            .and_then(|v| v.checked_mul(subcarriers))
            .ok_or_else(|| Error::DimensionOverflow(format!("{users}x{ports}x{subcarriers}")))?;
        if coeffs.len() != expected {
            return Err(Error::InvalidParam(format!(
                "expected {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            return Err(Error::InvalidParam("carrier frequency must be positive".into()));
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(Error::InvalidParam("bandwidth must be positive".into()));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let tensor = Self {
            coeffs,
            users,
            ports,
            subcarriers,
            carrier_hz,
            bandwidth_hz,
            array_kind,
            norm_state,
        };
        tensor.check_norm_invariant()?;
        Ok(tensor)
    }

    /// Builds a tensor by evaluating `f(k, m, l)` for every coefficient.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fn<F>(
        users: usize,
        ports: usize,
        subcarriers: usize,
        carrier_hz: f64,
        bandwidth_hz: f64,
        array_kind: ArrayKind,
        norm_state: NormState,
        mut f: F,
    ) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> Complex64,
    {
        let mut coeffs = Vec::with_capacity(users * ports * subcarriers);
        for k in 0..users {
            for m in 0..ports {
                for l in 0..subcarriers {
                    coeffs.push(f(k, m, l));
                }
            }
        }
        Self::new(
            coeffs,
            users,
            ports,
            subcarriers,
            carrier_hz,
            bandwidth_hz,
            array_kind,
            norm_state,
        )
    }

    fn check_norm_invariant(&self) -> Result<()> {
        match self.norm_state {
            NormState::Raw => Ok(()),
            NormState::Norm1 => {
                let target = (self.ports * self.subcarriers) as f64;
                for k in 0..self.users {
                    let e = self.user_energy(k);
                    if (e - target).abs() > NORM_TOL * target {
                        return Err(Error::BadHeader(format!(
                            "declared NORM1 but user {k} mean energy is {}",
                            e / target
                        )));
                    }
                }
                Ok(())
            }
            NormState::Norm2 => {
                let target = (self.users * self.ports * self.subcarriers) as f64;
                let e = self.total_energy();
                if (e - target).abs() > NORM_TOL * target {
                    return Err(Error::BadHeader(format!(
                        "declared NORM2 but global mean energy is {}",
                        e / target
                    )));
                }
                Ok(())
            }
        }
    }

    #[inline]
    fn index(&self, k: usize, m: usize, l: usize) -> usize {
        (k * self.ports + m) * self.subcarriers + l
    }

    /// Coefficient for user `k`, port `m`, subcarrier `l`.
    #[inline]
    pub fn coeff(&self, k: usize, m: usize, l: usize) -> Complex64 {
        debug_assert!(k < self.users && m < self.ports && l < self.subcarriers);
        self.coeffs[self.index(k, m, l)]
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn ports(&self) -> usize {
        self.ports
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn array_kind(&self) -> ArrayKind {
        self.array_kind
    }

    pub fn norm_state(&self) -> NormState {
        self.norm_state
    }

    /// Raw coefficient storage in (k, m, l) order, subcarrier fastest.
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Total energy of user `k`'s row over all ports and subcarriers.
    pub fn user_energy(&self, k: usize) -> f64 {
        let start = self.index(k, 0, 0);
        let end = start + self.ports * self.subcarriers;
        neumaier_sum(self.coeffs[start..end].iter().map(|c| c.norm_sqr()))
    }

    /// Total energy over all users, ports and subcarriers.
    pub fn total_energy(&self) -> f64 {
        neumaier_sum(self.coeffs.iter().map(|c| c.norm_sqr()))
    }

    /// Full K x A channel matrix at subcarrier `l`.
    pub fn matrix_at(&self, l: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.users, self.ports, |k, m| self.coeff(k, m, l))
    }

    /// A x N matrix of a single user's coefficients (ports x subcarriers).
    pub fn user_matrix(&self, k: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.ports, self.subcarriers, |m, l| self.coeff(k, m, l))
    }

    /// Subcarrier frequency offsets from the carrier, in Hz.
    ///
    /// The N subcarriers are assumed uniformly spaced and centered on the
    /// carrier, spanning the full bandwidth.
    pub fn subcarrier_offsets(&self) -> Vec<f64> {
        subcarrier_grid(self.subcarriers, self.bandwidth_hz)
    }

    /// Selects the columns in `subset` from the stored matrix at subcarrier
    /// `l`. The tensor must be normalized first; normalization always applies
    /// to the full A-port matrix, never to a subset.
    pub fn select_subset(&self, subset: &AntennaSubset, l: usize) -> Result<DMatrix<Complex64>> {
        if self.norm_state == NormState::Raw {
            return Err(Error::NormalizationRequired);
        }
        if l >= self.subcarriers {
            return Err(Error::InvalidParam(format!(
                "subcarrier {l} out of range (N={})",
                self.subcarriers
            )));
        }
        let idx = subset.indices();
        if let Some(&bad) = idx.iter().find(|&&m| m >= self.ports) {
            return Err(Error::BadSubset(format!(
                "port index {bad} out of range (A={})",
                self.ports
            )));
        }
        Ok(DMatrix::from_fn(self.users, idx.len(), |k, j| {
            self.coeff(k, idx[j], l)
        }))
    }

    /// Returns a copy with every coefficient of user `k` multiplied by
    /// `scale`, tagged with the given normalization state.
    pub(crate) fn scaled_rows(&self, row_scales: &[f64], state: NormState) -> Result<Self> {
        assert_eq!(row_scales.len(), self.users);
        let mut coeffs = self.coeffs.clone();
        for (k, &s) in row_scales.iter().enumerate() {
            let start = self.index(k, 0, 0);
            let end = start + self.ports * self.subcarriers;
            for c in &mut coeffs[start..end] {
                *c *= s;
            }
        }
        Self::new(
            coeffs,
            self.users,
            self.ports,
            self.subcarriers,
            self.carrier_hz,
            self.bandwidth_hz,
            self.array_kind,
            state,
        )
    }
}

/// Uniform subcarrier offset grid: `n` points centered on 0 spanning
/// `bandwidth` Hz. A single subcarrier sits at 0.
pub fn subcarrier_grid(n: usize, bandwidth: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    let step = bandwidth / (n - 1) as f64;
    (0..n).map(|l| -bandwidth / 2.0 + l as f64 * step).collect()
}

/// Compensated (Neumaier) summation; keeps energy sums accurate enough for
/// the 1e-9 normalization invariants on multi-million-element tensors.
pub(crate) fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Strictly increasing list of port indices identifying an antenna subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AntennaSubset {
    indices: Vec<usize>,
}

impl AntennaSubset {
    /// Builds a subset, requiring strictly increasing (hence unique) indices.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::BadSubset("subset must not be empty".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadSubset(
                "indices must be strictly increasing".into(),
            ));
        }
        Ok(Self { indices })
    }

    /// The full subset 0..ports.
    pub fn full(ports: usize) -> Self {
        Self {
            indices: (0..ports).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Composes nested selections: `self.compose(inner)` selects
    /// `inner`'s picks out of `self`'s picks.
    pub fn compose(&self, inner: &AntennaSubset) -> Result<AntennaSubset> {
        let mapped: Vec<usize> = inner
            .indices
            .iter()
            .map(|&j| {
                self.indices
                    .get(j)
                    .copied()
                    .ok_or_else(|| Error::BadSubset(format!("inner index {j} out of range")))
            })
            .collect::<Result<_>>()?;
        AntennaSubset::new(mapped)
    }
}

/// Normalization selector used by evaluation parameters and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// Per-user energy normalization (removes inter-user imbalance).
    Norm1,
    /// Global energy normalization (preserves inter-user imbalance).
    Norm2,
}

/// Parameters of a Monte-Carlo evaluation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalParams {
    /// Interference-free SNR, linear (not dB).
    pub rho: f64,
    /// Number of simultaneously served single-antenna users K.
    pub num_users: usize,
    /// Antenna counts M to evaluate.
    pub antenna_counts: Vec<usize>,
    /// Number of random antenna subsets per M (ignored when M equals the
    /// full port count, which admits only one subset).
    pub num_subsets: usize,
    /// Master seed; every subset draw derives its own seed from it.
    pub master_seed: u64,
    /// Which normalization the analysis applies to raw input.
    pub normalization: Normalization,
}

impl EvalParams {
    /// Checks parameter ranges against a tensor's dimensions.
    pub fn validate(&self, tensor: &ChannelTensor) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::InvalidParam("rho must be positive".into()));
        }
        if self.num_subsets == 0 {
            return Err(Error::InvalidParam("num_subsets must be at least 1".into()));
        }
        if self.num_users != tensor.users() {
            return Err(Error::InvalidParam(format!(
                "params declare {} users but tensor has {}",
                self.num_users,
                tensor.users()
            )));
        }
        if self.antenna_counts.is_empty() {
            return Err(Error::InvalidParam("antenna_counts must not be empty".into()));
        }
        for &m in &self.antenna_counts {
            if m == 0 || m > tensor.ports() {
                return Err(Error::BadSubset(format!(
                    "antenna count {m} outside 1..={}",
                    tensor.ports()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CtfHeader {
    version: u32,
    users: usize,
    ports: usize,
    subcarriers: usize,
    carrier_hz: f64,
    bandwidth_hz: f64,
    array: ArrayKind,
    norm: NormState,
}

/// Writes a tensor to `path` in the CTF1 format: 8 magic bytes, a 4-byte
/// little-endian header length, a UTF-8 JSON header, then K*A*N complex
/// coefficients as little-endian f64 (re, im) pairs, subcarrier index
/// fastest, then port, then user.
pub fn write_channel_file<P: AsRef<Path>>(tensor: &ChannelTensor, path: P) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_channel_stream(tensor, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes the CTF1 byte stream to any writer.
pub fn write_channel_stream<W: Write>(tensor: &ChannelTensor, w: &mut W) -> Result<()> {
    let header = CtfHeader {
        version: 1,
        users: tensor.users(),
        ports: tensor.ports(),
        subcarriers: tensor.subcarriers(),
        carrier_hz: tensor.carrier_hz(),
        bandwidth_hz: tensor.bandwidth_hz(),
        array: tensor.array_kind(),
        norm: tensor.norm_state(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let header_len = u32::try_from(header_bytes.len())
        .map_err(|_| Error::DimensionOverflow("header too large".into()))?;
    w.write_all(&CTF1_MAGIC)?;
    w.write_all(&header_len.to_le_bytes())?;
    w.write_all(&header_bytes)?;
    // Storage order matches file order, so one pass suffices.
    let mut buf = [0u8; 16];
    for c in tensor.coefficients() {
        buf[..8].copy_from_slice(&c.re.to_le_bytes());
        buf[8..].copy_from_slice(&c.im.to_le_bytes());
        w.write_all(&buf)?;
    }
    Ok(())
}

/// Reads a CTF1 channel file. Malformed magic, header, dimensions, and
/// truncated payloads each produce a distinct error.
pub fn read_channel_file<P: AsRef<Path>>(path: P) -> Result<ChannelTensor> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    read_channel_stream(&mut r)
}

/// Reads only a channel file's header and returns (users, ports,
/// subcarriers) without touching the payload.
pub fn read_channel_dims<P: AsRef<Path>>(path: P) -> Result<(usize, usize, usize)> {
    let file = File::open(path)?;
    let header = read_header(&mut BufReader::new(file))?;
    Ok((header.users, header.ports, header.subcarriers))
}

fn read_header<R: Read>(r: &mut R) -> Result<CtfHeader> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::BadMagic)?;
    if magic != CTF1_MAGIC {
        return Err(Error::BadMagic);
    }
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)
        .map_err(|_| Error::BadHeader("missing header length".into()))?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    const MAX_HEADER: usize = 1 << 20;
    if header_len == 0 || header_len > MAX_HEADER {
        return Err(Error::BadHeader(format!(
            "implausible header length {header_len}"
        )));
    }
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)
        .map_err(|_| Error::BadHeader("header shorter than declared".into()))?;
    let header: CtfHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::BadHeader(e.to_string()))?;
    if header.version != 1 {
        return Err(Error::UnsupportedVersion(header.version));
    }
    if header.users == 0 || header.ports == 0 || header.subcarriers == 0 {
        return Err(Error::BadHeader("zero dimension in header".into()));
    }
    Ok(header)
}

/// Reads a CTF1 byte stream from any reader.
pub fn read_channel_stream<R: Read>(r: &mut R) -> Result<ChannelTensor> {
    let header = read_header(r)?;
    let count = (header.users as u64)
        .checked_mul(header.ports as u64)
        .and_then(|v| v.checked_mul(header.subcarriers as u64))
        .and_then(|v| v.checked_mul(16))
        .ok_or_else(|| {
            Error::DimensionOverflow(format!(
                "{}x{}x{}",
                header.users, header.ports, header.subcarriers
            ))
        })?;
    if count > usize::MAX as u64 {
        return Err(Error::DimensionOverflow(format!("{count} payload bytes")));
    }
    let n_elems = header.users * header.ports * header.subcarriers;
    let mut coeffs = Vec::with_capacity(n_elems);
    let mut buf = [0u8; 16];
    for i in 0..n_elems {
        if let Err(e) = r.read_exact(&mut buf) {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                return Err(Error::Truncated {
                    expected: count,
                    got: i as u64 * 16,
                });
            }
            return Err(e.into());
        }
        let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
        let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
        coeffs.push(Complex64::new(re, im));
    }
    ChannelTensor::new(
        coeffs,
        header.users,
        header.ports,
        header.subcarriers,
        header.carrier_hz,
        header.bandwidth_hz,
        header.array,
        header.norm,
    )
}
