//! SAGE-style multipath estimation over sliding antenna windows, and the
//! reduction of the estimates to spatial fingerprints.
//!
//! Within a short window of neighboring elements the incoming wavefronts are
//! treated as planar, so each multipath component is a separable signature
//! `u_m(az) v_l(tau) = e^{j psi_m(az)} e^{-j2 pi f_l tau}`. Estimation runs
//! successive interference cancellation over a delay x azimuth grid to
//! initialize up to `num_mpcs` components, then EM cycles that re-estimate
//! each component against the residual of all others (one
//! quadratic-interpolation refinement per parameter, least-squares
//! amplitude). A fingerprint accumulates `|a|^2` per (window position,
//! azimuth bin) and selects the smallest set of cells holding the requested
//! energy fraction.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{ArrayKind, ChannelTensor};
use crate::error::{Error, Result};
use crate::models::Mpc;

/// Azimuth bin width of fingerprint maps, degrees. Finer than the window
/// beamwidth would be meaningless.
pub const FINGERPRINT_BIN_DEG: f64 = 2.0;

/// Components weaker than this many dB below the strongest are pruned.
pub const PRUNE_DB: f64 = -40.0;

/// Configuration of the window estimator.
#[derive(Debug, Clone)]
pub struct SageConfig {
    /// Sliding-window length in elements.
    pub window_len: usize,
    /// Number of components to estimate per window.
    pub num_mpcs: usize,
    /// Azimuth grid step in degrees over [0, 180].
    pub azimuth_step_deg: f64,
    /// Delay grid span in seconds; defaults to the inverse subcarrier
    /// spacing (one OFDM-symbol-equivalent span).
    pub delay_span: Option<f64>,
    /// Delay grid step in seconds; defaults to 1/(4 bandwidth).
    pub delay_step: Option<f64>,
    /// Maximum EM cycles after initialization.
    pub max_cycles: usize,
    /// Stop when one cycle reduces residual energy by less than this
    /// fraction of the input energy.
    pub residual_tol: f64,
}

impl Default for SageConfig {
    fn default() -> Self {
        Self {
            window_len: 10,
            num_mpcs: 200,
            azimuth_step_deg: 1.0,
            delay_span: None,
            delay_step: None,
            max_cycles: 15,
            residual_tol: 1e-6,
        }
    }
}

/// Output of one window estimation.
#[derive(Debug, Clone)]
pub struct SageEstimate {
    /// Estimated components, strongest first.
    pub mpcs: Vec<Mpc>,
    /// True when fewer components than requested were returned.
    pub truncated: bool,
    /// Energy of the final residual.
    pub residual_energy: f64,
    /// Energy of the input window.
    pub input_energy: f64,
    /// EM cycles run after initialization.
    pub cycles: usize,
}

/// Spatial fingerprint: per-(window position, azimuth bin) energy with the
/// greedy-minimal set of bins covering at least `energy_fraction` of the
/// total energy.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintMap {
    pub num_windows: usize,
    pub num_bins: usize,
    pub bin_width_deg: f64,
    /// Row-major (window, bin) energies.
    pub energy: Vec<f64>,
    /// Row-major (window, bin) selection mask.
    pub selected: Vec<bool>,
    pub energy_fraction: f64,
}

impl FingerprintMap {
    #[inline]
    fn cell(&self, window: usize, bin: usize) -> usize {
        window * self.num_bins + bin
    }

    pub fn energy_at(&self, window: usize, bin: usize) -> f64 {
        self.energy[self.cell(window, bin)]
    }

    pub fn is_selected(&self, window: usize, bin: usize) -> bool {
        self.selected[self.cell(window, bin)]
    }

    pub fn total_energy(&self) -> f64 {
        self.energy.iter().sum()
    }

    pub fn selected_energy(&self) -> f64 {
        self.energy
            .iter()
            .zip(&self.selected)
            .filter(|&(_, &s)| s)
            .map(|(e, _)| e)
            .sum()
    }

    /// Azimuth of a bin center, degrees.
    pub fn bin_center_deg(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) * self.bin_width_deg
    }

    /// Strongest bin of a window row, if the row holds any energy.
    pub fn argmax_bin(&self, window: usize) -> Option<usize> {
        let row = &self.energy[window * self.num_bins..(window + 1) * self.num_bins];
        let (bin, &e) = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
        (e > 0.0).then_some(bin)
    }

    /// CSV rows `window_index,azimuth_deg,energy,selected`.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "window_index,azimuth_deg,energy,selected")?;
        for win in 0..self.num_windows {
            for bin in 0..self.num_bins {
                writeln!(
                    w,
                    "{},{},{},{}",
                    win,
                    self.bin_center_deg(bin),
                    self.energy_at(win, bin),
                    u8::from(self.is_selected(win, bin)),
                )?;
            }
        }
        Ok(())
    }
}

fn steering(positions: &[f64], wavelength: f64, az_deg: f64) -> DVector<Complex64> {
    let cos_az = az_deg.to_radians().cos();
    DVector::from_iterator(
        positions.len(),
        positions.iter().map(|&x| {
            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * x / wavelength * cos_az)
        }),
    )
}

fn delay_signature(freqs: &[f64], tau: f64) -> DVector<Complex64> {
    DVector::from_iterator(
        freqs.len(),
        freqs
            .iter()
            .map(|&f| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * tau)),
    )
}

fn matrix_energy(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum()
}

/// Parabolic peak refinement over three equally spaced magnitudes; returns
/// the sub-grid offset in units of the grid step, clamped to half a step.
fn parabolic_offset(y_minus: f64, y_center: f64, y_plus: f64) -> f64 {
    let denom = y_minus - 2.0 * y_center + y_plus;
    if denom.abs() < 1e-300 {
        return 0.0;
    }
    (0.5 * (y_minus - y_plus) / denom).clamp(-0.5, 0.5)
}

struct Component {
    delay: f64,
    azimuth_deg: f64,
    amplitude: Complex64,
    u: DVector<Complex64>,
    v: DVector<Complex64>,
}

impl Component {
    fn reconstruction(&self) -> DMatrix<Complex64> {
        (&self.u * self.v.transpose()) * self.amplitude
    }
}

/// Correlation of a separable signature with the window data:
/// `sum_{m,l} conj(u_m v_l) R[m,l]`.
fn inner(u: &DVector<Complex64>, v: &DVector<Complex64>, r: &DMatrix<Complex64>) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for l in 0..r.ncols() {
        let vl = v[l].conj();
        let mut col = Complex64::new(0.0, 0.0);
        for m in 0..r.nrows() {
            col += u[m].conj() * r[(m, l)];
        }
        acc += col * vl;
    }
    acc
}

/// Joint delay/azimuth/amplitude estimation of the multipath components in
/// one window. `positions` are the window elements' coordinates along the
/// array in meters; `subcarrier_offsets` the frequency grid in Hz.
pub fn sage_estimate(
    window: &DMatrix<Complex64>,
    positions: &[f64],
    wavelength: f64,
    subcarrier_offsets: &[f64],
    config: &SageConfig,
) -> Result<SageEstimate> {
    let w = window.nrows();
    let n = window.ncols();
    if w != config.window_len || w != positions.len() {
        return Err(Error::InvalidParam(format!(
            "window rows {w} must match window_len {} and positions {}",
            config.window_len,
            positions.len()
        )));
    }
    if config.window_len < 2 {
        return Err(Error::InvalidParam("window_len must be at least 2".into()));
    }
    if n < 2 || subcarrier_offsets.len() != n {
        return Err(Error::InvalidParam(
            "need at least 2 subcarriers with a known grid".into(),
        ));
    }
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(Error::InvalidParam("wavelength must be positive".into()));
    }
    if config.num_mpcs == 0 {
        return Err(Error::InvalidParam("num_mpcs must be at least 1".into()));
    }
    if window.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite);
    }

    let bandwidth = subcarrier_offsets[n - 1] - subcarrier_offsets[0];
    let spacing = bandwidth / (n - 1) as f64;
    if spacing.is_nan() || spacing <= 0.0 {
        return Err(Error::InvalidParam("subcarrier grid must be increasing".into()));
    }
    let delay_span = config.delay_span.unwrap_or(1.0 / spacing);
    let delay_step = config.delay_step.unwrap_or(1.0 / (4.0 * bandwidth));
    let az_step = config.azimuth_step_deg;
    if !(delay_step > 0.0 && delay_span >= delay_step && az_step > 0.0 && az_step <= 180.0) {
        return Err(Error::InvalidParam("degenerate estimation grids".into()));
    }

    let azimuths: Vec<f64> = {
        let count = (180.0 / az_step).floor() as usize + 1;
        (0..count).map(|a| (a as f64 * az_step).min(180.0)).collect()
    };
    let delays: Vec<f64> = {
        let count = (delay_span / delay_step).floor() as usize + 1;
        (0..count).map(|t| t as f64 * delay_step).collect()
    };

    // signature banks: U is W x Naz, V is N x Ntau
    let u_bank = DMatrix::from_fn(w, azimuths.len(), |m, a| {
        Complex64::from_polar(
            1.0,
            2.0 * std::f64::consts::PI * positions[m] / wavelength * azimuths[a].to_radians().cos(),
        )
    });
    let u_adj = u_bank.adjoint();
    let v_conj = DMatrix::from_fn(n, delays.len(), |l, t| {
        Complex64::from_polar(
            1.0,
            2.0 * std::f64::consts::PI * subcarrier_offsets[l] * delays[t],
        )
    });
    let sig_energy = (w * n) as f64;

    let input_energy = matrix_energy(window);
    let energy_floor = input_energy * 1e-24 + 1e-300;

    let grid_points = azimuths.len() * delays.len();
    let requested = config.num_mpcs.min(grid_points);

    // grid argmax of |<s, r>|^2 over the full surface
    let grid_peak = |r: &DMatrix<Complex64>| -> (usize, usize, Complex64, f64) {
        let surface = &u_adj * (r * &v_conj);
        let mut best = (0usize, 0usize, 0.0f64);
        for a in 0..surface.nrows() {
            for t in 0..surface.ncols() {
                let p = surface[(a, t)].norm_sqr();
                if p > best.2 {
                    best = (a, t, p);
                }
            }
        }
        (best.0, best.1, surface[(best.0, best.1)], best.2)
    };

    // successive interference cancellation initialization
    let mut components: Vec<Component> = Vec::new();
    let mut residual = window.clone();
    for _ in 0..requested {
        if matrix_energy(&residual) <= energy_floor {
            break;
        }
        let (a_idx, t_idx, peak, power) = grid_peak(&residual);
        if power <= energy_floor {
            break;
        }
        let u = u_bank.column(a_idx).into_owned();
        let v = DVector::from_fn(n, |l, _| v_conj[(l, t_idx)].conj());
        let amplitude = peak / sig_energy;
        let comp = Component {
            delay: delays[t_idx],
            azimuth_deg: azimuths[a_idx],
            amplitude,
            u,
            v,
        };
        residual -= comp.reconstruction();
        components.push(comp);
    }

    // EM cycles: re-estimate each component against the residual of the rest
    let mut cycles = 0usize;
    let mut prev_energy = matrix_energy(&residual);
    if !components.is_empty() {
        for _cycle in 0..config.max_cycles {
            cycles += 1;
            #[allow(clippy::needless_range_loop)]
            for p in 0..components.len() {
                let data_p = &residual + components[p].reconstruction();

                let (a_idx, t_idx, _, grid_power) = grid_peak(&data_p);

                // quadratic refinement, azimuth first at the grid delay
                let az = {
                    if a_idx == 0 || a_idx + 1 == azimuths.len() {
                        azimuths[a_idx]
                    } else {
                        let pw = |ai: usize| {
                            let mut acc = Complex64::new(0.0, 0.0);
                            for l in 0..n {
                                let mut col = Complex64::new(0.0, 0.0);
                                for m in 0..w {
                                    col += u_bank[(m, ai)].conj() * data_p[(m, l)];
                                }
                                acc += col * v_conj[(l, t_idx)];
                            }
                            acc.norm_sqr()
                        };
                        let off = parabolic_offset(pw(a_idx - 1), grid_power, pw(a_idx + 1));
                        (azimuths[a_idx] + off * az_step).clamp(0.0, 180.0)
                    }
                };
                let u_ref = steering(positions, wavelength, az);

                // then delay at the refined azimuth
                let tau = {
                    let pw = |tau: f64| {
                        inner(&u_ref, &delay_signature(subcarrier_offsets, tau), &data_p)
                            .norm_sqr()
                    };
                    if t_idx == 0 || t_idx + 1 == delays.len() {
                        delays[t_idx]
                    } else {
                        let y0 = pw(delays[t_idx]);
                        let off = parabolic_offset(
                            pw(delays[t_idx - 1]),
                            y0,
                            pw(delays[t_idx + 1]),
                        );
                        delays[t_idx] + off * delay_step
                    }
                };
                let v_ref = delay_signature(subcarrier_offsets, tau);
                let refined_inner = inner(&u_ref, &v_ref, &data_p);

                // keep the current parameters when the refined grid pick
                // does not improve the removed energy
                let cur_inner = inner(&components[p].u, &components[p].v, &data_p);
                let comp = if refined_inner.norm_sqr() >= cur_inner.norm_sqr() {
                    Component {
                        delay: tau,
                        azimuth_deg: az,
                        amplitude: refined_inner / sig_energy,
                        u: u_ref,
                        v: v_ref,
                    }
                } else {
                    Component {
                        delay: components[p].delay,
                        azimuth_deg: components[p].azimuth_deg,
                        amplitude: cur_inner / sig_energy,
                        u: components[p].u.clone(),
                        v: components[p].v.clone(),
                    }
                };
                residual = data_p - comp.reconstruction();
                components[p] = comp;
            }

            // re-anchor the residual to the exact reconstruction identity
            residual = window.clone();
            for c in &components {
                residual -= c.reconstruction();
            }
            let e = matrix_energy(&residual);
            let improvement = prev_energy - e;
            prev_energy = e;
            if improvement <= config.residual_tol * input_energy || e <= energy_floor {
                break;
            }
        }
    }

    // prune components far below the strongest
    let strongest = components
        .iter()
        .map(|c| c.amplitude.norm())
        .fold(0.0f64, f64::max);
    let floor = strongest * 10f64.powf(PRUNE_DB / 20.0);
    let mut mpcs: Vec<Mpc> = components
        .iter()
        .filter(|c| c.amplitude.norm() >= floor)
        .map(|c| Mpc {
            delay: c.delay,
            azimuth_deg: c.azimuth_deg,
            amplitude: c.amplitude,
        })
        .collect();
    mpcs.sort_by(|a, b| {
        b.amplitude
            .norm_sqr()
            .partial_cmp(&a.amplitude.norm_sqr())
            .unwrap()
    });
    let truncated = mpcs.len() < config.num_mpcs;

    Ok(SageEstimate {
        mpcs,
        truncated,
        residual_energy: prev_energy,
        input_energy,
        cycles,
    })
}

/// Builds one user's spatial fingerprint by sliding the window one element
/// at a time, estimating components per window, and accumulating their
/// energies into (window position, azimuth bin) cells until the selected
/// cells cover `energy_fraction` of the total.
pub fn build_fingerprint(
    tensor: &ChannelTensor,
    user: usize,
    config: &SageConfig,
    energy_fraction: f64,
) -> Result<FingerprintMap> {
    if tensor.array_kind() != ArrayKind::Ula {
        return Err(Error::InvalidParam(
            "fingerprints are defined for the ULA".into(),
        ));
    }
    if user >= tensor.users() {
        return Err(Error::InvalidParam(format!(
            "user {user} out of range ({} users)",
            tensor.users()
        )));
    }
    if !(0.0..=1.0).contains(&energy_fraction) {
        return Err(Error::InvalidParam(
            "energy_fraction must be within [0, 1]".into(),
        ));
    }
    let a = tensor.ports();
    let w = config.window_len;
    if w > a {
        return Err(Error::WindowTooLarge { window: w, array: a });
    }
    let wavelength = crate::models::SPEED_OF_LIGHT / tensor.carrier_hz();
    let positions: Vec<f64> = (0..a).map(|m| m as f64 * wavelength / 2.0).collect();
    let freqs = tensor.subcarrier_offsets();
    let user_mat = tensor.user_matrix(user);

    let num_windows = a - w + 1;
    let num_bins = (180.0 / FINGERPRINT_BIN_DEG).ceil() as usize;

    let rows: Vec<Vec<f64>> = (0..num_windows)
        .into_par_iter()
        .map(|start| {
            let window = user_mat.rows(start, w).into_owned();
            let est = sage_estimate(&window, &positions[start..start + w], wavelength, &freqs, config)?;
            let mut row = vec![0.0f64; num_bins];
            for mpc in &est.mpcs {
                let bin = ((mpc.azimuth_deg / FINGERPRINT_BIN_DEG) as usize).min(num_bins - 1);
                row[bin] += mpc.amplitude.norm_sqr();
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut energy = Vec::with_capacity(num_windows * num_bins);
    for row in rows {
        energy.extend(row);
    }
    let selected = select_cells(&energy, energy_fraction);
    Ok(FingerprintMap {
        num_windows,
        num_bins,
        bin_width_deg: FINGERPRINT_BIN_DEG,
        energy,
        selected,
        energy_fraction,
    })
}

/// Greedy-minimal selection: cells in descending energy order until the
/// requested fraction of the total energy is covered.
fn select_cells(energy: &[f64], fraction: f64) -> Vec<bool> {
    let total: f64 = energy.iter().sum();
    let mut selected = vec![false; energy.len()];
    if total <= 0.0 {
        return selected;
    }
    let mut order: Vec<usize> = (0..energy.len()).collect();
    order.sort_by(|&a, &b| {
        energy[b]
            .partial_cmp(&energy[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let target = fraction * total;
    let mut acc = 0.0;
    for &i in &order {
        if acc >= target || energy[i] <= 0.0 {
            break;
        }
        selected[i] = true;
        acc += energy[i];
    }
    selected
}

/// Energy-weighted Jaccard overlap of two fingerprints' selected cells:
/// the combined energy of cells selected in both maps over the combined
/// energy of cells selected in either. 1 for identical maps, 0 for disjoint
/// selections.
pub fn fingerprint_overlap(a: &FingerprintMap, b: &FingerprintMap) -> Result<f64> {
    if a.num_windows != b.num_windows
        || a.num_bins != b.num_bins
        || a.bin_width_deg != b.bin_width_deg
    {
        return Err(Error::GridMismatch(format!(
            "{}x{} vs {}x{}",
            a.num_windows, a.num_bins, b.num_windows, b.num_bins
        )));
    }
    let mut inter = 0.0;
    let mut union = 0.0;
    for i in 0..a.energy.len() {
        let weight = a.energy[i] + b.energy[i];
        match (a.selected[i], b.selected[i]) {
            (true, true) => {
                inter += weight;
                union += weight;
            }
            (true, false) | (false, true) => union += weight,
            (false, false) => {}
        }
    }
    if union == 0.0 {
        // both selections empty: identical, so full overlap
        return Ok(1.0);
    }
    Ok(inter / union)
}
