//! The two channel normalizations, always applied to the full A-port tensor.
//!
//! Normalization 1 scales each user row so its average coefficient energy
//! over all ports and subcarriers equals one, removing inter-user attenuation
//! imbalance. Normalization 2 applies a single global scale so that the
//! average coefficient energy over all users, ports and subcarriers equals
//! one, preserving inter-user imbalance. Subset selection deliberately
//! refuses raw tensors so that normalization can never happen after
//! column selection.

use crate::channel::{ChannelTensor, NormState};
use crate::error::{Error, Result};

/// Per-user energy normalization.
///
/// Row `i` is scaled by `sqrt(A*N / sum_l ||h_i,l||^2)` so every user ends up
/// with unit average coefficient energy.
pub fn normalize1(tensor: &ChannelTensor) -> Result<ChannelTensor> {
    require_raw(tensor)?;
    let target = (tensor.ports() * tensor.subcarriers()) as f64;
    let scales: Vec<f64> = (0..tensor.users())
        .map(|k| {
            let e = tensor.user_energy(k);
            if e <= 0.0 {
                Err(Error::DegenerateUser(k))
            } else {
                Ok((target / e).sqrt())
            }
        })
        .collect::<Result<_>>()?;
    tensor.scaled_rows(&scales, NormState::Norm1)
}

/// Global energy normalization.
///
/// The whole tensor is scaled by `sqrt(A*K*N / sum_l ||H_l||_F^2)`; ratios of
/// row energies are unchanged.
pub fn normalize2(tensor: &ChannelTensor) -> Result<ChannelTensor> {
    require_raw(tensor)?;
    let target = (tensor.users() * tensor.ports() * tensor.subcarriers()) as f64;
    let e = tensor.total_energy();
    if e <= 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let scale = (target / e).sqrt();
    let scales = vec![scale; tensor.users()];
    tensor.scaled_rows(&scales, NormState::Norm2)
}

fn require_raw(tensor: &ChannelTensor) -> Result<()> {
    match tensor.norm_state() {
        NormState::Raw => Ok(()),
        other => Err(Error::AlreadyNormalized(other.to_string())),
    }
}

/// Mean coefficient energy of one user row; 1.0 after [`normalize1`].
pub fn user_mean_energy(tensor: &ChannelTensor, user: usize) -> f64 {
    tensor.user_energy(user) / (tensor.ports() * tensor.subcarriers()) as f64
}

/// Mean coefficient energy of the whole tensor; 1.0 after [`normalize2`].
pub fn global_mean_energy(tensor: &ChannelTensor) -> f64 {
    tensor.total_energy() / (tensor.users() * tensor.ports() * tensor.subcarriers()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ArrayKind, ChannelTensor, NormState};
    use num_complex::Complex64;

    fn raw(users: usize, ports: usize, subcarriers: usize, f: impl FnMut(usize, usize, usize) -> Complex64) -> ChannelTensor {
        ChannelTensor::from_fn(users, ports, subcarriers, 2.6e9, 50e6, ArrayKind::Generic, NormState::Raw, f).unwrap()
    }

    #[test]
    fn unit_magnitude_tensor_is_unchanged() {
        let t = raw(2, 3, 2, |k, m, l| {
            Complex64::from_polar(1.0, (k + 2 * m + 3 * l) as f64)
        });
        let n1 = normalize1(&t).unwrap();
        let n2 = normalize2(&t).unwrap();
        for (a, b) in t.coefficients().iter().zip(n1.coefficients()) {
            assert!((a - b).norm() < 1e-15);
        }
        for (a, b) in t.coefficients().iter().zip(n2.coefficients()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn norm1_removes_row_scale() {
        // user 1's row is user 0's row times 10 -> identical after normalize1
        let t = raw(2, 4, 3, |k, m, l| {
            let base = Complex64::new((m + l) as f64 + 0.5, (m as f64) - 1.0);
            if k == 0 {
                base
            } else {
                base * 10.0
            }
        });
        let n = normalize1(&t).unwrap();
        for m in 0..4 {
            for l in 0..3 {
                assert!((n.coeff(0, m, l) - n.coeff(1, m, l)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn norm1_direct_evaluation() {
        // K=1, A=2, N=1, row (1, j): energy 2 = A*N -> unchanged
        let t = raw(1, 2, 1, |_, m, _| {
            if m == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 1.0)
            }
        });
        let n = normalize1(&t).unwrap();
        assert!((n.coeff(0, 0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((n.coeff(0, 1, 0) - Complex64::new(0.0, 1.0)).norm() < 1e-15);

        // row (2, 0): energy 4, scale sqrt(2/4) -> (sqrt 2, 0)
        let t = raw(1, 2, 1, |_, m, _| {
            if m == 0 {
                Complex64::new(2.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let n = normalize1(&t).unwrap();
        assert!((n.coeff(0, 0, 0).re - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(n.coeff(0, 1, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn norm2_preserves_row_energy_ratios() {
        // rows with energies 1 and 3 keep ratio 1:3
        let t = raw(2, 2, 1, |k, m, _| {
            if k == 0 {
                if m == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            } else if m == 0 {
                Complex64::new(3f64.sqrt(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let n = normalize2(&t).unwrap();
        let e0 = n.user_energy(0);
        let e1 = n.user_energy(1);
        assert!((e1 / e0 - 3.0).abs() < 1e-12);
        assert!((global_mean_energy(&n) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let zero_row = raw(2, 2, 1, |k, _, _| {
            if k == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        assert!(matches!(
            normalize1(&zero_row),
            Err(Error::DegenerateUser(1))
        ));
        let all_zero = raw(1, 2, 1, |_, _, _| Complex64::new(0.0, 0.0));
        assert!(matches!(normalize2(&all_zero), Err(Error::DegenerateChannel)));
    }

    #[test]
    fn normalizing_twice_is_rejected() {
        let t = raw(1, 2, 1, |_, _, _| Complex64::new(1.0, 1.0));
        let n = normalize1(&t).unwrap();
        assert!(matches!(normalize1(&n), Err(Error::AlreadyNormalized(_))));
        assert!(matches!(normalize2(&n), Err(Error::AlreadyNormalized(_))));
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;
        use rand::{Rng, SeedableRng};

        fn random_raw(seed: u64, users: usize, ports: usize, subcarriers: usize) -> ChannelTensor {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            ChannelTensor::from_fn(
                users,
                ports,
                subcarriers,
                2.6e9,
                50e6,
                ArrayKind::Generic,
                NormState::Raw,
                |_, _, _| Complex64::new(rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0),
            )
            .unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn mean_energies_hit_one(
                seed in any::<u64>(),
                users in 1usize..5,
                ports in 1usize..9,
                subcarriers in 1usize..6,
            ) {
                let t = random_raw(seed, users, ports, subcarriers);
                let n1 = normalize1(&t).unwrap();
                for k in 0..users {
                    prop_assert!((user_mean_energy(&n1, k) - 1.0).abs() < 1e-9);
                }
                let n2 = normalize2(&t).unwrap();
                prop_assert!((global_mean_energy(&n2) - 1.0).abs() < 1e-9);
            }

            #[test]
            fn norm1_only_rescales_rows(
                seed in any::<u64>(),
                users in 1usize..4,
                ports in 2usize..6,
            ) {
                // ratios of coefficients within a user row are unchanged
                let t = random_raw(seed, users, ports, 2);
                let n = normalize1(&t).unwrap();
                for k in 0..users {
                    let r = n.coeff(k, 0, 0) / t.coeff(k, 0, 0);
                    prop_assert!(r.im.abs() < 1e-12 && r.re > 0.0);
                    for m in 0..ports {
                        for l in 0..2 {
                            let rr = n.coeff(k, m, l) / t.coeff(k, m, l);
                            if rr.re.is_finite() && t.coeff(k, m, l).norm() > 1e-6 {
                                prop_assert!((rr - r).norm() < 1e-9 * (1.0 + r.norm()));
                            }
                        }
                    }
                }
            }

            #[test]
            fn norm2_commutes_with_global_scale(
                seed in any::<u64>(),
                scale in prop::sample::select(vec![0.001f64, 0.5, 3.0, 1e4]),
            ) {
                let t = random_raw(seed, 2, 4, 3);
                let scaled = ChannelTensor::from_fn(
                    2, 4, 3, 2.6e9, 50e6, ArrayKind::Generic, NormState::Raw,
                    |k, m, l| t.coeff(k, m, l) * scale,
                ).unwrap();
                let a = normalize2(&t).unwrap();
                let b = normalize2(&scaled).unwrap();
                for (x, y) in a.coefficients().iter().zip(b.coefficients()) {
                    prop_assert!((x - y).norm() < 1e-9 * (1.0 + x.norm()));
                }
            }
        }
    }
}
