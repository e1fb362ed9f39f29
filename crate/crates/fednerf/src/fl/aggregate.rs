//! Sample-count-weighted parameter aggregation.

use crate::error::{Error, Result};
use crate::fl::round::ClientUpdate;
use crate::nerf::ModelParams;

/// Weighted mean of the updates' parameter vectors, weight = `num_samples`.
/// Updates are summed in ascending device-id order, so the result is exactly
/// invariant to the input list order.
pub fn aggregate(updates: &[ClientUpdate]) -> Result<ModelParams> {
    if updates.is_empty() {
        return Err(Error::Contract("aggregate needs at least one update".into()));
    }
    let dims = &updates[0].params.layer_dims;
    let len = updates[0].params.values.len();
    let round = updates[0].round;
    for u in updates {
        if u.params.layer_dims != *dims || u.params.values.len() != len {
            return Err(Error::Contract(format!(
                "update from device {} has mismatched parameter dimensions",
                u.device_id
            )));
        }
        if u.round != round {
            return Err(Error::Contract(format!(
                "update from device {} answers round {}, expected {round}",
                u.device_id, u.round
            )));
        }
        if u.num_samples == 0 {
            return Err(Error::Contract(format!(
                "update from device {} carries zero samples",
                u.device_id
            )));
        }
    }

    let mut order: Vec<usize> = (0..updates.len()).collect();
    order.sort_by_key(|&i| updates[i].device_id);

    let total: f64 = updates.iter().map(|u| u.num_samples as f64).sum();
    let mut values = vec![0.0f64; len];
    for &i in &order {
        let w = updates[i].num_samples as f64;
        for (acc, &p) in values.iter_mut().zip(&updates[i].params.values) {
            *acc += w * p;
        }
    }
    for v in &mut values {
        *v /= total;
    }
    Ok(ModelParams {
        layer_dims: dims.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{rssi_to_quality, ChannelReport, RssiSample};
    use crate::fl::DeviceId;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn update(id: u32, num_samples: u32, values: Vec<f64>) -> ClientUpdate {
        ClientUpdate {
            device_id: DeviceId(id),
            round: 1,
            num_samples,
            params: ModelParams {
                layer_dims: vec![(values.len() - 1, 1)],
                values,
            },
            report: ChannelReport {
                device_id: DeviceId(id),
                rssi: RssiSample(50),
                z: rssi_to_quality(RssiSample(50)),
                rate: 100.0,
            },
        }
    }

    #[test]
    fn single_update_is_identity() {
        let u = update(1, 10, vec![1.5, -2.0, 0.25]);
        assert_eq!(aggregate(&[u.clone()]).unwrap().values, u.params.values);
    }

    #[test]
    fn weighted_two_point_example() {
        let updates = vec![update(1, 1, vec![2.0, 2.0]), update(2, 3, vec![6.0, 6.0])];
        assert_eq!(aggregate(&updates).unwrap().values, vec![5.0, 5.0]);
    }

    /// Kahan-compensated weighted mean in the same id order.
    fn oracle(updates: &[ClientUpdate]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..updates.len()).collect();
        order.sort_by_key(|&i| updates[i].device_id);
        let total: f64 = updates.iter().map(|u| u.num_samples as f64).sum();
        let len = updates[0].params.values.len();
        let mut acc = vec![0.0f64; len];
        let mut comp = vec![0.0f64; len];
        for &i in &order {
            let w = updates[i].num_samples as f64 / total;
            for j in 0..len {
                let y = w * updates[i].params.values[j] - comp[j];
                let t = acc[j] + y;
                comp[j] = (t - acc[j]) - y;
                acc[j] = t;
            }
        }
        acc
    }

    #[test]
    fn matches_compensated_oracle_and_ignores_input_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let n = rng.gen_range(2..6usize);
            let len = rng.gen_range(1..40usize) + 1;
            let mut updates: Vec<ClientUpdate> = (0..n)
                .map(|i| {
                    update(
                        i as u32 + 1,
                        rng.gen_range(1..5000),
                        (0..len).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                    )
                })
                .collect();
            let sorted = aggregate(&updates).unwrap();
            let expect = oracle(&updates);
            for (got, want) in sorted.values.iter().zip(&expect) {
                assert!((got - want).abs() < 1e-6);
            }
            updates.reverse();
            let reversed = aggregate(&updates).unwrap();
            assert_eq!(sorted.values, reversed.values);
        }
    }

    #[test]
    fn equal_weights_reduce_to_the_mean() {
        let updates = vec![
            update(1, 7, vec![1.0, 4.0]),
            update(2, 7, vec![2.0, 5.0]),
            update(3, 7, vec![3.0, 6.0]),
        ];
        let got = aggregate(&updates).unwrap();
        for (g, e) in got.values.iter().zip([2.0, 5.0]) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_empty_and_mismatched_updates() {
        assert!(aggregate(&[]).is_err());
        let updates = vec![update(1, 1, vec![1.0, 2.0]), update(2, 1, vec![1.0])];
        assert!(aggregate(&updates).is_err());
        let mut wrong_round = vec![update(1, 1, vec![1.0]), update(2, 1, vec![2.0])];
        wrong_round[1].round = 9;
        assert!(aggregate(&wrong_round).is_err());
    }
}
