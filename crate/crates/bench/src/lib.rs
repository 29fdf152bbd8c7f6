//! Shared fixtures for the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thermodev::curves::CurveFamily;
use thermodev::model::{EcoModel, ModelSpec};
use thermodev::obs::ObsFamily;
use thermodev::simulate::simulate_dataset;

/// A Briere model with inverse-gamma noise on `n_per_temp` simulated
/// observations at six temperatures.
pub fn briere_fixture(n_per_temp: usize) -> EcoModel {
    let spec = ModelSpec::new(CurveFamily::Briere, ObsFamily::InverseGamma);
    let truth = [-(1e-4f64).ln(), 9.0, 35.0, 10.0];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = simulate_dataset(&spec, &truth, &[12.0, 16.0, 20.0, 24.0, 28.0, 32.0], n_per_temp, &mut rng).expect("simulation");
    EcoModel::new(spec, data).expect("model")
}
