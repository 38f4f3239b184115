//! Fixtures shared by the benchmarks.

use kernelcal::synthetic::{gen_calibrated, LocationScheme};
use kernelcal::{Dataset, KernelSpec, Prediction, Target, TestLocations};

/// Calibrated Gaussian predictions of dimension `d`.
pub fn gaussian_dataset(d: usize, n: usize) -> Dataset {
    gen_calibrated(d, n, 0).expect("valid scenario")
}

/// Two-component univariate normal mixtures with targets at their means.
pub fn mixture_dataset(n: usize) -> Dataset {
    let pairs = (0..n)
        .map(|i| {
            let m = i as f64 / n as f64;
            let components = vec![
                Prediction::normal(m, 0.01).unwrap(),
                Prediction::normal(m + 0.5, 0.04).unwrap(),
            ];
            let p = Prediction::mixture(vec![0.3, 0.7], components).unwrap();
            (p, Target::Reals(vec![m + 0.35]))
        })
        .collect();
    Dataset::new(pairs).expect("homogeneous mixtures")
}

pub fn locations(d: usize) -> TestLocations {
    LocationScheme::default().generate(d, 0).expect("valid scheme")
}

pub fn kernel() -> KernelSpec {
    KernelSpec::default()
}
