#![no_main]

use default_prior::eb::{fit_marginal, ingest, parse_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(records) = parse_csv(data) else { return };
    let outcome = ingest(&records);
    assert_eq!(outcome.dataset.n_records() + outcome.dropped.len(), records.len());
    if let Ok(fit) = fit_marginal(&outcome.dataset) {
        assert!(fit.phi.is_finite());
        assert!(fit.sqrt_phi >= 0.0);
    }
});
