//! Writes a model file, loads it back, certifies stability at one dwell
//! pair, saves the certificate, and re-verifies it from disk.
//!
//! ```bash
//! cargo run -p switchstab --example certificate_export -- /tmp/certs
//! ```

use std::path::PathBuf;

use switchstab::stability::{check_stochastic_stability, verify_certificate, StabilityCertificate, StabilityOptions};
use switchstab::{fixtures, load_system, save_system};

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().display().to_string()));
    std::fs::create_dir_all(&dir).expect("output directory");

    let model_path = dir.join("case1.json");
    save_system(&fixtures::case(1).with_dwell(&[3.0, 3.0]), &model_path).expect("writable");
    let sys = load_system(&model_path).expect("readable").validate().expect("valid");

    let verdict = check_stochastic_stability(&sys);
    let cert = verdict.certificate().expect("stable at d = (3, 3)");
    let cert_path = dir.join("case1-cert.json");
    cert.save(&cert_path).expect("writable");
    println!("model: {}", model_path.display());
    println!("certificate: {} (margin {:.6e})", cert_path.display(), cert.margin);

    let loaded = StabilityCertificate::load(&cert_path).expect("readable");
    let margin = verify_certificate(&sys, &loaded).expect("dimensions match");
    let pd = loaded.all_positive_definite(&StabilityOptions::default());
    println!("re-verified: margin {margin:.6e}, positive definite {pd}");

    let other = sys.with_dwell(&[0.2, 0.6]).expect("valid");
    let elsewhere = verify_certificate(&other, &loaded).expect("dimensions match");
    println!("same matrices at d = (0.2, 0.6): margin {elsewhere:.6e} (not a certificate there)");
}
