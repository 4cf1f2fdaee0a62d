//! Runs the acceptance criteria; exits non-zero when any fails.

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let failed = soh_validation::run_all(dir.path());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
